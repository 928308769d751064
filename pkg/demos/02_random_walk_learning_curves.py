"""Online vs offline updating on the left-drift random walk.

Ten states in a row, a terminal state on the left, every reward 1,
gamma = 1. The offline lambda-return algorithm can only update when an
episode ends, so its error is flat within episodes; the online replay
and the accumulating-trace learner move every step.
"""

from tdlab.figures import random_walk_learning_curves

header, rows = random_walk_learning_curves(alpha=0.2, lam=1.0, episodes=3, seed=1)

print("normalized RMS error over the ten states (lambda=1, alpha=0.2)\n")
print(f"{'step':>4} {'offline':>9} {'online':>9} {'accumulate':>11}")
boundaries = [t for (t, off, *_), (t2, off2, *_) in zip(rows, rows[1:]) if off != off2]
for t, offline, online, accumulate in rows:
    tag = "  <- episode end" if t in boundaries else ""
    print(f"{t:>4} {offline:>9.4f} {online:>9.4f} {accumulate:>11.4f}{tag}")

print("\nwithin an episode the offline column never moves; the online and"
      "\naccumulating columns track each other when alpha is this small.")
