"""Why accumulating traces are fragile at large step-sizes.

A single self-looping state pays reward 1 on exit, gamma = lambda = 1.
Over an episode of length T, accumulating TD applies an effective
per-episode step of T*alpha, which exceeds the stable range as soon as
T*alpha > 2. The online-equivalent update applies 1-(1-alpha)^T instead,
which never leaves [0, 1] for alpha <= 1.
"""

from tdlab.figures import one_state_step_size_curve

header, rows = one_state_step_size_curve(
    alphas=tuple(i / 10 for i in range(1, 21)), episodes=10, runs=200, seed=3
)

print("RMS error of the state value at episode ends, first 10 episodes\n")
print(f"{'alpha':>6} {'accumulate':>14} {'true online':>12}")
for alpha, accumulate, true_online in rows:
    note = ""
    if accumulate > 10:
        note = "  <- diverged"
    print(f"{alpha:>6.2f} {accumulate:>14.4g} {true_online:>12.4f}{note}")

best_acc = min(rows, key=lambda r: r[1])
best_to = min(rows, key=lambda r: r[2])
print(f"\nbest step-size: accumulate {best_acc[0]:.2f} (error {best_acc[1]:.3f}), "
      f"true online {best_to[0]:.2f} (error {best_to[2]:.3f})")
