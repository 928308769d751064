"""What replacing traces give up.

Two states sharing one always-active feature, true values (2, 0): the
best single weight is 1, with RMS error 1. Because the feature never
switches off, the replacing trace erases all multi-step credit, so
replace TD(lambda) converges to the one-step TD(0) fixed point no matter
the lambda. Accumulating and dutch traces reach the least-squares error
as lambda approaches 1.
"""

from tdlab.figures import two_state_asymptote_curves

header, rows = two_state_asymptote_curves(
    lambdas=(0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 1.0), alpha=0.01
)

print("asymptotic RMS error at alpha = 0.01 (least-squares floor: 1.0)\n")
print(f"{'lambda':>7} {'accumulate':>11} {'replace':>9} {'true online':>12}")
for lam, accumulate, replace, true_online in rows:
    print(f"{lam:>7.2f} {accumulate:>11.4f} {replace:>9.4f} {true_online:>12.4f}")

print("\nreplace is pinned to the TD(0) value across the whole row;"
      "\nthe other two glide down to the least-squares error at lambda = 1.")
