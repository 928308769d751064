"""Sparse binary features for continuous signals.

Eight overlapping tilings of ten bins per signal plus a bias unit give
nine active features per observation, hashed into a fixed-size table.
Nearby inputs share most of their active features, which is where the
generalization comes from.
"""

import numpy as np

from tdlab import TileCoderConfig, dot, tile_code

config = TileCoderConfig(
    num_tilings=8,
    bins_per_signal=10,
    signal_ranges=((0.0, 1.0), (0.0, 1.0)),
    hash_size=4096,
    bias_unit=True,
)

a = tile_code([0.52, 0.30], config)
print(f"feature space: {config.n} entries, {a.indices.shape[0]} active per observation")
print("active indices:", sorted(a.indices.tolist()))

for delta in (0.002, 0.02, 0.1, 0.4):
    b = tile_code([0.52 + delta, 0.30], config)
    shared = len(set(a.indices.tolist()) & set(b.indices.tolist()))
    print(f"shift first signal by {delta:>5}: {shared}/9 active features shared")

# a linear value estimate is just a sum of the active weights
rng = np.random.default_rng(0)
weights = rng.normal(size=config.n)
dense = a.to_dense()
print(f"\nsparse and dense evaluations agree: "
      f"{dot(weights, a):.6f} vs {float(weights @ dense):.6f}")
