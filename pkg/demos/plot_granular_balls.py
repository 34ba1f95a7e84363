"""
Granular balls and Pythagorean fuzzy scores
===========================================

A granular ball summarises a group of nearby samples by a center, a radius, a
majority label and a purity. This walk-through builds the balls for the bundled
two-moons set, looks at how they split into a positive region (pure balls) and a
boundary region (mixed balls), and shows how each ball is scored.
"""

# %%
# Load and normalise the data
# ---------------------------
# Features are min-max scaled to [0, 1], the same preprocessing the benchmark uses.
import numpy as np

from gbftsvm import GenerationConfig, Region, generate_balls, load_bundled, normalize_min_max
from gbftsvm.scoring import class_geometry, score_family

ds = normalize_min_max(load_bundled("two_moons"))
print(f"{ds.n} samples, {ds.d} features, {np.sum(ds.labels == 1)} positive")

# %%
# Split the data into balls
# -------------------------
# Balls are split by 2-means until each is pure enough (purity >= T0). With the
# default T0 = 1 the only impure balls left are ones that cannot be split further.
fam = generate_balls(ds, GenerationConfig(seed=0))
sizes = np.array([b.size for b in fam.balls])
print(f"{len(fam)} balls, sizes from {sizes.min()} to {sizes.max()}, "
      f"compression {ds.n / len(fam):.1f} points per ball")

# A looser threshold gives fewer, coarser balls.
for t0 in (1.0, 0.9, 0.8):
    f = generate_balls(ds, GenerationConfig(initial_purity=t0, seed=0))
    mixed = sum(b.region is Region.BOUNDARY for b in f.balls)
    print(f"T0={t0}: {len(f)} balls, {mixed} in the boundary region")

# %%
# Score the balls
# ---------------
# Each ball gets a membership mu that falls with its distance from its class
# center. Pure balls keep mu as their score. Mixed balls also get a
# non-membership nu from their impurity, and are scored by the closeness
# theta(mu, nu) instead. T0 = 1 leaves no mixed balls here, so score a looser family.
fam = generate_balls(ds, GenerationConfig(initial_purity=0.85, seed=0))
geo = class_geometry(fam)
print(f"class radii: +1 {geo.radius_pos:.3f}, -1 {geo.radius_neg:.3f}")

scores = score_family(fam)
for region in (Region.POSITIVE, Region.BOUNDARY):
    s = np.array([sc.score for sc in scores if sc.region is region])
    if len(s):
        print(f"{region.name.lower():9s} balls: {len(s):3d}, score mean {s.mean():.3f}, "
              f"min {s.min():.3f}")

# %%
# A ball far from its class center can have mu near 0; mu is floored at 1e-6 so
# that every ball keeps a positive weight.
# Every score satisfies the Pythagorean constraint mu^2 + nu^2 <= 1.
worst = max(sc.mu ** 2 + sc.nu ** 2 for sc in scores)
print(f"largest mu^2 + nu^2 = {worst:.6f}")
