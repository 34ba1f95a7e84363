"""
Label noise and ranking classifiers across datasets
===================================================

Two parts of the evaluation harness: a label-noise sweep, and the Friedman test
with the Nemenyi critical difference, used to rank several classifiers over many
datasets.
"""

# %%
# Label-noise sweep
# -----------------
# Noise flips a fraction of the training labels in each fold; test labels stay
# clean. Each seed also reseeds ball generation, so the spread across seeds
# covers both sources of randomness.
import numpy as np

from gbftsvm import (GenerationConfig, friedman_test, load_bundled, make_folds, nemenyi_cd,
                     noise_sweep, normalize_min_max)
from gbftsvm.dataset_io import bundled_path
from gbftsvm.evaluation import read_acc_matrix

ds = normalize_min_max(load_bundled("two_moons"))
folds = make_folds(ds.n, 10, seed=0)
rows = noise_sweep(ds, ["gbtwsvm", "gbftsvm"], [0.0, 0.05, 0.1], [0, 1, 2],
                   GenerationConfig(), folds)
for method in ("gbtwsvm", "gbftsvm"):
    for rate in (0.0, 0.05, 0.1):
        acc = [r.report.accuracy for r in rows if r.method == method and r.rate == rate]
        print(f"{method:8s} noise {rate:4.2f}: acc {np.mean(acc):.3f} "
              f"(seeds {', '.join(f'{a:.3f}' for a in acc)})")

# %%
# Friedman test on a published accuracy table
# --------------------------------------------
# The bundled matrix holds accuracies of seven classifiers on twenty datasets.
# Ranks are taken per dataset (1 = best, ties averaged) and averaged per model.
A, models, names = read_acc_matrix(bundled_path("table3_accuracy"))
rep = friedman_test(A, q_alpha=2.949, models=models)
print(f"chi2_F = {rep.chi2_F:.2f}, F_F = {rep.F_F:.2f}, dof = {rep.dof}")
for m, r in sorted(zip(models, rep.avg_ranks), key=lambda t: t[1]):
    print(f"  {m:8s} average rank {r:.3f}")

# %%
# Nemenyi critical difference
# ---------------------------
# Two models differ significantly when their average ranks are further apart
# than CD = q_alpha * sqrt(M (M + 1) / (6 N)).
print(f"CD = {rep.CD:.4f} (direct: {nemenyi_cd(len(models), len(names), 2.949):.4f})")
best = int(np.argmin(rep.avg_ranks))
beaten = [models[j] for j in range(len(models)) if rep.pairwise_significant[best, j]]
print(f"{models[best]} is significantly better than: {', '.join(beaten)}")
