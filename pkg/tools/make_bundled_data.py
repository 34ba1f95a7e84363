"""Regenerate the bundled CSV datasets under src/gbftsvm/data/.

The files are committed; this script documents how they were made and lets
anyone rebuild them bit-for-bit. scikit-learn is needed only here (for the
two-moons generator and the wine measurements), not by the package.

    python3 tools/make_bundled_data.py
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from sklearn.datasets import load_wine, make_moons

OUT = Path(__file__).resolve().parents[1] / "src" / "gbftsvm" / "data"


def fourclass_synth(seed: int = 2024, n: int = 682, island_scale: float = 1.6):
    """Two-feature stand-in for the fourclass benchmark.

    Uniform points on [0, 200]^2 split by a wavy diagonal, with two small
    elliptical islands whose labels are flipped. The islands make the problem
    non-linear; their size sets how well a single linear twin SVM can do.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, 2))
    x, y = X[:, 0], X[:, 1]
    above = y > 0.22 + 0.55 * x + 0.08 * np.sin(9 * x)
    s = island_scale
    island1 = (x - 0.78) ** 2 / (0.012 * s) + (y - 0.2) ** 2 / (0.009 * s) < 1
    island2 = (x - 0.2) ** 2 / (0.01 * s) + (y - 0.8) ** 2 / (0.012 * s) < 1
    lab = np.where(island1 | island2, ~above, above)
    return X * 200.0, np.where(lab, 1, -1), ["x1", "x2"]


def two_moons(seed: int = 7, n: int = 300):
    X, y = make_moons(n_samples=n, noise=0.25, random_state=seed)
    return X, np.where(y == 1, 1, -1), ["x1", "x2"]


def wine_binary():
    """UCI wine, cultivar 0 against the other two."""
    bunch = load_wine()
    return bunch.data, np.where(bunch.target == 0, 1, -1), list(bunch.feature_names)


def write(name, X, y, names):
    path = OUT / f"{name}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ["label"])
        for row, lab in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])
    print(f"{path}: {len(y)} rows, {int((y == 1).sum())} positive")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    write("fourclass_synth", *fourclass_synth())
    write("two_moons", *two_moons())
    write("wine_binary", *wine_binary())


if __name__ == "__main__":
    main()
