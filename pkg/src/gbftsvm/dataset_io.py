"""Loading, scaling, fold assignment and label-noise injection for binary datasets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyDataset, InvalidFoldCount, LabelError, ParseError

_MISSING = {"", "?", "na", "nan", "null", "none"}

BUNDLED = ("fourclass_synth", "two_moons", "wine_binary")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with labels in {+1, -1}."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] | None = None
    source_id: str = ""

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if X.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if y.shape != (X.shape[0],):
            raise ValueError("labels must be a vector with one entry per row")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or Inf")
        if not np.all(np.isin(y, (-1, 1))):
            raise LabelError("labels must be +1 or -1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(self, features=self.features[idx], labels=self.labels[idx])

    def with_labels(self, labels) -> "Dataset":
        return replace(self, labels=np.asarray(labels, dtype=int))


@dataclass(frozen=True)
class FoldPlan:
    fold_assignments: np.ndarray
    k: int
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_assignments != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_assignments, minlength=self.k)


@dataclass(frozen=True)
class NoiseSpec:
    rate: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate < 0.5:
            raise ValueError(f"noise rate must lie in [0, 0.5), got {self.rate}")


# --------------------------------------------------------------------- parsing


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _default_positive(raw_labels: Sequence[str]):
    a, b = sorted(set(raw_labels))
    if _is_number(a) and _is_number(b):
        return a if float(a) > float(b) else b
    return b


def _map_labels(raw, positive_label):
    distinct = sorted(set(raw))
    if len(distinct) != 2:
        raise LabelError(
            f"expected exactly 2 distinct labels, found {len(distinct)}: {distinct[:5]}"
        )
    if positive_label is None:
        positive_label = _default_positive(distinct)
    positive_label = str(positive_label)
    if positive_label not in distinct:
        # allow numeric spellings such as "1" vs "+1" vs "1.0"
        matches = [v for v in distinct if _is_number(v) and _is_number(positive_label)
                   and float(v) == float(positive_label)]
        if not matches:
            raise LabelError(f"positive label {positive_label!r} not among {distinct}")
        positive_label = matches[0]
    return np.where(np.asarray(raw) == positive_label, 1, -1)


def _read_csv(path: Path, label_column):
    if isinstance(label_column, str) and label_column.lstrip("-").isdigit():
        label_column = int(label_column)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            rows.append((lineno, [c.strip() for c in row]))
    if not rows:
        raise EmptyDataset(f"{path} contains no rows")

    header = None
    first = rows[0][1]
    if not all(_is_number(c) for i, c in enumerate(first) if not _is_label_pos(i, label_column, first)):
        header = first
        rows = rows[1:]
    if not rows:
        raise EmptyDataset(f"{path} contains a header but no data rows")

    width = len(rows[0][1])
    if header is not None and len(header) != width:
        raise ParseError(f"header has {len(header)} fields, data has {width}", rows[0][0])
    li = _label_index(label_column, header, width)

    X = np.empty((len(rows), width - 1))
    raw = []
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", lineno)
        vals = row[:li] + row[li + 1:]
        for j, tok in enumerate(vals):
            if tok.lower() in _MISSING:
                raise ParseError(f"missing value in column {j}", lineno)
            try:
                X[r, j] = float(tok)
            except ValueError:
                raise ParseError(f"non-numeric value {tok!r}", lineno) from None
            if not math.isfinite(X[r, j]):
                raise ParseError(f"non-finite value {tok!r}", lineno)
        if row[li].lower() in _MISSING:
            raise ParseError("missing label", lineno)
        raw.append(row[li])
    names = None
    if header is not None:
        names = tuple(h for i, h in enumerate(header) if i != li)
    return X, raw, names, rows[0][0]


def _is_label_pos(i, label_column, row):
    if isinstance(label_column, int):
        return i == (label_column % len(row))
    return False


def _label_index(label_column, header, width):
    if isinstance(label_column, str):
        if label_column.lstrip("-").isdigit():
            label_column = int(label_column)
        elif header is None:
            raise ParseError(f"label column {label_column!r} given by name but file has no header")
        elif label_column not in header:
            raise ParseError(f"label column {label_column!r} not in header {header}")
        else:
            return header.index(label_column)
    if not -width <= label_column < width:
        raise ParseError(f"label column index {label_column} out of range for {width} columns")
    return label_column % width


def _read_sparse(path: Path, n_features=None):
    raw, entries = [], []
    d = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            row = {}
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise ParseError(f"malformed pair {tok!r}", lineno)
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise ParseError(f"malformed pair {tok!r}", lineno) from None
                if j < 1:
                    raise ParseError(f"feature indices are 1-based, got {j}", lineno)
                if not math.isfinite(v):
                    raise ParseError(f"non-finite value {val!r}", lineno)
                row[j - 1] = v
                d = max(d, j)
            raw.append(tokens[0])
            entries.append(row)
    if not raw:
        raise EmptyDataset(f"{path} contains no rows")
    if n_features is not None:
        if n_features < d:
            raise ParseError(f"file uses feature index {d} > n_features={n_features}")
        d = n_features
    X = np.zeros((len(raw), d))
    for i, row in enumerate(entries):
        for j, v in row.items():
            X[i, j] = v
    return X, raw


def load_dataset(path, format="csv", label_column=-1, positive_label=None,
                 n_features=None) -> Dataset:
    """Read a binary classification dataset.

    Parameters
    ----------
    path : str or Path
    format : {"csv", "sparse"}
        ``csv`` is comma separated with an optional header row (detected when
        the first row is non-numeric). ``sparse`` is the ``<label> idx:val``
        layout with 1-based indices.
    label_column : int or str
        Column holding the class (csv only). Negative indices count from the end.
    positive_label : optional
        Raw value mapped to +1. Defaults to the larger raw label (numeric
        comparison when both labels are numbers, lexicographic otherwise).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "csv":
        X, raw, names, _ = _read_csv(path, label_column)
    elif format in ("sparse", "sparse-index-value", "libsvm"):
        X, raw = _read_sparse(path, n_features)
        names = None
    else:
        raise ValueError(f"unknown format {format!r}")
    if X.shape[0] == 0:
        raise EmptyDataset(str(path))
    y = _map_labels(raw, positive_label)
    return Dataset(X, y, names, path.stem)


def load_features(path) -> np.ndarray:
    """Read an unlabeled numeric CSV (optional header) as an ``(n, d)`` matrix.

    Unlike :func:`load_dataset` a file without data rows is allowed and gives
    an empty ``(0, 0)`` matrix (or ``(0, d)`` when a header fixes ``d``).
    """
    path = Path(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            rows.append((lineno, [c.strip() for c in row]))
    width = len(rows[0][1]) if rows else 0
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    X = np.empty((len(rows), width))
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", lineno)
        for j, tok in enumerate(row):
            if tok.lower() in _MISSING:
                raise ParseError(f"missing value in column {j}", lineno)
            try:
                X[r, j] = float(tok)
            except ValueError:
                raise ParseError(f"non-numeric value {tok!r}", lineno) from None
            if not math.isfinite(X[r, j]):
                raise ParseError(f"non-finite value {tok!r}", lineno)
    return X


def load_bundled(name: str) -> Dataset:
    """Load one of the small datasets shipped with the package (see ``BUNDLED``)."""
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled dataset {name!r}; choose from {BUNDLED}")
    ref = resources.files("gbftsvm") / "data" / f"{name}.csv"
    with resources.as_file(ref) as p:
        ds = load_dataset(p, "csv", label_column="label", positive_label="1")
    return replace(ds, source_id=name)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("gbftsvm") / "data" / f"{name}.csv"))


# ---------------------------------------------------------------- transforms


def min_max_params(X) -> tuple[np.ndarray, np.ndarray]:
    """Column minima and spans; a zero span marks a constant column."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise EmptyDataset("cannot normalise an empty dataset")
    lo = X.min(axis=0)
    return lo, X.max(axis=0) - lo


def apply_min_max(X, lo, span) -> np.ndarray:
    """Map columns with ``(x - lo) / span``; constant columns become zero."""
    X = np.asarray(X, dtype=float)
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (X - lo) / safe, 0.0)


def normalize_min_max(ds: Dataset) -> Dataset:
    """Rescale every column to [0, 1]; constant columns become zero."""
    if ds.n == 0:
        raise EmptyDataset("cannot normalise an empty dataset")
    Z = apply_min_max(ds.features, *min_max_params(ds.features))
    # guard against 1 + ulp after division
    np.clip(Z, 0.0, 1.0, out=Z)
    return replace(ds, features=Z)


def make_folds(n: int, k: int, seed: int = 0, labels=None) -> FoldPlan:
    """Shuffle ``n`` rows into ``k`` folds whose sizes differ by at most one.

    Passing ``labels`` produces stratified folds: rows are grouped by class
    before being dealt round-robin, so each class is spread evenly.
    """
    if k < 2 or n < k:
        raise InvalidFoldCount(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    if labels is None:
        order = rng.permutation(n)
    else:
        labels = np.asarray(labels)
        order = np.concatenate(
            [rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)]
        )
    assign = np.empty(n, dtype=int)
    assign[order] = np.arange(n) % k
    assign.setflags(write=False)
    return FoldPlan(assign, k, seed)


def noise_count(rate: float, n: int) -> int:
    # round half up
    return int(math.floor(rate * n + 0.5))


def inject_label_noise(ds: Dataset, spec: NoiseSpec) -> Dataset:
    """Return a copy with ``round(rate * n)`` labels negated at random distinct rows."""
    count = noise_count(spec.rate, ds.n)
    if count == 0:
        return ds
    rng = np.random.default_rng(spec.seed)
    idx = rng.choice(ds.n, size=count, replace=False)
    y = ds.labels.copy()
    y[idx] = -y[idx]
    return ds.with_labels(y)


# ------------------------------------------------------------- serialisation


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset_csv(ds: Dataset, path, seed: int = 0, rate: float = 0.0) -> None:
    """Write ``ds`` as CSV with a ``# seed=.. rate=..`` metadata comment."""
    names = ds.feature_names or tuple(f"x{j + 1}" for j in range(ds.d))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# seed={int(seed)} rate={_fmt(rate)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "label"])
        for row, lab in zip(ds.features, ds.labels):
            w.writerow([*(_fmt(v) for v in row), int(lab)])


def read_metadata(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if not first.startswith("#"):
        return {}
    out = {}
    for tok in first.lstrip("#").split():
        key, _, val = tok.partition("=")
        out[key] = val
    return out


def write_fold_plan(plan: FoldPlan, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# seed={int(plan.seed)} rate={_fmt(0.0)}\n")
        fh.write("index,fold\n")
        for i, f in enumerate(plan.fold_assignments):
            fh.write(f"{i},{int(f)}\n")


def read_fold_plan(path) -> FoldPlan:
    meta = read_metadata(path)
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, dtype=int, ndmin=2)
    assign = np.empty(len(data), dtype=int)
    assign[data[:, 0]] = data[:, 1]
    assign.setflags(write=False)
    return FoldPlan(assign, int(assign.max()) + 1, int(meta.get("seed", 0)))
