"""Cross-validated benchmarking, penalty grid search, label-noise sweeps and
Friedman / Nemenyi rank statistics."""

from __future__ import annotations

import csv
import hashlib
import itertools
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .classifiers import METHODS, TrainConfig, predict_batch, train_gbftsvm, train_gbtwsvm, train_twsvm
from .dataset_io import Dataset, FoldPlan, NoiseSpec, inject_label_noise
from .errors import (DegenerateModel, EmptyInput, LengthMismatch, QPNotConverged, ShapeError,
                     SingleClassDataset, SingleClassFamily)
from .granular_ball import GenerationConfig, generate_balls
from .scoring import score_family

log = logging.getLogger(__name__)

DEFAULT_GRID = range(-5, 6)


# ------------------------------------------------------------------- metrics


def compute_metrics(y_true, y_pred):
    """Accuracy plus support-weighted precision and recall over both classes.

    A class that is never predicted contributes a precision of 0.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{y_true.shape} vs {y_pred.shape}")
    n = y_true.size
    if n == 0:
        raise EmptyInput("no labels to score")
    acc = float(np.mean(y_true == y_pred))
    prec = rec = 0.0
    for c in (1, -1):
        support = np.count_nonzero(y_true == c)
        if support == 0:
            continue
        tp = np.count_nonzero((y_true == c) & (y_pred == c))
        predicted = np.count_nonzero(y_pred == c)
        w = support / n
        prec += w * (tp / predicted if predicted else 0.0)
        rec += w * tp / support
    return acc, float(prec), float(rec)


@dataclass(frozen=True)
class FoldRecord:
    fold: int
    n_train: int
    n_test: int
    n_balls: int
    accuracy: float
    precision: float
    recall: float
    train_time_s: float
    predict_time_s: float
    skipped: str = ""
    failed: bool = False


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    acc_sd: float
    train_time_s: float
    predict_time_s: float
    per_fold: tuple[FoldRecord, ...] = ()

    @property
    def mean_balls(self) -> float:
        used = [r.n_balls for r in self.per_fold if not r.skipped]
        return float(np.mean(used)) if used else 0.0

    @property
    def failed(self) -> bool:
        return any(r.failed for r in self.per_fold)

    @classmethod
    def from_folds(cls, records) -> "MetricReport":
        """Aggregate fold records; a failed fold makes the accuracy NaN."""
        used = [r for r in records if not r.skipped]
        if not used or any(r.failed for r in records):
            nan = float("nan")
            return cls(nan, nan, nan, nan, 0.0, 0.0, tuple(records))
        acc = np.array([r.accuracy for r in used])
        return cls(
            float(acc.mean()),
            float(np.mean([r.precision for r in used])),
            float(np.mean([r.recall for r in used])),
            float(acc.std(ddof=1)) if len(acc) > 1 else 0.0,
            float(sum(r.train_time_s for r in used)),
            float(sum(r.predict_time_s for r in used)),
            tuple(records),
        )


# --------------------------------------------------------- cross-validation


def fold_seed(seed: int, fold: int) -> int:
    """Independent per-fold seed derived from a run seed and a fold index."""
    return int(np.random.SeedSequence([int(seed), int(fold)]).generate_state(1, np.uint64)[0])


@dataclass
class _Fold:
    index: int
    train: Dataset
    test: Dataset
    family: object = None
    scores: object = None
    gen_time: float = 0.0
    error: str = ""


def _prepare_folds(ds, method, gen_cfg, folds, noise, noise_all):
    gen_cfg = gen_cfg or GenerationConfig()
    base = ds
    if noise is not None and noise_all:
        base = inject_label_noise(ds, noise)
    prepared = []
    for f in range(folds.k):
        tr = base.subset(folds.train_indices(f))
        te = (base if noise_all else ds).subset(folds.test_indices(f))
        if noise is not None and not noise_all:
            tr = inject_label_noise(tr, NoiseSpec(noise.rate, fold_seed(noise.seed, f)))
        fd = _Fold(f, tr, te)
        if len(np.unique(tr.labels)) < 2:
            fd.error = "single-class training split"
        elif method != "twsvm":
            t0 = time.perf_counter()
            fd.family = generate_balls(tr, replace(gen_cfg, seed=fold_seed(gen_cfg.seed, f)))
            try:
                if method == "gbftsvm":
                    fd.scores = score_family(fd.family)
            except SingleClassFamily as exc:
                fd.error = str(exc)
            if len(np.unique(fd.family.labels)) < 2:
                fd.error = "single-class ball family"
            fd.gen_time = time.perf_counter() - t0
        prepared.append(fd)
    return prepared


def _skip(fd: _Fold, reason: str, failed: bool = False) -> FoldRecord:
    nan = float("nan")
    return FoldRecord(fd.index, fd.train.n, fd.test.n, 0, nan, nan, nan, 0.0, 0.0,
                      skipped=reason, failed=failed)


def _run_fold(fd: _Fold, method, cfg):
    if fd.error:
        return _skip(fd, fd.error)
    t0 = time.perf_counter()
    try:
        if method == "twsvm":
            model = train_twsvm(fd.train, cfg)
        elif method == "gbtwsvm":
            model = train_gbtwsvm(fd.family, cfg)
        else:
            model = train_gbftsvm(fd.family, fd.scores, cfg)
    except (SingleClassDataset, SingleClassFamily) as exc:
        return _skip(fd, str(exc))
    train_time = time.perf_counter() - t0 + fd.gen_time
    t0 = time.perf_counter()
    try:
        pred = predict_batch(model, fd.test.features)
    except DegenerateModel as exc:
        return _skip(fd, str(exc), failed=True)
    predict_time = time.perf_counter() - t0
    acc, prec, rec = compute_metrics(fd.test.labels, pred)
    m = len(fd.family) if fd.family is not None else fd.train.n
    return FoldRecord(fd.index, fd.train.n, fd.test.n, m, acc, prec, rec, train_time, predict_time)


def cross_validate(ds: Dataset, method: str, cfg: TrainConfig, gen_cfg: GenerationConfig | None,
                   folds: FoldPlan, noise: NoiseSpec | None = None,
                   noise_all: bool = False) -> MetricReport:
    """k-fold evaluation of one method at one penalty setting.

    Balls are generated from each training split only, with a seed derived
    from ``gen_cfg.seed`` and the fold index. Label noise, when given, is
    injected into the training split of each fold (or into the whole dataset
    before splitting when ``noise_all`` is set).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if len(folds.fold_assignments) != ds.n:
        raise ValueError("fold plan does not match dataset size")
    prepared = _prepare_folds(ds, method, gen_cfg, folds, noise, noise_all)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QPNotConverged)
        records = [_run_fold(fd, method, cfg) for fd in prepared]
    for r in records:
        if r.skipped:
            log.warning("fold %d %s: %s", r.fold, "failed" if r.failed else "skipped", r.skipped)
    return MetricReport.from_folds(records)


# -------------------------------------------------------------- grid search


@dataclass(frozen=True)
class GridResult:
    best_params: tuple[float, float]
    best_accuracy: float
    surface: dict = field(default_factory=dict)

    @property
    def best_report(self) -> MetricReport:
        return self.surface[self.best_params]


def grid_search(ds: Dataset, method: str, grid_exponents=DEFAULT_GRID,
                gen_cfg: GenerationConfig | None = None, folds: FoldPlan | None = None,
                base_cfg: TrainConfig | None = None, noise: NoiseSpec | None = None,
                n_jobs: int = 1) -> GridResult:
    """Evaluate every ``(2**i, 2**j)`` penalty pair with C3 = C1 and C4 = C2.

    Ball families are generated once per fold and shared by all grid points.
    Ties in accuracy go to the lexicographically smallest ``(C1, C2)``.
    """
    exps = list(grid_exponents)
    if not exps:
        raise ValueError("empty exponent range")
    if folds is None:
        raise ValueError("a fold plan is required")
    base_cfg = base_cfg or TrainConfig()
    prepared = _prepare_folds(ds, method, gen_cfg, folds, noise, False)
    points = [(2.0 ** i, 2.0 ** j) for i, j in itertools.product(exps, exps)]

    def run(point):
        c1, c2 = point
        cfg = replace(base_cfg, C1=c1, C2=c2, C3=c1, C4=c2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", QPNotConverged)
            return MetricReport.from_folds([_run_fold(fd, method, cfg) for fd in prepared])

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            reports = list(pool.map(run, points))
    else:
        reports = [run(p) for p in points]
    surface = dict(zip(points, reports))
    best = min(points, key=lambda p: (-np.nan_to_num(surface[p].accuracy, nan=-1.0), p))
    return GridResult(best, surface[best].accuracy, surface)


# -------------------------------------------------------------- noise sweep


@dataclass(frozen=True)
class NoiseRow:
    dataset: str
    method: str
    rate: float
    seed: int
    params: tuple[float, float]
    report: MetricReport


def noise_sweep(ds: Dataset, methods, rates, seeds, gen_cfg: GenerationConfig | None,
                folds: FoldPlan, params: dict | None = None,
                base_cfg: TrainConfig | None = None, noise_all: bool = False) -> list[NoiseRow]:
    """Cross-validate each method at each (rate, seed).

    ``params`` maps a method to its ``(C1, C2)``; methods missing from it use
    ``base_cfg``. The ball generation seed follows the noise seed so that
    repeated runs differ only through the injected noise and ball seeds.
    """
    for r in rates:
        if not 0.0 <= r < 0.5:
            raise ValueError(f"noise rate {r} outside [0, 0.5)")
    base_cfg = base_cfg or TrainConfig()
    gen_cfg = gen_cfg or GenerationConfig()
    params = params or {}
    rows = []
    for method in methods:
        c = params.get(method, (base_cfg.C1, base_cfg.C2))
        cfg = replace(base_cfg, C1=c[0], C2=c[1], C3=c[0], C4=c[1])
        for rate in rates:
            for seed in seeds:
                noise = NoiseSpec(rate, seed) if rate > 0 else None
                gen = replace(gen_cfg, seed=seed)
                rep = cross_validate(ds, method, cfg, gen, folds, noise, noise_all)
                rows.append(NoiseRow(ds.source_id, method, rate, seed, tuple(c), rep))
    return rows


# ------------------------------------------------------------ rank statistics


@dataclass(frozen=True)
class SignificanceReport:
    rank_matrix: np.ndarray
    avg_ranks: np.ndarray
    chi2_F: float
    F_F: float
    dof: tuple[int, int]
    CD: float
    pairwise_significant: np.ndarray
    q_alpha: float
    p_value_chi2: float
    p_value_F: float
    models: tuple[str, ...] = ()


def nemenyi_q(n_models: int, alpha: float = 0.05) -> float:
    """Two-tailed Nemenyi critical value: studentized range quantile over sqrt(2)."""
    return float(stats.studentized_range.ppf(1 - alpha, n_models, np.inf) / np.sqrt(2))


def nemenyi_cd(n_models: int, n_datasets: int, q_alpha: float) -> float:
    """Critical difference ``q_alpha * sqrt(M (M + 1) / (6 N))``."""
    if n_models < 2 or n_datasets < 1:
        raise ValueError("need at least 2 models and 1 dataset")
    return float(q_alpha * np.sqrt(n_models * (n_models + 1) / (6.0 * n_datasets)))


def friedman_from_ranks(avg_ranks, n_datasets: int):
    """Friedman chi-square and its F form from average ranks.

    Returns ``(chi2_F, F_F, (M - 1, (M - 1)(N - 1)))``.
    """
    R = np.asarray(avg_ranks, dtype=float)
    M, N = len(R), int(n_datasets)
    chi2 = 12.0 * N / (M * (M + 1)) * (np.sum(R ** 2) - M * (M + 1) ** 2 / 4.0)
    denom = N * (M - 1) - chi2
    F = (N - 1) * chi2 / denom if denom > 0 else float("inf")
    return float(chi2), float(F), (M - 1, (M - 1) * (N - 1))


def friedman_test(acc_matrix, q_alpha: float | None = None, alpha: float = 0.05,
                  models=None) -> SignificanceReport:
    """Friedman test plus Nemenyi post-hoc on an (N datasets x M models) matrix.

    Rank 1 is the highest accuracy in each row; ties share the average rank.
    When ``q_alpha`` is omitted it is computed for ``alpha`` and M models.
    """
    A = np.asarray(acc_matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] < 2 or A.shape[1] < 2:
        raise ShapeError(f"need at least a 2 x 2 matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ShapeError("accuracy matrix has missing or non-finite entries")
    N, M = A.shape
    ranks = np.vstack([stats.rankdata(-row, method="average") for row in A])
    avg = ranks.mean(axis=0)
    chi2, F, dof = friedman_from_ranks(avg, N)
    q = nemenyi_q(M, alpha) if q_alpha is None else float(q_alpha)
    cd = nemenyi_cd(M, N, q)
    diff = np.abs(avg[:, None] - avg[None, :])
    sig = diff > cd
    np.fill_diagonal(sig, False)
    p_chi = float(stats.chi2.sf(chi2, M - 1))
    p_F = float(stats.f.sf(F, *dof)) if np.isfinite(F) and dof[1] > 0 else 0.0
    names = tuple(models) if models is not None else tuple(f"model{j + 1}" for j in range(M))
    return SignificanceReport(ranks, avg, chi2, F, dof, cd, sig, q, p_chi, p_F, names)


def read_acc_matrix(path):
    """Read a CSV accuracy matrix: header ``dataset,<model>...``, one row per dataset."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise ShapeError(f"{path}: need a header and at least one row")
    header, body = rows[0], rows[1:]
    width = len(header)
    for k, r in enumerate(body, start=2):
        if len(r) != width:
            raise ShapeError(f"{path}: row {k} has {len(r)} fields, expected {width}")
    try:
        A = np.array([[float(v) for v in r[1:]] for r in body])
    except ValueError as exc:
        raise ShapeError(f"{path}: {exc}") from None
    return A, tuple(header[1:]), tuple(r[0] for r in body)


def write_cd_data(report: SignificanceReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "avg_rank", "cd"])
        for name, r in zip(report.models, report.avg_ranks):
            w.writerow([name, f"{r:.6f}", f"{report.CD:.6f}"])


# ------------------------------------------------------------------- output


REPORT_COLUMNS = ["dataset", "method", "noise", "seed", "C1", "C2", "acc", "acc_sd",
                  "prec", "rec", "mean_balls", "folds_used"]


def report_row(dataset, method, noise, seed, params, rep: MetricReport) -> list:
    used = sum(1 for r in rep.per_fold if not r.skipped)
    return [dataset, method, f"{noise:g}", seed, f"{params[0]:g}", f"{params[1]:g}",
            f"{rep.accuracy:.6f}", f"{rep.acc_sd:.6f}", f"{rep.precision:.6f}",
            f"{rep.recall:.6f}", f"{rep.mean_balls:.2f}", used]


def write_report_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        w.writerows(rows)


def dataset_hash(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.features).tobytes())
    h.update(np.ascontiguousarray(ds.labels).tobytes())
    return h.hexdigest()[:16]


def write_manifest(path, entries: dict) -> None:
    """Flat ``key=value`` text, keys sorted."""
    lines = [f"{k}={v}" for k, v in sorted(entries.items())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def config_entries(prefix: str, obj) -> dict:
    return {f"{prefix}.{k}": v for k, v in asdict(obj).items()}
