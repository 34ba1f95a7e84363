"""Linear twin SVM classifiers on points (TWSVM) and on granular balls (GBTWSVM, GBFTSVM).

All three fit two non-parallel hyperplanes ``x'w1 + b1 = 0`` (close to class
+1) and ``x'w2 + b2 = 0`` (close to class -1) by solving two box-constrained
duals. Ball inputs shift the margin constraint by the ball radius; GBFTSVM
also scales each ball's dual upper bound by its Pythagorean score.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import box_qp
from .dataset_io import Dataset, apply_min_max
from .errors import (DegenerateModel, ModelFormatError, QPNotConverged, ScoreMisalignment,
                     SingleClassDataset, SingleClassFamily)
from .granular_ball import BallFamily, generate_balls, split_by_class
from .scoring import PythagoreanScore, score_family

METHODS = ("twsvm", "gbtwsvm", "gbftsvm")
MODEL_FORMAT = "gbtsvm-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Penalties and solver settings.

    ``C1``/``C2`` bound the duals of TWSVM and GBTWSVM; ``C3``/``C4`` play the
    same role for GBFTSVM (multiplied by the ball scores). When ``C3`` or
    ``C4`` is left as None it is tied to ``C1``/``C2``.
    """

    C1: float = 1.0
    C2: float = 1.0
    C3: float | None = None
    C4: float | None = None
    reg_eps: float = 1e-4
    qp_tol: float = 1e-6
    qp_max_iter: int | None = None

    def __post_init__(self):
        if self.C3 is None:
            object.__setattr__(self, "C3", self.C1)
        if self.C4 is None:
            object.__setattr__(self, "C4", self.C2)
        for name in ("C1", "C2", "C3", "C4", "reg_eps", "qp_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def tied(cls, c1, c2, **kw):
        return cls(C1=c1, C2=c2, C3=c1, C4=c2, **kw)


@dataclass(frozen=True, eq=False)
class TwinModel:
    w1: np.ndarray
    b1: float
    w2: np.ndarray
    b2: float
    trained_by: str = "twsvm"
    config: TrainConfig = field(default_factory=TrainConfig)
    # optional (lo, span) min-max scaling applied to inputs before the planes
    scale: tuple | None = None
    # diagnostics, not persisted
    duals: tuple = ()

    @property
    def d(self) -> int:
        return len(self.w1)

    def with_scale(self, lo, span) -> "TwinModel":
        return replace(self, scale=(np.asarray(lo, dtype=float), np.asarray(span, dtype=float)))

    def plane_distances(self, X) -> np.ndarray:
        """Distances of each row of ``X`` to plane 1 and plane 2, shape (n, 2)."""
        n1 = np.linalg.norm(self.w1)
        n2 = np.linalg.norm(self.w2)
        if n1 == 0 or n2 == 0:
            raise DegenerateModel("a hyperplane has a zero normal vector")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.scale is not None:
            X = apply_min_max(X, *self.scale)
        return np.column_stack([np.abs(X @ self.w1 + self.b1) / n1,
                                np.abs(X @ self.w2 + self.b2) / n2])

    def predict(self, X):
        return predict_batch(self, X)


def _fit(c_pos, r_pos, c_neg, r_neg, upper1, upper2, cfg: TrainConfig, method: str) -> TwinModel:
    # plane 1: near +1, pushed from -1 balls. u = -(E'E + eps I)^{-1} F' alpha
    dual1 = box_qp.assemble_dual(c_pos, c_neg, r_neg, cfg.reg_eps, upper1)
    # plane 2: near -1, pushed from +1 balls. v = (S'S + eps I)^{-1} R' gamma
    dual2 = box_qp.assemble_dual(c_neg, c_pos, r_pos, cfg.reg_eps, upper2)
    sols = []
    for name, qp in (("first", dual1), ("second", dual2)):
        sol = box_qp.solve(qp, cfg.qp_tol, cfg.qp_max_iter)
        if not sol.converged:
            warnings.warn(
                f"{method}: {name} dual stopped at residual {sol.kkt_residual:.3g} "
                f"after {sol.iterations} iterations; using best iterate",
                QPNotConverged, stacklevel=3)
        sols.append(sol)
    u = -dual1.recover(sols[0].alpha)
    v = dual2.recover(sols[1].alpha)
    return TwinModel(u[:-1], float(u[-1]), v[:-1], float(v[-1]), method, cfg,
                     duals=((dual1, sols[0]), (dual2, sols[1])))


def train_twsvm(ds: Dataset, cfg: TrainConfig | None = None) -> TwinModel:
    """Point-input twin SVM; the regularised recovery matches the ball variants."""
    cfg = cfg or TrainConfig()
    X, y = ds.features, ds.labels
    A, B = X[y == 1], X[y == -1]
    if not len(A) or not len(B):
        raise SingleClassDataset("training data must contain both classes")
    return _fit(A, np.zeros(len(A)), B, np.zeros(len(B)), cfg.C1, cfg.C2, cfg, "twsvm")


def train_gbtwsvm(fam: BallFamily, cfg: TrainConfig | None = None) -> TwinModel:
    cfg = cfg or TrainConfig()
    c_pos, r_pos, c_neg, r_neg, _, _ = split_by_class(fam)
    return _fit(c_pos, r_pos, c_neg, r_neg, cfg.C1, cfg.C2, cfg, "gbtwsvm")


def train_gbftsvm(fam: BallFamily, scores: list[PythagoreanScore],
                  cfg: TrainConfig | None = None) -> TwinModel:
    """Score-weighted GBTWSVM: dual bounds become ``C3 * s_neg`` and ``C4 * s_pos``."""
    cfg = cfg or TrainConfig()
    if len(scores) != len(fam.balls):
        raise ScoreMisalignment(f"{len(scores)} scores for {len(fam.balls)} balls")
    for k, (s, b) in enumerate(zip(scores, fam.balls)):
        if (s.region.value == "positive") != (b.purity == 1.0):
            raise ScoreMisalignment(f"score {k} region does not match ball {k} purity")
    c_pos, r_pos, c_neg, r_neg, i_pos, i_neg = split_by_class(fam)
    s = np.array([sc.score for sc in scores])
    return _fit(c_pos, r_pos, c_neg, r_neg, cfg.C3 * s[i_neg], cfg.C4 * s[i_pos],
                cfg, "gbftsvm")


def train(method: str, train_ds: Dataset, cfg: TrainConfig, gen_cfg=None, *, family=None,
          scores=None) -> TwinModel:
    """Dispatch on ``method``; ball methods generate (and score) balls unless given."""
    if method == "twsvm":
        return train_twsvm(train_ds, cfg)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if family is None:
        family = generate_balls(train_ds, gen_cfg)
    try:
        if method == "gbtwsvm":
            return train_gbtwsvm(family, cfg)
        if scores is None:
            scores = score_family(family)
        return train_gbftsvm(family, scores, cfg)
    except SingleClassFamily as exc:
        raise SingleClassDataset(str(exc)) from exc


# ------------------------------------------------------------------ predict


def predict(model: TwinModel, x) -> int:
    """Label of a single point: the class whose plane is nearer; ties go to +1."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict expects a single point; use predict_batch")
    return int(predict_batch(model, x[None, :])[0])


def predict_batch(model: TwinModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.zeros(0, dtype=int)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ValueError(f"expected rows of dimension {model.d}, got shape {X.shape}")
    D = model.plane_distances(X)
    return np.where(D[:, 0] <= D[:, 1], 1, -1)


# --------------------------------------------------------------- persistence


def _arr(v) -> str:
    return " ".join(f"{float(x):.17g}" for x in np.atleast_1d(v))


def save_model(model: TwinModel, path) -> None:
    cfg = asdict(model.config)
    lines = [
        f"# {MODEL_FORMAT} v{MODEL_VERSION}",
        f"trained_by={model.trained_by}",
        f"dim={model.d}",
        f"w1={_arr(model.w1)}",
        f"b1={_arr(model.b1)}",
        f"w2={_arr(model.w2)}",
        f"b2={_arr(model.b2)}",
    ]
    if model.scale is not None:
        lines += [f"scale_lo={_arr(model.scale[0])}", f"scale_span={_arr(model.scale[1])}"]
    for k, v in cfg.items():
        lines.append(f"config.{k}={'' if v is None else (f'{v:.17g}' if isinstance(v, float) else v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> TwinModel:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith(f"# {MODEL_FORMAT} v"):
        raise ModelFormatError(f"{path}: missing model header")
    try:
        version = int(text[0].rsplit("v", 1)[1])
    except ValueError:
        raise ModelFormatError(f"{path}: bad version in header") from None
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {version}")
    kv = {}
    for line in text[1:]:
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ModelFormatError(f"{path}: malformed line {line!r}")
        kv[key.strip()] = val.strip()
    try:
        w1 = np.array([float(t) for t in kv["w1"].split()])
        w2 = np.array([float(t) for t in kv["w2"].split()])
        b1 = float(kv["b1"])
        b2 = float(kv["b2"])
        dim = int(kv["dim"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
    if len(w1) != dim or len(w2) != dim:
        raise ModelFormatError(f"{path}: normal vectors do not match dim={dim}")
    scale = None
    if "scale_lo" in kv or "scale_span" in kv:
        try:
            scale = (np.array([float(t) for t in kv["scale_lo"].split()]),
                     np.array([float(t) for t in kv["scale_span"].split()]))
        except (KeyError, ValueError) as exc:
            raise ModelFormatError(f"{path}: bad scaling lines: {exc}") from None
        if len(scale[0]) != dim or len(scale[1]) != dim:
            raise ModelFormatError(f"{path}: scaling does not match dim={dim}")
    cfg_kw = {}
    try:
        for key, val in kv.items():
            if key.startswith("config."):
                name = key[len("config."):]
                if val == "":
                    cfg_kw[name] = None
                elif name == "qp_max_iter":
                    cfg_kw[name] = int(val)
                else:
                    cfg_kw[name] = float(val)
        cfg = TrainConfig(**cfg_kw)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: bad config: {exc}") from None
    return TwinModel(w1, b1, w2, b2, kv.get("trained_by", "twsvm"), cfg, scale)
