"""Granular-ball generation by adaptive 2-means splitting.

A granular ball summarises a group of training rows by their mean (center),
an enclosing or mean radius, the majority label and the fraction of rows
carrying that label (purity). Generation starts from one ball holding every
row and splits balls until the purity rules are met; afterwards balls of
different labels are re-split while they violate the configured overlap
constraint.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .dataset_io import Dataset
from .errors import EmptyDataset, SingleClassFamily

log = logging.getLogger(__name__)

RADIUS_MODES = ("max", "mean")
DE_OVERLAP_MODES = ("paper-literal", "strict", "off")


class Region(str, Enum):
    POSITIVE = "positive"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class GenerationConfig:
    """Parameters of :func:`generate_balls`.

    ``initial_purity`` is the purity every ball has to reach before the
    weighted-child-purity rule takes over; with the default of 1.0 every
    impure ball that can be split is split.
    """

    initial_purity: float = 1.0
    radius_mode: str = "max"
    min_split_size: int = 2
    de_overlap: str = "strict"
    seed: int = 0
    max_lloyd_iter: int = 50

    def __post_init__(self):
        if not 0.5 < self.initial_purity <= 1.0:
            raise ValueError(f"initial_purity must lie in (0.5, 1], got {self.initial_purity}")
        if self.radius_mode not in RADIUS_MODES:
            raise ValueError(f"radius_mode must be one of {RADIUS_MODES}")
        if self.min_split_size < 2:
            raise ValueError("min_split_size must be >= 2")
        if self.de_overlap not in DE_OVERLAP_MODES:
            raise ValueError(f"de_overlap must be one of {DE_OVERLAP_MODES}")


@dataclass(frozen=True, eq=False)
class GranularBall:
    center: np.ndarray
    radius: float
    purity: float
    label: int
    member_indices: np.ndarray
    size: int

    @property
    def region(self) -> Region:
        return assign_region(self)


@dataclass(frozen=True, eq=False)
class BallFamily:
    balls: tuple[GranularBall, ...]
    generation_params: GenerationConfig = field(default_factory=GenerationConfig)
    source_n: int = 0

    def __len__(self):
        return len(self.balls)

    def __iter__(self):
        return iter(self.balls)

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.balls])

    @property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls])

    @property
    def labels(self) -> np.ndarray:
        return np.array([b.label for b in self.balls], dtype=int)

    @property
    def purities(self) -> np.ndarray:
        return np.array([b.purity for b in self.balls])


def ball_stats(rows, labels, radius_mode="max"):
    """Center, radius, purity and majority label of a group of rows.

    Ties between the two labels go to +1.
    """
    rows = np.asarray(rows, dtype=float)
    labels = np.asarray(labels)
    if len(rows) == 0:
        raise EmptyDataset("a ball needs at least one member")
    center = rows.mean(axis=0)
    dist = np.sqrt(((rows - center) ** 2).sum(axis=1))
    radius = float(dist.max() if radius_mode == "max" else dist.mean())
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = len(labels) - n_pos
    label = 1 if n_pos >= n_neg else -1
    purity = max(n_pos, n_neg) / len(labels)
    return center, radius, purity, label


def _purity(labels):
    n_pos = np.count_nonzero(labels == 1)
    return max(n_pos, len(labels) - n_pos) / len(labels)


def assign_region(gb) -> Region:
    """Pure balls form the positive region; everything else is boundary.

    Accepts a ball or a bare purity value.
    """
    purity = getattr(gb, "purity", gb)
    return Region.POSITIVE if purity == 1.0 else Region.BOUNDARY


def _two_means(X, labels, rng, max_iter):
    """Split rows of ``X`` in two; returns a boolean mask or None if impossible.

    Initial centers are a far-apart pair. For mixed-label groups the pair is
    drawn one from each label so the split tends to follow the classes.
    """
    n = len(X)
    if n < 2:
        return None

    def farthest(from_pt, candidates):
        d = ((X[candidates] - from_pt) ** 2).sum(axis=1)
        return candidates[int(np.argmax(d))]

    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels != 1)
    seeds = []
    if len(pos) and len(neg):
        a = pos[rng.integers(len(pos))]
        b = farthest(X[a], neg)
        a = farthest(X[b], pos)
        seeds.append((a, b))
    allidx = np.arange(n)
    a = allidx[rng.integers(n)]
    b = farthest(X[a], allidx)
    a = farthest(X[b], allidx)
    seeds.append((a, b))

    for a, b in seeds:
        if np.array_equal(X[a], X[b]):
            continue
        c = np.stack([X[a], X[b]])
        mask = None
        for _ in range(max_iter):
            d0 = ((X - c[0]) ** 2).sum(axis=1)
            d1 = ((X - c[1]) ** 2).sum(axis=1)
            new = d1 < d0
            if mask is not None and np.array_equal(new, mask):
                break
            mask = new
            k = np.count_nonzero(mask)
            if k == 0 or k == n:
                break
            c = np.stack([X[~mask].mean(axis=0), X[mask].mean(axis=0)])
        k = np.count_nonzero(mask)
        if 0 < k < n:
            return mask
    # every row coincides: unsplittable
    return None


class _Builder:
    def __init__(self, X, y, cfg: GenerationConfig):
        self.X = X
        self.y = y
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)

    def make(self, idx) -> GranularBall:
        c, r, p, lab = ball_stats(self.X[idx], self.y[idx], self.cfg.radius_mode)
        idx = np.sort(idx)
        idx.setflags(write=False)
        c.setflags(write=False)
        return GranularBall(c, r, p, lab, idx, len(idx))

    def split(self, idx):
        mask = _two_means(self.X[idx], self.y[idx], self.rng, self.cfg.max_lloyd_iter)
        if mask is None:
            return None
        return idx[~mask], idx[mask]

    def refine(self, idx_list):
        """Apply the split/stop rule until every ball is settled."""
        cfg = self.cfg
        queue = deque(idx_list)
        done = []
        while queue:
            idx = queue.popleft()
            labels = self.y[idx]
            quality = _purity(labels)
            if quality == 1.0 or len(idx) < 2:
                done.append(idx)
                continue
            children = self.split(idx)
            if children is None:
                done.append(idx)
                continue
            left, right = children
            if quality < cfg.initial_purity:
                queue.extend(children)
                continue
            weighted = (len(left) * _purity(self.y[left]) + len(right) * _purity(self.y[right])) / len(idx)
            if (weighted > quality and len(left) >= cfg.min_split_size
                    and len(right) >= cfg.min_split_size):
                queue.extend(children)
            else:
                done.append(idx)
        return done


def overlap_violations(balls, mode: str):
    """Index pairs (i, j) of differently-labelled balls breaking ``mode``'s constraint."""
    if mode == "off" or len(balls) < 2:
        return []
    C = np.array([b.center for b in balls])
    r = np.array([b.radius for b in balls])
    y = np.array([b.label for b in balls])
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y != 1)
    if not len(pos) or not len(neg):
        return []
    D = np.sqrt(((C[pos, None, :] - C[None, neg, :]) ** 2).sum(axis=2))
    if mode == "strict":
        bad = D <= r[pos, None] + r[None, neg]
    else:
        bad = D <= np.abs(r[pos, None] - r[None, neg])
    ii, jj = np.nonzero(bad)
    return list(zip(pos[ii].tolist(), neg[jj].tolist()))


def generate_balls(ds: Dataset, cfg: GenerationConfig | None = None) -> BallFamily:
    """Cover ``ds`` with granular balls.

    Parameters
    ----------
    ds : Dataset
        Expected to be min-max scaled; radii are Euclidean.
    cfg : GenerationConfig, optional

    Returns
    -------
    BallFamily
        Balls partition the rows of ``ds``; order is deterministic given
        ``cfg.seed``.
    """
    cfg = cfg or GenerationConfig()
    if ds.n == 0:
        raise EmptyDataset("cannot generate balls for an empty dataset")
    X, y = ds.features, ds.labels
    builder = _Builder(X, y, cfg)
    groups = builder.refine([np.arange(ds.n)])
    balls = [builder.make(g) for g in groups]

    if cfg.de_overlap != "off":
        balls = _de_overlap(builder, balls, cfg.de_overlap)

    return BallFamily(tuple(balls), cfg, ds.n)


def _de_overlap(builder, balls, mode):
    """Re-split until no differently-labelled pair violates ``mode``.

    Each round re-splits the larger ball of the first violating pair. The
    number of rounds is capped at four times the current ball count. Balls
    that cannot be split (all members coincide) are remembered by their
    smallest member index, which identifies a ball because balls partition
    the rows.
    """
    frozen = set()

    def key(t):
        return int(balls[t].member_indices[0])

    rounds = 0
    while rounds < 4 * len(balls):
        pairs = [(i, j) for i, j in overlap_violations(balls, mode)
                 if not (key(i) in frozen and key(j) in frozen)]
        if not pairs:
            return balls
        rounds += 1
        i, j = pairs[0]
        order = sorted((i, j), key=lambda t: (-balls[t].radius, -balls[t].size, t))
        for t in order:
            if key(t) in frozen:
                continue
            children = builder.split(balls[t].member_indices.copy())
            if children is None:
                frozen.add(key(t))
                continue
            new = [builder.make(g) for g in builder.refine(list(children))]
            balls = balls[:t] + new + balls[t + 1:]
            break
    remaining = overlap_violations(balls, mode)
    if remaining:
        log.warning("de-overlap stopped after %d rounds with %d violating pairs",
                    rounds, len(remaining))
    return balls


def split_by_class(fam: BallFamily):
    """Centers and radii of the +1 and -1 balls, in family order.

    Returns
    -------
    c_pos, r_pos, c_neg, r_neg, idx_pos, idx_neg
        ``idx_*`` map rows back to positions in ``fam.balls``.
    """
    y = fam.labels
    idx_pos = np.flatnonzero(y == 1)
    idx_neg = np.flatnonzero(y == -1)
    if not len(idx_pos) or not len(idx_neg):
        raise SingleClassFamily(
            f"need balls of both classes, got {len(idx_pos)} positive and {len(idx_neg)} negative"
        )
    C = fam.centers
    r = fam.radii
    return C[idx_pos], r[idx_pos], C[idx_neg], r[idx_neg], idx_pos, idx_neg


def check_partition(fam: BallFamily) -> bool:
    if not fam.balls:
        return fam.source_n == 0
    allidx = np.concatenate([b.member_indices for b in fam.balls])
    return len(allidx) == fam.source_n and np.array_equal(np.sort(allidx), np.arange(fam.source_n))


# ------------------------------------------------------------- serialisation


def save_family(fam: BallFamily, path, scores=None) -> None:
    """Write one CSV row per ball plus a ``<path>.json`` sidecar with the config.

    When ``scores`` (from :func:`gbftsvm.scoring.score_family`) is given, the
    columns ``mu,nu,theta,score,region`` are appended.
    """
    path = Path(path)
    d = fam.centers.shape[1] if fam.balls else 0
    header = [f"c{j + 1}" for j in range(d)] + ["radius", "purity", "label", "size"]
    if scores is not None:
        header += ["mu", "nu", "theta", "score", "region"]
    lines = [",".join(header)]
    for k, b in enumerate(fam.balls):
        row = [repr(float(v)) for v in b.center]
        row += [repr(float(b.radius)), repr(float(b.purity)), str(int(b.label)), str(int(b.size))]
        if scores is not None:
            s = scores[k]
            row += [repr(float(s.mu)), repr(float(s.nu)), repr(float(s.theta)),
                    repr(float(s.score)), s.region.value]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {"generation_params": asdict(fam.generation_params), "source_n": fam.source_n,
            "n_balls": len(fam.balls), "dim": d}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")


def load_family(path) -> BallFamily:
    """Inverse of :func:`save_family`. Member indices are not stored and come back empty."""
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    d = int(meta["dim"])
    balls = []
    with open(path, encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            if not line.strip():
                continue
            tok = line.strip().split(",")
            c = np.array([float(v) for v in tok[:d]])
            c.setflags(write=False)
            empty = np.empty(0, dtype=int)
            empty.setflags(write=False)
            balls.append(GranularBall(c, float(tok[d]), float(tok[d + 1]), int(tok[d + 2]),
                                      empty, int(tok[d + 3])))
    return BallFamily(tuple(balls), GenerationConfig(**meta["generation_params"]),
                      int(meta["source_n"]))


def singleton_family(ds: Dataset) -> BallFamily:
    """One zero-radius ball per row; the point-input special case."""
    balls = []
    for i in range(ds.n):
        c = ds.features[i].copy()
        c.setflags(write=False)
        idx = np.array([i])
        idx.setflags(write=False)
        balls.append(GranularBall(c, 0.0, 1.0, int(ds.labels[i]), idx, 1))
    return BallFamily(tuple(balls), GenerationConfig(de_overlap="off"), ds.n)
