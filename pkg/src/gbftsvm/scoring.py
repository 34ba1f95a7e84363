"""Pythagorean fuzzy scores for granular balls.

Each ball gets a membership ``mu`` from its distance to the mean center of
its own class, a non-membership ``nu`` from ``mu`` and its purity, and a
closeness ``theta`` to the ideal point (1, 0). Pure balls are scored by
``mu``; impure (boundary) balls by ``theta``. The score caps the ball's
dual variable during GBFTSVM training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingleClassFamily
from .granular_ball import BallFamily, Region, assign_region

DEFAULT_EPS = 1e-6
MU_FLOOR = 1e-6


@dataclass(frozen=True)
class ClassGeometry:
    center_pos: np.ndarray
    radius_pos: float
    center_neg: np.ndarray
    radius_neg: float
    epsilon: float = DEFAULT_EPS
    count_pos: int = 0
    count_neg: int = 0

    def for_label(self, label):
        if label == 1:
            return self.center_pos, self.radius_pos
        return self.center_neg, self.radius_neg


@dataclass(frozen=True)
class PythagoreanScore:
    mu: float
    nu: float
    theta: float
    score: float
    region: Region


def class_geometry(fam: BallFamily, epsilon: float = DEFAULT_EPS) -> ClassGeometry:
    """Per-class mean of ball centers and the largest center-to-mean distance."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    C = fam.centers
    y = fam.labels
    parts = []
    for lab in (1, -1):
        sel = C[y == lab]
        if not len(sel):
            raise SingleClassFamily(f"no balls with label {lab:+d}")
        mean = sel.mean(axis=0)
        parts.append((mean, float(np.sqrt(((sel - mean) ** 2).sum(axis=1)).max()), len(sel)))
    (cp, rp, mp), (cn, rn, mn) = parts
    return ClassGeometry(cp, rp, cn, rn, epsilon, mp, mn)


def membership(center, label, geo: ClassGeometry) -> float:
    """``1 - dist(center, own class center) / (own class radius + eps)``, clamped to (0, 1]."""
    ref, R = geo.for_label(label)
    dist = float(np.linalg.norm(np.asarray(center, dtype=float) - ref))
    mu = 1.0 - dist / (R + geo.epsilon)
    return float(min(1.0, max(MU_FLOOR, mu)))


def membership_from_samples(sample_memberships) -> float:
    """Ball membership as the mean of known per-row memberships."""
    m = np.asarray(sample_memberships, dtype=float)
    if m.size == 0:
        raise ValueError("need at least one sample membership")
    return float(m.mean())


def non_membership(mu: float, purity: float) -> float:
    return float(np.sqrt(max(0.0, (1.0 - mu * mu) * (1.0 - purity))))


def closeness(mu: float, nu: float) -> float:
    # denominator >= 1 whenever mu^2 + nu^2 <= 1
    return float(np.sqrt((1.0 - nu * nu) / (2.0 - mu * mu - nu * nu)))


def score_ball(center, label, purity, geo: ClassGeometry) -> PythagoreanScore:
    mu = membership(center, label, geo)
    nu = non_membership(mu, purity)
    theta = closeness(mu, nu)
    region = assign_region(purity)
    return PythagoreanScore(mu, nu, theta, mu if region is Region.POSITIVE else theta, region)


def score_family(fam: BallFamily, epsilon: float = DEFAULT_EPS) -> list[PythagoreanScore]:
    """Scores aligned with ``fam.balls``."""
    geo = class_geometry(fam, epsilon)
    out = []
    for b in fam.balls:
        out.append(score_ball(b.center, b.label, b.purity, geo))
    return out


def score_vectors(fam: BallFamily, scores):
    """Split scores into the +1 and -1 class vectors, in family order."""
    s = np.array([sc.score for sc in scores])
    y = fam.labels
    return s[y == 1], s[y == -1]
