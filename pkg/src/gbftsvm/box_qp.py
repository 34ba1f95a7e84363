"""Box-constrained concave QPs: maximise ``q'a - a'Qa/2`` subject to ``0 <= a <= upper``.

The solver is a projected Newton method: minimum-norm Newton steps on the
current face, searched along the projected arc, with Barzilai-Borwein
projected-gradient steps as the fallback. If that phase stalls (typical on
rank-deficient faces) a primal active-set method finishes the solve.
Convergence is measured by the projected-gradient residual
``||a - P(a + q - Qa)||_inf`` where ``P`` clips to the box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TextIO

import numpy as np
from scipy import linalg

from .errors import NumericalFailure


@dataclass(frozen=True, eq=False)
class BoxQP:
    Q: np.ndarray
    q: np.ndarray
    upper: np.ndarray
    # kept for hyperplane recovery: Cholesky factor of (own'own + eps I) and the other block
    chol: np.ndarray | None = None
    other_aug: np.ndarray | None = None
    # optional low-rank factor with Q = W'W, used for cheap face solves
    factor: np.ndarray | None = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        q = np.asarray(self.q, dtype=float)
        u = np.asarray(self.upper, dtype=float)
        m = len(q)
        if Q.shape != (m, m) or u.shape != (m,):
            raise ValueError(f"inconsistent shapes Q{Q.shape}, q{q.shape}, upper{u.shape}")
        if m and not np.allclose(Q, Q.T, atol=1e-8, rtol=0):
            raise ValueError("Q must be symmetric")
        if np.any(u < 0):
            raise ValueError("upper bounds must be nonnegative")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "upper", u)

    @property
    def m(self) -> int:
        return len(self.q)

    def objective(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        return float(self.q @ alpha - 0.5 * alpha @ (self.Q @ alpha))

    def kkt_residual(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        if not len(alpha):
            return 0.0
        step = alpha + (self.q - self.Q @ alpha)
        return float(np.abs(alpha - np.clip(step, 0.0, self.upper)).max())

    def recover(self, alpha) -> np.ndarray:
        """``(own'own + eps I)^{-1} other' alpha`` using the stored factor."""
        if self.chol is None or self.other_aug is None:
            raise ValueError("this BoxQP was not built by assemble_dual")
        rhs = self.other_aug.T @ np.asarray(alpha, dtype=float)
        return linalg.cho_solve((self.chol, True), rhs)


@dataclass(frozen=True)
class QPSolution:
    alpha: np.ndarray
    objective_value: float
    kkt_residual: float
    iterations: int
    converged: bool


def augment(X) -> np.ndarray:
    """Append a column of ones."""
    X = np.asarray(X, dtype=float)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def assemble_dual(own_centers, other_centers, other_radii, reg_eps, upper_bounds) -> BoxQP:
    """Build the dual of one twin problem.

    With ``E = [own 1]`` and ``F = [other 1]`` the Hessian is
    ``F (E'E + eps I)^{-1} F'`` and the linear term is ``1 + other_radii``.
    The Hessian is formed as ``W'W`` with ``W = L^{-1} F'`` so it is
    symmetric positive semidefinite by construction.
    """
    if reg_eps <= 0:
        raise ValueError("reg_eps must be positive")
    E = augment(own_centers)
    F = augment(other_centers)
    if E.shape[0] < 1:
        raise ValueError("need at least one row on the own side")
    if E.shape[1] != F.shape[1]:
        raise ValueError("own and other centers differ in dimension")
    K = E.T @ E
    K[np.diag_indices_from(K)] += reg_eps
    try:
        L = linalg.cholesky(K, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalFailure(f"Cholesky factorisation failed: {exc}") from exc
    W = linalg.solve_triangular(L, F.T, lower=True)
    Q = W.T @ W
    q = 1.0 + np.asarray(other_radii, dtype=float)
    upper = np.broadcast_to(np.asarray(upper_bounds, dtype=float), q.shape).copy()
    return BoxQP(Q, q, upper, L, F, W)


def _face_solve(qp: BoxQP, free, rhs):
    """Minimum-norm solution of ``Q_FF x = rhs`` on the coordinates ``free``.

    With a factor ``Q = W'W`` this uses ``(W_F'W_F)^+ = W_F^+ (W_F^+)'``:
    two least-squares problems of size k x r instead of one k x k.
    """
    if qp.factor is not None and qp.factor.shape[0] < free.sum():
        WF = qp.factor[:, free]
        z = linalg.lstsq(WF.T, rhs, cond=1e-10, lapack_driver="gelsy")[0]
        return linalg.lstsq(WF, z, cond=1e-10, lapack_driver="gelsy")[0]
    A = qp.Q[np.ix_(free, free)]
    return linalg.lstsq(A, rhs, cond=1e-12, lapack_driver="gelsy")[0]


def _polish(qp: BoxQP, alpha, tol):
    """Newton correction on the free set implied by the gradient signs.

    The reduced Hessian is often singular (the twin duals have rank at most
    d + 1), so the minimum-norm correction from the current point is used.
    """
    Q, q, u = qp.Q, qp.q, qp.upper
    best = alpha
    best_res = qp.kkt_residual(alpha)
    best_f = qp.objective(alpha)
    for _ in range(20):
        g = Q @ best - q
        at_lo = (best <= tol) & (g > 0)
        at_hi = (best >= u - tol) & (g < 0)
        free = ~(at_lo | at_hi)
        cand = np.where(at_hi, u, np.where(at_lo, 0.0, best))
        if free.any():
            if free.sum() > 3000:
                break
            r = q[free] - Q[free] @ cand
            cand[free] += _face_solve(qp, free, r)
        cand = np.clip(cand, 0.0, u)
        res = qp.kkt_residual(cand)
        f = qp.objective(cand)
        if res < best_res and f >= best_f - 1e-12 * (1 + abs(best_f)):
            best, best_res, best_f = cand, res, f
            if res <= tol:
                break
        else:
            break
    return best, best_res


NEWTON_MAX_FREE = 3000
STALL_LIMIT = 25


def _newton_direction(qp, g, a):
    """Minimum-norm Newton step on the face of coordinates not held at a bound."""
    u = qp.upper
    held = ((a <= 0.0) & (g > 0)) | ((a >= u) & (g < 0))
    free = ~held
    k = int(free.sum())
    if k == 0 or k > NEWTON_MAX_FREE:
        return None
    d = np.zeros_like(a)
    d[free] = -_face_solve(qp, free, g[free])
    return d


def _arc_search(qp, a, f, g, direction, t0=1.0):
    """Backtrack along the projected arc ``P(a + t d)`` until Armijo decrease."""
    t = t0
    for _ in range(60):
        cand = np.clip(a + t * direction, 0.0, qp.upper)
        step = cand - a
        gs = g @ step
        if gs < 0:
            f_new = 0.5 * cand @ (qp.Q @ cand) - qp.q @ cand
            if f_new <= f + 1e-4 * gs:
                return cand, f_new
        t *= 0.5
    return None


def _truncated_step(a, u, g, A, d, fscale):
    """Exact line minimisation along ``d`` cut at the first bound.

    Returns ``(change in objective, t, d, blocking index or None)``, or None
    when ``d`` is not a descent direction beyond rounding level.
    """
    gd = g @ d
    if gd >= -1e-13 * (1.0 + fscale):
        return None
    dQd = d @ (A @ d)
    t_line = -gd / dQd if dQd > 0 else np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(d < 0, a / -d, np.where(d > 0, (u - a) / d, np.inf))
    k = int(np.argmin(ratios))
    if t_line < ratios[k]:
        t, k = t_line, None
    else:
        t = ratios[k]
    return t * gd + 0.5 * t * t * dQd, t, d, k


def _active_set(qp: BoxQP, a, tol, budget):
    """Primal active-set method started from ``a``.

    The working set holds coordinates fixed at a bound. On the remaining
    face the minimum-norm Newton step is taken; if the gradient has a
    component in the null space of the face Hessian the objective decreases
    (almost) linearly along that component instead. Each step is an exact
    line minimisation truncated at the first bound, which then joins the
    working set. At a face minimiser the bound with the most wrongly signed
    multiplier is released.
    """
    Q, q, u = qp.Q, qp.q, qp.upper
    a = np.clip(a, 0.0, u)
    g = Q @ a - q
    at_lo = (a <= 0.0) & (g >= 0)
    at_hi = (a >= u) & (g <= 0) & ~at_lo
    a[at_lo] = 0.0
    a[at_hi] = u[at_hi]
    steps = 0
    while steps < budget:
        g = Q @ a - q
        if qp.kkt_residual(a) <= tol:
            break
        steps += 1
        f = 0.5 * a @ (Q @ a) - q @ a
        free = ~(at_lo | at_hi)
        best = None
        if free.any():
            if free.sum() > NEWTON_MAX_FREE:
                break
            A = Q[np.ix_(free, free)]
            gf = g[free]
            x = _face_solve(qp, free, -gf)
            # Newton step, and the part of -g the face Hessian cannot absorb
            for cand in (x, -gf - A @ x):
                step = _truncated_step(a[free], u[free], gf, A, cand, abs(f))
                if step is not None and (best is None or step[0] < best[0]):
                    best = step
        if best is None:
            # face minimiser: release the bound with the most wrongly signed multiplier
            viol = np.where(at_lo, np.maximum(-g, 0.0), 0.0) + np.where(at_hi, np.maximum(g, 0.0), 0.0)
            k = int(np.argmax(viol))
            if viol[k] <= 0.1 * tol:
                break
            at_lo[k] = at_hi[k] = False
            continue
        _, t, d, k = best
        idx = np.flatnonzero(free)
        a[idx] = np.clip(a[idx] + t * d, 0.0, u[idx])
        if k is not None:
            j = idx[k]
            if d[k] < 0:
                a[j], at_lo[j] = 0.0, True
            else:
                a[j], at_hi[j] = u[j], True
    return a, steps


def solve(qp: BoxQP, tol: float = 1e-6, max_iter: int | None = None,
          x0=None, trace: TextIO | None = None) -> QPSolution:
    """Maximise the concave box QP to projected-gradient residual ``tol``.

    Each iteration first tries a Newton step restricted to the current face
    (coordinates not held at a bound by the gradient sign), searched along
    the projected arc. If that gives no sufficient decrease, a projected
    gradient step with a Barzilai-Borwein length is taken instead. When this
    phase stalls, or once it has converged, a primal active-set method
    finishes from the current point. Active-set steps count towards
    ``max_iter`` only when the first phase has not converged.

    Parameters
    ----------
    qp : BoxQP
    tol : float
        Target for ``||a - P(a + q - Qa)||_inf``.
    max_iter : int, optional
        Defaults to ``10 * m + 1000``. On exhaustion the best iterate is
        returned with ``converged=False``.
    x0 : array, optional
        Starting point; clipped into the box. Defaults to zero.
    trace : file-like, optional
        Receives one JSON record per first-phase iteration and one after
        the finishing phase.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = qp.m
    if max_iter is None:
        max_iter = 10 * m + 1000
    if m == 0:
        return QPSolution(np.zeros(0), 0.0, 0.0, 0, True)
    Q, q, u = qp.Q, qp.q, qp.upper

    a = np.zeros(m) if x0 is None else np.clip(np.asarray(x0, dtype=float), 0.0, u)
    g = Q @ a - q                      # gradient of the minimisation form
    f = 0.5 * a @ (Q @ a) - q @ a
    res = qp.kkt_residual(a)
    lam = 1.0 / max(float(np.abs(g).max()), 1e-12)
    best_res, stall = res, 0
    it = 0
    while it < max_iter and res > tol:
        it += 1
        moved = None
        d = _newton_direction(qp, g, a)
        if d is not None:
            moved = _arc_search(qp, a, f, g, d)
        if moved is None:
            moved = _arc_search(qp, a, f, g, -lam * g)
        if moved is None:
            break
        a_new, f = moved
        g_new = Q @ a_new - q
        s, y = a_new - a, g_new - g
        sy = s @ y
        lam = 1e12 if sy <= 0 else min(max((s @ s) / sy, 1e-12), 1e12)
        a, g = a_new, g_new
        res = qp.kkt_residual(a)
        if trace is not None:
            trace.write(json.dumps({"iteration": it, "objective": -f, "kkt_residual": res}) + "\n")
        if res < best_res * 0.5:
            best_res, stall = res, 0
        else:
            stall += 1
            if stall >= STALL_LIMIT:
                break

    # Finish with the active-set method: it completes solves that stalled on
    # rank-deficient faces and sharpens converged ones to tol / 1000.
    budget = max_iter - it if res > tol else 2 * m + 20
    if budget > 0:
        fine = max(tol * 1e-3, 1e-12)
        b, steps = _active_set(qp, a, fine, budget)
        if res > tol:
            it += steps
        if qp.objective(b) >= qp.objective(a) - 1e-12 * (1.0 + abs(f)):
            a = b
        a, res = _polish(qp, a, fine)
        if trace is not None:
            trace.write(json.dumps({"iteration": it, "objective": qp.objective(a),
                                    "kkt_residual": res}) + "\n")
    return QPSolution(a, qp.objective(a), res, it, res <= tol)
