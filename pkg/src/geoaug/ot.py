"""Discrete optimal transport: exact LP oracle, log-domain Sinkhorn, and a
debiased two-measure entropic barycenter on a shared 1-D grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from ._backend import kernels

EXACT_MAX_ENTRIES = 1024
WEIGHT_SUM_TOL = 1e-9
# The debiasing fixed point converges sublinearly; the iterate's l1 change
# typically sits near 1e-6 for thousands of iterations, so the barycenter
# stops at this looser default unless params are given.
BARYCENTER_TOL = 1e-5


class SinkhornConvergenceError(RuntimeError):
    """Raised when an iterative scaling loop hits its iteration cap."""

    def __init__(self, message, violation):
        super().__init__(f"{message} (achieved violation {violation:.3e})")
        self.violation = violation


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weights ``p_l`` on distinct atoms (indices into a grid or batch)."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms)
        weights = np.asarray(self.weights, dtype=np.float64)
        if atoms.shape != weights.shape or weights.ndim != 1:
            raise ValueError("atoms and weights must be 1-D and of equal length")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
        if len(np.unique(atoms)) != len(atoms):
            raise ValueError("atoms must be distinct")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, n):
        return cls(np.arange(n), np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, n, index):
        w = np.zeros(n)
        w[index] = 1.0
        return cls(np.arange(n), w)

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class CostMatrix:
    matrix: np.ndarray
    metric_tag: str = "squared-grid-distance"

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("cost matrix must be 2-D")
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class TransportPlan:
    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    @property
    def violation(self):
        """l1 distance of the plan's marginals to the prescribed ones."""
        return float(
            np.abs(self.matrix.sum(axis=1) - self.row_marginal).sum()
            + np.abs(self.matrix.sum(axis=0) - self.col_marginal).sum()
        )


@dataclass(frozen=True)
class SinkhornParams:
    """Entropic strength ``lam`` in cost units; ``None`` means 1e-2 * max(cost)."""

    lam: float | None = None
    tol: float = 1e-6
    max_iter: int = 10_000
    check_every: int = 10

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be > 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1 or self.check_every < 1:
            raise ValueError("max_iter and check_every must be >= 1")

    def resolve(self, cost):
        if self.lam is not None:
            return float(self.lam)
        scale = float(np.max(cost)) if np.size(cost) else 0.0
        return 1e-2 * scale if scale > 0 else 1e-2


@dataclass
class SinkhornLog:
    n_iter: int
    violation: float
    lam: float
    checkpoints: list = field(default_factory=list)


def _as_weights(x):
    w = x.weights if isinstance(x, DiscreteMeasure) else np.asarray(x, dtype=np.float64)
    if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("marginal must be a finite nonnegative vector")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"marginal sums to {w.sum()!r}, expected 1")
    return w


def _as_cost(cost):
    c = cost.matrix if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix has non-finite entries")
    return np.ascontiguousarray(c, dtype=np.float64)


def _check_dims(c, a, b):
    if c.shape != (len(a), len(b)):
        raise ValueError(f"cost shape {c.shape} does not match marginals ({len(a)}, {len(b)})")


def exact_ot(cost, a, b):
    """Unregularized discrete OT solved as a linear program (HiGHS).

    Only meant as a test oracle, so instances are capped at 1024 plan entries.

    Returns
    -------
    plan : TransportPlan
    transport_cost : float
    """
    c = _as_cost(cost)
    a = _as_weights(a)
    b = _as_weights(b)
    _check_dims(c, a, b)
    n, m = c.shape
    if n * m > EXACT_MAX_ENTRIES:
        raise ValueError(f"exact_ot is an oracle for n*m <= {EXACT_MAX_ENTRIES}, got {n * m}")
    rows = np.kron(np.eye(n), np.ones((1, m)))
    cols = np.kron(np.ones((1, n)), np.eye(m))
    res = linprog(
        c.ravel(),
        A_eq=np.vstack([rows, cols]),
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    plan = np.clip(res.x.reshape(n, m), 0.0, None)
    return TransportPlan(plan, a, b), float(np.sum(c * plan))


def round_to_marginals(plan, a, b):
    """Project a nonnegative plan onto the transport polytope.

    Scale down over-full rows, then over-full columns, then spread the
    remaining deficit as a rank-one correction.
    """
    p = plan * np.minimum(1.0, a / np.maximum(plan.sum(axis=1), 1e-300))[:, None]
    p = p * np.minimum(1.0, b / np.maximum(p.sum(axis=0), 1e-300))[None, :]
    # residuals are >= 0 up to rounding; clamp so the correction stays nonnegative
    err_a = np.maximum(a - p.sum(axis=1), 0.0)
    err_b = np.maximum(b - p.sum(axis=0), 0.0)
    total = err_a.sum()
    if total > 0:
        p = p + np.outer(err_a, err_b) / total
    return p


def sinkhorn(cost, a, b, params=None, *, return_log=False):
    """Entropic OT by log-domain Sinkhorn iterations.

    Atoms with zero mass are dropped before iterating and re-inserted as zero
    rows/columns. After convergence the plan is rounded onto the exact
    marginals, and ``transport_cost`` is the linear cost of that rounded plan.

    Raises
    ------
    SinkhornConvergenceError
        If the l1 row-marginal violation is still above ``params.tol`` after
        ``params.max_iter`` iterations.
    """
    params = params or SinkhornParams()
    c = _as_cost(cost)
    a = _as_weights(a)
    b = _as_weights(b)
    _check_dims(c, a, b)
    lam = params.resolve(c)
    ia = np.flatnonzero(a > 0)
    ib = np.flatnonzero(b > 0)
    sub = np.ascontiguousarray(c[np.ix_(ia, ib)])
    f, g, n_iter, viol, checkpoints = kernels.sinkhorn_log(
        sub, a[ia], b[ib], lam, params.tol, params.max_iter, params.check_every
    )
    if viol > params.tol:
        raise SinkhornConvergenceError(
            f"sinkhorn did not converge in {params.max_iter} iterations", viol
        )
    core = np.exp((f[:, None] + g[None, :] - sub) / lam)
    core = round_to_marginals(core, a[ia], b[ib])
    plan = np.zeros_like(c)
    plan[np.ix_(ia, ib)] = core
    result = (TransportPlan(plan, a, b), float(np.sum(c * plan)))
    if return_log:
        return result + (SinkhornLog(n_iter, viol, lam, list(checkpoints)),)
    return result


def grid_cost(grid_len):
    """Squared distance between points of the uniform grid on [0, 1]."""
    x = np.linspace(0.0, 1.0, grid_len)
    return CostMatrix((x[:, None] - x[None, :]) ** 2, "squared-grid-distance")


def entropic_barycenter(mu, nu, alpha, params=None, *, debiased=True):
    """Fixed-support entropic barycenter of two densities with weights (1-alpha, alpha).

    Iterative Bregman projections in the log domain on the shared grid with
    squared-distance cost. With ``debiased=True`` the entropic blur is
    removed by the auxiliary scaling of the debiased Sinkhorn barycenter,
    so that a single measure (alpha in {0, 1}) is its own barycenter.
    The affine ``offset`` and ``scale`` are interpolated linearly.
    Iteration stops once the l1 change of the normalized iterate drops
    below ``params.tol`` (``BARYCENTER_TOL`` when params is None).
    """
    from .beats import DensityOnGrid

    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if mu.grid_len != nu.grid_len:
        raise ValueError("barycenter needs both densities on the same grid")
    offset = (1.0 - alpha) * mu.offset + alpha * nu.offset
    scale = (1.0 - alpha) * mu.scale + alpha * nu.scale
    if debiased:
        # The debiased objective vanishes only at the measure itself, so a
        # single active measure (or two equal ones) is its own barycenter.
        if alpha == 0.0 or alpha == 1.0 or np.array_equal(mu.mass, nu.mass):
            src = nu if alpha == 1.0 else mu
            return DensityOnGrid(src.mass.copy(), offset=offset, scale=scale)
    params = params or SinkhornParams(tol=BARYCENTER_TOL)
    cost = grid_cost(mu.grid_len).matrix
    lam = params.resolve(cost)
    log_k = -cost / lam
    weights = np.array([1.0 - alpha, alpha])
    with np.errstate(divide="ignore"):
        log_p_k = np.log(np.vstack([mu.mass, nu.mass]))
    log_b = np.zeros_like(log_p_k)
    log_d = np.zeros(mu.grid_len)
    p = np.full(mu.grid_len, 1.0 / mu.grid_len)
    change = np.inf
    for _ in range(params.max_iter):
        log_kb = logsumexp(log_k[None, :, :] + log_b[:, None, :], axis=2)
        log_a = log_p_k - log_kb
        log_ka = logsumexp(log_k[None, :, :] + log_a[:, :, None], axis=1)
        log_p = (log_d if debiased else 0.0) + weights @ log_ka
        log_b = log_p[None, :] - log_ka
        if debiased:
            log_kd = logsumexp(log_k + log_d[None, :], axis=1)
            log_d = 0.5 * (log_d + log_p - log_kd)
        p_new = np.exp(log_p - logsumexp(log_p))
        change = np.abs(p_new - p).sum()
        p = p_new
        if change < params.tol:
            break
    else:
        raise SinkhornConvergenceError(
            f"barycenter did not converge in {params.max_iter} iterations", change
        )
    return DensityOnGrid(p / p.sum(), offset=offset, scale=scale)
