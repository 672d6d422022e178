"""Beat-shape ground metric.

A lead is turned into a probability density over normalized time [0, 1]
(shifted by its minimum, floored, normalized). Densities live on a uniform
grid of ``G`` points ``i / (G - 1)``; each grid mass is spread uniformly over
the cell of width ``1 / (G - 1)`` centred on its point, which makes every
quantile function piecewise linear and the 1-D transport cost exact.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .ot import CostMatrix

FLOOR_ETA = 1e-3
CLASS_NAMES = ("NORM", "MI", "STTC", "CD", "HYP")


@dataclass(frozen=True)
class DensityOnGrid:
    """Unit-mass vector on the uniform grid over [0, 1].

    ``offset`` and ``scale`` undo the normalization: the signal is
    ``mass * scale + offset``.
    """

    mass: np.ndarray
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        mass = np.ascontiguousarray(self.mass, dtype=np.float64)
        if mass.ndim != 1 or len(mass) < 2:
            raise ValueError("density needs a 1-D grid of at least 2 points")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ValueError("density mass must be finite and nonnegative")
        if abs(mass.sum() - 1.0) > 1e-9:
            raise ValueError(f"density mass sums to {mass.sum()!r}, expected 1")
        if not (np.isfinite(self.offset) and np.isfinite(self.scale)) or self.scale < 0:
            raise ValueError("offset must be finite and scale finite and >= 0")
        object.__setattr__(self, "mass", mass)

    @property
    def grid_len(self):
        return len(self.mass)

    @property
    def grid(self):
        return np.linspace(0.0, 1.0, self.grid_len)

    @classmethod
    def dirac(cls, grid_len, position):
        """Unit mass at the grid point nearest ``position``."""
        mass = np.zeros(grid_len)
        mass[int(round(position * (grid_len - 1)))] = 1.0
        return cls(mass)

    def total_variation(self, other):
        return 0.5 * float(np.abs(self.mass - other.mass).sum())


@dataclass(frozen=True)
class BeatTensor:
    """One segmented heartbeat, ``samples`` shaped (n_leads, beat_len) in mV."""

    samples: np.ndarray
    label: int
    sample_rate: float
    source_id: str = ""

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 8:
            raise ValueError(f"beat must be (n_leads >= 1, beat_len >= 8), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("beat samples must be finite")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "label", int(self.label))

    @property
    def n_leads(self):
        return self.samples.shape[0]

    @property
    def beat_len(self):
        return self.samples.shape[1]

    def with_label(self, label):
        return BeatTensor(self.samples, label, self.sample_rate, self.source_id)


def to_density(lead, eta=FLOOR_ETA):
    """Shift a lead to zero minimum, add a floor of ``eta * range / L``, normalize."""
    x = np.asarray(lead, dtype=np.float64)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("lead must be 1-D with at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("lead has non-finite samples")
    lo = float(x.min())
    span = float(x.max()) - lo
    if span == 0.0:
        return DensityOnGrid(np.full(len(x), 1.0 / len(x)), offset=lo, scale=0.0)
    shifted = x - lo + eta * span / len(x)
    z = float(shifted.sum())
    return DensityOnGrid(shifted / z, offset=lo, scale=z)


def w2_1d(mu, nu):
    """Squared 2-Wasserstein cost between two grid densities (no outer root).

    Computed as the integral over q of the squared difference of the two
    piecewise-linear quantile functions; grids may differ in length.
    """
    return float(kernels.w2_cells(mu.mass, nu.mass))


def _beat_masses(beat, grid_len=None):
    return np.stack([to_density(_resample(lead, grid_len)).mass for lead in beat.samples])


def _resample(lead, grid_len):
    if grid_len is None or grid_len == len(lead):
        return lead
    src = np.linspace(0.0, 1.0, len(lead))
    return np.interp(np.linspace(0.0, 1.0, grid_len), src, lead)


def _lead_weights(n_leads, lead_weights):
    if lead_weights is None:
        return np.ones(n_leads)
    w = np.asarray(lead_weights, dtype=np.float64)
    if w.shape != (n_leads,) or np.any(w < 0):
        raise ValueError(f"lead_weights must be {n_leads} nonnegative values")
    return np.ascontiguousarray(w)


def beat_distance(x, y, lead_weights=None, grid_len=None):
    """Sum over leads of ``w2_1d`` between per-lead densities."""
    if x.n_leads != y.n_leads:
        raise ValueError(f"lead count mismatch: {x.n_leads} vs {y.n_leads}")
    w = _lead_weights(x.n_leads, lead_weights)
    return float(
        sum(
            wl * w2_1d(to_density(_resample(lx, grid_len)), to_density(_resample(ly, grid_len)))
            for wl, lx, ly in zip(w, x.samples, y.samples)
        )
    )


def stack_masses(batch, grid_len=None):
    """(n, n_leads, G) array of per-lead densities for a batch of beats."""
    leads = {b.n_leads for b in batch}
    if len(leads) != 1:
        raise ValueError(f"mixed lead counts in batch: {sorted(leads)}")
    return np.ascontiguousarray(np.stack([_beat_masses(b, grid_len) for b in batch]))


def pairwise_cost(batch_a, batch_b, lead_weights=None, grid_len=None, n_jobs=1):
    """Matrix of ``beat_distance`` over all pairs.

    Rows are split across ``n_jobs`` threads; entries are independent so the
    result does not depend on the thread count.
    """
    if not batch_a or not batch_b:
        raise ValueError("pairwise_cost needs nonempty batches")
    ma = stack_masses(batch_a, grid_len)
    mb = stack_masses(batch_b, grid_len)
    if ma.shape[1] != mb.shape[1]:
        raise ValueError(f"lead count mismatch: {ma.shape[1]} vs {mb.shape[1]}")
    return CostMatrix(pairwise_from_masses(ma, mb, lead_weights, n_jobs), "beat-shape")


def pairwise_from_masses(ma, mb, lead_weights=None, n_jobs=1):
    w = _lead_weights(ma.shape[1], lead_weights)
    n = ma.shape[0]
    if n_jobs <= 1 or n < 2:
        return kernels.pairwise_w2(ma, mb, w, 0, n)
    bounds = np.linspace(0, n, min(n_jobs, n) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        parts = pool.map(
            lambda se: kernels.pairwise_w2(ma, mb, w, int(se[0]), int(se[1])),
            zip(bounds[:-1], bounds[1:]),
        )
        return np.vstack(list(parts))


def _interp_cdf_knots(mu, nu, alpha):
    """Knots (x, q) of the CDF of the displacement interpolant."""
    from ._fallback import _quantile_pieces

    length, qa, qb, sa, sb = _quantile_pieces(mu.mass, nu.mass)
    mid = (1.0 - alpha) * qa + alpha * qb
    half = 0.5 * ((1.0 - alpha) * sa + alpha * sb) * length
    q_hi = np.cumsum(length)
    q_lo = q_hi - length
    xs = np.maximum.accumulate(np.column_stack((mid - half, mid + half)).ravel())
    qs = np.column_stack((q_lo, q_hi)).ravel()
    return xs, qs


def quantile_interpolate(mu, nu, alpha):
    """Point at fraction ``alpha`` along the 1-D Wasserstein geodesic from mu to nu.

    The quantile function is ``(1 - alpha) F^-1 + alpha G^-1``; its CDF is
    evaluated at mu's cell edges to re-bin onto mu's grid.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    g = mu.grid_len
    h = 1.0 / (g - 1)
    xs, qs = _interp_cdf_knots(mu, nu, alpha)
    edges = (np.arange(g + 1) - 0.5) * h
    cdf = np.interp(edges, xs, qs, left=0.0, right=qs[-1])
    cdf[-1] = qs[-1]
    mass = np.clip(np.diff(cdf), 0.0, None)
    return DensityOnGrid(
        mass / mass.sum(),
        offset=(1.0 - alpha) * mu.offset + alpha * nu.offset,
        scale=(1.0 - alpha) * mu.scale + alpha * nu.scale,
    )


def density_to_signal(density, target_len):
    """Invert ``to_density`` for one lead: ``mass * scale + offset`` on ``target_len`` samples."""
    if target_len < 2:
        raise ValueError("target_len must be >= 2")
    values = density.mass * density.scale
    return _resample(values, target_len) + density.offset


def density_to_beat(densities, target_len, label=-1, sample_rate=1.0, source_id=""):
    """Rebuild a beat from per-lead densities (all on one grid)."""
    if not densities:
        raise ValueError("need at least one lead density")
    if len({d.grid_len for d in densities}) != 1:
        raise ValueError("lead densities are on inconsistent grids")
    samples = np.stack([density_to_signal(d, target_len) for d in densities])
    return BeatTensor(samples, label, sample_rate, source_id)
