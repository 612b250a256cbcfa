"""One-dimensional empirical measures and the metrics computed on them.

An :class:`EmpiricalMeasure` is a finite, sorted multiset of real atoms with
positive weights summing to one.  All distances (1-Wasserstein, Kolmogorov)
and the CDF-variation integrals used by the budget-allocation policy are
computed exactly from the piecewise-constant CDF; nothing here is estimated
by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSampleError

__all__ = [
    "EmpiricalMeasure",
    "MomentSummary",
    "cdf_at",
    "quantile",
    "wasserstein1",
    "kolmogorov",
    "j_functionals",
    "moment_summary",
    "sample_inverse_transform",
]

_WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Weighted empirical measure on the real line.

    ``atoms`` must be sorted non-decreasing and finite; ``weights`` strictly
    positive and summing to 1 within 1e-12.  Instances are immutable (the
    arrays are frozen) and safe to share across threads.  Duplicate atoms are
    retained; use :meth:`merge_duplicates` if a minimal representation is
    wanted.
    """

    atoms: np.ndarray
    weights: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        atoms = np.asarray(self.atoms, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if atoms.ndim != 1 or weights.ndim != 1:
            raise ValueError("atoms and weights must be one-dimensional")
        if atoms.size == 0:
            raise ValueError("an empirical measure needs at least one atom")
        if atoms.size != weights.size:
            raise ValueError(
                f"atoms ({atoms.size}) and weights ({weights.size}) differ in length"
            )
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if np.any(np.diff(atoms) < 0):
            raise ValueError("atoms must be sorted non-decreasing")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        total = float(weights.sum())
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1 within {_WEIGHT_SUM_TOL}")
        cum = np.cumsum(weights)
        cum[-1] = 1.0  # guard the top quantile against accumulated roundoff
        atoms.flags.writeable = False
        weights.flags.writeable = False
        cum.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalMeasure":
        """Uniform measure with weight 1/N on each of N raw samples (sorted)."""
        values = np.sort(np.asarray(samples, dtype=np.float64))
        if values.size == 0:
            raise ValueError("cannot build a measure from zero samples")
        return cls(values, np.full(values.size, 1.0 / values.size))

    @classmethod
    def point_mass(cls, value: float) -> "EmpiricalMeasure":
        return cls(np.array([float(value)]), np.array([1.0]))

    @property
    def size(self) -> int:
        return int(self.atoms.size)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.atoms[0]), float(self.atoms[-1])

    def merge_duplicates(self) -> "EmpiricalMeasure":
        """Equivalent measure with distinct atoms (weights of duplicates summed)."""
        uniq, inverse = np.unique(self.atoms, return_inverse=True)
        if uniq.size == self.atoms.size:
            return self
        w = np.zeros(uniq.size)
        np.add.at(w, inverse, self.weights)
        return EmpiricalMeasure(uniq, w / w.sum())


@dataclass(frozen=True)
class MomentSummary:
    """Sample moments of an empirical measure.

    ``variance`` carries the unbiased correction; ``skewness`` and
    ``kurtosis`` are the biased standardized central moments.  ``kurtosis``
    is non-excess (a large normal sample gives ~3, not ~0).
    """

    mean: float
    variance: float
    skewness: float
    kurtosis: float


def cdf_at(m: EmpiricalMeasure, x: float) -> float:
    """Right-continuous CDF value: total weight of atoms <= x."""
    idx = int(np.searchsorted(m.atoms, x, side="right"))
    return 0.0 if idx == 0 else float(m._cum[idx - 1])


def quantile(m: EmpiricalMeasure, t: float) -> float:
    """Generalized inverse CDF: the smallest atom whose CDF value reaches t.

    Left-continuous step function of ``t`` on (0, 1].
    """
    if not 0.0 < t <= 1.0:
        raise ValueError(f"quantile level must lie in (0, 1], got {t!r}")
    idx = int(np.searchsorted(m._cum, t, side="left"))
    return float(m.atoms[min(idx, m.size - 1)])


def _cdf_on_grid(m: EmpiricalMeasure, grid: np.ndarray, side: str = "right") -> np.ndarray:
    """CDF values on a sorted grid; side='left' gives the left limits F(x-)."""
    idx = np.searchsorted(m.atoms, grid, side=side)
    padded = np.concatenate(([0.0], m._cum))
    return padded[idx]


def wasserstein1(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """Exact 1-Wasserstein distance: the L1 distance between the two CDFs.

    Both CDFs are piecewise constant, so the integral reduces to a finite sum
    over the merged atom grid.  No sampling, no approximation.
    """
    merged = np.sort(np.concatenate([a.atoms, b.atoms]), kind="stable")
    gaps = np.diff(merged)
    if gaps.size == 0:
        return 0.0
    fa = _cdf_on_grid(a, merged[:-1])
    fb = _cdf_on_grid(b, merged[:-1])
    return float(np.abs(fa - fb) @ gaps)


def kolmogorov(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """Sup-distance between the two CDFs, checking both one-sided limits."""
    merged = np.concatenate([a.atoms, b.atoms])
    d_right = np.abs(_cdf_on_grid(a, merged) - _cdf_on_grid(b, merged))
    d_left = np.abs(
        _cdf_on_grid(a, merged, side="left") - _cdf_on_grid(b, merged, side="left")
    )
    return float(max(d_right.max(), d_left.max()))


def j_functionals(m: EmpiricalMeasure) -> tuple[float, float]:
    """Integrals of F(1-F) and sqrt(F(1-F)) over the support.

    These two CDF-variation integrals bound the expected 1-Wasserstein error
    of an N-sample empirical measure from below and above (both scale as
    1/sqrt(N)).  Exact for the piecewise-constant CDF; both are 0 for a
    point mass.
    """
    if m.size == 1:
        return 0.0, 0.0
    gaps = np.diff(m.atoms)
    f = m._cum[:-1]
    v = f * (1.0 - f)
    # roundoff can leave v at -1e-17 on the last plateau
    v = np.maximum(v, 0.0)
    j0 = float(v @ gaps)
    j1 = float(np.sqrt(v) @ gaps)
    return j0, j1


def moment_summary(m: EmpiricalMeasure) -> MomentSummary:
    """Mean, unbiased variance, and biased standardized skewness/kurtosis.

    Requires at least 2 atoms for the variance, 3 for the skewness, and 4 for
    the kurtosis; since all four statistics are returned, fewer than 4 atoms
    is an error.  For non-uniform weights the unbiased variance uses the
    reliability-weights correction 1/(1 - sum(w^2)).
    """
    for threshold, name in ((2, "variance"), (3, "skewness"), (4, "kurtosis")):
        if m.size < threshold:
            raise InsufficientSampleError(
                f"{name} needs at least {threshold} atoms, measure has {m.size}"
            )
    w = m.weights
    mean = float(w @ m.atoms)
    centered = m.atoms - mean
    m2 = float(w @ centered**2)
    m3 = float(w @ centered**3)
    m4 = float(w @ centered**4)
    variance = m2 / (1.0 - float(w @ w))
    if m2 == 0.0:
        raise InsufficientSampleError("degenerate sample: all atoms identical")
    return MomentSummary(
        mean=mean,
        variance=variance,
        skewness=m3 / m2**1.5,
        kurtosis=m4 / m2**2,
    )


def sample_inverse_transform(m: EmpiricalMeasure, u):
    """Inverse-transform sampling: evaluate the quantile function at u.

    Accepts a scalar in (0, 1] or an array of such values; feeding uniform
    draws reproduces the measure in distribution.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0.0) or np.any(u_arr > 1.0):
        raise ValueError("inverse-transform levels must lie in (0, 1]")
    idx = np.minimum(np.searchsorted(m._cum, u_arr, side="left"), m.size - 1)
    out = m.atoms[idx]
    return float(out) if np.isscalar(u) or u_arr.ndim == 0 else out
