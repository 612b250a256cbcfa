"""Least-squares and quantile-regression fits on exploration data.

Both fitters operate on an explicit design matrix whose first column is the
intercept (see :func:`design_matrix`).  The least-squares path uses an
SVD-based solve, never the normal equations; the quantile path solves the
exact linear-programming reformulation of the pinball objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import InsufficientSampleError, QuantileSolverError

__all__ = [
    "FitResult",
    "QuantileFit",
    "design_matrix",
    "ols_fit",
    "pinball_loss",
    "pinball_subgradient_margin",
    "quantile_fit",
]

# slack used when re-solving on the optimal face to break argmin ties
_TIE_EPS = 1e-9


@dataclass(frozen=True)
class FitResult:
    """Output of an ordinary least-squares fit.

    ``sigma2_hat`` is ||residuals||^2 / (rows - cols), i.e. the model-variance
    estimate with the degrees-of-freedom correction.  ``rank_ok`` is False
    when the design was numerically rank-deficient and ``beta_hat`` is the
    minimum-norm solution.
    """

    beta_hat: np.ndarray
    residuals: np.ndarray
    sigma2_hat: float
    rank_ok: bool


@dataclass(frozen=True)
class QuantileFit:
    """Per-level quantile-regression coefficients on a fixed grid of levels."""

    taus: np.ndarray
    betas: np.ndarray  # shape (len(taus), cols)

    def __post_init__(self) -> None:
        taus = np.asarray(self.taus, dtype=np.float64)
        betas = np.asarray(self.betas, dtype=np.float64)
        if taus.ndim != 1 or np.any(np.diff(taus) <= 0):
            raise ValueError("quantile levels must be strictly increasing")
        if np.any(taus <= 0) or np.any(taus >= 1):
            raise ValueError("quantile levels must lie in (0, 1)")
        if betas.shape[0] != taus.size or not np.all(np.isfinite(betas)):
            raise ValueError("one finite coefficient vector is required per level")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "betas", betas)

    def predict(self, features_with_intercept: np.ndarray, level_idx) -> np.ndarray:
        """Evaluate x^T beta(tau) rowwise, with a level index per row."""
        return np.einsum(
            "ij,ij->i", features_with_intercept, self.betas[level_idx]
        )


def design_matrix(features: np.ndarray) -> np.ndarray:
    """Prepend the intercept column of ones to a (rows, s) feature block.

    A one-dimensional input is treated as a single feature column.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    return np.hstack([np.ones((features.shape[0], 1)), features])


def _check_design(Z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if Z.ndim != 2 or y.ndim != 1:
        raise ValueError("expected a 2-d design and a 1-d response")
    rows, cols = Z.shape
    if y.size != rows:
        raise ValueError(f"response length {y.size} does not match {rows} design rows")
    if rows <= cols:
        raise InsufficientSampleError(
            f"need strictly more rows than columns, got {rows} rows x {cols} cols"
        )
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(y))):
        raise ValueError("design and response must be finite")
    return Z, y


def ols_fit(Z: np.ndarray, y: np.ndarray) -> FitResult:
    """Least-squares fit via SVD; minimum-norm solution on rank deficiency.

    The rank test compares the smallest singular value against
    rows * machine-epsilon * largest singular value.
    """
    Z, y = _check_design(Z, y)
    rows, cols = Z.shape
    rcond = rows * np.finfo(np.float64).eps
    beta, _, rank, _ = np.linalg.lstsq(Z, y, rcond=rcond)
    residuals = y - Z @ beta
    sigma2 = float(residuals @ residuals) / (rows - cols)
    return FitResult(
        beta_hat=beta,
        residuals=residuals,
        sigma2_hat=sigma2,
        rank_ok=bool(rank == cols),
    )


def pinball_loss(x, tau: float):
    """Asymmetric absolute loss x * (tau - 1[x < 0]); its minimizer in location
    problems is the tau-quantile."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    x_arr = np.asarray(x, dtype=np.float64)
    out = x_arr * (tau - (x_arr < 0.0))
    return float(out) if np.isscalar(x) else out


def _mean_pinball(Z: np.ndarray, y: np.ndarray, tau: float, beta: np.ndarray) -> float:
    return float(np.mean(pinball_loss(y - Z @ beta, tau)))


def pinball_subgradient_margin(
    Z: np.ndarray, y: np.ndarray, tau: float, beta: np.ndarray, zero_tol: float = 1e-9
) -> float:
    """Smallest one-sided directional derivative of the mean pinball loss at
    ``beta`` over the signed coordinate directions.

    A nonnegative return certifies (coordinate-wise) first-order optimality;
    a return of ~0 with optimality indicates a flat edge, i.e. a tied argmin.
    """
    r = y - Z @ beta
    scale = max(1.0, float(np.max(np.abs(y))))
    pos = r > zero_tol * scale
    neg = r < -zero_tol * scale
    zero = ~(pos | neg)
    m = y.size
    margins = []
    for j in range(Z.shape[1]):
        for sign in (1.0, -1.0):
            a = sign * Z[:, j]
            g = -tau * a[pos].sum() + (1.0 - tau) * a[neg].sum()
            g += tau * np.maximum(-a[zero], 0.0).sum()
            g += (1.0 - tau) * np.maximum(a[zero], 0.0).sum()
            margins.append(g / m)
    return float(min(margins))


def _solve_pinball_dual(Z: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    """Exact pinball minimization via the box-constrained dual LP.

    The dual has one variable per row, bounded in [-(1-tau)/m, tau/m], and
    only ``cols`` equality constraints; the primal coefficients are the
    marginals of those constraints.  Orders of magnitude faster than the
    primal LP for long designs.
    """
    m = y.size
    res = linprog(
        c=-y,
        A_eq=Z.T,
        b_eq=np.zeros(Z.shape[1]),
        bounds=[(-(1.0 - tau) / m, tau / m)] * m,
        method="highs",
    )
    if res.status != 0:
        raise QuantileSolverError(
            f"dual pinball LP failed at tau={tau}: status {res.status} ({res.message})"
        )
    beta = np.asarray(res.eqlin.marginals, dtype=np.float64)
    # scipy's marginal sign convention has flipped across versions; accept
    # whichever sign yields the dual optimum's objective
    v_dual = -float(res.fun)
    if abs(_mean_pinball(Z, y, tau, -beta) - v_dual) < abs(
        _mean_pinball(Z, y, tau, beta) - v_dual
    ):
        beta = -beta
    return beta


def _lex_smallest_on_face(
    Z: np.ndarray, y: np.ndarray, tau: float, v_star: float
) -> np.ndarray:
    """Lexicographically smallest coefficient vector on the near-optimal face.

    Solves one primal-form LP per coordinate: minimize beta_j subject to the
    mean pinball loss staying within a tiny slack of ``v_star`` and the
    previously fixed coordinates staying at their minima.
    """
    m, p = Z.shape
    eps = _TIE_EPS * (1.0 + abs(v_star))
    # variables: (beta, u, v); Z beta + u - v = y; loss row as inequality
    A_eq = sparse.hstack(
        [sparse.csr_matrix(Z), sparse.eye(m, format="csr"), -sparse.eye(m, format="csr")]
    )
    loss_row = sparse.csr_matrix(
        np.concatenate([np.zeros(p), np.full(m, tau / m), np.full(m, (1.0 - tau) / m)])
    )
    bounds = [(None, None)] * p + [(0.0, None)] * (2 * m)
    fixed: list[float] = []
    beta = None
    for j in range(p):
        c = np.zeros(p + 2 * m)
        c[j] = 1.0
        A_ub_rows = [loss_row]
        b_ub = [v_star + eps]
        for k, val in enumerate(fixed):
            row = sparse.csr_matrix(
                (np.array([1.0]), (np.array([0]), np.array([k]))), shape=(1, p + 2 * m)
            )
            A_ub_rows.append(row)
            b_ub.append(val + _TIE_EPS)
        res = linprog(
            c=c,
            A_ub=sparse.vstack(A_ub_rows, format="csr"),
            b_ub=np.array(b_ub),
            A_eq=A_eq,
            b_eq=y,
            bounds=bounds,
            method="highs",
        )
        if res.status != 0:
            raise QuantileSolverError(
                f"tie-break LP failed at tau={tau}, coordinate {j}: {res.message}"
            )
        beta = res.x[:p]
        fixed.append(float(beta[j]))
    assert beta is not None
    return beta


def quantile_fit(Z: np.ndarray, y: np.ndarray, taus) -> QuantileFit:
    """Fit one pinball-loss minimizer per quantile level.

    Each level is solved exactly as a linear program (deterministic HiGHS
    backend).  When the argmin is a face rather than a vertex - detected via
    a zero one-sided subgradient direction - the lexicographically smallest
    vertex is selected, so e.g. an even-sample median resolves to the lower
    middle order statistic.
    """
    Z, y = _check_design(Z, y)
    taus = np.asarray(taus, dtype=np.float64)
    betas = np.empty((taus.size, Z.shape[1]))
    for i, tau in enumerate(taus):
        if not 0.0 < tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
        beta = _solve_pinball_dual(Z, y, float(tau))
        v_star = _mean_pinball(Z, y, float(tau), beta)
        margin = pinball_subgradient_margin(Z, y, float(tau), beta)
        scale = 1.0 + abs(v_star)
        if margin < -1e-7 * scale:
            raise QuantileSolverError(
                f"pinball solution at tau={tau} fails the subgradient check "
                f"(margin {margin:.3e})"
            )
        if margin < 1e-10 * scale:
            beta = _lex_smallest_on_face(Z, y, float(tau), v_star)
        betas[i] = beta
    return QuantileFit(taus=taus, betas=betas)
