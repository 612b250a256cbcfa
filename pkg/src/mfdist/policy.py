"""Adaptive explore-then-commit policy for distribution learning.

The policy repeatedly scores every surrogate subset on the exploration data
gathered so far, using a computable loss surrogate that balances regression
error (decaying with the exploration rate m) against empirical-measure error
(decaying with the exploitation rate).  It grows the exploration set on a
doubling/averaging schedule until the estimated optimal exploration rate of
the best subset has been reached, then commits and spends the remaining
budget sampling only that subset through a regression emulator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetExhaustedError,
    InfeasibleExploitationError,
    PolicyError,
)
from .measures import EmpiricalMeasure, j_functionals
from .models import ModelSuite
from .regress import FitResult, QuantileFit, design_matrix, ols_fit, quantile_fit

__all__ = [
    "Emulator",
    "PolicyState",
    "SubsetScore",
    "aetc_d_step",
    "efficiency_ratio",
    "exploit",
    "max_exploration_rounds",
    "next_round_target",
    "optimal_exploration",
    "optimal_loss_value",
    "oracle_optimum",
    "pilot_statistics",
    "run_aetc_d",
    "score_subsets",
    "start_exploration",
    "surrogate_loss",
]

EXPLORING = "exploring"
COMMITTED = "committed"
EXHAUSTED = "exhausted"

# grid size for the uniform quantile levels used by the quantile emulator
QUANTILE_GRID_SIZE = 100

# residuals at/below this relative size count as an exactly-interpolating fit,
# for which the loss surrogate is undefined (no error left to balance)
_ZERO_RESIDUAL_RTOL = 1e-10


# ---------------------------------------------------------------------------
# Loss surrogate
# ---------------------------------------------------------------------------


def surrogate_loss(k1: float, k2: float, m: float, budget: float, c_epr: float) -> float:
    """sqrt(k1/m) + sqrt(k2/(B - c_epr*m)): the computable loss upper bound.

    Strictly convex in m on (0, B/c_epr) whenever k1, k2 > 0.
    """
    if k1 < 0 or k2 < 0:
        raise ValueError("k1 and k2 must be nonnegative")
    if m <= 0:
        raise ValueError(f"exploration rate must be positive, got {m!r}")
    if m >= budget / c_epr:
        raise ValueError(
            f"exploration rate {m} exceeds the affordable maximum {budget / c_epr}"
        )
    return float(np.sqrt(k1 / m) + np.sqrt(k2 / (budget - c_epr * m)))


def optimal_exploration(k1: float, k2: float, budget: float, c_epr: float) -> float:
    """Unique minimizer of :func:`surrogate_loss` in m; scales linearly in B."""
    if min(k1, k2, budget, c_epr) <= 0:
        raise ValueError("k1, k2, budget, and c_epr must all be positive")
    return budget / (c_epr + (c_epr**2 * k2 / k1) ** (1.0 / 3.0))


def optimal_loss_value(k1: float, k2: float, budget: float, c_epr: float) -> float:
    """Closed form of the surrogate loss at its minimizer."""
    if min(k1, k2, budget, c_epr) <= 0:
        raise ValueError("k1, k2, budget, and c_epr must all be positive")
    return ((c_epr * k1) ** (1.0 / 3.0) + k2 ** (1.0 / 3.0)) ** 1.5 / np.sqrt(budget)


def oracle_optimum(
    k1: dict[tuple[int, ...], float],
    k2: dict[tuple[int, ...], float],
    budget: float,
    c_epr: float,
) -> tuple[tuple[int, ...], float, float]:
    """Best subset under the loss surrogate, given oracle k1/k2 per subset.

    Returns ``(subset, m_star, loss_value)``.  Ties resolve to the smallest
    cardinality, then lexicographic order, matching the adaptive policy.
    """
    if set(k1) != set(k2) or not k1:
        raise ValueError("k1 and k2 must cover the same nonempty subset collection")
    ordered = sorted(k1, key=lambda s: (len(s), s))
    best = None
    best_val = np.inf
    for subset in ordered:
        val = optimal_loss_value(k1[subset], k2[subset], budget, c_epr)
        if val < best_val:
            best, best_val = subset, val
    assert best is not None
    return best, optimal_exploration(k1[best], k2[best], budget, c_epr), best_val


def efficiency_ratio(
    k1_opt: float,
    k2_opt: float,
    j0_y: float,
    cost_y: float,
    c_epr: float,
    budget: float = 1.0,
) -> float:
    """Diagnostic ratio of the direct-sampling error lower bound to the
    surrogate-policy optimum; values above 1 favor the multifidelity policy.

    Both sides scale as 1/sqrt(B), so the result does not depend on
    ``budget`` (kept as an argument only to mirror the defining formula).
    """
    if min(k1_opt, k2_opt, j0_y, cost_y, c_epr, budget) <= 0:
        raise ValueError("all arguments must be positive")
    numerator = np.sqrt(cost_y * j0_y**2 / (2.0 * budget))
    return float(numerator / optimal_loss_value(k1_opt, k2_opt, budget, c_epr))


# ---------------------------------------------------------------------------
# Policy state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubsetScore:
    """Exploration-time statistics of one candidate subset."""

    subset: tuple[int, ...]
    fit: FitResult
    k1_hat: float
    k2_hat: float
    m_star_hat: float
    rho: float
    eligible: bool

    def to_record(self) -> dict:
        # non-finite sentinels (rho = inf, unset NaNs) export as null so the
        # trace stays strict JSON; the eligible flag carries their meaning
        def fin(v: float):
            return float(v) if np.isfinite(v) else None

        return {
            "S": list(self.subset),
            "k1": fin(self.k1_hat),
            "k2": fin(self.k2_hat),
            "m_star": fin(self.m_star_hat),
            "rho": fin(self.rho),
            "eligible": self.eligible,
        }


@dataclass
class PolicyState:
    """Trajectory state of one adaptive run; mutated sequentially by the steps."""

    budget: float
    y_epr: np.ndarray
    x_epr: np.ndarray
    spent: float
    phase: str = EXPLORING
    chosen: tuple[int, ...] | None = None
    trace: list[dict] = field(default_factory=list)

    @property
    def t(self) -> int:
        return int(self.y_epr.size)

    def trace_jsonl(self) -> str:
        return "\n".join(json.dumps(rec) for rec in self.trace)


def max_exploration_rounds(suite: ModelSuite, budget: float) -> int:
    return int(np.floor(budget / suite.c_epr))


def start_exploration(
    suite: ModelSuite, budget: float, rng: np.random.Generator
) -> PolicyState:
    """Draw the mandatory n+2 initial joint samples and open the ledger."""
    t0 = suite.n + 2
    cost = t0 * suite.c_epr
    if cost > budget:
        raise BudgetExhaustedError(
            f"budget {budget} cannot cover the {t0} initial exploration rounds "
            f"(cost {cost})"
        )
    y, x = suite.draw(rng, t0)
    return PolicyState(budget=budget, y_epr=y, x_epr=x, spent=cost)


def _subset_score(
    suite: ModelSuite,
    subset: tuple[int, ...],
    y: np.ndarray,
    x: np.ndarray,
    j1_y: float,
    budget: float,
) -> SubsetScore:
    t = y.size
    Z = design_matrix(suite.features(subset, x))
    cols = Z.shape[1]
    ineligible = SubsetScore(
        subset=subset,
        fit=FitResult(np.full(cols, np.nan), np.full(t, np.nan), np.nan, False),
        k1_hat=np.nan,
        k2_hat=np.nan,
        m_star_hat=np.nan,
        rho=np.inf,
        eligible=False,
    )
    if t <= cols:
        return ineligible
    fit = ols_fit(Z, y)
    _, j1_eps = j_functionals(EmpiricalMeasure.from_samples(fit.residuals))
    scale = max(1.0, float(np.max(np.abs(y))))
    if float(np.max(np.abs(fit.residuals))) <= _ZERO_RESIDUAL_RTOL * scale:
        k1 = 0.0
    else:
        # the online estimate inflates the dimension term by one column
        k1 = (2.0 * np.sqrt(cols + 1.0) * np.sqrt(fit.sigma2_hat) + j1_eps) ** 2
    k2 = suite.c_ept(subset) * j1_y**2
    eligible = fit.rank_ok and k1 > 0.0
    if not eligible:
        return SubsetScore(
            subset=subset, fit=fit, k1_hat=k1, k2_hat=k2,
            m_star_hat=np.nan, rho=np.inf, eligible=False,
        )
    c_epr = suite.c_epr
    m_star = optimal_exploration(k1, k2, budget, c_epr)
    m_eval = max(m_star, float(t))
    if m_eval >= budget / c_epr:
        rho = np.inf
    else:
        rho = surrogate_loss(k1, k2, m_eval, budget, c_epr)
    return SubsetScore(
        subset=subset, fit=fit, k1_hat=k1, k2_hat=k2,
        m_star_hat=m_star, rho=rho, eligible=True,
    )


def score_subsets(state: PolicyState, suite: ModelSuite) -> list[SubsetScore]:
    """Score every nonempty subset on the current exploration data.

    Subsets whose design has too few rows, is rank-deficient, or fits the
    responses exactly (k1 = 0, so there is no exploration error left to
    balance) are marked ineligible and carry rho = inf.
    """
    if state.t < suite.n + 2:
        raise PolicyError(f"scoring requires t >= {suite.n + 2}, have t={state.t}")
    _, j1_y = j_functionals(EmpiricalMeasure.from_samples(state.y_epr))
    return [
        _subset_score(suite, subset, state.y_epr, state.x_epr, j1_y, state.budget)
        for subset in suite.subsets()
    ]


def _argmin_rho(scores: list[SubsetScore]) -> SubsetScore | None:
    best = None
    for score in scores:  # scores come ordered by (cardinality, lex): ties keep first
        if score.eligible and (best is None or score.rho < best.rho):
            best = score
    return best


def _zero_residual_fallback(
    scores: list[SubsetScore], suite: ModelSuite
) -> SubsetScore:
    candidates = [s for s in scores if s.fit.rank_ok and s.k1_hat == 0.0]
    if not candidates:
        raise PolicyError(
            "no subset is scorable: every candidate is rank-deficient or has "
            "too few exploration rows even at the maximum exploration rate"
        )
    return min(candidates, key=lambda s: (suite.c_ept(s.subset), len(s.subset), s.subset))


def aetc_d_step(state: PolicyState, suite: ModelSuite, rng: np.random.Generator) -> PolicyState:
    """One loop round: score, pick the front-runner, then grow or commit.

    If the front-runner's estimated optimal rate exceeds 2t the exploration
    set doubles; if it lies in (t, 2t] the gap is halved; otherwise the
    policy commits.  Exploration never exceeds M = floor(B / c_epr); a round
    that cannot make integer progress commits with the current front-runner.
    """
    if state.phase != EXPLORING:
        raise PolicyError(f"cannot step a policy in phase {state.phase!r}")
    t = state.t
    M = max_exploration_rounds(suite, state.budget)
    scores = score_subsets(state, suite)
    best = _argmin_rho(scores)
    if best is None:
        if any((not s.eligible) and s.fit.rank_ok and s.k1_hat == 0.0 for s in scores):
            # a perfect surrogate needs no exploration-error balancing: commit
            # to the cheapest exactly-fitting subset right away
            best = _zero_residual_fallback(scores, suite)
            state.trace.append(
                {"t": t, "spend": state.spent,
                 "scores": [s.to_record() for s in scores],
                 "chosen": list(best.subset)}
            )
            state.phase = COMMITTED
            state.chosen = best.subset
            return state
        # no subset has enough rows yet (expanded designs at small t): the
        # only sensible action is more exploration, on the doubling schedule
        new_t = min(2 * t, M)
        if new_t == t:
            raise PolicyError(
                "every subset remains unscorable at the maximum exploration rate"
            )
        state.trace.append(
            {"t": t, "spend": state.spent,
             "scores": [s.to_record() for s in scores], "chosen": None}
        )
        _take_samples(state, suite, rng, new_t - t)
        return state

    state.trace.append(
        {"t": t, "spend": state.spent,
         "scores": [s.to_record() for s in scores], "chosen": list(best.subset)}
    )
    new_t, commit = next_round_target(t, best.m_star_hat, M)
    if commit:
        state.phase = COMMITTED
        state.chosen = best.subset
        return state
    _take_samples(state, suite, rng, new_t - t)
    return state


def next_round_target(t: int, m_star: float, max_rounds: int) -> tuple[int, bool]:
    """Exploration-schedule arithmetic for one round.

    Doubles while the estimated optimal rate is more than 2t, halves the gap
    while it lies in (t, 2t], and commits otherwise.  The target never
    exceeds ``max_rounds``; a round that cannot make integer progress (the
    gap has closed, or the cap is reached) commits.
    """
    if m_star > 2 * t:
        new_t = min(2 * t, max_rounds)
    elif m_star > t:
        new_t = min(int(np.floor((t + m_star) / 2.0)), max_rounds)
    else:
        return t, True
    if new_t <= t:
        return t, True
    return new_t, False


def _take_samples(
    state: PolicyState, suite: ModelSuite, rng: np.random.Generator, count: int
) -> None:
    y_new, x_new = suite.draw(rng, count)
    state.y_epr = np.concatenate([state.y_epr, y_new])
    state.x_epr = np.vstack([state.x_epr, x_new])
    state.spent += count * suite.c_epr


# ---------------------------------------------------------------------------
# Exploitation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Emulator:
    """Frozen regression emulator used during exploitation.

    ``residual_pool`` holds the exploration residuals for bootstrap noise
    (standard variant); ``quantiles`` holds the per-level coefficients for
    the inverse-transform variant.
    """

    subset: tuple[int, ...]
    beta_hat: np.ndarray
    variant: str
    residual_pool: np.ndarray | None = None
    quantiles: QuantileFit | None = None


def _build_emulator(
    state: PolicyState, suite: ModelSuite, variant: str
) -> Emulator:
    assert state.chosen is not None
    subset = state.chosen
    Z = design_matrix(suite.features(subset, state.x_epr))
    fit = ols_fit(Z, state.y_epr)
    if variant == "quantile":
        k = QUANTILE_GRID_SIZE
        taus = np.arange(1, k + 1) / (k + 1.0)
        return Emulator(
            subset=subset, beta_hat=fit.beta_hat, variant=variant,
            quantiles=quantile_fit(Z, state.y_epr, taus),
        )
    return Emulator(
        subset=subset, beta_hat=fit.beta_hat, variant=variant,
        residual_pool=fit.residuals,
    )


def exploit(
    state: PolicyState,
    suite: ModelSuite,
    variant: str = "standard",
    rng: np.random.Generator | None = None,
) -> EmpiricalMeasure:
    """Spend the remaining budget sampling the committed subset.

    Draws N fresh joint samples restricted to the subset (each costing its
    exploitation rate), evaluates the regression emulator on them, and
    returns the resulting empirical measure.  Variants: ``standard`` adds a
    uniformly resampled exploration residual to each draw, ``no-noise`` adds
    nothing, ``quantile`` evaluates per-level coefficients at levels drawn
    uniformly from a fixed grid.  Exploration samples are never recycled.
    """
    if state.phase != COMMITTED or state.chosen is None:
        raise PolicyError(f"cannot exploit from phase {state.phase!r}")
    if variant not in ("standard", "no-noise", "quantile"):
        raise ValueError(f"unknown exploitation variant {variant!r}")
    if rng is None:
        raise ValueError("exploitation needs a random generator")
    subset = state.chosen
    c_ept = suite.c_ept(subset)
    n_exploit = int(np.floor((state.budget - state.spent) / c_ept))
    while n_exploit > 0 and state.spent + n_exploit * c_ept > state.budget:
        n_exploit -= 1  # floating-point dust must never overdraw the ledger
    if n_exploit < 1:
        raise InfeasibleExploitationError(
            f"exploration spent {state.spent} of {state.budget}; "
            f"no exploitation sample at cost {c_ept} is affordable"
        )
    emulator = _build_emulator(state, suite, variant)
    # draw order is part of the determinism contract: surrogate inputs first,
    # then the noise indices
    _, x = suite.draw(rng, n_exploit)
    Z = design_matrix(suite.features(subset, x))
    if variant == "quantile":
        assert emulator.quantiles is not None
        idx = rng.integers(0, emulator.quantiles.taus.size, size=n_exploit)
        values = emulator.quantiles.predict(Z, idx)
    else:
        values = Z @ emulator.beta_hat
        if variant == "standard":
            assert emulator.residual_pool is not None
            values = values + _bootstrap_residuals(
                emulator.residual_pool, n_exploit, rng
            )
    state.spent += n_exploit * c_ept
    state.phase = EXHAUSTED
    return EmpiricalMeasure.from_samples(values)


def _bootstrap_residuals(
    pool: np.ndarray, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Iid uniform resample of the exploration residuals."""
    return pool[rng.integers(0, pool.size, size=size)]


def run_aetc_d(
    suite: ModelSuite,
    budget: float,
    rng: np.random.Generator,
    variant: str = "standard",
) -> tuple[EmpiricalMeasure, PolicyState]:
    """Full adaptive run: initial samples, loop rounds, commit, exploit."""
    state = start_exploration(suite, budget, rng)
    while state.phase == EXPLORING:
        aetc_d_step(state, suite, rng)
    estimate = exploit(state, suite, variant=variant, rng=rng)
    return estimate, state


# ---------------------------------------------------------------------------
# Oracle statistics from a pilot sample
# ---------------------------------------------------------------------------


def pilot_statistics(
    suite: ModelSuite, n_pilot: int, rng: np.random.Generator
) -> dict:
    """Estimate per-subset oracle k1/k2 (and J-functionals of Y) offline.

    Unlike the online scores, the oracle k1 uses the plain dimension term
    sqrt(cols), i.e. sqrt(s+1) for s regression features.
    """
    y, x = suite.draw(rng, n_pilot)
    j0_y, j1_y = j_functionals(EmpiricalMeasure.from_samples(y))
    k1: dict[tuple[int, ...], float] = {}
    k2: dict[tuple[int, ...], float] = {}
    sigma2: dict[tuple[int, ...], float] = {}
    for subset in suite.subsets():
        Z = design_matrix(suite.features(subset, x))
        fit = ols_fit(Z, y)
        _, j1_eps = j_functionals(EmpiricalMeasure.from_samples(fit.residuals))
        k1[subset] = (
            2.0 * np.sqrt(Z.shape[1]) * np.sqrt(fit.sigma2_hat) + j1_eps
        ) ** 2
        k2[subset] = suite.c_ept(subset) * j1_y**2
        sigma2[subset] = fit.sigma2_hat
    return {"k1": k1, "k2": k2, "sigma2": sigma2, "j0_y": j0_y, "j1_y": j1_y}
