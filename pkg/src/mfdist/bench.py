"""Experiment harness: budget sweeps, method comparison, and result export.

Every run is driven by a single strict JSON config carrying the suite, the
method list, the budget grid, replicate/evaluation/oracle sample counts, and
a master seed.  Replicate (method, budget, replicate) cells derive
independent generator streams from the master seed, so a config reproduces
byte-identical CSV output regardless of thread count.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BudgetExhaustedError,
    ConfigError,
    InfeasibleExploitationError,
)
from .measures import (
    EmpiricalMeasure,
    moment_summary,
    sample_inverse_transform,
    wasserstein1,
)
from .models import ModelSuite, suite_from_config
from .policy import COMMITTED, PolicyState, exploit, run_aetc_d

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "fit_tradeoff_curve",
    "run_ecdf_y",
    "run_experiment",
    "run_fixed_m",
    "run_statistics_comparison",
    "summarize_rows",
    "write_results_csv",
    "write_summary_csv",
]

_METHOD_NAMES = ("ecdf-y", "aetc-d", "aetc-d-no", "aetc-d-q", "oracle")

RESULT_COLUMNS = [
    "method",
    "budget",
    "replicate",
    "seed",
    "w1_error",
    "subset",
    "m_explore",
    "spend",
    "est_mean",
    "est_variance",
    "est_skewness",
    "est_kurtosis",
    "error",
]

SUMMARY_COLUMNS = ["method", "budget", "mean", "q05", "q50", "q95", "failures"]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "suite",
    "methods",
    "budgets",
    "replicates",
    "eval_samples",
    "oracle_samples",
    "seed",
    "eval",
    "fixed_subset",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    ``eval`` selects the error protocol: ``sampled`` draws ``eval_samples``
    inverse-transform points from each estimate and compares their empirical
    measure against the oracle; ``full`` compares the whole estimate.  The
    oracle is always an ``oracle_samples``-point empirical measure of the
    high-fidelity output, built once per experiment.
    """

    suite_spec: dict
    methods: tuple[str, ...]
    budgets: tuple[float, ...]
    replicates: int = 100
    eval_samples: int = 200
    oracle_samples: int = 1_000_000
    seed: int = 0
    eval: str = "sampled"
    fixed_subset: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not self.methods:
            raise ConfigError("at least one method is required")
        for method in self.methods:
            base = method.split(":", 1)[0]
            if base == "fixed-m":
                try:
                    m = int(method.split(":", 1)[1])
                except (IndexError, ValueError):
                    raise ConfigError(
                        f"fixed-m methods look like 'fixed-m:<m>', got {method!r}"
                    ) from None
                if m < 1:
                    raise ConfigError(f"fixed-m rate must be positive, got {m}")
                if self.fixed_subset is None:
                    raise ConfigError("fixed-m methods require 'fixed_subset'")
            elif method not in _METHOD_NAMES:
                raise ConfigError(f"unknown method {method!r}")
        if not self.budgets or any(b <= 0 for b in self.budgets):
            raise ConfigError("budgets must be positive")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise ConfigError("budgets must be strictly increasing")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.eval_samples < 1 or self.oracle_samples < 1:
            raise ConfigError("sample counts must be >= 1")
        if self.eval not in ("sampled", "full"):
            raise ConfigError(f"eval must be 'sampled' or 'full', got {self.eval!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("experiment config must be a JSON object")
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("suite", "methods", "budgets"):
            if key not in raw:
                raise ConfigError(f"config is missing required key {key!r}")
        kwargs: dict = {
            "suite_spec": raw["suite"],
            "methods": tuple(raw["methods"]),
            "budgets": tuple(float(b) for b in raw["budgets"]),
        }
        if "replicates" in raw:
            kwargs["replicates"] = int(raw["replicates"])
        if "eval_samples" in raw:
            kwargs["eval_samples"] = int(raw["eval_samples"])
        if "oracle_samples" in raw:
            kwargs["oracle_samples"] = int(raw["oracle_samples"])
        if "seed" in raw:
            kwargs["seed"] = int(raw["seed"])
        if "eval" in raw:
            kwargs["eval"] = str(raw["eval"])
        if "fixed_subset" in raw:
            kwargs["fixed_subset"] = tuple(int(i) for i in raw["fixed_subset"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def build_suite(self) -> ModelSuite:
        return suite_from_config(self.suite_spec)


@dataclass
class ResultRow:
    """One (method, budget, replicate) outcome; ``error`` tags failures."""

    method: str
    budget: float
    replicate: int
    seed: int
    w1_error: float = np.nan
    subset: tuple[int, ...] | None = None
    m_explore: int | None = None
    spend: float = np.nan
    est_mean: float = np.nan
    est_variance: float = np.nan
    est_skewness: float = np.nan
    est_kurtosis: float = np.nan
    error: str = ""
    trace: list[dict] = field(default_factory=list, repr=False)
    atoms: np.ndarray | None = field(default=None, repr=False)

    @property
    def failed(self) -> bool:
        return bool(self.error)

    def run_id(self) -> str:
        return f"{self.method.replace(':', '-')}_B{self.budget:g}_r{self.replicate}"

    def to_csv_fields(self) -> list[str]:
        subset = "" if self.subset is None else "+".join(str(i) for i in self.subset)
        m = "" if self.m_explore is None else str(self.m_explore)
        return [
            self.method,
            f"{self.budget:g}",
            str(self.replicate),
            str(self.seed),
            _fmt(self.w1_error),
            subset,
            m,
            _fmt(self.spend),
            _fmt(self.est_mean),
            _fmt(self.est_variance),
            _fmt(self.est_skewness),
            _fmt(self.est_kurtosis),
            self.error,
        ]


def _fmt(value: float) -> str:
    return "" if not np.isfinite(value) else repr(float(value))


# ---------------------------------------------------------------------------
# Single-method runners
# ---------------------------------------------------------------------------


def run_ecdf_y(suite: ModelSuite, budget: float, rng: np.random.Generator) -> EmpiricalMeasure:
    """Single-fidelity baseline: spend the whole budget on direct draws of Y."""
    n = int(np.floor(budget / suite.cost_y))
    if n < 1:
        raise BudgetExhaustedError(
            f"budget {budget} cannot afford one high-fidelity sample at {suite.cost_y}"
        )
    y, _ = suite.draw(rng, n)
    return EmpiricalMeasure.from_samples(y)


def run_fixed_m(
    suite: ModelSuite,
    budget: float,
    m: int,
    subset: tuple[int, ...],
    rng: np.random.Generator,
) -> tuple[EmpiricalMeasure, PolicyState]:
    """Deterministic variant: fixed exploration rate and a pinned subset."""
    if m < len(subset) + 2:
        raise ConfigError(
            f"fixed exploration rate {m} is below the minimum {len(subset) + 2}"
        )
    cost = m * suite.c_epr
    if budget <= cost + suite.c_ept(subset):
        raise BudgetExhaustedError(
            f"budget {budget} cannot cover {m} exploration rounds plus exploitation"
        )
    y, x = suite.draw(rng, m)
    state = PolicyState(
        budget=budget, y_epr=y, x_epr=x, spent=cost, phase=COMMITTED, chosen=subset
    )
    estimate = exploit(state, suite, variant="standard", rng=rng)
    return estimate, state


_AETC_VARIANTS = {"aetc-d": "standard", "aetc-d-no": "no-noise", "aetc-d-q": "quantile"}


def _run_method(
    method: str,
    suite: ModelSuite,
    budget: float,
    rng: np.random.Generator,
    fixed_subset: tuple[int, ...] | None,
    oracle: EmpiricalMeasure,
) -> tuple[EmpiricalMeasure, PolicyState | None]:
    if method == "ecdf-y":
        return run_ecdf_y(suite, budget, rng), None
    if method == "oracle":
        return oracle, None
    if method in _AETC_VARIANTS:
        estimate, state = run_aetc_d(suite, budget, rng, variant=_AETC_VARIANTS[method])
        return estimate, state
    if method.startswith("fixed-m:"):
        assert fixed_subset is not None
        m = int(method.split(":", 1)[1])
        estimate, state = run_fixed_m(suite, budget, m, fixed_subset, rng)
        return estimate, state
    raise ConfigError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------


def _replicate_seed(master: int, method_idx: int, budget_idx: int, replicate: int) -> np.random.SeedSequence:
    # entropy tuples make every cell's stream independent and reproducible
    return np.random.SeedSequence(
        entropy=(int(master), int(method_idx), int(budget_idx), int(replicate))
    )


def build_oracle_measure(config: ExperimentConfig, suite: ModelSuite) -> EmpiricalMeasure:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(config.seed, 0xFACE)))
    y, _ = suite.draw(rng, config.oracle_samples)
    return EmpiricalMeasure.from_samples(y)


def _evaluate(
    config: ExperimentConfig,
    estimate: EmpiricalMeasure,
    oracle: EmpiricalMeasure,
    rng: np.random.Generator,
) -> float:
    if config.eval == "full":
        return wasserstein1(estimate, oracle)
    u = 1.0 - rng.random(config.eval_samples)  # uniforms in (0, 1]
    drawn = sample_inverse_transform(estimate, u)
    return wasserstein1(EmpiricalMeasure.from_samples(drawn), oracle)


def _run_cell(
    config: ExperimentConfig,
    suite: ModelSuite,
    oracle: EmpiricalMeasure,
    method_idx: int,
    budget_idx: int,
    replicate: int,
    keep_atoms: bool = False,
) -> ResultRow:
    method = config.methods[method_idx]
    budget = config.budgets[budget_idx]
    seed_seq = _replicate_seed(config.seed, method_idx, budget_idx, replicate)
    seed = int(seed_seq.generate_state(1)[0])
    run_rng, eval_rng = (
        np.random.default_rng(child) for child in seed_seq.spawn(2)
    )
    row = ResultRow(method=method, budget=budget, replicate=replicate, seed=seed)
    try:
        estimate, state = _run_method(
            method, suite, budget, run_rng, config.fixed_subset, oracle
        )
    except (BudgetExhaustedError, InfeasibleExploitationError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    row.w1_error = _evaluate(config, estimate, oracle, eval_rng)
    row.spend = 0.0 if state is None else state.spent
    if keep_atoms:
        row.atoms = estimate.atoms
    if state is not None:
        row.subset = state.chosen
        row.m_explore = state.t
        row.trace = state.trace
    if method == "ecdf-y":
        row.spend = np.floor(budget / suite.cost_y) * suite.cost_y
    try:
        moments = moment_summary(estimate)
        row.est_mean = moments.mean
        row.est_variance = moments.variance
        row.est_skewness = moments.skewness
        row.est_kurtosis = moments.kurtosis
    except Exception:
        pass  # tiny estimates keep NaN moments; the W1 error is still valid
    return row


def run_experiment(
    config: ExperimentConfig,
    threads: int = 1,
    oracle: EmpiricalMeasure | None = None,
    keep_atoms: bool = False,
) -> tuple[list[ResultRow], list[dict]]:
    """Run every (method, budget, replicate) cell and summarize.

    Returns the rows (sorted by method, budget, replicate) and the summary
    records.  Failed replicates are tagged, excluded from means, and counted
    in the summary's ``failures`` column.  ``oracle`` may be passed in to
    share one oracle measure across related experiments.  Estimate atoms are
    retained on the rows only with ``keep_atoms`` (they can be large).
    """
    suite = config.build_suite()
    if oracle is None:
        oracle = build_oracle_measure(config, suite)
    cells = [
        (mi, bi, r)
        for mi in range(len(config.methods))
        for bi in range(len(config.budgets))
        for r in range(config.replicates)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(
                pool.map(lambda c: _run_cell(config, suite, oracle, *c, keep_atoms), cells)
            )
    else:
        rows = [_run_cell(config, suite, oracle, *cell, keep_atoms) for cell in cells]
    rows.sort(key=lambda r: (r.method, r.budget, r.replicate))
    return rows, summarize_rows(config, rows)


def nearest_rank_quantile(values: np.ndarray, p: float) -> float:
    """Nearest-rank quantile: the ceil(p*n)-th smallest value."""
    ordered = np.sort(values)
    rank = max(1, int(np.ceil(p * ordered.size)))
    return float(ordered[rank - 1])


def summarize_rows(config: ExperimentConfig, rows: list[ResultRow]) -> list[dict]:
    summary = []
    for method in config.methods:
        for budget in config.budgets:
            cell = [r for r in rows if r.method == method and r.budget == budget]
            good = np.array([r.w1_error for r in cell if not r.failed])
            record = {
                "method": method,
                "budget": budget,
                "failures": sum(r.failed for r in cell),
            }
            if good.size:
                record.update(
                    mean=float(good.mean()),
                    q05=nearest_rank_quantile(good, 0.05),
                    q50=nearest_rank_quantile(good, 0.50),
                    q95=nearest_rank_quantile(good, 0.95),
                )
            else:
                record.update(mean=np.nan, q05=np.nan, q50=np.nan, q95=np.nan)
            summary.append(record)
    return summary


# ---------------------------------------------------------------------------
# Trade-off curve fitting
# ---------------------------------------------------------------------------


def fit_tradeoff_curve(
    points: list[tuple[float, float]], budget: float, c_epr: float
) -> tuple[float, float, float]:
    """Fit mean-error(m) to a1/sqrt(m) + a2/sqrt(B/c_epr - m).

    The model is linear in (a1, a2), so this is a two-column least-squares
    problem.  Negative coefficients are clipped to zero with a warning.
    Returns (a1, a2, residual_norm), the norm taken after any clipping.
    """
    if len(points) < 3:
        raise ValueError(f"need at least 3 points to fit the curve, got {len(points)}")
    m = np.array([p[0] for p in points], dtype=np.float64)
    err = np.array([p[1] for p in points], dtype=np.float64)
    limit = budget / c_epr
    if np.any(m <= 0) or np.any(m >= limit):
        raise ValueError(f"exploration rates must lie strictly inside (0, {limit})")
    if np.all(m == m[0]):
        raise ValueError("all exploration rates are equal; the basis is degenerate")
    basis = np.column_stack([1.0 / np.sqrt(m), 1.0 / np.sqrt(limit - m)])
    coef, _, _, _ = np.linalg.lstsq(basis, err, rcond=None)
    if np.any(coef < -1e-9 * max(1.0, float(np.max(np.abs(coef))))):
        warnings.warn(
            f"unconstrained trade-off fit gave negative coefficients {coef}; clipping",
            stacklevel=2,
        )
    coef = np.maximum(coef, 0.0)
    residual = float(np.linalg.norm(err - basis @ coef))
    return float(coef[0]), float(coef[1]), residual


# ---------------------------------------------------------------------------
# Moment-statistics comparison
# ---------------------------------------------------------------------------


def run_statistics_comparison(
    config: ExperimentConfig,
    threads: int = 1,
    rows: list[ResultRow] | None = None,
) -> list[dict]:
    """Per-(method, budget) MSE of each moment statistic against the oracle.

    Reuses precomputed rows when given, otherwise runs the experiment.  The
    pseudo-method ``oracle`` passes the oracle measure through and therefore
    pins the MSE floor at zero.
    """
    suite = config.build_suite()
    oracle = build_oracle_measure(config, suite)
    if rows is None:
        rows, _ = run_experiment(config, threads=threads, oracle=oracle)
    target = moment_summary(oracle)
    targets = {
        "mean": target.mean,
        "variance": target.variance,
        "skewness": target.skewness,
        "kurtosis": target.kurtosis,
    }
    out = []
    for method in config.methods:
        for budget in config.budgets:
            cell = [r for r in rows if r.method == method and r.budget == budget and not r.failed]
            record = {"method": method, "budget": budget}
            for stat, truth in targets.items():
                values = np.array([getattr(r, f"est_{stat}") for r in cell])
                values = values[np.isfinite(values)]
                record[f"mse_{stat}"] = (
                    float(np.mean((values - truth) ** 2)) if values.size else np.nan
                )
            out.append(record)
    return out


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def write_results_csv(rows: list[ResultRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(row.to_csv_fields())


def write_summary_csv(summary: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for rec in summary:
            writer.writerow(
                [
                    rec["method"],
                    f"{rec['budget']:g}",
                    _fmt(rec["mean"]),
                    _fmt(rec["q05"]),
                    _fmt(rec["q50"]),
                    _fmt(rec["q95"]),
                    str(rec["failures"]),
                ]
            )


def write_traces(rows: list[ResultRow], trace_dir: str | Path) -> None:
    trace_dir = Path(trace_dir)
    trace_dir.mkdir(parents=True, exist_ok=True)
    for row in rows:
        if row.trace:
            with open(trace_dir / f"{row.run_id()}.jsonl", "w", encoding="utf-8") as fh:
                for rec in row.trace:
                    fh.write(json.dumps(rec) + "\n")


def write_samples(rows: list[ResultRow], samples_dir: str | Path) -> None:
    samples_dir = Path(samples_dir)
    samples_dir.mkdir(parents=True, exist_ok=True)
    for row in rows:
        if row.atoms is not None:
            np.savetxt(samples_dir / f"{row.run_id()}.csv", row.atoms, fmt="%.17g")


def results_csv_text(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow(row.to_csv_fields())
    return buf.getvalue()
