"""Multifidelity model suites: joint samplers with per-model costs.

A :class:`ModelSuite` bundles a seeded joint sampler of the high-fidelity
output and its low-fidelity surrogates, the declared per-model costs, and a
feature map that turns a surrogate subset into regression features.  Costs
are declared, never measured: one exploration round (all models) costs
``c_epr``; one exploitation round of subset S costs ``c_ept(S)`` regardless
of any feature expansion.

Draws use numpy's PCG64 generator, a fixed documented algorithm, so a given
seed reproduces the same stream on every platform.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, TableParseError

__all__ = [
    "MAX_MODELS",
    "FeatureMap",
    "ModelSuite",
    "SampleTable",
    "all_subsets",
    "cubic_expansion",
    "expanded_suite",
    "identity_features",
    "ishigami_suite",
    "quadratic_interaction_expansion",
    "suite_from_config",
    "table_suite",
]

# subset scoring enumerates 2^n - 1 candidates; past this it is a config error
MAX_MODELS = 16

# a monomial in the low-fidelity outputs: ((model_index, power), ...), 1-based
Monomial = tuple[tuple[int, int], ...]

Sampler = Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]


def all_subsets(n: int) -> list[tuple[int, ...]]:
    """Nonempty subsets of {1..n}, smallest cardinality first, then lexicographic.

    This is the canonical scoring/tie-break order used by the policy.
    """
    out: list[tuple[int, ...]] = []
    for size in range(1, n + 1):
        out.extend(combinations(range(1, n + 1), size))
    return out


@dataclass(frozen=True)
class FeatureMap:
    """Maps a surrogate subset to its regression features (intercept excluded).

    Every subset always gets the identity features of its own models; the
    optional ``extra`` monomials are included for a subset exactly when every
    model they reference belongs to it, which realizes per-subset feature
    spans like {X1, X1^2, X1^3} without changing exploitation costs.
    """

    n: int
    extra: tuple[Monomial, ...] = ()

    def __post_init__(self) -> None:
        for mono in self.extra:
            for idx, power in mono:
                if not 1 <= idx <= self.n:
                    raise ConfigError(
                        f"feature transform references model {idx}, "
                        f"but the suite has models 1..{self.n}"
                    )
                if power < 1:
                    raise ConfigError(f"monomial power must be >= 1, got {power}")

    def terms(self, subset: tuple[int, ...]) -> list[Monomial]:
        base: list[Monomial] = [((i, 1),) for i in subset]
        members = set(subset)
        return base + [
            mono for mono in self.extra if all(i in members for i, _ in mono)
        ]

    def build(self, subset: tuple[int, ...], x: np.ndarray) -> np.ndarray:
        """Feature block (rows, k) for a subset, from raw draws x of shape (rows, n)."""
        x = np.atleast_2d(x)
        cols = []
        for mono in self.terms(subset):
            col = np.ones(x.shape[0])
            for idx, power in mono:
                col = col * x[:, idx - 1] ** power
            cols.append(col)
        return np.column_stack(cols)


def identity_features(n: int) -> FeatureMap:
    return FeatureMap(n=n)


def cubic_expansion(n: int) -> FeatureMap:
    """Adds squares and cubes of every surrogate (the enlarged feature span)."""
    extra: list[Monomial] = []
    for i in range(1, n + 1):
        extra.append(((i, 2),))
        extra.append(((i, 3),))
    return FeatureMap(n=n, extra=tuple(extra))


def quadratic_interaction_expansion(n: int) -> FeatureMap:
    """Adds squares and pairwise products of the surrogates."""
    extra: list[Monomial] = [((i, 2),) for i in range(1, n + 1)]
    extra.extend(((i, 1), (j, 1)) for i, j in combinations(range(1, n + 1), 2))
    return FeatureMap(n=n, extra=tuple(extra))


_EXPANSIONS: dict[str, Callable[[int], FeatureMap]] = {
    "none": identity_features,
    "L": cubic_expansion,
    "quadratic-interactions": quadratic_interaction_expansion,
}


@dataclass(frozen=True)
class ModelSuite:
    """Joint sampler of (Y, X1..Xn) plus cost and feature metadata.

    ``sampler(rng, size)`` must return ``(y, x)`` with shapes (size,) and
    (size, n); draws across calls are iid continuations of the generator's
    stream.  A single generator must not be shared across threads; spawn
    independent streams per worker instead.
    """

    name: str
    cost_y: float
    costs: tuple[float, ...]
    sampler: Sampler = field(repr=False)
    feature_map: FeatureMap | None = None

    def __post_init__(self) -> None:
        if self.cost_y <= 0 or any(c <= 0 for c in self.costs):
            raise ConfigError("all model costs must be positive")
        if len(self.costs) == 0:
            raise ConfigError("a suite needs at least one low-fidelity model")
        if len(self.costs) > MAX_MODELS:
            raise ConfigError(
                f"{len(self.costs)} low-fidelity models exceed the cap of {MAX_MODELS} "
                "(subset enumeration is exponential)"
            )
        if self.feature_map is None:
            object.__setattr__(self, "feature_map", identity_features(len(self.costs)))
        elif self.feature_map.n != len(self.costs):
            raise ConfigError("feature map and cost vector disagree on model count")

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def c_epr(self) -> float:
        """Cost of one exploration round: sample every model jointly."""
        return self.cost_y + float(sum(self.costs))

    def c_ept(self, subset: tuple[int, ...]) -> float:
        """Cost of one exploitation round of a subset (feature expansion is free)."""
        return float(sum(self.costs[i - 1] for i in subset))

    def draw(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        y, x = self.sampler(rng, size)
        y = np.asarray(y, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if y.shape != (size,) or x.shape != (size, self.n):
            raise ValueError(
                f"sampler returned shapes {y.shape}, {x.shape}; "
                f"expected ({size},), ({size}, {self.n})"
            )
        return y, x

    def features(self, subset: tuple[int, ...], x: np.ndarray) -> np.ndarray:
        assert self.feature_map is not None
        return self.feature_map.build(subset, x)

    def subsets(self) -> list[tuple[int, ...]]:
        return all_subsets(self.n)


# ---------------------------------------------------------------------------
# Built-in suites
# ---------------------------------------------------------------------------


def _ishigami_sampler(variant: str, a: float, b: float, c: float, d: float) -> Sampler:
    def sample(rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        z = rng.uniform(-np.pi, np.pi, size=(size, 5))
        s1 = np.sin(z[:, 0])
        s2sq = np.sin(z[:, 1]) ** 2
        z3q = z[:, 2] ** 4
        y = s1 + a * s2sq + b * z3q * s1 + c * np.sin(z[:, 3]) ** 3 + d * np.sin(z[:, 4]) ** 4
        if variant == "perfect":
            x1 = s1 + a * s2sq + b * z3q * s1 + c * np.sin(z[:, 3]) ** 3
            x2 = s1 + a * s2sq + b * z3q * s1
        else:
            x1 = s1 + 0.95 * a * s2sq + b * z3q * s1
            x2 = s1 + 0.6 * a * s2sq + 9.0 * b * z[:, 2] ** 2 * s1
        return y, np.column_stack([x1, x2])

    return sample


def ishigami_suite(
    variant: str = "perfect",
    a: float = 5.0,
    b: float = 0.1,
    c: float | None = None,
    d: float | None = None,
    cost_y: float = 1.0,
    costs: tuple[float, float] = (0.05, 0.001),
) -> ModelSuite:
    """Two-surrogate algebraic benchmark suite.

    The high-fidelity output is a five-input oscillatory function of iid
    Unif(-pi, pi) variables.  The ``perfect`` variant's surrogates are exact
    partial sums of it, so the linear conditional-mean assumption holds; the
    ``approx`` variant perturbs the surrogate coefficients so it only holds
    approximately.  Unspecified c, d default to (1, 0.1) for ``perfect`` and
    (0, 0) for ``approx``, the settings of the two benchmark studies.
    """
    if variant not in ("perfect", "approx"):
        raise ConfigError(f"unknown variant {variant!r}; expected 'perfect' or 'approx'")
    if c is None:
        c = 1.0 if variant == "perfect" else 0.0
    if d is None:
        d = 0.1 if variant == "perfect" else 0.0
    return ModelSuite(
        name=f"ishigami-{variant}",
        cost_y=cost_y,
        costs=tuple(costs),
        sampler=_ishigami_sampler(variant, a, b, c, d),
    )


def expanded_suite(base: ModelSuite, expansion: FeatureMap | str) -> ModelSuite:
    """Same joint law and costs as ``base``, with a richer per-subset feature span."""
    if isinstance(expansion, str):
        try:
            expansion = _EXPANSIONS[expansion](base.n)
        except KeyError:
            raise ConfigError(
                f"unknown expansion {expansion!r}; expected one of {sorted(_EXPANSIONS)}"
            ) from None
    return replace(
        base, name=f"{base.name}+{len(expansion.extra)}feat", feature_map=expansion
    )


# ---------------------------------------------------------------------------
# Tabulated samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleTable:
    """Precomputed joint draws loaded from disk.

    Sampling from a table is uniform with replacement, i.e. a bootstrap
    approximation of the original joint law, so independent-draw reasoning
    holds only up to the table's own sampling error.
    """

    y: np.ndarray
    x: np.ndarray
    cost_y: float
    costs: tuple[float, ...]

    @property
    def rows(self) -> int:
        return int(self.y.size)

    @classmethod
    def from_csv(cls, path: str | Path, costs_path: str | Path) -> "SampleTable":
        path = Path(path)
        with open(costs_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        unknown = set(meta) - {"cost_y", "costs"}
        if unknown:
            raise ConfigError(f"unknown cost metadata keys: {sorted(unknown)}")
        cost_y = float(meta["cost_y"])
        costs = tuple(float(v) for v in meta["costs"])
        n = len(costs)
        expected_header = ["y"] + [f"x{i}" for i in range(1, n + 1)]
        y_rows: list[float] = []
        x_rows: list[list[float]] = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != expected_header:
                raise TableParseError(
                    f"{path}: line 1: expected header {','.join(expected_header)!r}, "
                    f"got {header!r}"
                )
            for lineno, row in enumerate(reader, start=2):
                if len(row) != n + 1:
                    raise TableParseError(
                        f"{path}: line {lineno}: expected {n + 1} fields, got {len(row)}"
                    )
                try:
                    values = [float(v) for v in row]
                except ValueError as exc:
                    raise TableParseError(f"{path}: line {lineno}: {exc}") from None
                y_rows.append(values[0])
                x_rows.append(values[1:])
        if not y_rows:
            raise TableParseError(f"{path}: table has a header but no data rows")
        return cls(
            y=np.asarray(y_rows), x=np.asarray(x_rows), cost_y=cost_y, costs=costs
        )

    def to_csv(self, path: str | Path, costs_path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["y"] + [f"x{i}" for i in range(1, len(self.costs) + 1)])
            for yi, xi in zip(self.y, self.x):
                writer.writerow([repr(float(yi))] + [repr(float(v)) for v in xi])
        with open(costs_path, "w", encoding="utf-8") as fh:
            json.dump({"cost_y": self.cost_y, "costs": list(self.costs)}, fh)


def table_suite(table: SampleTable, name: str = "table") -> ModelSuite:
    """Suite whose sampler bootstraps rows of a precomputed table."""
    if table.rows == 0:
        raise TableParseError("cannot build a suite from an empty table")

    def sample(rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        idx = rng.integers(0, table.rows, size=size)
        return table.y[idx], table.x[idx]

    return ModelSuite(
        name=name, cost_y=table.cost_y, costs=table.costs, sampler=sample
    )


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------

_SUITE_KEYS = {
    "name",
    "a",
    "b",
    "c",
    "d",
    "cost_y",
    "costs",
    "expansion",
    "path",
    "costs_path",
}


def suite_from_config(spec: dict) -> ModelSuite:
    """Build a suite from its JSON description (strict: unknown keys rejected)."""
    if not isinstance(spec, dict):
        raise ConfigError("suite config must be a JSON object")
    unknown = set(spec) - _SUITE_KEYS
    if unknown:
        raise ConfigError(f"unknown suite config keys: {sorted(unknown)}")
    name = spec.get("name")
    if name in ("ishigami-perfect", "ishigami-approx"):
        kwargs = {}
        for key in ("a", "b", "c", "d", "cost_y"):
            if key in spec:
                kwargs[key] = float(spec[key])
        if "costs" in spec:
            kwargs["costs"] = tuple(float(v) for v in spec["costs"])
        suite = ishigami_suite(variant=name.split("-")[1], **kwargs)
    elif name == "table":
        if "path" not in spec or "costs_path" not in spec:
            raise ConfigError("table suites need 'path' and 'costs_path'")
        for key in ("a", "b", "c", "d", "cost_y", "costs"):
            if key in spec:
                raise ConfigError(f"{key!r} is not valid for table suites")
        suite = table_suite(SampleTable.from_csv(spec["path"], spec["costs_path"]))
    else:
        raise ConfigError(
            f"unknown suite name {name!r}; expected 'ishigami-perfect', "
            "'ishigami-approx', or 'table'"
        )
    expansion = spec.get("expansion", "none")
    if expansion != "none":
        suite = expanded_suite(suite, expansion)
    return suite
