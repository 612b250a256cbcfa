import numpy as np
import pytest
from scipy import integrate, stats

from mfdist.errors import InsufficientSampleError
from mfdist.measures import (
    EmpiricalMeasure,
    cdf_at,
    j_functionals,
    kolmogorov,
    moment_summary,
    quantile,
    sample_inverse_transform,
    wasserstein1,
)

from oracles import w1_bruteforce_assignment, w1_quantile_grid


def uniform_measure(*atoms) -> EmpiricalMeasure:
    return EmpiricalMeasure.from_samples(np.array(atoms, dtype=float))


def random_measure(rng, max_atoms=12) -> EmpiricalMeasure:
    n = int(rng.integers(1, max_atoms + 1))
    atoms = np.sort(rng.normal(scale=3.0, size=n))
    if rng.random() < 0.5:
        return EmpiricalMeasure.from_samples(atoms)
    w = rng.uniform(0.1, 1.0, size=n)
    return EmpiricalMeasure(atoms, w / w.sum())


class TestConstruction:
    def test_from_samples_sorts_and_uniform_weights(self):
        m = EmpiricalMeasure.from_samples([3.0, 1.0, 2.0, 1.0])
        assert np.array_equal(m.atoms, [1.0, 1.0, 2.0, 3.0])
        assert np.allclose(m.weights, 0.25)

    def test_duplicates_are_retained(self):
        m = EmpiricalMeasure.from_samples([1.0, 1.0, 1.0])
        assert m.size == 3
        merged = m.merge_duplicates()
        assert merged.size == 1
        assert wasserstein1(m, merged) == 0.0

    def test_rejects_unsorted_atoms(self):
        with pytest.raises(ValueError, match="sorted"):
            EmpiricalMeasure(np.array([2.0, 1.0]), np.array([0.5, 0.5]))

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError, match="positive"):
            EmpiricalMeasure(np.array([1.0, 2.0]), np.array([1.0, 0.0]))
        with pytest.raises(ValueError, match="sum"):
            EmpiricalMeasure(np.array([1.0, 2.0]), np.array([0.5, 0.6]))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            EmpiricalMeasure.from_samples([np.nan, 1.0])

    def test_immutable(self):
        m = uniform_measure(0.0, 1.0)
        with pytest.raises(ValueError):
            m.atoms[0] = 5.0


class TestCdfAndQuantile:
    def test_cdf_half_mass_below(self):
        assert cdf_at(uniform_measure(0.0, 1.0), 0.5) == 0.5

    def test_cdf_below_support(self):
        assert cdf_at(uniform_measure(0.0, 1.0), -1.0) == 0.0

    def test_cdf_counts_duplicates(self):
        assert cdf_at(uniform_measure(0.0, 0.0, 1.0, 3.0), 0.0) == 0.5

    def test_cdf_right_continuous(self):
        m = uniform_measure(0.0, 1.0)
        assert cdf_at(m, 1.0) == 1.0
        assert cdf_at(m, 1.0 - 1e-12) == 0.5

    def test_quantile_examples(self):
        two = uniform_measure(0.0, 1.0)
        assert quantile(two, 0.5) == 0.0
        assert quantile(two, 0.75) == 1.0
        assert quantile(uniform_measure(2.0, 5.0, 7.0), 0.34) == 5.0

    def test_quantile_domain(self):
        m = uniform_measure(0.0, 1.0)
        for bad in (0.0, -0.1, 1.0 + 1e-9):
            with pytest.raises(ValueError):
                quantile(m, bad)
        assert quantile(m, 1.0) == 1.0

    def test_quantile_left_continuous_in_t(self):
        m = uniform_measure(0.0, 1.0)
        # at the jump level the lower atom is still returned
        assert quantile(m, 0.5) == 0.0
        assert quantile(m, 0.5 + 1e-12) == 1.0

    def test_inverse_transform_delegates(self):
        m = uniform_measure(2.0, 5.0, 7.0)
        for t in (0.2, 0.34, 0.99, 1.0):
            assert sample_inverse_transform(m, t) == quantile(m, t)

    def test_inverse_transform_reproduces_measure(self):
        m = uniform_measure(-1.0, 0.0, 2.0, 2.0)
        rng = np.random.default_rng(11)
        drawn = sample_inverse_transform(m, 1.0 - rng.random(200_000))
        counts = {v: np.mean(drawn == v) for v in (-1.0, 0.0, 2.0)}
        assert counts[-1.0] == pytest.approx(0.25, abs=0.01)
        assert counts[0.0] == pytest.approx(0.25, abs=0.01)
        assert counts[2.0] == pytest.approx(0.5, abs=0.01)


class TestWassersteinExamples:
    def test_point_masses(self):
        assert wasserstein1(EmpiricalMeasure.point_mass(0.0), EmpiricalMeasure.point_mass(1.0)) == 1.0

    def test_identical(self):
        m = uniform_measure(0.3, 0.7, 2.0)
        assert wasserstein1(m, m) == 0.0

    def test_quantile_coupling_example(self):
        assert wasserstein1(uniform_measure(0.0, 1.0), uniform_measure(0.0, 2.0)) == 0.5

    def test_weighted_measures(self):
        a = EmpiricalMeasure(np.array([0.0, 1.0]), np.array([0.25, 0.75]))
        b = EmpiricalMeasure.point_mass(1.0)
        # 0.25 mass moved distance 1
        assert wasserstein1(a, b) == pytest.approx(0.25, abs=1e-15)


class TestKolmogorov:
    def test_point_masses(self):
        assert kolmogorov(EmpiricalMeasure.point_mass(0.0), EmpiricalMeasure.point_mass(1.0)) == 1.0

    def test_identical(self):
        m = uniform_measure(0.0, 1.0, 4.0)
        assert kolmogorov(m, m) == 0.0

    def test_max_step_gap(self):
        a = uniform_measure(0.0, 1.0)
        b = uniform_measure(0.0, 1.0, 2.0)
        assert kolmogorov(a, b) == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_left_limit_matters(self):
        # identical atom sets but different weights: the sup sits at a jump
        a = EmpiricalMeasure(np.array([0.0, 1.0]), np.array([0.9, 0.1]))
        b = EmpiricalMeasure(np.array([0.0, 1.0]), np.array([0.1, 0.9]))
        assert kolmogorov(a, b) == pytest.approx(0.8, abs=1e-15)


class TestJFunctionals:
    def test_point_mass_is_zero(self):
        assert j_functionals(EmpiricalMeasure.point_mass(3.7)) == (0.0, 0.0)

    def test_two_atom_example(self):
        j0, j1 = j_functionals(uniform_measure(0.0, 1.0))
        assert j0 == pytest.approx(0.25, abs=1e-15)
        assert j1 == pytest.approx(0.5, abs=1e-15)

    def test_uniform01_matches_quadrature(self):
        # analytic targets for Unif(0,1), confirmed by an independent quadrature
        target0, _ = integrate.quad(lambda x: x * (1 - x), 0, 1)
        target1, _ = integrate.quad(lambda x: np.sqrt(x * (1 - x)), 0, 1)
        assert target0 == pytest.approx(1.0 / 6.0, abs=1e-12)
        assert target1 == pytest.approx(np.pi / 8.0, abs=1e-12)
        rng = np.random.default_rng(5)
        m = EmpiricalMeasure.from_samples(rng.random(100_000))
        j0, j1 = j_functionals(m)
        assert j0 == pytest.approx(target0, rel=0.02)
        assert j1 == pytest.approx(target1, rel=0.02)

    def test_j0_below_j1(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            j0, j1 = j_functionals(random_measure(rng))
            assert j0 <= j1 + 1e-15


class TestMetricProperties:
    """Metric axioms on random empirical pairs, both distances."""

    def test_axioms(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            a, b, c = (random_measure(rng) for _ in range(3))
            for dist in (wasserstein1, kolmogorov):
                assert dist(a, b) == dist(b, a)  # symmetry, exact
                assert dist(a, b) >= 0.0
                assert dist(a, a) == 0.0
                assert dist(a, c) <= dist(a, b) + dist(b, c) + 1e-10

    def test_identity_of_indiscernibles(self):
        rng = np.random.default_rng(43)
        for _ in range(30):
            a = random_measure(rng)
            b = random_measure(rng)
            if wasserstein1(a, b) == 0.0:
                assert kolmogorov(a, b) == 0.0
            else:
                assert kolmogorov(a, b) > 0.0

    def test_quantile_representation_equivalence(self):
        rng = np.random.default_rng(44)
        for _ in range(40):
            a, b = random_measure(rng), random_measure(rng)
            assert wasserstein1(a, b) == pytest.approx(
                w1_quantile_grid(a, b), abs=1e-10
            )

    def test_bruteforce_assignment_oracle(self):
        grid = np.array([0.0, 0.5, 1.0, 2.0, 3.5, 5.0])
        rng = np.random.default_rng(45)
        for _ in range(150):
            n = int(rng.integers(1, 7))
            a = rng.choice(grid, size=n)
            b = rng.choice(grid, size=n)
            got = wasserstein1(
                EmpiricalMeasure.from_samples(a), EmpiricalMeasure.from_samples(b)
            )
            assert got == pytest.approx(w1_bruteforce_assignment(a, b), abs=1e-12)

    def test_kolmogorov_bounded_by_w1(self):
        # for a measure with >= 1e4 atoms from a density bounded by L=1,
        # d_K <= 2*sqrt(L * W1) with 10% slack on the right side
        rng = np.random.default_rng(46)
        a = EmpiricalMeasure.from_samples(rng.random(20_000))
        for b in (
            EmpiricalMeasure.from_samples(rng.random(500)),
            EmpiricalMeasure.from_samples(0.5 + 0.2 * rng.random(2_000)),
            EmpiricalMeasure.point_mass(0.5),
        ):
            bound = 2.0 * np.sqrt(1.0 * wasserstein1(a, b))
            assert kolmogorov(a, b) <= 1.1 * bound


class TestJRatioSpotCheck:
    def test_normal_reference_ratio(self):
        # a standard normal satisfies the polynomial-tail and bounded-density
        # premises with constant C = 1.01 (tail: sup x^4*min(F,1-F) ~ 0.378,
        # density max ~ 0.399 <= sqrt(C)); the ratio bound is then 21*C
        xs = np.linspace(0.05, 20.0, 4000)
        tail = stats.norm.sf(xs) * xs**4
        c = 1.01
        assert tail.max() <= c
        assert stats.norm.pdf(0.0) <= np.sqrt(c)
        rng = np.random.default_rng(47)
        m = EmpiricalMeasure.from_samples(rng.standard_normal(100_000))
        j0, j1 = j_functionals(m)
        assert j1 <= 21.0 * c * j0


class TestMomentSummary:
    def test_mean_zero_variance_two(self):
        # needs four atoms for a full summary; duplicate the +-1 pair
        m = uniform_measure(-1.0, -1.0, 1.0, 1.0)
        summary = moment_summary(m)
        assert summary.mean == 0.0
        assert summary.variance == pytest.approx(4.0 / 3.0, abs=1e-15)

    def test_unbiased_variance_matches_numpy(self):
        rng = np.random.default_rng(48)
        data = rng.normal(size=500)
        summary = moment_summary(EmpiricalMeasure.from_samples(data))
        assert summary.variance == pytest.approx(np.var(data, ddof=1), rel=1e-12)

    def test_symmetric_sample_has_zero_skewness(self):
        data = np.array([-2.0, -1.0, 1.0, 2.0])
        assert moment_summary(EmpiricalMeasure.from_samples(data)).skewness == pytest.approx(
            0.0, abs=1e-12
        )

    def test_normal_kurtosis_near_three(self):
        rng = np.random.default_rng(49)
        m = EmpiricalMeasure.from_samples(rng.standard_normal(100_000))
        assert moment_summary(m).kurtosis == pytest.approx(3.0, rel=0.05)

    def test_kurtosis_pearson_inequality(self):
        rng = np.random.default_rng(50)
        for _ in range(20):
            m = EmpiricalMeasure.from_samples(rng.normal(size=12))
            assert moment_summary(m).kurtosis >= 1.0

    def test_insufficient_atoms(self):
        with pytest.raises(InsufficientSampleError):
            moment_summary(uniform_measure(1.0, 2.0, 3.0))
        with pytest.raises(InsufficientSampleError):
            moment_summary(EmpiricalMeasure.point_mass(0.0))
