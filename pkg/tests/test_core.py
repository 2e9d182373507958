import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import fraction_trimmed_mean
from lptrim.core import (
    RatioParams,
    SampleMatrix,
    TrimSpec,
    adjusted_trim_levels,
    cut_rank,
    empirical_p_mean,
    nonincreasing_rearrangement,
    project_abs,
    stated_theta_gate,
    theta_from_epsilon,
    trim_threshold,
    trimmed_p_mean,
    truncated_power_mean,
)

finite_values = st.lists(
    st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False),
    min_size=1,
    max_size=120,
)
thetas = st.floats(min_value=0.01, max_value=0.99)
exponents = st.floats(min_value=1.0, max_value=4.0)


class TestProjectAbs:
    def test_coordinate_projection(self):
        s = SampleMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]), seed=0, dist_name="test")
        assert project_abs(s, [1.0, 0.0]).tolist() == [1.0, 0.0]

    def test_orthogonal_direction(self):
        s = SampleMatrix(np.array([[1.0, 2.0]]), seed=0, dist_name="test")
        assert project_abs(s, [2.0, -1.0]).tolist() == [0.0]

    def test_one_dimensional(self):
        s = SampleMatrix(np.array([[3.0]]), seed=0, dist_name="test")
        assert project_abs(s, [-2.0]).tolist() == [6.0]

    def test_dimension_mismatch(self):
        s = SampleMatrix(np.array([[1.0, 2.0]]), seed=0, dist_name="test")
        with pytest.raises(ValueError):
            project_abs(s, [1.0])

    def test_zero_direction_allowed(self):
        s = SampleMatrix(np.array([[1.0, 2.0]]), seed=0, dist_name="test")
        assert project_abs(s, [0.0, 0.0]).tolist() == [0.0]


class TestRearrangement:
    def test_sorts_descending(self):
        assert nonincreasing_rearrangement([3, 1, 2]).tolist() == [3, 2, 1]

    def test_absolute_values(self):
        assert nonincreasing_rearrangement([-5, 2]).tolist() == [5, 2]

    def test_ties(self):
        assert nonincreasing_rearrangement([1, 1, 1]).tolist() == [1, 1, 1]

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            nonincreasing_rearrangement([1.0, np.inf])


class TestTrimmedPMean:
    def test_half_trim(self):
        assert trimmed_p_mean([1, 2, 3, 10], TrimSpec(p=2, theta=0.5)) == 3.5

    def test_no_trim_equals_mean(self):
        assert trimmed_p_mean([1, 2, 3, 10], TrimSpec(p=2, theta=0.25)) == 28.5

    def test_homogeneity_example(self):
        doubled = trimmed_p_mean([2, 4, 6, 20], TrimSpec(p=2, theta=0.5))
        assert doubled == pytest.approx(14.0, rel=1e-12)

    def test_cut_rank_float_roundoff(self):
        # 0.1 * 10**4 is not exactly 1000 in floats; the rank must still be 1000
        assert cut_rank(0.1, 10_000) == 1000
        assert cut_rank(0.5, 4) == 2
        assert cut_rank(1e-9, 50) == 1

    def test_matches_exact_rational_arithmetic(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 30))
            values = rng.integers(-50, 50, size=n).tolist()
            theta = float(rng.uniform(0.05, 0.9))
            p = int(rng.integers(1, 4))
            k0 = cut_rank(theta, n)
            exact = fraction_trimmed_mean(values, p, k0)
            got = trimmed_p_mean(values, TrimSpec(p=float(p), theta=theta))
            assert got == pytest.approx(float(exact), rel=1e-12)


class TestEmpiricalPMean:
    def test_basic(self):
        assert empirical_p_mean([1, 2, 3, 10], 2) == 28.5

    def test_zeros(self):
        assert empirical_p_mean([0, 0], 3) == 0.0

    def test_constants(self):
        assert empirical_p_mean([1, 1, 1], 7) == 1.0


class TestTrimThreshold:
    def test_second_largest(self):
        assert trim_threshold([1, 2, 3, 10], 0.5) == 3.0

    def test_maximum(self):
        assert trim_threshold([1, 2, 3, 10], 0.25) == 10.0

    def test_ties(self):
        assert trim_threshold([4, 4, 4, 4], 0.75) == 4.0

    def test_count_at_or_above_threshold(self, rng):
        # with distinct values exactly ceil(theta n) entries are >= the threshold
        for _ in range(25):
            n = int(rng.integers(3, 60))
            values = rng.permutation(np.arange(1, n + 1)).astype(float)
            theta = float(rng.uniform(0.05, 0.95))
            q = trim_threshold(values, theta)
            assert int(np.sum(values >= q)) == cut_rank(theta, n)


class TestAdjustedTrimLevels:
    def test_formula(self):
        assert adjusted_trim_levels(0.1, RatioParams(0.01, 0.5, 2.0)) == (0.28, pytest.approx(0.04))

    def test_degenerate_delta(self):
        hi, lo = adjusted_trim_levels(0.1, RatioParams(0.0, 0.5, 2.0))
        assert hi == pytest.approx(0.2)
        assert lo == pytest.approx(0.1 / 1.5)

    def test_theta_too_small(self):
        with pytest.raises(ValueError):
            adjusted_trim_levels(0.05, RatioParams(0.02, 0.5, 2.0))

    def test_gate_implies_deflated_level_above_two_delta(self, rng):
        for _ in range(200):
            params = RatioParams(
                delta=float(rng.uniform(0.001, 0.5)),
                lam=float(rng.uniform(0.05, 0.95)),
                big_c=float(rng.uniform(1.0, 4.0)),
            )
            theta = float(rng.uniform(0.0, 1.0))
            if not 0 < theta < 1 or not stated_theta_gate(theta, params):
                continue
            if theta <= 2 * params.big_c * params.delta:
                continue
            _, lo = adjusted_trim_levels(theta, params)
            assert lo >= 2 * params.delta - 1e-15


class TestThetaFromEpsilon:
    def test_default_constant(self):
        assert theta_from_epsilon(0.2, 10_000) == pytest.approx(0.25 * 0.04)

    def test_floor_at_one_over_n(self):
        assert theta_from_epsilon(0.01, 100) == pytest.approx(1 / 100)

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ValueError):
            theta_from_epsilon(1.5, 100)


class TestTruncatedPowerMean:
    def test_hand_values(self):
        # min with cap 2.5: [1, 2, 2.5, 2.5] -> squares (1 + 4 + 6.25 + 6.25)/4
        assert truncated_power_mean([1, 2, 3, 10], 2, 2.5) == 4.375

    def test_cap_above_max_is_plain_mean(self):
        assert truncated_power_mean([1, 2, 3, 10], 2, 10.0) == 28.5

    def test_cap_zero(self):
        assert truncated_power_mean([1, 2, 3], 2, 0.0) == 0.0


# ---------------------------------------------------------------------------
# Invariants
# ---------------------------------------------------------------------------


@given(values=finite_values, theta=thetas, p=exponents)
def test_trim_never_exceeds_plain_mean(values, theta, p):
    trimmed = trimmed_p_mean(values, TrimSpec(p=p, theta=theta))
    assert trimmed <= empirical_p_mean(values, p)


@given(values=finite_values, theta=thetas, p=exponents, c=st.floats(min_value=1e-3, max_value=1e3))
def test_positive_homogeneity(values, theta, p, c):
    spec = TrimSpec(p=p, theta=theta)
    scaled = trimmed_p_mean([c * v for v in values], spec)
    base = trimmed_p_mean(values, spec)
    assert scaled == pytest.approx(c ** p * base, rel=1e-12, abs=1e-300)


@given(values=finite_values, p=exponents, t1=thetas, t2=thetas)
def test_monotone_in_trim_fraction(values, p, t1, t2):
    lo, hi = sorted((t1, t2))
    assert trimmed_p_mean(values, TrimSpec(p=p, theta=hi)) <= trimmed_p_mean(
        values, TrimSpec(p=p, theta=lo)
    )


@given(values=finite_values, theta=thetas, p=exponents, seed=st.integers(0, 2**16))
def test_permutation_invariance(values, theta, p, seed):
    perm = np.random.default_rng(seed).permutation(len(values))
    shuffled = [values[i] for i in perm]
    spec = TrimSpec(p=p, theta=theta)
    assert trimmed_p_mean(values, spec) == trimmed_p_mean(shuffled, spec)
    assert trim_threshold(values, theta) == trim_threshold(shuffled, theta)


@given(values=finite_values, p=exponents)
def test_no_op_trim_is_exactly_the_mean(values, p):
    theta = 0.5 / len(values) if len(values) > 1 else 0.4
    assert trimmed_p_mean(values, TrimSpec(p=p, theta=theta)) == empirical_p_mean(values, p)


def test_trimspec_validation():
    with pytest.raises(ValueError):
        TrimSpec(p=0.5, theta=0.1)
    with pytest.raises(ValueError):
        TrimSpec(p=2.0, theta=1.0)
    with pytest.raises(ValueError):
        TrimSpec(p=2.0, theta=0.0)


def test_sample_matrix_validation():
    with pytest.raises(ValueError):
        SampleMatrix(np.array([1.0, 2.0]), seed=0, dist_name="x")
    with pytest.raises(ValueError):
        SampleMatrix(np.array([[np.nan]]), seed=0, dist_name="x")
    s = SampleMatrix(np.zeros((3, 2)), seed=0, dist_name="x")
    assert (s.n, s.dim) == (3, 2)


def test_ratio_params_validation():
    with pytest.raises(ValueError):
        RatioParams(delta=0.6, lam=0.5, big_c=2.0)
    with pytest.raises(ValueError):
        RatioParams(delta=0.1, lam=1.0, big_c=2.0)
    with pytest.raises(ValueError):
        RatioParams(delta=0.1, lam=0.5, big_c=0.5)
