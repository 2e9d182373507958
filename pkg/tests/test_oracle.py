import math

import numpy as np
import pytest

from helpers import trapezoid_sqrt_tail_integral, trapezoid_tail_integral
from lptrim.distributions import (
    EmpiricalCDF,
    ExponentialCDF,
    FoldedNormalCDF,
    FoldedStudentTCDF,
    HalfUniformCDF,
    MomentDoesNotExistError,
    gaussian_abs_moment,
)
from lptrim.oracle import (
    check_tail_moment_bounds,
    error_functional,
    qnorm_error_coef,
    raw_moment,
    tail_cutoff,
    tail_integral_moment,
    truncated_upper_moment,
    upper_quantile,
)

UNIFORM01 = HalfUniformCDF(width=1.0)
EXP1 = ExponentialCDF(scale=1.0)
FOLDED_NORMAL = FoldedNormalCDF(scale=1.0)

ANALYTIC_LAWS = [
    FOLDED_NORMAL,
    HalfUniformCDF(width=math.sqrt(3.0)),
    ExponentialCDF(scale=1.0 / math.sqrt(2.0)),
    FoldedStudentTCDF(nu=6.0, scale=math.sqrt(4.0 / 6.0)),
]
LAW_IDS = ["folded_normal", "half_uniform", "exponential", "folded_student_t6"]


class TestUpperQuantile:
    def test_uniform(self):
        assert upper_quantile(UNIFORM01, 0.1) == pytest.approx(0.9, abs=1e-8)

    def test_exponential_closed_form(self):
        for kappa in (0.5, 0.1, 0.01):
            assert upper_quantile(EXP1, kappa) == pytest.approx(math.log(1 / kappa), abs=1e-8)

    def test_folded_normal(self):
        # P(|Z| > t) = 0.05 at the two-sided normal critical point
        assert upper_quantile(FOLDED_NORMAL, 0.05) == pytest.approx(1.95996, abs=1e-4)

    @pytest.mark.parametrize("cdf", ANALYTIC_LAWS, ids=LAW_IDS)
    def test_quantile_cdf_consistency(self, cdf):
        for eta in (0.3, 0.1, 0.01):
            q = upper_quantile(cdf, eta)
            assert cdf.sf(q) <= eta
            assert cdf.sf(q - 1e-6) >= eta

    def test_empirical_quantile_consistency(self, rng):
        values = rng.exponential(size=997)
        cdf = EmpiricalCDF(values, seed=0)
        for eta in (0.5, 0.25, 0.03):
            q = upper_quantile(cdf, eta)
            assert cdf.sf(q) < eta
            assert cdf.sf_left(q) >= eta
            assert q in cdf.values


class TestTailIntegralMoment:
    def test_uniform_full(self):
        assert tail_integral_moment(UNIFORM01, 2, 1.0) == pytest.approx(1 / 3, rel=1e-8)

    def test_uniform_half(self):
        assert tail_integral_moment(UNIFORM01, 2, 0.5) == pytest.approx(1 / 6, rel=1e-8)

    def test_zero_cap(self):
        assert tail_integral_moment(FOLDED_NORMAL, 2, 0.0) == 0.0

    @pytest.mark.parametrize("cdf", ANALYTIC_LAWS, ids=LAW_IDS)
    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_full_moment_matches_closed_form(self, cdf, p):
        assert raw_moment(cdf, p) == pytest.approx(cdf.exact_moment(p), rel=1e-6)

    @pytest.mark.parametrize("p", [1, 2, 3, 4, 6])
    def test_gaussian_moment_to_1e6(self, p):
        got = raw_moment(FoldedNormalCDF(scale=1.0), float(p))
        assert got == pytest.approx(gaussian_abs_moment(float(p)), rel=1e-6)

    def test_empirical_is_exact_finite_sum(self, rng):
        values = rng.uniform(0, 2, size=101)
        cdf = EmpiricalCDF(values, seed=0)
        cap = 1.2
        exact = np.mean(np.minimum(values, cap) ** 3)
        assert tail_integral_moment(cdf, 3, cap) == pytest.approx(exact, rel=1e-15)

    def test_divergent_moment_flagged(self):
        heavy = FoldedStudentTCDF(nu=4.5, scale=1.0)
        with pytest.raises(MomentDoesNotExistError):
            raw_moment(heavy, 5.0)


class TestErrorFunctional:
    def test_zero_cap(self):
        assert error_functional(FOLDED_NORMAL, 2, 0.0, 0.25) == 0.0

    def test_uniform_closed_form(self):
        # 2 sqrt(1/4) * int_0^1 sqrt(1 - t) dt = 2/3
        got = error_functional(UNIFORM01, 1, 1.0, 0.25)
        assert got == pytest.approx(2 / 3, rel=1e-8)

    def test_folded_normal_vs_trapezoid(self):
        cap = upper_quantile(FOLDED_NORMAL, 0.01)
        got = error_functional(FOLDED_NORMAL, 2, cap, 0.01)
        brute = trapezoid_sqrt_tail_integral(FOLDED_NORMAL.sf, 2, cap, 0.01)
        assert got == pytest.approx(brute, rel=1e-4)

    def test_empirical_step_exactness(self, rng):
        values = rng.uniform(0, 1, size=40)
        cdf = EmpiricalCDF(values, seed=0)
        cap = 0.7
        # brute force over the step pieces with its own arithmetic
        xs = np.sort(values)
        edges = np.concatenate([[0.0], xs[xs < cap], [cap]])
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            total += math.sqrt(float(cdf.sf(a))) * (b ** 2 - a ** 2)
        assert error_functional(cdf, 2, cap, 0.25) == pytest.approx(2 * math.sqrt(0.25) * total, rel=1e-12)

    def test_monotone_in_cap_and_delta(self):
        caps = [0.5, 1.0, 2.0, 3.0]
        vals = [error_functional(FOLDED_NORMAL, 2, c, 0.1) for c in caps]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
        deltas = [0.01, 0.05, 0.2, 0.5]
        vals = [error_functional(FOLDED_NORMAL, 2, 1.5, d) for d in deltas]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


class TestTruncatedUpperMoment:
    def test_uniform_hand_value(self):
        got = truncated_upper_moment(UNIFORM01, 2, 0.1)
        assert got == pytest.approx((1 - 0.9 ** 3) / 3, rel=1e-6)

    def test_kappa_to_one_recovers_full_moment(self):
        got = truncated_upper_moment(UNIFORM01, 2, 1 - 1e-9)
        assert got == pytest.approx(1 / 3, abs=1e-6)

    def test_folded_normal_vs_monte_carlo(self, rng):
        kappa = 0.05
        got = truncated_upper_moment(FOLDED_NORMAL, 2, kappa)
        z = np.abs(rng.standard_normal(2_000_000))
        q = upper_quantile(FOLDED_NORMAL, kappa)
        sample_vals = np.where(z > q, z ** 2, 0.0)
        mc = sample_vals.mean()
        stderr = sample_vals.std() / math.sqrt(z.size)
        assert abs(got - mc) < 3 * stderr

    def test_empirical_exact(self, rng):
        values = rng.exponential(size=200)
        cdf = EmpiricalCDF(values, seed=0)
        kappa = 0.25
        q = upper_quantile(cdf, kappa)
        exact = values[values > q].sum() / values.size
        assert truncated_upper_moment(cdf, 1, kappa) == pytest.approx(exact, rel=1e-12)


class TestTailMomentBounds:
    def test_qnorm_coefficient(self):
        assert qnorm_error_coef(2, 8) == 1.0

    def test_uniform_first_inequality_hand_values(self):
        rows = check_tail_moment_bounds(UNIFORM01, 2, 8, 0.1, 0.02)
        first = rows[0]
        assert first.lhs == pytest.approx(0.090333, abs=1e-5)
        assert first.rhs == pytest.approx(math.sqrt(1 / 5) * math.sqrt(0.1), rel=1e-6)
        assert first.ok

    def test_folded_normal_all_hold_with_slack(self):
        rows = check_tail_moment_bounds(FOLDED_NORMAL, 2, 8, 0.01, 0.02)
        assert all(r.ok and r.slack > 0 for r in rows)

    @pytest.mark.parametrize("cdf", ANALYTIC_LAWS, ids=LAW_IDS)
    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    @pytest.mark.parametrize("kappa", [0.3, 0.1, 0.01])
    def test_grid_positive_slack(self, cdf, p, kappa):
        q = 2 * p + 2
        if max(2 * p, q) >= cdf.max_finite_moment:
            q = p + cdf.max_finite_moment / 2  # keep q > 2p only when it exists
            if q <= 2 * p or q >= cdf.max_finite_moment:
                pytest.skip("required moments do not exist for this law")
        rows = check_tail_moment_bounds(cdf, p, q, kappa, 0.02)
        assert all(r.ok and r.slack > 0 for r in rows)

    def test_requires_q_above_2p(self):
        with pytest.raises(ValueError):
            check_tail_moment_bounds(UNIFORM01, 2, 4, 0.1, 0.02)

    def test_missing_moments_flagged(self):
        heavy = FoldedStudentTCDF(nu=6.0, scale=1.0)
        with pytest.raises(MomentDoesNotExistError):
            check_tail_moment_bounds(heavy, 3.0, 8.0, 0.1, 0.02)


class TestTailCutoff:
    @pytest.mark.parametrize("cdf", ANALYTIC_LAWS, ids=LAW_IDS)
    def test_cutoff_mass_below_threshold(self, cdf):
        assert cdf.sf(tail_cutoff(cdf)) < 1e-12

    def test_full_moment_agrees_with_trapezoid(self):
        cap = tail_cutoff(FOLDED_NORMAL)
        brute = trapezoid_tail_integral(FOLDED_NORMAL.sf, 2.0, cap)
        assert raw_moment(FOLDED_NORMAL, 2.0) == pytest.approx(brute, rel=1e-5)
