"""Exact verification of the empirical-ratio properties for a fixed direction.

For a sample of nonnegative values and a reference marginal law, the three
properties checked here are

1. tail ratio:      |P_N(f > t) / P(f > t) - 1| <= lam   whenever P(f > t) >= delta
2. dyadic ratios:   the same deviation is at most 2^(-j/2) whenever
                    P(f > t) >= 2^j delta, for every integer j >= 0
3. interval excess: P_N(f in I) <= (3/2) P(f in I) + C delta for every
                    generalized interval I

The empirical tail is a right-continuous step function, so each supremum is
attained at one-sided limits of sample points (plus the admissible-region
boundary) and is computed exactly rather than on a grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import RatioParams, project_abs, _as_finite_1d
from .distributions import (
    DistributionSpec,
    EmpiricalCDF,
    MarginalCDF,
    draw_sample,
    marginal_cdf,
    sphere_directions,
)
from .oracle import upper_quantile
from .seeding import child_seed

__all__ = [
    "TailRatioResult",
    "DyadicLevel",
    "DyadicRatioResult",
    "IntervalExcessResult",
    "RatioReport",
    "DirectionCheckRow",
    "FailureRateReport",
    "tail_ratio_check",
    "dyadic_ratio_check",
    "interval_excess_sup",
    "ratio_properties_report",
    "rademacher_interval_complexity",
    "ratio_properties_failure_rate",
    "ratio_floor",
    "probe_directions",
    "ratio_trial_rows",
]


# ---------------------------------------------------------------------------
# Candidate machinery shared by properties 1 and 2
# ---------------------------------------------------------------------------


def _candidate_devs(values_abs, cdf: MarginalCDF):
    """Empirical/true tail pairs at both one-sided limits of every sample value.

    Returns (xs, pn, pr) where xs is the sorted sample and (pn[i], pr[i]) are
    matched empirical and true tail probabilities; the supremum of the ratio
    deviation over any admissible region {t : P(f > t) >= level} is attained
    among these pairs plus the region-boundary pairs added per level.
    """
    xs = np.sort(np.abs(_as_finite_1d(values_abs)))
    n = xs.size
    u = np.unique(xs)
    right_pn = (n - np.searchsorted(xs, u, side="right")) / n
    left_pn = (n - np.searchsorted(xs, u, side="left")) / n
    sf_u = np.asarray(cdf.sf(u), dtype=np.float64)
    sfl_u = np.asarray(cdf.sf_left(u), dtype=np.float64)
    pos = u > 0
    pn0 = (n - np.searchsorted(xs, 0.0, side="right")) / n
    pn = np.concatenate([right_pn, left_pn[pos], [pn0]])
    pr = np.concatenate([sf_u, sfl_u[pos], [np.asarray(cdf.sf(0.0))]])
    return xs, pn, pr


def _sup_dev_at_level(xs, pn, pr, cdf: MarginalCDF, level: float) -> float | None:
    """Exact sup of |P_N/P - 1| over {t > 0 : P(f > t) >= level}; None if empty."""
    if cdf.sf(0.0) < level:
        return None
    mask = pr >= level
    worst = 0.0
    if np.any(mask):
        worst = float(np.max(np.abs(pn[mask] / pr[mask] - 1.0)))
    n = xs.size
    q = upper_quantile(cdf, level)
    pn_ge = (n - np.searchsorted(xs, q, side="left")) / n
    pn_gt = (n - np.searchsorted(xs, q, side="right")) / n
    if isinstance(cdf, EmpiricalCDF):
        pr_left = cdf.sf_left(q)
        if pr_left >= level and q > 0:
            worst = max(worst, abs(pn_ge / pr_left - 1.0))
        pr_right = cdf.sf(q)
        if pr_right >= level:
            worst = max(worst, abs(pn_gt / pr_right - 1.0))
    elif q > 0:
        # Continuous tail: its value at the region boundary is the level itself.
        worst = max(worst, abs(pn_ge / level - 1.0), abs(pn_gt / level - 1.0))
    return worst


@dataclass(frozen=True)
class TailRatioResult:
    worst_dev: float
    lam: float
    delta: float

    @property
    def ok(self) -> bool:
        return self.worst_dev <= self.lam


def tail_ratio_check(values_abs, cdf: MarginalCDF, delta: float, lam: float) -> TailRatioResult:
    """Property 1: exact worst tail-ratio deviation over masses >= delta."""
    if not (0 < delta <= 0.5):
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    xs, pn, pr = _candidate_devs(values_abs, cdf)
    worst = _sup_dev_at_level(xs, pn, pr, cdf, delta)
    if worst is None:
        raise ValueError(f"no tail mass reaches delta={delta}; empty admissible range")
    return TailRatioResult(worst_dev=worst, lam=lam, delta=delta)


@dataclass(frozen=True)
class DyadicLevel:
    j: int
    level: float
    bound: float
    worst_dev: float

    @property
    def ok(self) -> bool:
        return self.worst_dev <= self.bound

    @property
    def margin(self) -> float:
        return self.bound - self.worst_dev


@dataclass(frozen=True)
class DyadicRatioResult:
    levels: tuple[DyadicLevel, ...]
    delta: float

    @property
    def ok(self) -> bool:
        return all(level.ok for level in self.levels)

    @property
    def worst_margin(self) -> float:
        return min((level.margin for level in self.levels), default=math.inf)


def _dyadic_levels(xs, pn, pr, cdf: MarginalCDF, delta: float) -> tuple[DyadicLevel, ...]:
    levels = []
    j = 0
    while True:
        level = delta * 2.0 ** j
        if level > 1.0:
            break
        worst = _sup_dev_at_level(xs, pn, pr, cdf, level)
        if worst is None:
            break
        levels.append(DyadicLevel(j=j, level=level, bound=2.0 ** (-j / 2.0), worst_dev=worst))
        j += 1
    return tuple(levels)


def dyadic_ratio_check(values_abs, cdf: MarginalCDF, delta: float) -> DyadicRatioResult:
    """Property 2: per-level worst deviations against the 2^(-j/2) bounds."""
    if not (0 < delta <= 0.5):
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    xs, pn, pr = _candidate_devs(values_abs, cdf)
    return DyadicRatioResult(levels=_dyadic_levels(xs, pn, pr, cdf, delta), delta=delta)


# ---------------------------------------------------------------------------
# Property 3: supremum of the interval excess
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalExcessResult:
    sup: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.sup <= self.bound


def interval_excess_sup(values_abs, cdf: MarginalCDF, big_c: float, delta: float) -> IntervalExcessResult:
    """Exact sup over generalized intervals I of P_N(f in I) - (3/2) P(f in I).

    The optimum is attained by a closed interval whose endpoints are sample
    points: each distinct sample value contributes its empirical mass minus
    3/2 of its true point mass, each gap between consecutive values costs 3/2
    of the true open-gap mass, and the best contiguous stretch is found by a
    prefix-sum scan.  Intervals containing no sample point are bounded by 0.
    """
    if big_c < 1:
        raise ValueError(f"big_c must be >= 1, got {big_c}")
    if not (0 <= delta <= 0.5):
        raise ValueError(f"delta must lie in [0, 1/2], got {delta}")
    xs = np.sort(np.abs(_as_finite_1d(values_abs)))
    n = xs.size
    u, counts = np.unique(xs, return_counts=True)
    sf_u = np.asarray(cdf.sf(u), dtype=np.float64)
    atom_u = np.asarray(cdf.atom(u), dtype=np.float64)
    gains = counts / n - 1.5 * atom_u
    gaps = 1.5 * np.maximum(sf_u[:-1] - sf_u[1:] - atom_u[1:], 0.0)
    # prefix form: value(i..j) = Q[j] - (Q[i] - gains[i])
    e = gains.copy()
    e[1:] -= gaps
    q_pref = np.cumsum(e)
    start_cost = np.minimum.accumulate(q_pref - gains)
    best = float(np.max(q_pref - start_cost))
    return IntervalExcessResult(sup=max(0.0, best), bound=big_c * delta)


def rademacher_interval_complexity(values_abs, signs) -> float:
    """(1/n) max over contiguous segments, in value order, of |sum of signs|.

    The sample is sorted ascending (stable, ties by original index) and the
    accompanying +-1 signs are rearranged along with it.
    """
    z = np.abs(_as_finite_1d(values_abs))
    s = np.asarray(signs)
    if s.shape != z.shape:
        raise ValueError("values and signs must have equal length")
    s = s.astype(np.int64)
    if not np.all(np.abs(s) == 1):
        raise ValueError("signs must be +-1")
    order = np.argsort(z, kind="stable")
    pref = np.concatenate([[0], np.cumsum(s[order])])
    best_hi = int(np.max(pref[1:] - np.minimum.accumulate(pref[:-1])))
    best_lo = int(np.min(pref[1:] - np.maximum.accumulate(pref[:-1])))
    return max(best_hi, -best_lo) / z.size


# ---------------------------------------------------------------------------
# Bundled report and the sampled failure-rate experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioReport:
    """Results of all three property checks against one (lam, C, delta)."""

    tail: TailRatioResult
    dyadic: DyadicRatioResult
    interval: IntervalExcessResult
    params: RatioParams

    @property
    def all_pass(self) -> bool:
        return self.tail.ok and self.dyadic.ok and self.interval.ok


def ratio_properties_report(values_abs, cdf: MarginalCDF, params: RatioParams) -> RatioReport:
    if params.delta <= 0:
        raise ValueError("property checks need delta > 0")
    values = np.abs(_as_finite_1d(values_abs))
    # The level-delta supremum doubles as the tail check, so candidate pairs
    # are assembled once for both ratio properties.
    xs, pn, pr = _candidate_devs(values, cdf)
    worst = _sup_dev_at_level(xs, pn, pr, cdf, params.delta)
    if worst is None:
        raise ValueError(f"no tail mass reaches delta={params.delta}; empty admissible range")
    return RatioReport(
        tail=TailRatioResult(worst_dev=worst, lam=params.lam, delta=params.delta),
        dyadic=DyadicRatioResult(levels=_dyadic_levels(xs, pn, pr, cdf, params.delta), delta=params.delta),
        interval=interval_excess_sup(values, cdf, params.big_c, params.delta),
        params=params,
    )


def ratio_floor(dim: int, n: int, floor_c0: float = 1.0) -> float:
    """The smallest delta at which uniform ratio control is expected: c0 (d/n) log(en/d)."""
    return floor_c0 * (dim / n) * math.log(math.e * n / dim)


def probe_directions(dim: int, m: int, seed: int) -> np.ndarray:
    """m uniform sphere directions plus the 2d signed coordinate directions."""
    eye = np.eye(dim)
    return np.concatenate([sphere_directions(dim, m, seed), eye, -eye])


@dataclass(frozen=True)
class DirectionCheckRow:
    direction: int
    prop1_dev: float
    prop2_margin: float
    prop3_sup: float
    passed: bool
    tail_ok: bool
    dyadic_ok: bool
    interval_ok: bool


def ratio_trial_rows(
    spec: DistributionSpec,
    n: int,
    trial_seed: int,
    directions: np.ndarray,
    params: RatioParams,
    ref_size: int = 1_000_000,
) -> list[DirectionCheckRow]:
    """Property checks for one fresh sample against every probe direction."""
    sample = draw_sample(spec, n, trial_seed)
    rows = []
    for idx, v in enumerate(directions):
        cdf = marginal_cdf(spec, v, ref_size=ref_size)
        rep = ratio_properties_report(project_abs(sample, v), cdf, params)
        rows.append(
            DirectionCheckRow(
                direction=idx,
                prop1_dev=rep.tail.worst_dev,
                prop2_margin=rep.dyadic.worst_margin,
                prop3_sup=rep.interval.sup,
                passed=rep.all_pass,
                tail_ok=rep.tail.ok,
                dyadic_ok=rep.dyadic.ok,
                interval_ok=rep.interval.ok,
            )
        )
    return rows


@dataclass(frozen=True)
class FailureRateReport:
    n_trials: int
    n_directions: int
    failure_rate: float
    failed_trials: tuple[int, ...]
    prop_failures: dict
    floor_value: float
    floor_ok: bool


def ratio_properties_failure_rate(
    spec: DistributionSpec,
    n: int,
    delta: float,
    m_directions: int,
    trials: int,
    seed: int,
    lam: float = 0.5,
    big_c: float = 2.0,
    floor_c0: float = 1.0,
    ref_size: int = 1_000_000,
) -> FailureRateReport:
    """Fraction of fresh samples failing any property on any probe direction.

    Probe directions are drawn once and shared by all trials; each trial draws
    its own sample.  A delta below the dimension-dependent floor triggers a
    warning but the run proceeds (exploration is allowed).
    """
    params = RatioParams(delta=delta, lam=lam, big_c=big_c)
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    floor = ratio_floor(spec.dim, n, floor_c0)
    floor_ok = delta >= floor
    if not floor_ok:
        warnings.warn(
            f"delta={delta} is below the ratio floor {floor:.3g} for d={spec.dim}, n={n}; "
            "uniform control is not expected",
            stacklevel=2,
        )
    directions = probe_directions(spec.dim, m_directions, child_seed(seed, "directions"))
    failed = []
    prop_failures = {"tail": 0, "dyadic": 0, "interval": 0}
    for trial in range(trials):
        rows = ratio_trial_rows(spec, n, child_seed(seed, "trial", trial), directions, params, ref_size)
        if not all(r.passed for r in rows):
            failed.append(trial)
        prop_failures["tail"] += sum(not r.tail_ok for r in rows)
        prop_failures["dyadic"] += sum(not r.dyadic_ok for r in rows)
        prop_failures["interval"] += sum(not r.interval_ok for r in rows)
    return FailureRateReport(
        n_trials=trials,
        n_directions=directions.shape[0],
        failure_rate=len(failed) / trials,
        failed_trials=tuple(failed),
        prop_failures=prop_failures,
        floor_value=floor,
        floor_ok=floor_ok,
    )
