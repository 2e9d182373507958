"""Ground-truth functionals of a marginal law.

Analytic laws are integrated by adaptive quadrature; empirical reference laws
are step functions and are integrated exactly as finite sums, which removes
one source of numerical error entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .distributions import EmpiricalCDF, MarginalCDF, MomentDoesNotExistError

__all__ = [
    "upper_quantile",
    "tail_cutoff",
    "tail_integral_moment",
    "raw_moment",
    "error_functional",
    "truncated_upper_moment",
    "qnorm_error_coef",
    "BoundCheck",
    "check_tail_moment_bounds",
]

QUAD_REL_TOL = 1e-8
EMP_REL_TOL = 1e-4  # documented accuracy of empirical-mode integrals vs the true law
TAIL_MASS_CUTOFF = 1e-12
_QUANTILE_ABS_TOL = 1e-9


def upper_quantile(cdf: MarginalCDF, eta: float) -> float:
    """Q(eta) = inf{t : P(f > t) < eta}.

    Analytic mode bisects the tail function to absolute tolerance 1e-9 and
    returns the upper end of the final bracket, so that P(f > q) < eta holds
    for the returned q.  Empirical mode resolves the infimum exactly from the
    order statistics.
    """
    if not (0 < eta < 1):
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if isinstance(cdf, EmpiricalCDF):
        return cdf.quantile_upper(eta)
    return _bisect_quantile(cdf, eta)


@lru_cache(maxsize=4096)
def _bisect_quantile_cached(cdf: MarginalCDF, eta: float) -> float:
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if cdf.sf(hi) < eta:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ValueError(f"could not bracket the {eta} upper quantile")
    while hi - lo > _QUANTILE_ABS_TOL:
        mid = 0.5 * (lo + hi)
        if cdf.sf(mid) >= eta:
            lo = mid
        else:
            hi = mid
    return hi


def _bisect_quantile(cdf: MarginalCDF, eta: float) -> float:
    try:
        return _bisect_quantile_cached(cdf, eta)
    except TypeError:  # unhashable cdf
        return _bisect_quantile_cached.__wrapped__(cdf, eta)


@lru_cache(maxsize=1024)
def _tail_cutoff_cached(cdf: MarginalCDF, tail_mass: float) -> float:
    hi = 1.0
    for _ in range(200):
        if cdf.sf(hi) < tail_mass:
            return hi
        hi *= 2.0
    raise ValueError(f"tail mass never drops below {tail_mass}")


def tail_cutoff(cdf: MarginalCDF, tail_mass: float = TAIL_MASS_CUTOFF) -> float:
    """A point beyond which the tail mass is below ``tail_mass``."""
    if isinstance(cdf, EmpiricalCDF):
        return float(cdf.values[-1])
    try:
        return _tail_cutoff_cached(cdf, tail_mass)
    except TypeError:
        return _tail_cutoff_cached.__wrapped__(cdf, tail_mass)


def _quad(fn, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(fn, lo, hi, epsrel=QUAD_REL_TOL, epsabs=1e-14, limit=400)
    return float(val)


def _empirical_moment_below(cdf: EmpiricalCDF, p: float, t_max: float) -> float:
    # integral of p t^(p-1) P(f > t) over (0, t_max), exact for a step tail
    xs = np.sort(np.minimum(cdf.values, t_max) ** p)
    return float(np.sum(xs) / cdf.size)


def tail_integral_moment(cdf: MarginalCDF, p: float, t_max: float) -> float:
    """Integral of p t^(p-1) P(f > t) dt over (0, t_max).

    For t_max at or beyond the tail cutoff this is E f^p up to the reported
    truncation mass.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if t_max < 0:
        raise ValueError(f"t_max must be nonnegative, got {t_max}")
    if t_max == 0:
        return 0.0
    if isinstance(cdf, EmpiricalCDF):
        return _empirical_moment_below(cdf, p, t_max)
    return _quad(lambda t: p * t ** (p - 1.0) * cdf.sf(t), 0.0, t_max)


@lru_cache(maxsize=4096)
def _raw_moment_cached(cdf: MarginalCDF, p: float) -> float:
    return tail_integral_moment(cdf, p, tail_cutoff(cdf))


def raw_moment(cdf: MarginalCDF, p: float) -> float:
    """E f^p via tail integration up to the cutoff where P(f > t) < 1e-12."""
    if p >= cdf.max_finite_moment:
        raise MomentDoesNotExistError(
            f"p={p} moment diverges (finite only below {cdf.max_finite_moment})"
        )
    if isinstance(cdf, EmpiricalCDF):
        return cdf.exact_moment(p)
    try:
        return _raw_moment_cached(cdf, p)
    except TypeError:
        return _raw_moment_cached.__wrapped__(cdf, p)


def error_functional(cdf: MarginalCDF, p: float, t_max: float, delta: float) -> float:
    """2 sqrt(delta) times the integral of p t^(p-1) sqrt(P(f > t)) over (0, t_max)."""
    if not (0 < delta <= 0.5):
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if t_max < 0:
        raise ValueError(f"t_max must be nonnegative, got {t_max}")
    if t_max == 0:
        return 0.0
    factor = 2.0 * math.sqrt(delta)
    if isinstance(cdf, EmpiricalCDF):
        return factor * _empirical_sqrt_tail_integral(cdf, p, t_max)
    return factor * _quad(lambda t: p * t ** (p - 1.0) * math.sqrt(max(cdf.sf(t), 0.0)), 0.0, t_max)


def _empirical_sqrt_tail_integral(cdf: EmpiricalCDF, p: float, t_max: float) -> float:
    # sqrt of a step tail is still a step function; sum its pieces exactly.
    xs, m = cdf.values, cdf.size
    u = np.unique(xs)
    edges = np.concatenate(([0.0], np.minimum(u, t_max), [t_max]))
    # tail level on each interval (edges[k], edges[k+1]) is the mass above edges[k]
    counts_gt = m - np.searchsorted(xs, edges[:-1], side="right")
    widths_p = np.diff(edges ** p)
    return float(np.sum(np.sqrt(counts_gt / m) * widths_p))


def truncated_upper_moment(cdf: MarginalCDF, p: float, kappa: float) -> float:
    """E f^p on the event {f > Q(kappa)} where Q is the upper quantile."""
    if not (0 < kappa < 1):
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    if p >= cdf.max_finite_moment:
        raise MomentDoesNotExistError(
            f"p={p} tail moment diverges (finite only below {cdf.max_finite_moment})"
        )
    q = upper_quantile(cdf, kappa)
    if isinstance(cdf, EmpiricalCDF):
        xs = cdf.values
        above = xs[xs > q]
        if above.size == 0:
            return 0.0
        return float(np.sum(np.sort(above ** p)) / cdf.size)
    hi = max(tail_cutoff(cdf), q)
    tail_part = _quad(lambda t: p * t ** (p - 1.0) * cdf.sf(t), q, hi)
    return q ** p * cdf.sf(q) + tail_part


def qnorm_error_coef(p: float, q: float) -> float:
    """The nominal coefficient 2p / (q - 2p) of the q-norm error bound."""
    if q <= 2 * p:
        raise ValueError(f"need q > 2p, got q={q}, p={p}")
    return 2.0 * p / (q - 2.0 * p)


@dataclass(frozen=True)
class BoundCheck:
    """One inequality instance: lhs <= rhs with the achieved slack."""

    name: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs


def check_tail_moment_bounds(
    cdf: MarginalCDF, p: float, q: float, kappa: float, delta: float
) -> list[BoundCheck]:
    """Both sides of the three tail-moment inequalities for this law.

    1. E f^p 1{f > Q(kappa)}        <=  ||f||_{2p}^p sqrt(kappa)
    2. err(Q(kappa), p)             <=  2 sqrt(delta) (||f||_p^p + sqrt(log(1/kappa)/2) ||f||_{2p}^p)
    3. err(Q(kappa), p)             <=  2 sqrt(delta) (1 + 2p/(q-2p)) ||f||_q^p

    where err is :func:`error_functional`.  The right-hand sides carry the
    explicit constants under which the inequalities are provable, so a
    violation on exact inputs indicates an implementation defect.
    """
    if q <= 2 * p:
        raise ValueError(f"need q > 2p, got q={q}, p={p}")
    needed = max(2 * p, q)
    if needed >= cdf.max_finite_moment:
        raise MomentDoesNotExistError(
            f"moments up to {needed} required but only orders below {cdf.max_finite_moment} exist"
        )
    m_p = raw_moment(cdf, p)
    l2p_p = math.sqrt(raw_moment(cdf, 2 * p))  # ||f||_{2p}^p
    lq_p = raw_moment(cdf, q) ** (p / q)  # ||f||_q^p
    tail_moment = truncated_upper_moment(cdf, p, kappa)
    err = error_functional(cdf, p, upper_quantile(cdf, kappa), delta)
    factor = 2.0 * math.sqrt(delta)
    return [
        BoundCheck("tail_moment_vs_l2p", tail_moment, l2p_p * math.sqrt(kappa)),
        BoundCheck(
            "error_fn_log_bound",
            err,
            factor * (m_p + math.sqrt(math.log(1.0 / kappa) / 2.0) * l2p_p),
        ),
        BoundCheck(
            "error_fn_qnorm_bound",
            err,
            factor * (1.0 + qnorm_error_coef(p, q)) * lq_p,
        ),
    ]
