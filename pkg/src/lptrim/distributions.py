"""Isotropic sample generators and oracles for their one-dimensional marginals.

Every law is centred with identity covariance by construction:

* ``gaussian``            standard normal coordinates
* ``cube_uniform``        uniform on [-sqrt(3), sqrt(3)]^d
* ``product_laplace``     independent Laplace coordinates, scale 1/sqrt(2)
* ``product_student_t``   independent Student-t(nu) coordinates scaled by
                          sqrt((nu - 2) / nu); requires nu > 2

The marginal law of |<X, v>| is available analytically for the gaussian (any
direction) and for single-coordinate directions of the product laws; any other
case falls back to a cached high-resolution empirical reference sample.
"""

from __future__ import annotations

import hashlib
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import SampleMatrix
from .seeding import child_rng, child_seed

__all__ = [
    "DistributionSpec",
    "MomentDoesNotExistError",
    "MomentValue",
    "MomentOracle",
    "MarginalCDF",
    "FoldedNormalCDF",
    "HalfUniformCDF",
    "ExponentialCDF",
    "FoldedStudentTCDF",
    "EmpiricalCDF",
    "draw_sample",
    "marginal_cdf",
    "clear_marginal_cache",
    "true_p_moment",
    "sphere_directions",
    "gaussian_abs_moment",
    "student_abs_moment",
]

DIST_NAMES = ("gaussian", "cube_uniform", "product_laplace", "product_student_t")

CUBE_HALF_WIDTH = math.sqrt(3.0)
LAPLACE_SCALE = 1.0 / math.sqrt(2.0)

# Chunk size for streamed reference draws; fixed so results never depend on
# available memory.
_CHUNK_ROWS = 200_000


class MomentDoesNotExistError(ValueError):
    """Requested a moment of an order at or above the law's tail exponent."""


def _student_coord_scale(nu: float) -> float:
    return math.sqrt((nu - 2.0) / nu)


def _fourth_cumulant(name: str, nu: float | None) -> float:
    # Fourth cumulant of a single unit-variance coordinate.
    if name == "gaussian":
        return 0.0
    if name == "cube_uniform":
        return -1.2
    if name == "product_laplace":
        return 3.0
    if name == "product_student_t":
        if nu is None or nu <= 4:
            raise MomentDoesNotExistError(f"fourth moment requires nu > 4, got nu={nu}")
        return 6.0 / (nu - 4.0)
    raise ValueError(f"unknown distribution {name!r}")


@dataclass(frozen=True)
class DistributionSpec:
    """A named isotropic law on R^d.

    ``moment_equiv`` stores (q, L) such that the L_q norm of every marginal is
    at most L times its L_2 norm; the stored L values are the exact suprema
    over directions (None when the q-th moment does not exist).
    """

    name: str
    dim: int
    nu: float | None = None

    def __post_init__(self):
        if self.name not in DIST_NAMES:
            raise ValueError(f"unknown distribution {self.name!r}; expected one of {DIST_NAMES}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.name == "product_student_t":
            if self.nu is None or not (self.nu > 2):
                raise ValueError(f"product_student_t requires nu > 2, got nu={self.nu}")
        elif self.nu is not None:
            raise ValueError(f"nu is only meaningful for product_student_t, got nu={self.nu}")

    @property
    def label(self) -> str:
        if self.name == "product_student_t":
            return f"product_student_t(nu={self.nu!r})"
        return self.name

    @property
    def max_finite_moment(self) -> float:
        """Moments of order p exist exactly for p below this value."""
        return self.nu if self.name == "product_student_t" else math.inf

    @property
    def log_concave(self) -> bool:
        return self.name in ("gaussian", "cube_uniform", "product_laplace")

    @property
    def moment_equiv(self) -> tuple[float, float] | None:
        if self.name in ("gaussian", "cube_uniform"):
            return (4.0, 3.0 ** 0.25)
        if self.name == "product_laplace":
            return (4.0, 6.0 ** 0.25)
        if self.nu is not None and self.nu > 4:
            return (4.0, (3.0 * (self.nu - 2.0) / (self.nu - 4.0)) ** 0.25)
        return None


def spec_from_label(label: str, dim: int) -> DistributionSpec:
    """Inverse of ``DistributionSpec.label``."""
    if label.startswith("product_student_t(nu="):
        nu = float(label[len("product_student_t(nu="):-1])
        return DistributionSpec("product_student_t", dim, nu)
    return DistributionSpec(label, dim)


def draw_sample(spec: DistributionSpec, n: int, seed: int) -> SampleMatrix:
    """n i.i.d. rows from the law; deterministic in the seed."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    data = _draw_matrix(spec, n, np.random.default_rng(seed))
    return SampleMatrix(data=data, seed=int(seed), dist_name=spec.label)


def _draw_matrix(spec: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    d = spec.dim
    if spec.name == "gaussian":
        return rng.standard_normal((n, d))
    if spec.name == "cube_uniform":
        return rng.uniform(-CUBE_HALF_WIDTH, CUBE_HALF_WIDTH, size=(n, d))
    if spec.name == "product_laplace":
        return rng.laplace(0.0, LAPLACE_SCALE, size=(n, d))
    return rng.standard_t(spec.nu, size=(n, d)) * _student_coord_scale(spec.nu)


def sphere_directions(dim: int, m: int, seed: int) -> np.ndarray:
    """m i.i.d. uniform directions on the unit sphere (normalized gaussians)."""
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    if dim < 1:
        raise ValueError(f"need dim >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    out = rng.standard_normal((m, dim))
    norms = np.linalg.norm(out, axis=1)
    while np.any(norms == 0.0):  # probability zero, handled anyway
        bad = norms == 0.0
        out[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(out, axis=1)
    return out / norms[:, None]


# ---------------------------------------------------------------------------
# Marginal CDFs of |<X, v>|
# ---------------------------------------------------------------------------


class MarginalCDF:
    """Law of |<X, v>| for a fixed direction.

    Implementations provide the strict tail ``sf(t) = P(f > t)`` and the point
    mass ``atom(t) = P(f = t)``; both accept scalars or arrays.  Objects are
    immutable after construction and safe for concurrent queries.
    """

    mode = "analytic"
    #: moments of order >= this bound diverge (math.inf when all exist)
    max_finite_moment: float = math.inf

    def sf(self, t):
        raise NotImplementedError

    def atom(self, t):
        if np.ndim(t) == 0:
            return 0.0
        return np.zeros(np.shape(t))

    def cdf(self, t):
        return 1.0 - self.sf(t) - self.atom(t)

    def sf_left(self, t):
        """P(f >= t), the left limit of the tail function."""
        return self.sf(t) + self.atom(t)

    def exact_moment(self, p: float) -> float | None:
        """Closed-form E f^p when one is known, else None."""
        return None


def _scalar_or_array(t, fn):
    arr = np.asarray(t, dtype=np.float64)
    out = fn(arr)
    if arr.ndim == 0:
        return float(out)
    return out


def gaussian_abs_moment(p: float) -> float:
    """E |Z|^p for a standard normal Z."""
    return 2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)


def student_abs_moment(nu: float, p: float) -> float:
    """E |T|^p for Student-t with nu degrees of freedom; requires p < nu."""
    if p >= nu:
        raise MomentDoesNotExistError(f"|T|^p with p={p} diverges for nu={nu}")
    log_val = (
        (p / 2.0) * math.log(nu)
        + special.gammaln((p + 1.0) / 2.0)
        + special.gammaln((nu - p) / 2.0)
        - 0.5 * math.log(math.pi)
        - special.gammaln(nu / 2.0)
    )
    return float(math.exp(log_val))


@dataclass(frozen=True)
class FoldedNormalCDF(MarginalCDF):
    """|s Z| for standard normal Z."""

    scale: float

    def sf(self, t):
        s = self.scale
        return _scalar_or_array(t, lambda a: np.where(a < 0, 1.0, special.erfc(np.maximum(a, 0.0) / (s * math.sqrt(2.0)))))

    def exact_moment(self, p: float) -> float:
        return self.scale ** p * gaussian_abs_moment(p)


@dataclass(frozen=True)
class HalfUniformCDF(MarginalCDF):
    """|U| for U uniform on [-width, width]; uniform on [0, width]."""

    width: float

    def sf(self, t):
        w = self.width
        return _scalar_or_array(t, lambda a: np.clip(1.0 - a / w, 0.0, 1.0))

    def exact_moment(self, p: float) -> float:
        return self.width ** p / (p + 1.0)


@dataclass(frozen=True)
class ExponentialCDF(MarginalCDF):
    """Exponential with the given scale; the law of |L| for Laplace L."""

    scale: float

    def sf(self, t):
        b = self.scale
        return _scalar_or_array(t, lambda a: np.where(a < 0, 1.0, np.exp(-np.maximum(a, 0.0) / b)))

    def exact_moment(self, p: float) -> float:
        return self.scale ** p * math.gamma(p + 1.0)


@dataclass(frozen=True)
class FoldedStudentTCDF(MarginalCDF):
    """|s T| for Student-t T with nu degrees of freedom."""

    nu: float
    scale: float

    @property
    def max_finite_moment(self) -> float:
        return self.nu

    def sf(self, t):
        def tail(a):
            z = np.maximum(a, 0.0) / self.scale
            return np.where(a < 0, 1.0, 2.0 * special.stdtr(self.nu, -z))

        return _scalar_or_array(t, tail)

    def exact_moment(self, p: float) -> float:
        return self.scale ** p * student_abs_moment(self.nu, p)


class EmpiricalCDF(MarginalCDF):
    """Step CDF over a sorted reference sample; queries are O(log M)."""

    mode = "empirical"

    def __init__(self, values, seed: int, source: str = ""):
        xs = np.sort(np.abs(np.asarray(values, dtype=np.float64)))
        if xs.size < 1 or not np.all(np.isfinite(xs)):
            raise ValueError("reference sample must be nonempty and finite")
        self.values = xs
        self.seed = int(seed)
        self.source = source

    @property
    def size(self) -> int:
        return self.values.size

    def sf(self, t):
        xs, m = self.values, self.values.size

        def tail(a):
            return (m - np.searchsorted(xs, a, side="right")) / m

        return _scalar_or_array(t, tail)

    def atom(self, t):
        xs, m = self.values, self.values.size

        def mass(a):
            return (np.searchsorted(xs, a, side="right") - np.searchsorted(xs, a, side="left")) / m

        return _scalar_or_array(t, mass)

    def sf_left(self, t):
        # exact single-count form of P(f >= t), avoiding the sf + atom rounding
        xs, m = self.values, self.values.size

        def tail(a):
            return (m - np.searchsorted(xs, a, side="left")) / m

        return _scalar_or_array(t, tail)

    def quantile_upper(self, eta: float) -> float:
        """Smallest t with P(f > t) < eta, by order statistics."""
        if not (0 < eta < 1):
            raise ValueError(f"eta must lie in (0, 1), got {eta}")
        xs, m = self.values, self.values.size
        target = eta * m

        def count_gt(j: int) -> int:
            return m - int(np.searchsorted(xs, xs[j], side="right"))

        lo, hi = 0, m - 1
        if count_gt(lo) < target:
            return float(xs[0])
        while lo < hi:
            mid = (lo + hi) // 2
            if count_gt(mid) < target:
                hi = mid
            else:
                lo = mid + 1
        return float(xs[lo])

    def exact_moment(self, p: float) -> float:
        return float(np.mean(np.sort(self.values ** p)))


def _coordinate_abs_cdf(spec: DistributionSpec, weight: float) -> MarginalCDF:
    if spec.name == "gaussian":
        return FoldedNormalCDF(scale=weight)
    if spec.name == "cube_uniform":
        return HalfUniformCDF(width=weight * CUBE_HALF_WIDTH)
    if spec.name == "product_laplace":
        return ExponentialCDF(scale=weight * LAPLACE_SCALE)
    return FoldedStudentTCDF(nu=spec.nu, scale=weight * _student_coord_scale(spec.nu))


def _single_coordinate_weight(v: np.ndarray) -> float | None:
    """|v_j| when v has exactly one nonzero coordinate, else None."""
    nz = np.nonzero(v)[0]
    if nz.size == 1:
        return float(abs(v[nz[0]]))
    return None


_MARGINAL_CACHE: OrderedDict[tuple, EmpiricalCDF] = OrderedDict()
_MARGINAL_CACHE_MAX = 32
# Fixed root for derived reference seeds; explicit seeds bypass it.
_REF_SEED_ROOT = 20_260_810


def clear_marginal_cache() -> None:
    _MARGINAL_CACHE.clear()


def _reference_seed(spec: DistributionSpec, v: np.ndarray, ref_size: int) -> int:
    digest = hashlib.blake2s(v.tobytes()).hexdigest()
    return child_seed(_REF_SEED_ROOT, "marginal-ref", spec.label, ref_size, digest)


def marginal_cdf(spec: DistributionSpec, v, ref_size: int = 1_000_000, seed: int | None = None) -> MarginalCDF:
    """The law of |<X, v>|; analytic where known, cached empirical otherwise."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (spec.dim,):
        raise ValueError(f"direction has shape {v.shape}, expected ({spec.dim},)")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("direction v = 0 gives a degenerate marginal")
    if spec.name == "gaussian":
        return FoldedNormalCDF(scale=norm)
    weight = _single_coordinate_weight(v)
    if weight is not None:
        return _coordinate_abs_cdf(spec, weight)

    resolved_seed = _reference_seed(spec, v, ref_size) if seed is None else int(seed)
    key = (spec.label, spec.dim, ref_size, resolved_seed, v.tobytes())
    hit = _MARGINAL_CACHE.get(key)
    if hit is not None:
        _MARGINAL_CACHE.move_to_end(key)
        return hit

    rng = np.random.default_rng(resolved_seed)
    parts = []
    remaining = ref_size
    while remaining > 0:
        rows = min(_CHUNK_ROWS, remaining)
        parts.append(np.abs(_draw_matrix(spec, rows, rng) @ v))
        remaining -= rows
    out = EmpiricalCDF(np.concatenate(parts), seed=resolved_seed, source=spec.label)
    _MARGINAL_CACHE[key] = out
    if len(_MARGINAL_CACHE) > _MARGINAL_CACHE_MAX:
        _MARGINAL_CACHE.popitem(last=False)
    return out


# ---------------------------------------------------------------------------
# Moment oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentValue:
    """E |<X, v>|^p together with how it was obtained."""

    value: float
    stderr: float | None
    method: str

    def __float__(self) -> float:
        return self.value


def _check_moment_exists(spec: DistributionSpec, p: float) -> None:
    if p >= spec.max_finite_moment:
        raise MomentDoesNotExistError(
            f"p={p} moment of {spec.label} diverges (finite only below {spec.max_finite_moment})"
        )


def true_p_moment(
    spec: DistributionSpec,
    v,
    p: float,
    mc_size: int = 10_000_000,
    seed: int | None = None,
    force_mc: bool = False,
) -> MomentValue:
    """E |<X, v>|^p, analytic where a closed form exists, else Monte Carlo.

    The Monte Carlo path uses ``mc_size`` fresh draws and reports the standard
    error of the mean.  ``force_mc`` bypasses the closed forms (useful for
    cross-checking them).
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (spec.dim,):
        raise ValueError(f"direction has shape {v.shape}, expected ({spec.dim},)")
    _check_moment_exists(spec, p)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return MomentValue(0.0, None, "analytic")

    if not force_mc:
        closed = _closed_form_moment(spec, v, norm, p)
        if closed is not None:
            return MomentValue(closed, None, "analytic")

    resolved = child_seed(_REF_SEED_ROOT, "true-moment", spec.label, repr(p)) if seed is None else int(seed)
    rng = np.random.default_rng(resolved)
    total = 0.0
    total_sq = 0.0
    remaining = mc_size
    while remaining > 0:
        rows = min(_CHUNK_ROWS, remaining)
        powered = np.abs(_draw_matrix(spec, rows, rng) @ v) ** p
        total += float(np.sum(powered))
        total_sq += float(np.sum(powered * powered))
        remaining -= rows
    mean = total / mc_size
    var = max(total_sq / mc_size - mean * mean, 0.0)
    return MomentValue(mean, math.sqrt(var / mc_size), "monte_carlo")


def _closed_form_moment(spec: DistributionSpec, v: np.ndarray, norm: float, p: float) -> float | None:
    if spec.name == "gaussian":
        return norm ** p * gaussian_abs_moment(p)
    if p == 2.0:
        return norm * norm  # isotropy
    weight = _single_coordinate_weight(v)
    if weight is not None:
        return _coordinate_abs_cdf(spec, weight).exact_moment(p)
    if p == 4.0:
        kappa4 = _fourth_cumulant(spec.name, spec.nu)
        return 3.0 * norm ** 4 + kappa4 * float(np.sum(v ** 4))
    return None


class MomentOracle:
    """Batched E |<X, v>|^p over many directions.

    Uses closed forms whenever available; otherwise streams one shared
    reference sample of ``ref_size`` draws and projects it onto all the
    directions at once.  Deterministic in (spec, ref_size, seed).
    """

    def __init__(self, spec: DistributionSpec, ref_size: int = 1_000_000, seed: int = 0):
        self.spec = spec
        self.ref_size = int(ref_size)
        self.seed = int(seed)

    def moments(self, directions, p: float) -> np.ndarray:
        dirs = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        if dirs.shape[1] != self.spec.dim:
            raise ValueError(f"directions have dim {dirs.shape[1]}, expected {self.spec.dim}")
        _check_moment_exists(self.spec, p)
        norms = np.linalg.norm(dirs, axis=1)
        if self.spec.name == "gaussian":
            return norms ** p * gaussian_abs_moment(p)
        if p == 2.0:
            return norms * norms
        if p == 4.0:
            kappa4 = _fourth_cumulant(self.spec.name, self.spec.nu)
            return 3.0 * norms ** 4 + kappa4 * np.sum(dirs ** 4, axis=1)

        rng = child_rng(self.seed, "moment-ref", self.spec.label)
        acc = np.zeros(dirs.shape[0])
        remaining = self.ref_size
        while remaining > 0:
            rows = min(_CHUNK_ROWS, remaining)
            chunk = _draw_matrix(self.spec, rows, rng)
            acc += np.sum(np.abs(chunk @ dirs.T) ** p, axis=0)
            remaining -= rows
        return acc / self.ref_size
