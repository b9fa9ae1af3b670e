"""Generators for reference-distributed quadrature point sets.

Provides Halton sequences (with the uniform-to-normal map), probabilists'
Gauss-Hermite rules, Smolyak sparse grids built by the combination technique,
and seeded Monte Carlo points, all packaged as weighted point sets whose
weights sum to one.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import erf as _erf, erfc as _erfc

from .errors import (
    DomainError,
    EmptyGridError,
    InvalidInputError,
    UnsupportedDimensionError,
)

# first 100 primes: bases of the Halton sequence
_PRIMES = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67,
    71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149,
    151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229,
    233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311, 313,
    317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409,
    419, 421, 431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499,
    503, 509, 521, 523, 541,
]

_CLAMP = 2.0 ** -52

PROVENANCES = ("mc", "qmc-halton", "sparse-grid", "transported", "componentwise")

__all__ = [
    "WeightedPointSet",
    "SparseGridLevel",
    "halton",
    "halton_normal_set",
    "uniform_to_normal",
    "inverse_erf",
    "gauss_hermite_rule",
    "smolyak_grid",
    "mc_points",
    "write_pointset_csv",
    "read_pointset_csv",
]


@dataclass(frozen=True)
class WeightedPointSet:
    """N points in R^d with quadrature weights summing to one.

    Weights may be negative (sparse grids); coordinates must be finite.
    """

    points: np.ndarray
    weights: np.ndarray
    provenance: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2:
            raise InvalidInputError("points must be a (N, d) array")
        if w.shape != (pts.shape[0],):
            raise InvalidInputError("weights must match the number of points")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise InvalidInputError("point set contains non-finite entries")
        if pts.shape[0] and abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"weights sum to {w.sum()!r}, expected 1")
        if self.provenance not in PROVENANCES:
            raise InvalidInputError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        pts.flags.writeable = False
        w.flags.writeable = False

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SparseGridLevel:
    """Level parameter of a Smolyak grid with a linear level-to-knots map."""

    level: int
    d: int
    rule: str = "gauss-hermite"

    def __post_init__(self):
        if self.level < 0:
            raise InvalidInputError("level must be nonnegative")
        if self.d < 1:
            raise InvalidInputError("dimension must be positive")
        if self.rule != "gauss-hermite":
            raise InvalidInputError(f"unsupported rule {self.rule!r}")


def _radical_inverse(indices: np.ndarray, base: int, scramble: bool) -> np.ndarray:
    """Van der Corput radical inverse of positive integers in the given base."""
    x = np.zeros(indices.shape, dtype=float)
    k = indices.astype(np.int64).copy()
    f = 1.0 / base
    while np.any(k > 0):
        digits = k % base
        if scramble:
            # per-base digit permutation z -> (base - z) mod base; 0 stays 0
            digits = np.where(digits > 0, base - digits, 0)
        x += digits * f
        k //= base
        f /= base
    return x


def halton(d: int, n: int, skip: int = 1000, leap: int = 100,
           scramble: bool = False) -> np.ndarray:
    """Leaped & skipped Halton points in (0,1)^d, bases the first d primes.

    Point k is the radical inverse of integer ``skip + k*(leap+1) + 1``, so the
    degenerate all-zeros element never appears.  The optional scramble applies
    a per-base digit permutation (no claim of compatibility with any
    particular library's scrambling).
    """
    if d < 1:
        raise InvalidInputError("dimension must be positive")
    if d > len(_PRIMES):
        raise UnsupportedDimensionError(
            f"halton supports up to {len(_PRIMES)} dimensions, got {d}"
        )
    if n < 0 or skip < 0 or leap < 0:
        raise InvalidInputError("n, skip, leap must be nonnegative")
    idx = skip + np.arange(n, dtype=np.int64) * (leap + 1) + 1
    out = np.empty((n, d))
    for i in range(d):
        out[:, i] = _radical_inverse(idx, _PRIMES[i], scramble)
    return out


def inverse_erf(y):
    """Inverse error function on (-1, 1).

    A rational initial guess refined by two Newton steps on erf; relative
    error below 1e-14 across the domain (clamped at 1 - 2^-52).  Odd by
    construction: inverse_erf(-y) == -inverse_erf(y) exactly.
    """
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr)
    if np.any(np.abs(y_arr) >= 1.0) or not np.all(np.isfinite(y_arr)):
        raise DomainError("inverse_erf requires |y| < 1")
    x = _inverse_erf_core(np.abs(y_arr)) * np.sign(y_arr)
    return float(x[0]) if scalar else x


# Acklam's rational approximation to the standard normal quantile,
# used only as the Newton starting point (|error| ~ 1e-9).
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def _normal_quantile_guess(p: np.ndarray) -> np.ndarray:
    a, b, c, dd = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    out = np.empty_like(p)
    lo = p < 0.02425
    hi = p > 1.0 - 0.02425
    mid = ~(lo | hi)
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        out[mid] = q * num / den
    if np.any(lo):
        q = np.sqrt(-2.0 * np.log(p[lo]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0
        out[lo] = num / den
    if np.any(hi):
        q = np.sqrt(-2.0 * np.log(1.0 - p[hi]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0
        out[hi] = -num / den
    return out


_SQRT_PI_HALF = math.sqrt(math.pi) / 2.0


def _inverse_erf_from_tail(tail: np.ndarray) -> np.ndarray:
    """inverse_erf(1 - tail) for tail in (0, 1].

    The Newton residual is formed from the exact tail (via erfc when the
    argument is large), so no precision is lost to the 2x - 1 rescaling.
    """
    tail = np.maximum(tail, _CLAMP)
    y = 1.0 - tail
    x = _normal_quantile_guess(1.0 - 0.5 * tail) / math.sqrt(2.0)
    big = y >= 0.5
    for _ in range(2):
        r = np.where(big, _erfc(x) - tail, y - _erf(x))
        x = x + r * _SQRT_PI_HALF * np.exp(x * x)
    return x


def _inverse_erf_core(y: np.ndarray) -> np.ndarray:
    """inverse_erf for y in [0, 1), clamped at 1 - 2^-52.

    Newton residuals use y directly below 0.5 (keeps tiny arguments exact)
    and the tail 1 - y above (exact there by Sterbenz).
    """
    y = np.minimum(y, 1.0 - _CLAMP)
    x = _normal_quantile_guess(0.5 * (y + 1.0)) / math.sqrt(2.0)
    big = y >= 0.5
    tail = np.where(big, 1.0 - y, 1.0)
    for _ in range(2):
        r = np.where(big, _erfc(x) - tail, y - _erf(x))
        x = x + r * _SQRT_PI_HALF * np.exp(x * x)
    return x


def uniform_to_normal(x):
    """Coordinatewise map sqrt(2) * inverse_erf(2x - 1) from (0,1)^d to R^d.

    Equals the standard normal quantile function in each coordinate;
    coordinates are clamped to [2^-52, 1 - 2^-52] before inversion.  The
    tail mass min(x, 1-x) is handed to the inversion exactly, so the map
    composed with the normal CDF is the identity to better than 1e-12 on
    [-6, 6].
    """
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)) or np.any(x_arr < 0.0) or np.any(x_arr > 1.0):
        raise InvalidInputError("coordinates must lie in [0, 1]")
    clamped = np.clip(x_arr, _CLAMP, 1.0 - _CLAMP)
    sign = np.where(clamped >= 0.5, 1.0, -1.0)
    tail = 2.0 * np.minimum(clamped, 1.0 - clamped)
    return math.sqrt(2.0) * _inverse_erf_from_tail(tail) * sign


def halton_normal_set(d: int, n: int, skip: int = 1000, leap: int = 100,
                      scramble: bool = False) -> WeightedPointSet:
    """Halton points pushed through the uniform-to-normal map, uniform weights."""
    pts = uniform_to_normal(halton(d, n, skip=skip, leap=leap, scramble=scramble))
    return WeightedPointSet(pts, np.full(n, 1.0 / n), "qmc-halton")


def _hermite_orthonormal(x: np.ndarray, n: int):
    """Orthonormal probabilists' Hermite values p_0..p_n at each x."""
    P = np.empty((n + 1, x.size))
    P[0] = 1.0
    if n >= 1:
        P[1] = x
    for k in range(1, n):
        P[k + 1] = (x * P[k] - math.sqrt(k) * P[k - 1]) / math.sqrt(k + 1)
    return P


def gauss_hermite_rule(n: int):
    """n-point probabilists' Gauss-Hermite rule (weight = N(0,1) density).

    Golub-Welsch on the symmetric Jacobi matrix with off-diagonal sqrt(k);
    eigenvalue nodes are polished by two Newton steps on the orthonormal
    recurrence and weights come from the Christoffel identity, then the
    sign symmetry is made exact.
    """
    if n < 1:
        raise InvalidInputError("node count must be positive")
    if n == 1:
        return np.zeros(1), np.ones(1)
    offdiag = np.sqrt(np.arange(1.0, n))
    nodes, _ = eigh_tridiagonal(np.zeros(n), offdiag)
    for _ in range(2):
        P = _hermite_orthonormal(nodes, n)
        nodes = nodes - P[n] / (math.sqrt(n) * P[n - 1])
    P = _hermite_orthonormal(nodes, n)
    weights = 1.0 / np.sum(P[:n] ** 2, axis=0)
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights /= weights.sum()
    return nodes, weights


def _compositions(total: int, parts: int):
    """All tuples of `parts` positive integers summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def smolyak_grid(cfg: SparseGridLevel) -> WeightedPointSet:
    """Sparse Gauss-Hermite grid by the combination technique.

    Sums, over multi-indices l with q-d+1 <= |l| <= q (entries >= 1), the
    coefficient (-1)^(q-|l|) * binom(d-1, q-|l|) times the tensor rule with
    l_i nodes on axis i (linear level-to-knots).  Duplicate nodes are merged
    with summed weights and zero-weight nodes are dropped.
    """
    q, d = cfg.level, cfg.d
    if q < d:
        raise EmptyGridError(f"level {q} below dimension {d} yields an empty grid")
    max_m = q - d + 1
    rules = {m: gauss_hermite_rule(m) for m in range(1, max_m + 1)}
    blocks_pts, blocks_w = [], []
    for s in range(max(d, q - d + 1), q + 1):
        coeff = (-1.0) ** (q - s) * math.comb(d - 1, q - s)
        if coeff == 0.0:
            continue
        for ell in _compositions(s, d):
            axes_nodes = [rules[m][0] for m in ell]
            axes_w = [rules[m][1] for m in ell]
            mesh = np.meshgrid(*axes_nodes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
            wmesh = np.meshgrid(*axes_w, indexing="ij")
            w = coeff * np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
            blocks_pts.append(pts)
            blocks_w.append(w)
    all_pts = np.vstack(blocks_pts)
    all_w = np.concatenate(blocks_w)
    keys = np.round(all_pts, 12)
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True,
                                     return_inverse=True)
    merged_w = np.bincount(inverse, weights=all_w, minlength=uniq.shape[0])
    merged_pts = all_pts[first]
    keep = np.abs(merged_w) > 1e-14 * max(1.0, np.abs(merged_w).max())
    return WeightedPointSet(merged_pts[keep], merged_w[keep], "sparse-grid")


def mc_points(d: int, n: int, rng) -> WeightedPointSet:
    """i.i.d. standard normal points with uniform weights 1/n."""
    if d < 1 or n < 1:
        raise InvalidInputError("d and n must be positive")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    return WeightedPointSet(gen.standard_normal((n, d)), np.full(n, 1.0 / n), "mc")


# -- CSV interchange -------------------------------------------------------------


def write_pointset_csv(ps: WeightedPointSet, path_or_file, comments=()) -> None:
    """Write "w,x1,...,xd" rows at full double precision (17 significant digits).

    ``comments`` are emitted first as "# key: value" lines; provenance is
    always recorded.
    """
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(f"# provenance: {ps.provenance}\n")
        fh.write("w," + ",".join(f"x{i + 1}" for i in range(ps.d)) + "\n")
        for w, row in zip(ps.weights, ps.points):
            fh.write(f"{w:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
    finally:
        if own:
            fh.close()


def read_pointset_csv(path_or_file) -> WeightedPointSet:
    """Read a point set written by ``write_pointset_csv``."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "r") if own else path_or_file
    try:
        provenance = "mc"
        header = None
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("provenance:"):
                    provenance = body.split(":", 1)[1].strip()
                continue
            if header is None:
                header = line
                continue
            rows.append([float(tok) for tok in line.split(",")])
    finally:
        if own:
            fh.close()
    if header is None or not rows:
        raise InvalidInputError("point-set CSV contains no data rows")
    data = np.asarray(rows, dtype=float)
    return WeightedPointSet(data[:, 1:], data[:, 0], provenance)


def pointset_csv_text(ps: WeightedPointSet, comments=()) -> str:
    buf = io.StringIO()
    write_pointset_csv(ps, buf, comments)
    return buf.getvalue()
