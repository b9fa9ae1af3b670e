"""Mixture specifications over a simple reference density.

A mixture is a weighted family of affinely mapped copies of one reference
density (standard normal or uniform on the open unit cube):

    rho(x) = sum_j  w_j * |det A_j|^{-1} * rho_ref(A_j^{-1} (x - a_j))

with shifts ``a_j``, symmetric positive definite scale matrices ``A_j`` and
weights summing to one.  Weights may be negative (Gaussian reference, no
scaling) as long as the resulting density stays strictly positive, which is
checked on a probe sample at construction time.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .errors import (
    InvalidInputError,
    NonPositiveDensityError,
    UnsupportedOperationError,
)

LOG_2PI = float(np.log(2.0 * np.pi))

_WEIGHT_SUM_TOL = 1e-12
_SYMMETRY_TOL = 1e-12
_PROBE_SIZE = 10_000
_PROBE_SEED = 0x5EED

__all__ = [
    "ReferenceDensity",
    "MixtureSpec",
    "MomentSummary",
    "mixture_log_density",
    "mixture_log_density_many",
    "mixture_moments",
    "composition_sample",
    "random_mixture",
    "spd_sqrt",
    "demo_three_component",
    "spec_to_dict",
    "spec_from_dict",
    "spec_digest",
]


@dataclass(frozen=True)
class ReferenceDensity:
    """Reference density: ``gaussian`` = N(0, I_d), ``uniform`` = Unif((0,1)^d)."""

    kind: str
    d: int

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise InvalidInputError(f"unknown reference kind {self.kind!r}")
        if self.d < 1:
            raise InvalidInputError("dimension must be a positive integer")

    def log_density_many(self, Z: np.ndarray) -> np.ndarray:
        """Log reference density, rows of ``Z`` as points."""
        Z = np.asarray(Z, dtype=float)
        if self.kind == "gaussian":
            return -0.5 * self.d * LOG_2PI - 0.5 * np.sum(Z * Z, axis=-1)
        inside = np.all((Z > 0.0) & (Z < 1.0), axis=-1)
        return np.where(inside, 0.0, -np.inf)


@dataclass(frozen=True)
class MomentSummary:
    """First two moments of a mixture; covariance validated PSD."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if not np.allclose(cov, cov.T, atol=1e-10, rtol=0.0):
            raise InvalidInputError("covariance must be symmetric")
        smallest = float(np.linalg.eigvalsh(cov)[0])
        if smallest < -1e-10:
            raise InvalidInputError(
                f"covariance not positive semidefinite (lambda_min = {smallest:g})"
            )


class MixtureSpec:
    """Validated, immutable mixture specification.

    Parameters
    ----------
    weights : (J,) array, summing to 1 within 1e-12.
    shifts : (J, d) array of component shifts.
    scales : (J, d, d) array of symmetric positive definite scale matrices.
    reference : ReferenceDensity or "gaussian"/"uniform" (dimension inferred).
    allow_negative_weights : opt in to signed weights; requires a Gaussian
        reference and identity scales, and the density is probed for strict
        positivity at construction.
    """

    def __init__(self, weights, shifts, scales, reference="gaussian",
                 allow_negative_weights=False):
        weights = np.array(weights, dtype=float)
        shifts = np.array(shifts, dtype=float)
        scales = np.array(scales, dtype=float)
        if weights.ndim != 1 or weights.size < 1:
            raise InvalidInputError("weights must be a non-empty vector")
        J = weights.size
        if shifts.ndim != 2 or shifts.shape[0] != J:
            raise InvalidInputError("shifts must have shape (J, d)")
        d = shifts.shape[1]
        if scales.shape != (J, d, d):
            raise InvalidInputError("scales must have shape (J, d, d)")
        for arr, name in ((weights, "weights"), (shifts, "shifts"), (scales, "scales")):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contain non-finite entries")
        if abs(weights.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise InvalidInputError(
                f"weights sum to {weights.sum()!r}, expected 1 within {_WEIGHT_SUM_TOL}"
            )

        if isinstance(reference, str):
            reference = ReferenceDensity(reference, d)
        if reference.d != d:
            raise InvalidInputError("reference dimension does not match shifts")

        chol = np.empty_like(scales)
        for j in range(J):
            A = scales[j]
            if np.max(np.abs(A - A.T)) > _SYMMETRY_TOL:
                raise InvalidInputError(f"scale matrix {j} is not symmetric")
            try:
                chol[j] = np.linalg.cholesky(A)
            except np.linalg.LinAlgError:
                raise InvalidInputError(
                    f"scale matrix {j} is not positive definite"
                ) from None

        self.weights = weights
        self.shifts = shifts
        self.scales = scales
        self.reference = reference
        self.allow_negative_weights = bool(allow_negative_weights)

        self.J = J
        self.d = d
        self.chol = chol
        self.log_det = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
        self.signs = np.sign(weights)
        with np.errstate(divide="ignore"):
            self.log_abs_weights = np.log(np.abs(weights))
        self.has_negative = bool(np.any(weights < 0.0))

        if self.has_negative:
            if not self.allow_negative_weights:
                raise InvalidInputError(
                    "negative weights require allow_negative_weights=True"
                )
            if reference.kind != "gaussian":
                raise UnsupportedOperationError(
                    "negative weights are only supported for a Gaussian reference"
                )
            eye = np.eye(d)
            if any(np.max(np.abs(scales[j] - eye)) > _SYMMETRY_TOL for j in range(J)):
                raise UnsupportedOperationError(
                    "negative weights require identity scale matrices"
                )

        for arr in (self.weights, self.shifts, self.scales, self.chol,
                    self.log_det, self.signs, self.log_abs_weights):
            arr.flags.writeable = False

        if self.has_negative:
            self._probe_positivity()

    # -- construction helpers -------------------------------------------------

    def _probe_positivity(self):
        """Probe strict positivity of a signed density on a sample plus centers.

        Sampling uses the |w|-normalized mixture (composition method); any
        non-positive density value fails construction.
        """
        rng = np.random.default_rng(_PROBE_SEED)
        absw = np.abs(self.weights)
        probe_spec = MixtureSpec(absw / absw.sum(), self.shifts, self.scales,
                                 self.reference)
        probe = composition_sample(probe_spec, rng, _PROBE_SIZE)
        probe = np.vstack([probe, self.shifts])
        signed = _signed_density_shifted(self, probe)[1]
        bad = np.flatnonzero(signed <= 0.0)
        if bad.size:
            raise NonPositiveDensityError(
                f"signed mixture density non-positive at probe point "
                f"{probe[bad[0]]} ({bad.size} of {probe.shape[0]} probe points)",
                where=probe[bad[0]],
            )

    # -- misc ------------------------------------------------------------------

    def component_covariances(self) -> np.ndarray:
        """Covariance A_j A_j^T of each component (Gaussian reference)."""
        return np.einsum("jab,jcb->jac", self.scales, self.scales)

    def __repr__(self):
        return (f"MixtureSpec(J={self.J}, d={self.d}, "
                f"reference={self.reference.kind!r})")


def _component_log_densities(spec: MixtureSpec, X: np.ndarray) -> np.ndarray:
    """log( w-free component densities ), shape (n, J).

    Entry (n, j) is  -log|det A_j| + log rho_ref(A_j^{-1}(x_n - a_j)).
    """
    n = X.shape[0]
    out = np.empty((n, spec.J))
    for j in range(spec.J):
        Y = X - spec.shifts[j]
        Z = cho_solve((spec.chol[j], True), Y.T).T
        out[:, j] = spec.reference.log_density_many(Z) - spec.log_det[j]
    return out


def _signed_density_shifted(spec: MixtureSpec, X: np.ndarray):
    """Signed accumulation anchored at the max-magnitude term.

    Returns ``(anchor, signed_sum)`` with density = exp(anchor) * signed_sum.
    """
    comp = _component_log_densities(spec, X) + spec.log_abs_weights
    anchor = np.max(comp, axis=1)
    signed = np.einsum("j,nj->n", spec.signs, np.exp(comp - anchor[:, None]))
    return anchor, signed


def mixture_log_density_many(spec: MixtureSpec, X) -> np.ndarray:
    """Log mixture density at each row of ``X``; see ``mixture_log_density``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != spec.d:
        raise InvalidInputError(f"points have dimension {X.shape[1]}, spec has {spec.d}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("points contain non-finite entries")
    if not spec.has_negative:
        comp = _component_log_densities(spec, X) + spec.log_abs_weights
        m = np.max(comp, axis=1)
        with np.errstate(invalid="ignore"):
            out = m + np.log(np.sum(np.exp(comp - m[:, None]), axis=1))
        return np.where(np.isfinite(m), out, -np.inf)
    anchor, signed = _signed_density_shifted(spec, X)
    bad = np.flatnonzero(signed <= 0.0)
    if bad.size:
        raise NonPositiveDensityError(
            f"signed mixture density non-positive at {X[bad[0]]}", where=X[bad[0]]
        )
    return anchor + np.log(signed)


def mixture_log_density(spec: MixtureSpec, x) -> float:
    """Log density of the mixture at a single point.

    Computed by log-sum-exp over component terms
    ``log w_j - log|det A_j| + log rho_ref(A_j^{-1}(x - a_j))``; mixtures with
    negative weights fall back to signed accumulation in linear scale anchored
    at the max-magnitude term.
    """
    return float(mixture_log_density_many(spec, np.atleast_1d(x))[0])


def mixture_moments(spec: MixtureSpec) -> MomentSummary:
    """Exact mean and covariance of a Gaussian-reference mixture.

    mean = sum_j w_j a_j,
    cov  = sum_j w_j (A_j A_j^T + a_j a_j^T) - mean mean^T.
    """
    if spec.reference.kind != "gaussian":
        raise UnsupportedOperationError("moments require a Gaussian reference")
    w = spec.weights
    mean = w @ spec.shifts
    cov = np.einsum("j,jab->ab", w, spec.component_covariances())
    cov += np.einsum("j,ja,jb->ab", w, spec.shifts, spec.shifts)
    cov -= np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)
    return MomentSummary(mean=mean, covariance=cov)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def composition_sample(spec: MixtureSpec, rng, n: int) -> np.ndarray:
    """Draw ``n`` independent samples by the composition method.

    Draw X from the reference, a component index nu with P(nu = j) = w_j via
    inverse CDF on the cumulative weights, and return A_nu X + a_nu.
    """
    if spec.has_negative:
        raise UnsupportedOperationError(
            "composition sampling requires a probability weight vector"
        )
    rng = _as_rng(rng)
    n = int(n)
    u = rng.random(n)
    cum = np.cumsum(spec.weights)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, u, side="left")
    if spec.reference.kind == "gaussian":
        X = rng.standard_normal((n, spec.d))
    else:
        X = rng.random((n, spec.d))
    out = np.empty_like(X)
    for j in range(spec.J):
        mask = idx == j
        if np.any(mask):
            out[mask] = X[mask] @ spec.scales[j].T + spec.shifts[j]
    return out


def spd_sqrt(M) -> np.ndarray:
    """Symmetric positive definite square root of an SPD matrix."""
    M = np.asarray(M, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    if vals[0] <= 0.0:
        raise InvalidInputError("matrix is not positive definite")
    S = (vecs * np.sqrt(vals)) @ vecs.T
    return 0.5 * (S + S.T)


def random_mixture(d: int, J: int, rng) -> MixtureSpec:
    """Randomized equal-weight Gaussian mixture for experiments.

    Centers are i.i.d. standard normal.  Each component covariance is
    C_j = d * W_j with W_j Wishart(nu^{-1} I_d, nu), nu = d + 4, drawn by the
    Bartlett construction; the scale matrix is the symmetric square root of
    C_j, so the component covariance is exactly C_j.
    """
    if d < 1 or J < 1:
        raise InvalidInputError("d and J must be positive")
    rng = _as_rng(rng)
    nu = d + 4
    shifts = rng.standard_normal((J, d))
    scales = np.empty((J, d, d))
    for j in range(J):
        B = np.zeros((d, d))
        for i in range(d):
            B[i, i] = np.sqrt(rng.chisquare(nu - i))
            B[i, :i] = rng.standard_normal(i)
        C = d * (B @ B.T) / nu
        scales[j] = spd_sqrt(C)
    weights = np.full(J, 1.0 / J)
    return MixtureSpec(weights, shifts, scales)


def demo_three_component() -> MixtureSpec:
    """Built-in 2-D demo: three well-separated anisotropic Gaussian components.

    Weights (0.3, 0.4, 0.3); the second scale matrix is the symmetric square
    root of (4/9) [[1, -1], [-1, 2]] so that all scales are SPD.
    """
    shifts = [[2.0, -1.0], [-1.0, 0.0], [0.0, -2.0]]
    A1 = (2.0 / 3.0) * np.eye(2)
    A2 = spd_sqrt((4.0 / 9.0) * np.array([[1.0, -1.0], [-1.0, 2.0]]))
    A3 = (2.0 / 3.0) * np.diag([2.0, 0.5])
    return MixtureSpec([0.3, 0.4, 0.3], shifts, [A1, A2, A3])


# -- serialization --------------------------------------------------------------


def spec_to_dict(spec: MixtureSpec) -> dict:
    """JSON-ready document; scales stored row-major as full matrices."""
    doc = {
        "weights": spec.weights.tolist(),
        "shifts": spec.shifts.tolist(),
        "scales": spec.scales.tolist(),
        "reference": spec.reference.kind,
        "dim": spec.d,
    }
    if spec.allow_negative_weights:
        doc["allow_negative_weights"] = True
    return doc


def spec_from_dict(doc: dict) -> MixtureSpec:
    """Rebuild a spec from its JSON document, re-running all validation."""
    spec = MixtureSpec(
        doc["weights"],
        doc["shifts"],
        doc["scales"],
        reference=doc.get("reference", "gaussian"),
        allow_negative_weights=doc.get("allow_negative_weights", False),
    )
    if "dim" in doc and int(doc["dim"]) != spec.d:
        raise InvalidInputError("declared dim does not match shifts")
    return spec


def spec_digest(spec: MixtureSpec) -> str:
    """Stable content hash used to key reference-value caches."""
    payload = json.dumps(spec_to_dict(spec), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
