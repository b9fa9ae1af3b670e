"""Transport of points from the reference to a mixture along an explicit ODE.

The velocity field interpolates each component's scale matrix linearly in
time, M_j(t) = t A_j + (1-t) I, and weighs the per-component affine
velocities by their softmax responsibilities; integrating dx/dt = v_t(x)
from t=0 to t=1 pushes reference-distributed points onto the mixture.
A componentwise alternative maps blocks of points affinely instead.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._backend import (
    BACKEND,
    MixtureData,
    log_density_stage,
    rk4_batch,
    velocity_stage,
)
from .errors import (
    InsufficientBudgetError,
    InvalidInputError,
    NonPositiveDensityError,
    StiffnessError,
    UnsupportedOperationError,
)
from .mixtures import MixtureSpec
from .pointsets import WeightedPointSet

__all__ = [
    "TransportConfig",
    "velocity",
    "velocity_many",
    "intermediate_log_density",
    "transport_point",
    "transport_set",
    "componentwise_transport",
    "BACKEND",
]

_SCHEME_ALIASES = {
    "rk4": "rk4-fixed",
    "rk4-fixed": "rk4-fixed",
    "dopri45": "dopri45-adaptive",
    "dopri45-adaptive": "dopri45-adaptive",
}


@dataclass(frozen=True)
class TransportConfig:
    """ODE integrator settings.

    ``rk4-fixed`` takes ``steps`` equal steps; ``dopri45-adaptive`` controls
    the local error against (abs_tol, rel_tol) and fails with a stiffness
    error after ``max_steps`` attempted steps.
    """

    scheme: str = "dopri45-adaptive"
    steps: int = 64
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_steps: int = 100_000

    def __post_init__(self):
        scheme = _SCHEME_ALIASES.get(self.scheme)
        if scheme is None:
            raise InvalidInputError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "scheme", scheme)
        if self.steps < 1:
            raise InvalidInputError("steps must be >= 1")
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise InvalidInputError("tolerances must be positive")
        if self.max_steps < 1:
            raise InvalidInputError("max_steps must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "TransportConfig":
        return cls(**doc)


def _require_gaussian(spec: MixtureSpec, what: str) -> None:
    if spec.reference.kind != "gaussian":
        raise UnsupportedOperationError(f"{what} requires a Gaussian reference")


def _check_time(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"time {t!r} outside [0, 1]")
    return t


def velocity_many(spec: MixtureSpec, t: float, X) -> np.ndarray:
    """Transport velocity at shared time t for each row of X."""
    t = _check_time(t)
    _require_gaussian(spec, "the transport velocity")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != spec.d:
        raise InvalidInputError("point dimension does not match the spec")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("points contain non-finite entries")
    V = velocity_stage(MixtureData(spec), t, X)
    if not np.all(np.isfinite(V)):
        raise NonPositiveDensityError(
            f"velocity evaluated non-finite at t={t:.6g}", where=(t, X)
        )
    return V


def velocity(spec: MixtureSpec, t: float, x) -> np.ndarray:
    """Velocity field of the mixture-transport ODE at one point.

    Component velocities a_j + (A_j - I) M_j(t)^{-1} (x - t a_j) are combined
    with responsibilities computed by log-sum-exp; signed mixtures accumulate
    in linear scale anchored at the max-magnitude component and reject
    non-positive density values.
    """
    return velocity_many(spec, t, np.atleast_1d(np.asarray(x, dtype=float)))[0]


def intermediate_log_density(spec: MixtureSpec, t: float, x) -> float:
    """Log density of the time-t interpolating mixture.

    Matches the reference log-density at t=0 and the mixture log-density
    at t=1.
    """
    t = _check_time(t)
    _require_gaussian(spec, "the intermediate density")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.d,):
        raise InvalidInputError("point dimension does not match the spec")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("point contains non-finite entries")
    return float(log_density_stage(MixtureData(spec), t, x[None, :])[0])


def _rk4_point_trajectory(md, x0, t_end, steps):
    x = np.array(x0, dtype=float)[None, :]
    h = t_end / steps
    traj = [(0.0, x[0].copy())]
    from ._ode_py import velocity_from_ops, stage_ops

    ops_lo = stage_ops(md, 0.0)
    for i in range(steps):
        t0 = i * h
        tm = t0 + 0.5 * h
        t1 = t_end if i == steps - 1 else (i + 1) * h
        ops_mid = stage_ops(md, tm)
        ops_hi = stage_ops(md, t1)
        k1 = velocity_from_ops(md, ops_lo, t0, x)
        k2 = velocity_from_ops(md, ops_mid, tm, x + 0.5 * h * k1)
        k3 = velocity_from_ops(md, ops_mid, tm, x + 0.5 * h * k2)
        k4 = velocity_from_ops(md, ops_hi, t1, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        traj.append((t1, x[0].copy()))
        ops_lo = ops_hi
    return x[0], traj


def transport_point(spec: MixtureSpec, cfg: TransportConfig, x0,
                    t_end: float = 1.0, record_trajectory: bool = False):
    """Flow one point from t=0 to ``t_end`` (default 1: the transport map).

    Returns the endpoint, or ``(endpoint, trajectory)`` when recording;
    the trajectory is a list of (t, x) pairs at accepted steps.
    """
    _require_gaussian(spec, "transport")
    t_end = _check_time(t_end)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (spec.d,):
        raise InvalidInputError("start point dimension does not match the spec")
    if not np.all(np.isfinite(x0)):
        raise InvalidInputError("start point contains non-finite entries")
    md = MixtureData(spec)
    if cfg.scheme == "rk4-fixed":
        if record_trajectory:
            x1, traj = _rk4_point_trajectory(md, x0, t_end, cfg.steps)
            return x1, traj
        return rk4_batch(md, x0[None, :], t_end, cfg.steps)[0]
    x1, traj, _ = _backend.dopri45(md, x0, t_end, cfg.abs_tol, cfg.rel_tol,
                                   cfg.max_steps, record=record_trajectory)
    if record_trajectory:
        return x1, traj
    return x1


def transport_set(spec: MixtureSpec, cfg: TransportConfig,
                  pts: WeightedPointSet, t_end: float = 1.0,
                  threads: int = 1) -> WeightedPointSet:
    """Transport every point of a set independently; weights carry over.

    Any failing point aborts the whole call with its index attached to the
    raised error (``.point_index``).
    """
    _require_gaussian(spec, "transport")
    t_end = _check_time(t_end)
    if pts.d != spec.d:
        raise InvalidInputError("point-set dimension does not match the spec")
    if pts.n == 0:
        return WeightedPointSet(pts.points.copy(), pts.weights.copy(),
                                "transported")
    md = MixtureData(spec)
    if cfg.scheme == "rk4-fixed":
        Y = rk4_batch(md, pts.points, t_end, cfg.steps)
    elif threads > 1 and pts.n >= 2 * threads:
        bounds = np.linspace(0, pts.n, threads + 1, dtype=int)
        chunks = [(int(lo), int(hi)) for lo, hi in zip(bounds, bounds[1:])
                  if hi > lo]

        def _work(lo, hi):
            try:
                return lo, _backend.dopri45_batch(
                    md, pts.points[lo:hi], t_end, cfg.abs_tol, cfg.rel_tol,
                    cfg.max_steps, core=_backend.make_core(md))
            except (NonPositiveDensityError, StiffnessError) as exc:
                exc.point_index = lo + getattr(exc, "point_index", 0)
                raise

        Y = np.empty_like(pts.points)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for lo, block in pool.map(lambda c: _work(*c), chunks):
                Y[lo:lo + block.shape[0]] = block
    else:
        Y = _backend.dopri45_batch(md, pts.points, t_end, cfg.abs_tol,
                                   cfg.rel_tol, cfg.max_steps)
    return WeightedPointSet(Y, pts.weights.copy(), "transported")


def componentwise_transport(spec: MixtureSpec,
                            pts: WeightedPointSet) -> WeightedPointSet:
    """Affine componentwise alternative to the ODE transport.

    Component j receives the next floor(w_j N) input points (the last
    component takes the remainder) mapped by A_j x + a_j, each weighted
    w_j / M_j.  Requires uniform input weights and nonnegative mixture
    weights; a zero allotment is an error.
    """
    _require_gaussian(spec, "componentwise transport")
    if spec.has_negative:
        raise UnsupportedOperationError(
            "componentwise transport requires nonnegative mixture weights"
        )
    if pts.d != spec.d:
        raise InvalidInputError("point-set dimension does not match the spec")
    n = pts.n
    if n == 0:
        raise InsufficientBudgetError("componentwise transport of an empty set")
    if np.max(np.abs(pts.weights - 1.0 / n)) > 1e-12:
        raise InvalidInputError("componentwise transport requires uniform weights")
    # tiny nudge so exact products like (1/3) * 9 floor to the intended integer
    alloc = np.floor(spec.weights * n + 1e-9).astype(int)
    alloc[-1] = n - int(alloc[:-1].sum())
    if np.any(alloc < 1):
        j = int(np.argmin(alloc))
        raise InsufficientBudgetError(
            f"component {j} receives floor(w_j * N) = {alloc[j]} points; "
            f"its weight w_j / M_j is undefined"
        )
    out_pts = np.empty_like(pts.points)
    out_w = np.empty(n)
    start = 0
    for j in range(spec.J):
        stop = start + alloc[j]
        out_pts[start:stop] = pts.points[start:stop] @ spec.scales[j].T \
            + spec.shifts[j]
        out_w[start:stop] = spec.weights[j] / alloc[j]
        start = stop
    return WeightedPointSet(out_pts, out_w, "componentwise")
