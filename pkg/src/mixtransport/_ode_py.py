"""Numpy implementation of the transport ODE kernels.

This is the fallback backend; `_ode_c` (Cython) implements the same
per-point adaptive integrator in C.  Everything here is driven by a packed
`MixtureData` so both backends see identical inputs.

The mixture velocity field at time t is a responsibility-weighted sum of
per-component affine velocities,

    v_t(x)   = sum_j lambda_j(t, x) * (a_j + (A_j - I) z_j),
    z_j      = M_j(t)^{-1} (x - t a_j),        M_j(t) = t A_j + (1 - t) I,
    lambda_j = softmax_j( log w_j - log det M_j(t) - ||z_j||^2 / 2 ),

evaluated in log scale; mixtures with signed weights accumulate the numerator
and denominator in linear scale anchored at the max-magnitude component and
reject non-positive denominators.

For batches the per-component work is folded into dense matrix products:
with P_j = M_j(t)^{-1}, the squared norm ||z_j||^2 is the quadratic form
x^T S_j x - 2 r_j . x + c_j (S_j = P_j^2), and the component velocity is the
affine map B_j x + u_j, so a whole batch costs a handful of GEMMs regardless
of the component count.
"""
from __future__ import annotations

import numpy as np

from .errors import NonPositiveDensityError, StiffnessError

LOG_2PI = float(np.log(2.0 * np.pi))

# Dormand-Prince 5(4) tableau
_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
_B = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
      11.0 / 84.0, 0.0)
# b5 - b4: local error estimate coefficients
_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
      -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_MAX_HALVINGS = 40


class MixtureData:
    """Packed arrays of a mixture spec as consumed by the kernels."""

    __slots__ = ("d", "J", "log_abs_w", "signs", "shifts", "scales",
                 "has_negative", "sigmas", "_tri")

    def __init__(self, spec):
        self.d = spec.d
        self.J = spec.J
        self.log_abs_w = np.ascontiguousarray(spec.log_abs_weights)
        self.signs = np.ascontiguousarray(spec.signs)
        self.shifts = np.ascontiguousarray(spec.shifts)
        self.scales = np.ascontiguousarray(spec.scales)
        self.has_negative = spec.has_negative
        diag = np.diagonal(self.scales, axis1=1, axis2=2)
        iso = all(
            np.array_equal(self.scales[j], np.diag(np.full(self.d, diag[j, 0])))
            for j in range(self.J)
        )
        self.sigmas = np.ascontiguousarray(diag[:, 0].copy()) if iso else None
        self._tri = np.triu_indices(self.d)


class StageOps:
    """Per-time-t coefficients shared by every point of a batch."""

    __slots__ = ("t", "logdet", "quad", "lin", "const", "flatB", "shiftv")

    def __init__(self, t, logdet, quad, lin, const, flatB, shiftv):
        self.t = t
        self.logdet = logdet    # (J,)
        self.quad = quad        # (n_tri, J): upper-triangle coeffs of S_j
        self.lin = lin          # (d, J): r_j columns
        self.const = const      # (J,)
        self.flatB = flatB      # (J, d*d): B_j = (A_j - I) P_j, row-major
        self.shiftv = shiftv    # (J, d): u_j = a_j - t B_j a_j


def stage_ops(md: MixtureData, t: float) -> StageOps:
    """Precompute the time-t solve operators (shared across a batch)."""
    d, J = md.d, md.J
    eye = np.eye(d)
    if md.sigmas is not None:
        alpha = 1.0 + t * (md.sigmas - 1.0)
        logdet = d * np.log(alpha)
        P = eye[None, :, :] / alpha[:, None, None]
        B = ((md.sigmas - 1.0) / alpha)[:, None, None] * eye[None, :, :]
        S = eye[None, :, :] / (alpha * alpha)[:, None, None]
    else:
        M = t * md.scales + (1.0 - t) * eye
        L = np.linalg.cholesky(M)
        logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
        Linv = np.linalg.solve(L, np.broadcast_to(eye, L.shape).copy())
        P = np.einsum("jba,jbc->jac", Linv, Linv)  # M^{-1}, symmetric
        B = np.einsum("jab,jbc->jac", md.scales - eye, P)
        S = np.einsum("jab,jbc->jac", P, P)
    ta = t * md.shifts                               # (J, d)
    r = t * np.einsum("jab,jb->ja", S, md.shifts)    # S_j (t a_j)
    const = np.einsum("ja,ja->j", ta, r)             # (t a)^T S (t a) = t a . r
    shiftv = md.shifts - np.einsum("jab,jb->ja", B, ta)
    rows, cols = md._tri
    quad = S[:, rows, cols] * np.where(rows == cols, 1.0, 2.0)
    return StageOps(t, logdet, np.ascontiguousarray(quad.T),
                    np.ascontiguousarray(r.T), const,
                    np.ascontiguousarray(B.reshape(J, d * d)), shiftv)


def _quad_features(md: MixtureData, X: np.ndarray) -> np.ndarray:
    rows, cols = md._tri
    return X[:, rows] * X[:, cols]


def _log_terms(md: MixtureData, ops: StageOps, X: np.ndarray) -> np.ndarray:
    """ell[n, j] = log|w_j| - log det M_j - ||z_j||^2 / 2."""
    ssq = _quad_features(md, X) @ ops.quad - 2.0 * (X @ ops.lin) + ops.const
    return (md.log_abs_w - ops.logdet) - 0.5 * ssq


def _signed_parts(md: MixtureData, ops: StageOps, t: float, X: np.ndarray):
    ell = _log_terms(md, ops, X)
    m = np.max(ell, axis=1)
    G = np.exp(ell - m[:, None])
    if md.has_negative:
        G *= md.signs
        den = G.sum(axis=1)
        bad = den <= 0.0
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NonPositiveDensityError(
                f"intermediate density non-positive at t={t:.6g}",
                where=(t, X[i].copy()),
            )
    else:
        den = G.sum(axis=1)
    return m, G, den


def velocity_from_ops(md: MixtureData, ops: StageOps, t: float,
                      X: np.ndarray) -> np.ndarray:
    _, G, den = _signed_parts(md, ops, t, X)
    n, d = X.shape
    GB = (G @ ops.flatB).reshape(n, d, d)
    V = np.einsum("nab,nb->na", GB, X) + G @ ops.shiftv
    return V / den[:, None]


def velocity_stage(md: MixtureData, t: float, X: np.ndarray) -> np.ndarray:
    """Velocity field at shared time t for a batch of points (n, d)."""
    return velocity_from_ops(md, stage_ops(md, t), t, X)


def log_density_from_ops(md: MixtureData, ops: StageOps, t: float,
                         X: np.ndarray) -> np.ndarray:
    m, _, den = _signed_parts(md, ops, t, X)
    return m + np.log(den) - 0.5 * md.d * LOG_2PI


def log_density_stage(md: MixtureData, t: float, X: np.ndarray) -> np.ndarray:
    """Log intermediate density log rho_t at shared time t, batch of points."""
    return log_density_from_ops(md, stage_ops(md, t), t, X)


def _vel_point(md, t, x):
    return velocity_stage(md, t, x[None, :])[0]


def _rms(v):
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(md, x0, f0, t_end, abs_tol, rel_tol):
    sc = abs_tol + rel_tol * np.abs(x0)
    d0 = _rms(x0 / sc)
    d1 = _rms(f0 / sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_end)
    try:
        f1 = _vel_point(md, h0, x0 + h0 * f0)
    except NonPositiveDensityError:
        return min(1e-6, t_end)
    d2 = _rms((f1 - f0) / sc) / h0
    dm = max(d1, d2)
    h1 = (0.01 / dm) ** 0.2 if dm > 1e-15 else max(1e-6, h0 * 1e3)
    return min(100.0 * h0, h1, t_end)


def dopri45(md: MixtureData, x0, t_end, abs_tol, rel_tol, max_steps,
            record=False):
    """Integrate dx/dt = v_t(x) from 0 to t_end for a single point.

    Dormand-Prince 5(4) with FSAL and standard step control.  For signed
    mixtures, a step whose stages or endpoint hit a non-positive density is
    halved up to 40 times before erroring.  Returns (x(t_end), trajectory,
    accepted-step count); the trajectory is a list of (t, x) at accepted
    steps when ``record`` else None.
    """
    x = np.array(x0, dtype=float)
    d = x.shape[0]
    if t_end == 0.0:
        return x, ([(0.0, x.copy())] if record else None), 0
    k = np.empty((7, d))
    k[0] = _vel_point(md, 0.0, x)
    h = _initial_step(md, x, k[0], t_end, abs_tol, rel_tol)
    t = 0.0
    traj = [(0.0, x.copy())] if record else None
    nattempts = 0
    naccepted = 0
    halvings = 0
    while t < t_end:
        if nattempts >= max_steps:
            raise StiffnessError(
                f"exceeded {max_steps} integrator steps at t={t:.6g}", t=t, x=x
            )
        h = min(h, t_end - t)
        nattempts += 1
        try:
            for i in range(1, 7):
                xi = x + h * sum(_A[i][m] * k[m] for m in range(i))
                k[i] = _vel_point(md, t + _C[i] * h, xi)
            x1 = x + h * sum(_B[i] * k[i] for i in range(6))
            if md.has_negative:
                log_density_stage(md, t + h, x1[None, :])
        except NonPositiveDensityError:
            if not md.has_negative:
                raise
            halvings += 1
            if halvings > _MAX_HALVINGS:
                raise
            h *= 0.5
            continue
        err_vec = h * sum(_E[i] * k[i] for i in range(7))
        sc = abs_tol + rel_tol * np.maximum(np.abs(x), np.abs(x1))
        err = _rms(err_vec / sc)
        if err <= 1.0:
            t += h
            x = x1
            k[0] = k[6]
            naccepted += 1
            halvings = 0
            if record:
                traj.append((t, x.copy()))
        factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h *= factor
    return x, traj, naccepted


def dopri45_batch(md: MixtureData, X0, t_end, abs_tol, rel_tol, max_steps):
    """Adaptive transport of each row of X0 independently."""
    X0 = np.asarray(X0, dtype=float)
    out = np.empty_like(X0)
    for i in range(X0.shape[0]):
        try:
            out[i] = dopri45(md, X0[i], t_end, abs_tol, rel_tol, max_steps)[0]
        except (NonPositiveDensityError, StiffnessError) as exc:
            exc.point_index = i
            raise
    return out


def rk4_batch(md: MixtureData, X0, t_end, steps, chunk=None):
    """Classic fixed-step RK4 over a whole batch.

    All points share the time grid, so the per-stage coefficients are
    computed once per stage and reused across every point (and chunk).
    """
    X = np.array(X0, dtype=float)
    if t_end == 0.0 or X.shape[0] == 0:
        return X
    n = X.shape[0]
    h = t_end / steps
    if chunk is None:
        chunk = max(64, int(32_000_000 // max(1, md.J)))
    ops_lo = stage_ops(md, 0.0)
    for i in range(steps):
        t0 = i * h
        tm = t0 + 0.5 * h
        t1 = t_end if i == steps - 1 else (i + 1) * h
        ops_mid = stage_ops(md, tm)
        ops_hi = stage_ops(md, t1)
        for s in range(0, n, chunk):
            sl = slice(s, min(s + chunk, n))
            x = X[sl]
            k1 = velocity_from_ops(md, ops_lo, t0, x)
            k2 = velocity_from_ops(md, ops_mid, tm, x + 0.5 * h * k1)
            k3 = velocity_from_ops(md, ops_mid, tm, x + 0.5 * h * k2)
            k4 = velocity_from_ops(md, ops_hi, t1, x + h * k3)
            X[sl] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ops_lo = ops_hi
    return X
