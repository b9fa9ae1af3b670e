# cython: language_level=3
"""Compiled transport ODE core.

Per-point Dormand-Prince 5(4) integration of the mixture velocity field with
small dense Cholesky solves done in C.  Semantics mirror `_ode_py` exactly;
see that module for the formulas.  The stepper runs without the GIL, so
batches can be spread over a thread pool (one core object per thread).
"""
from libc.math cimport exp, log, sqrt, pow, INFINITY, fmin, fmax, fabs

import numpy as np

from .errors import NonPositiveDensityError, StiffnessError

cdef double LOG_2PI = log(2.0 * 3.14159265358979323846)

cdef double[7] C_NODES
cdef double[7][6] A_TAB
cdef double[7] B_TAB
cdef double[7] E_TAB

C_NODES = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0]
A_TAB[1][0] = 1.0 / 5.0
A_TAB[2][0] = 3.0 / 40.0
A_TAB[2][1] = 9.0 / 40.0
A_TAB[3][0] = 44.0 / 45.0
A_TAB[3][1] = -56.0 / 15.0
A_TAB[3][2] = 32.0 / 9.0
A_TAB[4][0] = 19372.0 / 6561.0
A_TAB[4][1] = -25360.0 / 2187.0
A_TAB[4][2] = 64448.0 / 6561.0
A_TAB[4][3] = -212.0 / 729.0
A_TAB[5][0] = 9017.0 / 3168.0
A_TAB[5][1] = -355.0 / 33.0
A_TAB[5][2] = 46732.0 / 5247.0
A_TAB[5][3] = 49.0 / 176.0
A_TAB[5][4] = -5103.0 / 18656.0
A_TAB[6][0] = 35.0 / 384.0
A_TAB[6][1] = 0.0
A_TAB[6][2] = 500.0 / 1113.0
A_TAB[6][3] = 125.0 / 192.0
A_TAB[6][4] = -2187.0 / 6784.0
A_TAB[6][5] = 11.0 / 84.0
B_TAB = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
         11.0 / 84.0, 0.0]
E_TAB = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
         -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0]

DEF MAX_HALVINGS = 40

# _run status codes
DEF OK = 0
DEF ERR_DENSITY = -1
DEF ERR_FACTOR = -2
DEF ERR_STIFF = -3


cdef int _cholesky_lower(double* M, int d) noexcept nogil:
    """In-place Cholesky of the lower triangle of a row-major d x d buffer."""
    cdef int i, j, k
    cdef double s
    for j in range(d):
        s = M[j * d + j]
        for k in range(j):
            s -= M[j * d + k] * M[j * d + k]
        if s <= 0.0:
            return -1
        M[j * d + j] = sqrt(s)
        for i in range(j + 1, d):
            s = M[i * d + j]
            for k in range(j):
                s -= M[i * d + k] * M[j * d + k]
            M[i * d + j] = s / M[j * d + j]
    return 0


cdef void _cho_solve_lower(double* L, double* y, double* z, int d) noexcept nogil:
    """Solve (L L^T) z = y with L lower triangular."""
    cdef int i, k
    cdef double s
    for i in range(d):
        s = y[i]
        for k in range(i):
            s -= L[i * d + k] * z[k]
        z[i] = s / L[i * d + i]
    for i in range(d - 1, -1, -1):
        s = z[i]
        for k in range(i + 1, d):
            s -= L[k * d + i] * z[k]
        z[i] = s / L[i * d + i]


cdef class OdeCore:
    """One trajectory worth of state; never share an instance across threads."""

    cdef int d, J
    cdef bint has_negative, iso
    cdef const double[::1] log_abs_w
    cdef const double[::1] signs
    cdef const double[::1] sigmas
    cdef const double[:, ::1] shifts
    cdef const double[:, :, ::1] scales
    cdef double[::1] ell, ybuf, zbuf, Mbuf
    cdef double[:, ::1] vj, kbuf
    cdef double[::1] x, x1, xi
    cdef double fail_t
    cdef list traj

    def __init__(self, log_abs_w, signs, shifts, scales, has_negative, sigmas):
        self.log_abs_w = np.ascontiguousarray(log_abs_w, dtype=np.float64)
        self.signs = np.ascontiguousarray(signs, dtype=np.float64)
        self.shifts = np.ascontiguousarray(shifts, dtype=np.float64)
        self.scales = np.ascontiguousarray(scales, dtype=np.float64)
        self.has_negative = bool(has_negative)
        self.J = self.shifts.shape[0]
        self.d = self.shifts.shape[1]
        self.iso = sigmas is not None
        if self.iso:
            self.sigmas = np.ascontiguousarray(sigmas, dtype=np.float64)
        else:
            self.sigmas = np.zeros(1)
        cdef int d = self.d
        self.ell = np.empty(self.J)
        self.vj = np.empty((self.J, d))
        self.Mbuf = np.empty(d * d)
        self.ybuf = np.empty(d)
        self.zbuf = np.empty(d)
        self.kbuf = np.empty((7, d))
        self.x = np.empty(d)
        self.x1 = np.empty(d)
        self.xi = np.empty(d)
        self.fail_t = 0.0
        self.traj = None

    cdef int _terms(self, double t, double* x) noexcept nogil:
        """Fill ell[j] and vj[j,:] at (t, x); 0 on success."""
        cdef int j, a, b
        cdef double omt = 1.0 - t
        cdef double alpha, logdet, ssq, z, acc
        for j in range(self.J):
            if self.iso:
                alpha = 1.0 + t * (self.sigmas[j] - 1.0)
                logdet = self.d * log(alpha)
                ssq = 0.0
                for a in range(self.d):
                    z = (x[a] - t * self.shifts[j, a]) / alpha
                    self.zbuf[a] = z
                    ssq += z * z
                for a in range(self.d):
                    self.vj[j, a] = self.shifts[j, a] + \
                        (self.sigmas[j] - 1.0) * self.zbuf[a]
            else:
                for a in range(self.d):
                    for b in range(a + 1):
                        self.Mbuf[a * self.d + b] = t * self.scales[j, a, b]
                    self.Mbuf[a * self.d + a] += omt
                if _cholesky_lower(&self.Mbuf[0], self.d) != 0:
                    return ERR_FACTOR
                logdet = 0.0
                for a in range(self.d):
                    logdet += log(self.Mbuf[a * self.d + a])
                logdet *= 2.0
                for a in range(self.d):
                    self.ybuf[a] = x[a] - t * self.shifts[j, a]
                _cho_solve_lower(&self.Mbuf[0], &self.ybuf[0], &self.zbuf[0],
                                 self.d)
                ssq = 0.0
                for a in range(self.d):
                    ssq += self.zbuf[a] * self.zbuf[a]
                for a in range(self.d):
                    acc = self.shifts[j, a] - self.zbuf[a]
                    for b in range(self.d):
                        acc += self.scales[j, a, b] * self.zbuf[b]
                    self.vj[j, a] = acc
            self.ell[j] = self.log_abs_w[j] - logdet - 0.5 * ssq
        return OK

    cdef int _velocity(self, double t, double* x, double* out) noexcept nogil:
        cdef int j, a, status
        cdef double m, den, g
        status = self._terms(t, x)
        if status != OK:
            return status
        m = -INFINITY
        for j in range(self.J):
            if self.ell[j] > m:
                m = self.ell[j]
        den = 0.0
        for a in range(self.d):
            out[a] = 0.0
        for j in range(self.J):
            g = exp(self.ell[j] - m)
            if self.has_negative:
                g *= self.signs[j]
            den += g
            for a in range(self.d):
                out[a] += g * self.vj[j, a]
        if self.has_negative and den <= 0.0:
            return ERR_DENSITY
        for a in range(self.d):
            out[a] /= den
        return OK

    cdef int _log_density(self, double t, double* x, double* out) noexcept nogil:
        cdef int j, status
        cdef double m, den, g
        status = self._terms(t, x)
        if status != OK:
            return status
        m = -INFINITY
        for j in range(self.J):
            if self.ell[j] > m:
                m = self.ell[j]
        den = 0.0
        for j in range(self.J):
            g = exp(self.ell[j] - m)
            if self.has_negative:
                g *= self.signs[j]
            den += g
        if self.has_negative and den <= 0.0:
            return ERR_DENSITY
        out[0] = m + log(den) - 0.5 * self.d * LOG_2PI
        return OK

    cdef double _initial_step(self, double* f0, double t_end,
                              double abs_tol, double rel_tol) noexcept nogil:
        cdef int a, status
        cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, sc, h0, h1, dm
        for a in range(self.d):
            sc = abs_tol + rel_tol * fabs(self.x[a])
            d0 += (self.x[a] / sc) * (self.x[a] / sc)
            d1 += (f0[a] / sc) * (f0[a] / sc)
        d0 = sqrt(d0 / self.d)
        d1 = sqrt(d1 / self.d)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        h0 = fmin(h0, t_end)
        for a in range(self.d):
            self.xi[a] = self.x[a] + h0 * f0[a]
        status = self._velocity(h0, &self.xi[0], &self.x1[0])
        if status != OK:
            return fmin(1e-6, t_end)
        for a in range(self.d):
            sc = abs_tol + rel_tol * fabs(self.x[a])
            d2 += ((self.x1[a] - f0[a]) / sc) * ((self.x1[a] - f0[a]) / sc)
        d2 = sqrt(d2 / self.d) / h0
        dm = fmax(d1, d2)
        if dm > 1e-15:
            h1 = pow(0.01 / dm, 0.2)
        else:
            h1 = fmax(1e-6, h0 * 1e3)
        return fmin(fmin(100.0 * h0, h1), t_end)

    cdef int _run(self, double t_end, double abs_tol, double rel_tol,
                  long max_steps, bint record, long* naccepted) nogil:
        """Advance self.x from t=0 to t_end; 0 on success."""
        cdef int a, i, m_, status
        cdef long nattempts = 0
        cdef int halvings = 0
        cdef double t = 0.0, h, err, factor, acc, sc_a, errv, dummy
        naccepted[0] = 0
        if t_end == 0.0:
            return OK
        status = self._velocity(0.0, &self.x[0], &self.kbuf[0, 0])
        if status != OK:
            self.fail_t = 0.0
            return status
        h = self._initial_step(&self.kbuf[0, 0], t_end, abs_tol, rel_tol)
        while t < t_end:
            if nattempts >= max_steps:
                self.fail_t = t
                return ERR_STIFF
            h = fmin(h, t_end - t)
            nattempts += 1
            status = OK
            for i in range(1, 7):
                for a in range(self.d):
                    acc = 0.0
                    for m_ in range(i):
                        acc += A_TAB[i][m_] * self.kbuf[m_, a]
                    self.xi[a] = self.x[a] + h * acc
                status = self._velocity(t + C_NODES[i] * h, &self.xi[0],
                                        &self.kbuf[i, 0])
                if status != OK:
                    break
            if status == OK:
                for a in range(self.d):
                    acc = 0.0
                    for i in range(6):
                        acc += B_TAB[i] * self.kbuf[i, a]
                    self.x1[a] = self.x[a] + h * acc
                if self.has_negative:
                    status = self._log_density(t + h, &self.x1[0], &dummy)
            if status != OK:
                if not self.has_negative:
                    self.fail_t = t
                    return status
                halvings += 1
                if halvings > MAX_HALVINGS:
                    self.fail_t = t
                    return status
                h *= 0.5
                continue
            err = 0.0
            for a in range(self.d):
                errv = 0.0
                for i in range(7):
                    errv += E_TAB[i] * self.kbuf[i, a]
                errv *= h
                sc_a = abs_tol + rel_tol * fmax(fabs(self.x[a]),
                                                fabs(self.x1[a]))
                err += (errv / sc_a) * (errv / sc_a)
            err = sqrt(err / self.d)
            if err <= 1.0:
                t += h
                for a in range(self.d):
                    self.x[a] = self.x1[a]
                    self.kbuf[0, a] = self.kbuf[6, a]
                naccepted[0] += 1
                halvings = 0
                if record:
                    with gil:
                        self.traj.append((t, np.asarray(self.x).copy()))
            if err == 0.0:
                factor = 5.0
            else:
                factor = fmin(5.0, fmax(0.2, 0.9 * pow(err, -0.2)))
            h *= factor
        return OK

    def _raise(self, int status):
        last_x = np.asarray(self.x).copy()
        if status == ERR_DENSITY:
            raise NonPositiveDensityError(
                f"intermediate density non-positive at t={self.fail_t:.6g}",
                where=(self.fail_t, last_x),
            )
        if status == ERR_STIFF:
            raise StiffnessError(
                f"integrator exceeded its step budget at t={self.fail_t:.6g}",
                t=self.fail_t, x=last_x,
            )
        raise StiffnessError(
            f"factorization failed at t={self.fail_t:.6g}",
            t=self.fail_t, x=last_x,
        )

    def integrate(self, const double[::1] x0, double t_end, double abs_tol,
                  double rel_tol, long max_steps, bint record=False):
        cdef int a, status
        cdef long naccepted = 0
        for a in range(self.d):
            self.x[a] = x0[a]
        self.traj = [(0.0, np.asarray(self.x).copy())] if record else None
        with nogil:
            status = self._run(t_end, abs_tol, rel_tol, max_steps, record,
                               &naccepted)
        if status != OK:
            self._raise(status)
        traj, self.traj = self.traj, None
        return np.asarray(self.x).copy(), traj, naccepted

    def integrate_batch(self, const double[:, ::1] X0, double t_end, double abs_tol,
                        double rel_tol, long max_steps):
        cdef Py_ssize_t n = X0.shape[0], i
        cdef int a, status = OK
        cdef long naccepted = 0
        cdef Py_ssize_t fail_i = -1
        out_arr = np.empty((n, self.d), dtype=np.float64)
        cdef double[:, ::1] out = out_arr
        self.traj = None
        with nogil:
            for i in range(n):
                for a in range(self.d):
                    self.x[a] = X0[i, a]
                status = self._run(t_end, abs_tol, rel_tol, max_steps, False,
                                   &naccepted)
                if status != OK:
                    fail_i = i
                    break
                for a in range(self.d):
                    out[i, a] = self.x[a]
        if status != OK:
            try:
                self._raise(status)
            except (NonPositiveDensityError, StiffnessError) as exc:
                exc.point_index = int(fail_i)
                raise
        return out_arr


def make_core(log_abs_w, signs, shifts, scales, has_negative, sigmas):
    return OdeCore(log_abs_w, signs, shifts, scales, has_negative, sigmas)


def dopri45(OdeCore core, x0, double t_end, double abs_tol, double rel_tol,
            long max_steps, bint record=False):
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return core.integrate(x0, t_end, abs_tol, rel_tol, max_steps, record)


def dopri45_batch(OdeCore core, X0, double t_end, double abs_tol,
                  double rel_tol, long max_steps):
    X0 = np.ascontiguousarray(X0, dtype=np.float64)
    return core.integrate_batch(X0, t_end, abs_tol, rel_tol, max_steps)
