# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled polynomial-field evaluation and fixed-step RK4."""
import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


cdef void _eval(const double[::1] c0, const double[:, ::1] c1,
                const double[:, :, ::1] c2, const double[:, :, :, ::1] c3,
                int deg, const double* x, double* out, int m) noexcept nogil:
    cdef int k, i, j, l
    cdef double acc, acc_i, acc_ij
    for k in range(m):
        acc = c0[k]
        for i in range(m):
            acc += c1[k, i] * x[i]
        if deg >= 2:
            for i in range(m):
                acc_i = 0.0
                for j in range(m):
                    acc_i += c2[k, i, j] * x[j]
                acc += acc_i * x[i]
        if deg >= 3:
            for i in range(m):
                acc_i = 0.0
                for j in range(m):
                    acc_ij = 0.0
                    for l in range(m):
                        acc_ij += c3[k, i, j, l] * x[l]
                    acc_i += acc_ij * x[j]
                acc += acc_i * x[i]
        out[k] = acc


def poly_eval(const double[::1] c0, const double[:, ::1] c1, const double[:, :, ::1] c2,
              const double[:, :, :, ::1] c3, int deg, const double[::1] x):
    cdef int m = c0.shape[0]
    out = np.empty(m)
    cdef double[::1] o = out
    with nogil:
        _eval(c0, c1, c2, c3, deg, &x[0], &o[0], m)
    return out


def rk4(const double[::1] c0, const double[:, ::1] c1, const double[:, :, ::1] c2,
        const double[:, :, :, ::1] c3, int deg, const double[::1] x0, double dt,
        long nsteps, long save_every):
    """Classical RK4; returns (number_saved, m) rows including the start point."""
    cdef int m = c0.shape[0]
    cdef long nsave = nsteps // save_every + 1
    if nsteps % save_every:
        nsave += 1
    out = np.empty((nsave, m))
    cdef double[:, ::1] o = out
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] k1 = np.empty(m), k2 = np.empty(m), k3 = np.empty(m), k4 = np.empty(m)
    cdef double[::1] tmp = np.empty(m)
    cdef long s, row = 0
    cdef int i
    cdef bint bad = False
    with nogil:
        for i in range(m):
            o[0, i] = x[i]
        row = 1
        for s in range(1, nsteps + 1):
            _eval(c0, c1, c2, c3, deg, &x[0], &k1[0], m)
            for i in range(m):
                tmp[i] = x[i] + 0.5 * dt * k1[i]
            _eval(c0, c1, c2, c3, deg, &tmp[0], &k2[0], m)
            for i in range(m):
                tmp[i] = x[i] + 0.5 * dt * k2[i]
            _eval(c0, c1, c2, c3, deg, &tmp[0], &k3[0], m)
            for i in range(m):
                tmp[i] = x[i] + dt * k3[i]
            _eval(c0, c1, c2, c3, deg, &tmp[0], &k4[0], m)
            for i in range(m):
                x[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(x[i]):
                    bad = True
            if bad:
                break
            if s % save_every == 0 or s == nsteps:
                for i in range(m):
                    o[row, i] = x[i]
                row += 1
    if bad:
        raise FloatingPointError("non-finite state during RK4 integration")
    return out
