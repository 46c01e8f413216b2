# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernels; same signatures and semantics as klab._kernels_py."""
import numpy as np

from libc.math cimport cos, sin


cdef inline void _matmul(double complex* C, double complex* Y, double complex* out,
                         Py_ssize_t m, Py_ssize_t c) noexcept nogil:
    cdef Py_ssize_t l, j, r
    cdef double complex acc
    for l in range(m):
        for r in range(c):
            acc = 0
            for j in range(m):
                acc = acc + C[l * m + j] * Y[j * c + r]
            out[l * c + r] = acc


cdef inline void _coupling(const double complex[:, :, :, ::1] X, const double[:, :, ::1] theta,
                           Py_ssize_t h, Py_ssize_t q, double r, double complex* e,
                           double complex* C, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t l, k
    cdef double a
    for k in range(m):
        a = r * theta[h, q, k]
        e[k] = cos(a) + 1j * sin(a)
    for l in range(m):
        for k in range(m):
            C[l * m + k] = X[h, q, l, k] * e[k] * e[l].conjugate()


cdef inline void _generator(const double complex[:, :, :, ::1] A, Py_ssize_t h, Py_ssize_t q,
                            double r, double complex* C, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t l, k
    cdef double complex ir = 1j * r
    for l in range(m):
        for k in range(m):
            C[l * m + k] = ir * A[h, q, l, k]


cdef void _rk4_step(double complex* C0, double complex* Cm, double complex* Cn,
                    double complex* Y, double complex* tmp, double complex* k1,
                    double complex* k2, double complex* k3, double complex* k4,
                    Py_ssize_t m, Py_ssize_t c, double dt) noexcept nogil:
    cdef Py_ssize_t n = m * c, j
    cdef double half = 0.5 * dt
    _matmul(C0, Y, k1, m, c)
    for j in range(n):
        tmp[j] = Y[j] + half * k1[j]
    _matmul(Cm, tmp, k2, m, c)
    for j in range(n):
        tmp[j] = Y[j] + half * k2[j]
    _matmul(Cm, tmp, k3, m, c)
    for j in range(n):
        tmp[j] = Y[j] + dt * k3[j]
    _matmul(Cn, tmp, k4, m, c)
    for j in range(n):
        Y[j] = Y[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


def rk4_amplitudes(const double complex[:, :, :, ::1] X, const double[:, :, ::1] theta,
                   const double[::1] rho, const double complex[:, :, :, ::1] Y0, double dt):
    cdef Py_ssize_t H = X.shape[0], Q = X.shape[1], m = X.shape[2]
    cdef Py_ssize_t R = rho.shape[0], c = Y0.shape[3]
    cdef Py_ssize_t K = (H - 1) // 2
    cdef Py_ssize_t q, i, k, j, n = m * c
    out = np.empty((K + 1, Q, R, m, c), dtype=np.complex128)
    cdef double complex[:, :, :, :, ::1] o = out
    buf = np.empty(3 * m * m + 6 * n + m, dtype=np.complex128)
    cdef double complex[::1] b = buf
    cdef double complex* C0 = &b[0]
    cdef double complex* Cm = C0 + m * m
    cdef double complex* Cn = Cm + m * m
    cdef double complex* Y = Cn + m * m
    cdef double complex* tmp = Y + n
    cdef double complex* k1 = tmp + n
    cdef double complex* k2 = k1 + n
    cdef double complex* k3 = k2 + n
    cdef double complex* k4 = k3 + n
    cdef double complex* e = k4 + n
    cdef double complex* swap
    cdef double r
    with nogil:
        for q in range(Q):
            for i in range(R):
                r = rho[i]
                for j in range(n):
                    Y[j] = Y0[q, i, j // c, j % c]
                    o[0, q, i, j // c, j % c] = Y[j]
                _coupling(X, theta, 0, q, r, e, C0, m)
                for k in range(K):
                    _coupling(X, theta, 2 * k + 1, q, r, e, Cm, m)
                    _coupling(X, theta, 2 * k + 2, q, r, e, Cn, m)
                    _rk4_step(C0, Cm, Cn, Y, tmp, k1, k2, k3, k4, m, c, dt)
                    for j in range(n):
                        o[k + 1, q, i, j // c, j % c] = Y[j]
                    swap = C0
                    C0 = Cn
                    Cn = swap
    return out


def rk4_modes(const double complex[:, :, :, ::1] A, const double[::1] rho,
              const double complex[:, :, :, ::1] V0, double dt):
    cdef Py_ssize_t H = A.shape[0], Q = A.shape[1], m = A.shape[2]
    cdef Py_ssize_t R = rho.shape[0], c = V0.shape[3]
    cdef Py_ssize_t K = (H - 1) // 2
    cdef Py_ssize_t q, i, k, j, n = m * c
    out = np.empty((K + 1, Q, R, m, c), dtype=np.complex128)
    cdef double complex[:, :, :, :, ::1] o = out
    buf = np.empty(3 * m * m + 6 * n, dtype=np.complex128)
    cdef double complex[::1] b = buf
    cdef double complex* C0 = &b[0]
    cdef double complex* Cm = C0 + m * m
    cdef double complex* Cn = Cm + m * m
    cdef double complex* Y = Cn + m * m
    cdef double complex* tmp = Y + n
    cdef double complex* k1 = tmp + n
    cdef double complex* k2 = k1 + n
    cdef double complex* k3 = k2 + n
    cdef double complex* k4 = k3 + n
    cdef double complex* swap
    cdef double r
    with nogil:
        for q in range(Q):
            for i in range(R):
                r = rho[i]
                for j in range(n):
                    Y[j] = V0[q, i, j // c, j % c]
                    o[0, q, i, j // c, j % c] = Y[j]
                _generator(A, 0, q, r, C0, m)
                for k in range(K):
                    _generator(A, 2 * k + 1, q, r, Cm, m)
                    _generator(A, 2 * k + 2, q, r, Cn, m)
                    _rk4_step(C0, Cm, Cn, Y, tmp, k1, k2, k3, k4, m, c, dt)
                    for j in range(n):
                        o[k + 1, q, i, j // c, j % c] = Y[j]
                    swap = C0
                    C0 = Cn
                    Cn = swap
    return out
