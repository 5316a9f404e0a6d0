# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Signatures mirror :mod:`virodiff._pykernels` exactly; the selector in
:mod:`virodiff.kernels` picks one of the two at import time.
"""
import numpy as np

from libc.math cimport fabs, sqrt


cdef void _matvec(const int[::1] indptr, const int[::1] indices,
                  const double[::1] data, const double[::1] x,
                  double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double acc
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc = acc + data[p] * x[indices[p]]
        out[i] = acc


cdef double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(a.shape[0]):
        acc = acc + a[i] * b[i]
    return acc


def csr_matvec(const int[::1] indptr, const int[::1] indices,
               const double[::1] data, const double[::1] x):
    out = np.empty(indptr.shape[0] - 1, dtype=np.float64)
    cdef double[::1] out_v = out
    with nogil:
        _matvec(indptr, indices, data, x, out_v)
    return out


def reaction(const double[::1] lam, const double[::1] T, const double[::1] I,
             const double[::1] V, double k, double N, double mu_T,
             double mu_I, double mu_V):
    cdef Py_ssize_t n = T.shape[0]
    fT = np.empty(n, dtype=np.float64)
    fI = np.empty(n, dtype=np.float64)
    fV = np.empty(n, dtype=np.float64)
    cdef double[::1] a = fT
    cdef double[::1] b = fI
    cdef double[::1] c = fV
    cdef Py_ssize_t j
    cdef double infection
    with nogil:
        for j in range(n):
            infection = k * T[j] * V[j]
            a[j] = lam[j] - mu_T * T[j] - infection
            b[j] = infection - mu_I * I[j]
            c[j] = N * mu_I * I[j] - mu_V * V[j]
    return fT, fI, fV


def pcg(const int[::1] indptr, const int[::1] indices, const double[::1] data,
        const double[::1] b, const double[::1] x0, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, p, it = 0
    x = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] xv = x
    cdef double[::1] r = np.empty(n)
    cdef double[::1] z = np.empty(n)
    cdef double[::1] d = np.empty(n)
    cdef double[::1] q = np.empty(n)
    cdef double[::1] inv_diag = np.ones(n)
    cdef double bnorm, rnorm, rz, rz_new, alpha, beta, dq

    with nogil:
        for i in range(n):
            for p in range(indptr[i], indptr[i + 1]):
                if indices[p] == i and data[p] != 0.0:
                    inv_diag[i] = 1.0 / data[p]
        bnorm = sqrt(_dot(b, b))
        if bnorm == 0.0:
            for i in range(n):
                xv[i] = 0.0
            rnorm = 0.0
        else:
            _matvec(indptr, indices, data, xv, q)
            for i in range(n):
                r[i] = b[i] - q[i]
                z[i] = inv_diag[i] * r[i]
                d[i] = z[i]
            rz = _dot(r, z)
            rnorm = sqrt(_dot(r, r))
            while rnorm > tol * bnorm and it < max_iter:
                _matvec(indptr, indices, data, d, q)
                dq = _dot(d, q)
                if dq == 0.0:
                    break
                alpha = rz / dq
                for i in range(n):
                    xv[i] = xv[i] + alpha * d[i]
                    r[i] = r[i] - alpha * q[i]
                    z[i] = inv_diag[i] * r[i]
                rz_new = _dot(r, z)
                beta = rz_new / rz
                rz = rz_new
                for i in range(n):
                    d[i] = z[i] + beta * d[i]
                rnorm = sqrt(_dot(r, r))
                it += 1
    rel = rnorm / bnorm if bnorm > 0.0 else 0.0
    return x, int(it), float(rel)


def power_iteration(const int[::1] indptr, const int[::1] indices,
                    const double[::1] data, double sigma,
                    const double[::1] v0, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t n = v0.shape[0]
    cdef Py_ssize_t i, it = 0
    v = np.array(v0, dtype=np.float64, copy=True)
    cdef double[::1] vv = v
    cdef double[::1] y = np.empty(n)
    cdef double nrm, theta = 0.0, theta_prev, res = 0.0
    cdef bint converged = False

    with nogil:
        nrm = sqrt(_dot(vv, vv))
        for i in range(n):
            vv[i] = vv[i] / nrm
        theta_prev = 1e308
        while it < max_iter:
            _matvec(indptr, indices, data, vv, y)
            for i in range(n):
                y[i] = y[i] + sigma * vv[i]
            theta = _dot(vv, y)
            res = 0.0
            for i in range(n):
                res = res + (y[i] - theta * vv[i]) * (y[i] - theta * vv[i])
            res = sqrt(res)
            it += 1
            if fabs(theta - theta_prev) < tol and res < 100.0 * tol:
                converged = True
                break
            theta_prev = theta
            nrm = sqrt(_dot(y, y))
            for i in range(n):
                vv[i] = y[i] / nrm
    return float(theta - sigma), v, int(it), float(res), bool(converged)
