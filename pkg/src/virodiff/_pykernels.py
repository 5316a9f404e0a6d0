"""Pure numpy/scipy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``VIRODIFF_PURE_PYTHON`` is set. Signatures and return conventions match
the compiled module one-for-one.
"""
import numpy as np
import scipy.sparse as sp


def _csr(indptr, indices, data):
    n = len(indptr) - 1
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


def csr_matvec(indptr, indices, data, x):
    return _csr(indptr, indices, data) @ np.asarray(x, dtype=float)


def reaction(lam, T, I, V, k, N, mu_T, mu_I, mu_V):
    infection = k * T * V
    return (lam - mu_T * T - infection,
            infection - mu_I * I,
            N * mu_I * I - mu_V * V)


def pcg(indptr, indices, data, b, x0, tol, max_iter):
    A = _csr(indptr, indices, data)
    b = np.asarray(b, dtype=float)
    diag = A.diagonal()
    inv_diag = np.where(diag != 0.0, 1.0 / np.where(diag != 0.0, diag, 1.0), 1.0)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = np.array(x0, dtype=float, copy=True)
    r = b - A @ x
    z = inv_diag * r
    d = z.copy()
    rz = r @ z
    rnorm = np.linalg.norm(r)
    it = 0
    while rnorm > tol * bnorm and it < max_iter:
        q = A @ d
        dq = d @ q
        if dq == 0.0:
            break
        alpha = rz / dq
        x += alpha * d
        r -= alpha * q
        z = inv_diag * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
        rnorm = np.linalg.norm(r)
        it += 1
    return x, it, float(rnorm / bnorm)


def power_iteration(indptr, indices, data, sigma, v0, tol, max_iter):
    A = _csr(indptr, indices, data)
    v = np.array(v0, dtype=float, copy=True)
    v /= np.linalg.norm(v)
    theta_prev = np.inf
    theta = 0.0
    res = 0.0
    it = 0
    converged = False
    while it < max_iter:
        y = A @ v + sigma * v
        theta = v @ y
        res = np.linalg.norm(y - theta * v)
        it += 1
        if abs(theta - theta_prev) < tol and res < 100.0 * tol:
            converged = True
            break
        theta_prev = theta
        v = y / np.linalg.norm(y)
    return float(theta - sigma), v, it, float(res), converged
