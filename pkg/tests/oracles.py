"""Independent reference implementations used only for cross-checking.

These deliberately avoid the code paths of the library: the SVD oracle is a
one-sided Jacobi iteration, the ridge oracle goes through an explicit SVD
formula rather than a Cholesky solve, and the 2x2 inverse uses the adjugate.
"""

from __future__ import annotations

import numpy as np


def jacobi_svd(a, tol: float = 1e-13, max_sweeps: int = 100):
    """Thin SVD via one-sided Jacobi rotations on the columns.

    Returns (u, s, vt) with s sorted nonincreasing. For wide matrices the
    problem is transposed first.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[0] < a.shape[1]:
        u, s, vt = jacobi_svd(a.T, tol=tol, max_sweeps=max_sweeps)
        return vt.T, s, u.T
    m, n = a.shape
    work = a.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                cp = work[:, p]
                cq = work[:, q]
                apq = cp @ cq
                app = cp @ cp
                aqq = cq @ cq
                denom = np.sqrt(app * aqq)
                if denom > 0:
                    off = max(off, abs(apq) / denom)
                if abs(apq) == 0.0:
                    continue
                theta = 0.5 * np.arctan2(2.0 * apq, app - aqq)
                c, s_ = np.cos(theta), np.sin(theta)
                new_p = c * cp + s_ * cq
                new_q = -s_ * cp + c * cq
                work[:, p], work[:, q] = new_p, new_q
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp + s_ * vq
                v[:, q] = -s_ * vp + c * vq
        if off < tol:
            break
    norms = np.linalg.norm(work, axis=0)
    order = np.argsort(-norms)
    s = norms[order]
    v = v[:, order]
    u = np.zeros((m, n))
    for i in range(n):
        if s[i] > 0:
            u[:, i] = work[:, order[i]] / s[i]
    return u, s, v.T


def ridge_fit_svd(delta, responses, lam: float):
    """Ridge solution A^T = V diag(s / (s^2 + lam)) U^T Y via explicit SVD."""
    u, s, vt = np.linalg.svd(np.asarray(delta, dtype=float), full_matrices=False)
    filt = s / (s * s + lam)
    return vt.T @ (filt[:, None] * (u.T @ np.asarray(responses, dtype=float)))


def adjugate_inverse_2x2(a):
    a = np.asarray(a, dtype=float)
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det


def central_difference_jacobian(fun, x, h: float = 1e-6):
    """Jacobian of a vector-valued function by central differences."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(fun(x))
    jac = np.zeros((f0.shape[0], x.shape[0]))
    for i in range(x.shape[0]):
        step = np.zeros_like(x)
        step[i] = h
        jac[:, i] = (np.atleast_1d(fun(x + step)) - np.atleast_1d(fun(x - step))) / (2 * h)
    return jac


def central_difference_param_grads(loss_fn, params, h: float = 1e-5):
    """Finite-difference gradients for a list of (W, b) parameter pairs."""
    grads = []
    for idx, (w, b) in enumerate(params):
        gw = np.zeros_like(w)
        it = np.nditer(w, flags=["multi_index"])
        while not it.finished:
            ij = it.multi_index
            scale = max(1.0, abs(w[ij]))
            params_p = [(wi.copy(), bi.copy()) for wi, bi in params]
            params_m = [(wi.copy(), bi.copy()) for wi, bi in params]
            params_p[idx][0][ij] += h * scale
            params_m[idx][0][ij] -= h * scale
            gw[ij] = (loss_fn(params_p) - loss_fn(params_m)) / (2 * h * scale)
            it.iternext()
        gb = np.zeros_like(b)
        for j in range(b.shape[0]):
            scale = max(1.0, abs(b[j]))
            params_p = [(wi.copy(), bi.copy()) for wi, bi in params]
            params_m = [(wi.copy(), bi.copy()) for wi, bi in params]
            params_p[idx][1][j] += h * scale
            params_m[idx][1][j] -= h * scale
            gb[j] = (loss_fn(params_p) - loss_fn(params_m)) / (2 * h * scale)
        grads.append((gw, gb))
    return grads
