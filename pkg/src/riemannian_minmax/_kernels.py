"""Compiled inner loop for deterministic runs on ``LinearSphereGame``.

Long-horizon runs (millions of steps on a 3-dimensional problem) are
dominated by Python call overhead; this kernel performs exactly the same
arithmetic as the generic step functions in :mod:`algorithms`.
"""
from __future__ import annotations

import numpy as np
from numba import njit

MODE_CODES = {"gda": 0, "sga": 1, "asymp_sga": 2}
VARIANT_CODES = {"example1": 0, "example2": 1, "example3": 2}


@njit(cache=True)
def _dot(u, v):
    s = 0.0
    for i in range(u.shape[0]):
        s += u[i] * v[i]
    return s


@njit(cache=True)
def _matvec(a, x):
    out = np.zeros(a.shape[0])
    for i in range(a.shape[0]):
        s = 0.0
        for j in range(a.shape[1]):
            s += a[i, j] * x[j]
        out[i] = s
    return out


@njit(cache=True)
def _rmatvec(a, y):
    out = np.zeros(a.shape[1])
    for j in range(a.shape[1]):
        s = 0.0
        for i in range(a.shape[0]):
            s += a[i, j] * y[i]
        out[j] = s
    return out


@njit(cache=True)
def linear_sphere_run(a, b, kappa, variant, mode, tau, gamma, theta,
                      x0, y0, n_iters, record_every, x_ref, y_ref, has_ref):
    d1 = a.shape[1]
    n = a.shape[0]
    n_rec_max = n_iters // record_every + 2
    rec_t = np.zeros(n_rec_max, dtype=np.int64)
    rec_f = np.zeros(n_rec_max)
    rec_gx = np.zeros(n_rec_max)
    rec_gy = np.zeros(n_rec_max)
    rec_d = np.zeros(n_rec_max)
    rec_x = np.zeros((n_rec_max, d1))
    rec_y = np.zeros((n_rec_max, n))
    x = x0.copy()
    y = y0.copy()
    mu = theta * 2.0 / (tau * (tau + 1.0))
    c1 = mu * (tau + 1.0) * tau / 2.0
    c2 = mu * (tau + 1.0) / 2.0
    k = 0
    diverged = -1
    for t in range(n_iters + 1):
        ax = _matvec(a, x)
        r = ax - b
        if variant == 2:
            s = r + y
            gx = _rmatvec(a, s)
            gy = s
            f = 0.5 * _dot(s, s)
        else:
            gx = _rmatvec(a, y)
            f = _dot(y, r)
            if kappa != 0.0:
                gx = gx - kappa * _rmatvec(a, ax)
                f -= 0.5 * kappa * _dot(ax, ax)
            gy = r
        delta = gx
        eta = gy - _dot(y, gy) * y
        gnx = np.sqrt(_dot(delta, delta))
        gny = np.sqrt(_dot(eta, eta))
        if not (np.isfinite(f) and np.isfinite(gnx) and np.isfinite(gny)):
            diverged = t
            break
        if t % record_every == 0 or t == n_iters:
            rec_t[k] = t
            rec_f[k] = f
            rec_gx[k] = gnx
            rec_gy[k] = gny
            if has_ref:
                dx = x - x_ref
                dy = y - y_ref
                chord = min(1.0, 0.5 * np.sqrt(_dot(dy, dy)))
                rec_d[k] = np.sqrt(_dot(dx, dx)) + 2.0 * np.arcsin(chord)
            rec_x[k] = x
            rec_y[k] = y
            k += 1
        if t == n_iters:
            break
        if mode == 0:
            xi1 = -gamma * delta
            xi2 = tau * gamma * eta
        else:
            be = _rmatvec(a, eta)
            xi1 = -gamma * (delta + c1 * be)
            if mode == 1:
                w = _matvec(a, delta)
                btd = w - _dot(y, w) * y
                xi2 = gamma * (tau * eta - c2 * btd)
            else:
                xi2 = tau * gamma * eta
        x = x + xi1
        moved = False
        for i in range(n):
            if xi2[i] != 0.0:
                moved = True
        if moved:
            z = y + xi2
            y = z / np.sqrt(_dot(z, z))
    return rec_t[:k], rec_f[:k], rec_gx[:k], rec_gy[:k], rec_d[:k], rec_x[:k], rec_y[:k], diverged
