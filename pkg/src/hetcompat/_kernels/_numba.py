"""``@njit`` implementations of the hot kernels (same contracts as ``_numpy``)."""
from __future__ import annotations

import warnings

import numpy as np
from numba import njit, prange

# an outdated system TBB only triggers a fallback to another threading layer
warnings.filterwarnings("ignore", message="The TBB threading layer requires")

NAME = "numba"

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 2.0**-53
_TWO_PI = 2.0 * np.pi


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    hl = a_hi * b_lo
    lh = a_lo * b_hi
    hh = a_hi * b_hi
    cross = (ll >> _S32) + (hl & _LO32) + lh
    hi = hh + (hl >> _S32) + (cross >> _S32)
    return a * b, hi


@njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        lo0, hi0 = _mulhilo(_M0, c0)
        lo1, hi1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def _uniform(x):
    return (np.float64(x >> _S11) + 0.5) * _TWO_M53


@njit(cache=True)
def _fill_normals(seed, path, out):
    count = out.shape[0]
    zero = np.uint64(0)
    k0 = np.uint64(seed)
    k1 = np.uint64(path)
    j = 0
    block = np.uint64(0)
    while j < count:
        x0, x1, x2, x3 = philox4x64(block, zero, zero, zero, k0, k1)
        r = np.sqrt(-2.0 * np.log(_uniform(x0)))
        a = _TWO_PI * _uniform(x1)
        out[j] = r * np.cos(a)
        if j + 1 < count:
            out[j + 1] = r * np.sin(a)
        r = np.sqrt(-2.0 * np.log(_uniform(x2)))
        a = _TWO_PI * _uniform(x3)
        if j + 2 < count:
            out[j + 2] = r * np.cos(a)
        if j + 3 < count:
            out[j + 3] = r * np.sin(a)
        j += 4
        block += np.uint64(1)


@njit(cache=True)
def _normals(seed, paths, count):
    out = np.empty((paths.shape[0], count))
    for p in range(paths.shape[0]):
        _fill_normals(seed, paths[p], out[p])
    return out


def normals(seed: int, paths, count: int) -> np.ndarray:
    paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    return _normals(np.uint64(seed), paths, int(count))


@njit(cache=True, parallel=True)
def _girsanov_paths(seed, n_paths, dtau, theta, step_of, beta, n_steps):
    m = dtau.shape[0]
    sq = np.sqrt(dtau)
    drift_term = 0.0
    for j in range(m):
        drift_term += theta[j] * theta[j] * dtau[j]
    drift_term *= 0.5
    w_t = np.empty(n_paths)
    log_lr = np.empty(n_paths)
    qv = np.empty(n_paths)
    for p in prange(n_paths):
        z = np.empty(m)
        _fill_normals(seed, np.uint64(p), z)
        dw = np.zeros(n_steps)
        acc = 0.0
        for j in range(m):
            db = sq[j] * z[j]
            acc += theta[j] * db
            s = step_of[j]
            if s >= 0:
                dw[s] += beta[j] * db
        w = 0.0
        q = 0.0
        for k in range(n_steps):
            w += dw[k]
            q += dw[k] * dw[k]
        w_t[p] = w
        log_lr[p] = acc - drift_term
        qv[p] = q
    return w_t, log_lr, qv


def girsanov_paths(seed, n_paths, dtau, theta, step_of, beta, n_steps):
    return _girsanov_paths(
        np.uint64(seed),
        int(n_paths),
        np.ascontiguousarray(dtau, dtype=np.float64),
        np.ascontiguousarray(theta, dtype=np.float64),
        np.ascontiguousarray(step_of, dtype=np.int64),
        np.ascontiguousarray(beta, dtype=np.float64),
        int(n_steps),
    )


@njit(cache=True)
def _search_maps(qint, fint):
    n, w = qint.shape
    t = fint.shape[1]
    assign = np.zeros(w, dtype=np.int64)
    push = np.zeros((n, t), dtype=np.int64)
    for i in range(n):
        for a in range(w):
            push[i, 0] += qint[i, a]
    while True:
        ok = True
        for i in range(n):
            for j in range(t):
                if push[i, j] != fint[i, j]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return assign, True
        a = w - 1
        while a >= 0:
            old = assign[a]
            for i in range(n):
                push[i, old] -= qint[i, a]
            if old + 1 < t:
                assign[a] = old + 1
                for i in range(n):
                    push[i, old + 1] += qint[i, a]
                break
            assign[a] = 0
            for i in range(n):
                push[i, 0] += qint[i, a]
            a -= 1
        if a < 0:
            return assign, False


def search_maps(qint, fint):
    return _search_maps(np.ascontiguousarray(qint, dtype=np.int64), np.ascontiguousarray(fint, dtype=np.int64))
