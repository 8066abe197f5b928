"""Pure numpy implementations of the hot kernels."""
from __future__ import annotations

import numpy as np

NAME = "numpy"

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 2.0**-53


def _mulhilo(a, b):
    a_lo, a_hi = a & _LO32, a >> _S32
    b_lo, b_hi = b & _LO32, b >> _S32
    ll = a_lo * b_lo
    hl = a_hi * b_lo
    lh = a_lo * b_hi
    hh = a_hi * b_hi
    cross = (ll >> _S32) + (hl & _LO32) + lh
    hi = hh + (hl >> _S32) + (cross >> _S32)
    return a * b, hi


def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox-4x64 with 10 rounds; arguments are uint64 arrays (broadcast)."""
    c0, c1, c2, c3 = (np.asarray(v, dtype=np.uint64) for v in (c0, c1, c2, c3))
    k0 = np.asarray(k0, dtype=np.uint64)
    k1 = np.asarray(k1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for r in range(10):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            lo0, hi0 = _mulhilo(_M0, c0)
            lo1, hi1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _uniform(x):
    return ((x >> _S11).astype(np.float64) + 0.5) * _TWO_M53


def normals(seed: int, paths, count: int) -> np.ndarray:
    """Standard normals ``(len(paths), count)``; row p depends only on (seed, p)."""
    paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    nblocks = (count + 3) // 4
    blocks = np.arange(nblocks, dtype=np.uint64)[None, :]
    zero = np.zeros((1, 1), dtype=np.uint64)
    key0 = np.full((paths.size, 1), seed, dtype=np.uint64)
    out = philox4x64(blocks, zero, zero, zero, key0, paths[:, None])
    u = [_uniform(w) for w in out]
    r01 = np.sqrt(-2.0 * np.log(u[0]))
    r23 = np.sqrt(-2.0 * np.log(u[2]))
    a01 = 2.0 * np.pi * u[1]
    a23 = 2.0 * np.pi * u[3]
    z = np.stack([r01 * np.cos(a01), r01 * np.sin(a01), r23 * np.cos(a23), r23 * np.sin(a23)], axis=-1)
    return z.reshape(paths.size, 4 * nblocks)[:, :count]


def girsanov_paths(seed, n_paths, dtau, theta, step_of, beta, n_steps, batch=2048):
    """Per-path terminal value, log likelihood ratio and quadratic variation.

    ``dtau`` are the Brownian sub-interval lengths; sub-interval ``j``
    carries drift ``theta[j]`` in the likelihood ratio and feeds output
    step ``step_of[j]`` (``-1`` = none, indices nondecreasing otherwise)
    with weight ``beta[j]``.
    """
    dtau = np.asarray(dtau, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    step_of = np.asarray(step_of, dtype=np.int64)
    beta = np.asarray(beta, dtype=np.float64)
    sq = np.sqrt(dtau)
    drift_term = 0.5 * np.cumsum(theta * theta * dtau)[-1] if dtau.size else 0.0
    used = np.nonzero(step_of >= 0)[0]
    steps_used = step_of[used]
    w_t = np.empty(n_paths)
    log_lr = np.empty(n_paths)
    qv = np.empty(n_paths)
    for lo in range(0, n_paths, batch):
        hi = min(n_paths, lo + batch)
        db = normals(seed, np.arange(lo, hi), dtau.size) * sq
        # sequential sums (cumsum) keep results bit-identical to the numba loop
        log_lr[lo:hi] = np.cumsum(db * theta, axis=1)[:, -1] - drift_term
        contrib = db[:, used] * beta[used]
        dw = np.zeros((hi - lo, n_steps))
        for j in range(contrib.shape[1]):
            dw[:, steps_used[j]] += contrib[:, j]
        w_t[lo:hi] = np.cumsum(dw, axis=1)[:, -1]
        qv[lo:hi] = np.cumsum(dw * dw, axis=1)[:, -1]
    return w_t, log_lr, qv


def search_maps(qint: np.ndarray, fint: np.ndarray, chunk: int = 1 << 15):
    """First (lexicographic) assignment whose pushforwards equal ``fint``.

    ``qint`` is (n, atoms) and ``fint`` is (n, targets), both integer
    scaled. Returns ``(assignment, found)``.
    """
    qint = np.asarray(qint, dtype=np.int64)
    fint = np.asarray(fint, dtype=np.int64)
    n, w = qint.shape
    t = fint.shape[1]
    total = t**w
    powers = t ** np.arange(w - 1, -1, -1, dtype=np.int64)
    targets = np.arange(t)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        assign = (idx[:, None] // powers[None, :]) % t
        onehot = (assign[:, :, None] == targets[None, None, :]).astype(np.int64)
        push = np.einsum("iw,cwt->cit", qint, onehot)
        ok = np.all(push == fint[None, :, :], axis=(1, 2))
        hits = np.nonzero(ok)[0]
        if hits.size:
            return assign[hits[0]].astype(np.int64), True
    return np.zeros(w, dtype=np.int64), False
