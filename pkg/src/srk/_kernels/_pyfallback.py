"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature.
The arithmetic is done in the same order in both, so results agree bit for bit.
"""

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def philox4x32(key, ctr):
    """Philox4x32-10 block function.

    key: (2,) integers, ctr: (..., 4) uint32 counters. Returns (..., 4) uint32.
    """
    c = np.asarray(ctr, dtype=np.uint64)
    c0, c1, c2, c3 = c[..., 0], c[..., 1], c[..., 2], c[..., 3]
    k0 = int(key[0]) & 0xFFFFFFFF
    k1 = int(key[1]) & 0xFFFFFFFF
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        c0 = hi1 ^ c1 ^ np.uint64(k0)
        c1 = lo1
        c2 = hi0 ^ c3 ^ np.uint64(k1)
        c3 = lo0
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def philox_blocks(key0, key1, paths, tag, block_start, n_blocks):
    """Random words for counters (block, path, tag) over a batch of paths.

    Counter layout: word0/word1 = low/high half of the block index,
    word2 = path index, word3 = tag. Returns (len(paths), n_blocks, 4) uint32.
    """
    paths = np.asarray(paths, dtype=np.uint64)
    blocks = np.arange(n_blocks, dtype=np.uint64) + np.uint64(block_start)
    ctr = np.empty((paths.size, n_blocks, 4), dtype=np.uint64)
    ctr[..., 0] = blocks & _MASK
    ctr[..., 1] = blocks >> _SHIFT
    ctr[..., 2] = (paths & _MASK)[:, None]
    ctr[..., 3] = np.uint64(tag) & _MASK
    return philox4x32((key0, key1), ctr)


def fourier_area(X, Y, dW, c):
    """Truncated Fourier Levy-area sum (unscaled).

    X, Y: (K, P, m) standard normals, dW: (K, m). Returns (K, m, m) with
    entry (i, j) = sum_r (X_ri Z_rj - Z_ri X_rj) / r, Z_r = Y_r + c dW.
    """
    K, P, m = X.shape
    out = np.zeros((K, m, m))
    cw = c * dW
    for r in range(P):
        x = X[:, r, :]
        z = Y[:, r, :] + cw
        out += (x[:, :, None] * z[:, None, :] - z[:, :, None] * x[:, None, :]) / (r + 1.0)
    return out


def chen_aggregate(dW, I, window):
    """Left-fold Chen composition over consecutive windows of fine steps.

    dW: (K, n, m); I: (K, n, m, m) Ito iterated integrals or None.
    Returns (dWc (K, n // window, m), Ic or None).
    """
    K, n, m = dW.shape
    nc = n // window
    fw = dW.reshape(K, nc, window, m)
    acc_w = fw[:, :, 0, :].copy()
    acc_i = None
    if I is not None:
        fi = I.reshape(K, nc, window, m, m)
        acc_i = fi[:, :, 0].copy()
    for j in range(1, window):
        w = fw[:, :, j, :]
        if acc_i is not None:
            acc_i = (acc_i + fi[:, :, j]) + acc_w[:, :, :, None] * w[:, :, None, :]
        acc_w = acc_w + w
    return acc_w, acc_i
