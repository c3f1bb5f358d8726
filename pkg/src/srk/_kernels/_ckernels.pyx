# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_pyfallback`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

cdef uint64_t M0 = 0xD2511F53
cdef uint64_t M1 = 0xCD9E8D57
cdef uint32_t W0 = 0x9E3779B9
cdef uint32_t W1 = 0xBB67AE85


cdef inline void _philox(uint32_t k0, uint32_t k1, uint32_t* c) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3]
    cdef int r
    for r in range(10):
        p0 = M0 * <uint64_t>c0
        p1 = M1 * <uint64_t>c2
        c0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        c1 = <uint32_t>p1
        c2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c3 = <uint32_t>p0
        k0 = k0 + W0
        k1 = k1 + W1
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3


def philox4x32(key, ctr):
    cdef cnp.ndarray[cnp.uint32_t, ndim=2] flat = np.ascontiguousarray(
        np.asarray(ctr, dtype=np.uint64).reshape(-1, 4).astype(np.uint32))
    cdef uint32_t k0 = <uint32_t>(int(key[0]) & 0xFFFFFFFF)
    cdef uint32_t k1 = <uint32_t>(int(key[1]) & 0xFFFFFFFF)
    cdef Py_ssize_t i, n = flat.shape[0]
    cdef uint32_t[:, ::1] v = flat
    with nogil:
        for i in range(n):
            _philox(k0, k1, &v[i, 0])
    return flat.reshape(np.shape(ctr))


def philox_blocks(key0, key1, paths, tag, block_start, Py_ssize_t n_blocks):
    cdef uint64_t[::1] p = np.ascontiguousarray(paths, dtype=np.uint64)
    cdef Py_ssize_t B = p.shape[0]
    out = np.empty((B, n_blocks, 4), dtype=np.uint32)
    cdef uint32_t[:, :, ::1] o = out
    cdef uint32_t k0 = <uint32_t>(int(key0) & 0xFFFFFFFF)
    cdef uint32_t k1 = <uint32_t>(int(key1) & 0xFFFFFFFF)
    cdef uint32_t t = <uint32_t>(int(tag) & 0xFFFFFFFF)
    cdef uint64_t start = <uint64_t>block_start
    cdef uint64_t blk
    cdef Py_ssize_t b, j
    with nogil:
        for b in range(B):
            for j in range(n_blocks):
                blk = start + <uint64_t>j
                o[b, j, 0] = <uint32_t>blk
                o[b, j, 1] = <uint32_t>(blk >> 32)
                o[b, j, 2] = <uint32_t>p[b]
                o[b, j, 3] = t
                _philox(k0, k1, &o[b, j, 0])
    return out


def fourier_area(X, Y, dW, double c):
    cdef double[:, :, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, :, ::1] y = np.ascontiguousarray(Y, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(dW, dtype=np.float64)
    cdef Py_ssize_t K = x.shape[0], P = x.shape[1], m = x.shape[2]
    out = np.zeros((K, m, m))
    cdef double[:, :, ::1] o = out
    cdef double[::1] z = np.empty(m)
    cdef double[::1] cw = np.empty(m)
    cdef Py_ssize_t k, r, i, j
    cdef double rr
    with nogil:
        for k in range(K):
            for i in range(m):
                cw[i] = c * w[k, i]
            for r in range(P):
                rr = r + 1.0
                for i in range(m):
                    z[i] = y[k, r, i] + cw[i]
                for i in range(m):
                    for j in range(m):
                        o[k, i, j] = o[k, i, j] + (x[k, r, i] * z[j] - z[i] * x[k, r, j]) / rr
    return out


def chen_aggregate(dW, I, Py_ssize_t window):
    cdef double[:, :, ::1] fw = np.ascontiguousarray(dW, dtype=np.float64)
    cdef Py_ssize_t K = fw.shape[0], n = fw.shape[1], m = fw.shape[2]
    cdef Py_ssize_t nc = n // window
    acc_w = np.empty((K, nc, m))
    cdef double[:, :, ::1] aw = acc_w
    cdef double[:, :, :, ::1] fi
    cdef double[:, :, :, ::1] ai
    cdef bint has_i = I is not None
    acc_i = None
    if has_i:
        fi = np.ascontiguousarray(I, dtype=np.float64)
        acc_i = np.empty((K, nc, m, m))
        ai = acc_i
    cdef Py_ssize_t k, q, j, l, kk, f
    with nogil:
        for k in range(K):
            for q in range(nc):
                f = q * window
                for l in range(m):
                    aw[k, q, l] = fw[k, f, l]
                if has_i:
                    for l in range(m):
                        for kk in range(m):
                            ai[k, q, l, kk] = fi[k, f, l, kk]
                for j in range(1, window):
                    if has_i:
                        for l in range(m):
                            for kk in range(m):
                                ai[k, q, l, kk] = (ai[k, q, l, kk] + fi[k, f + j, l, kk]) + aw[k, q, l] * fw[k, f + j, kk]
                    for l in range(m):
                        aw[k, q, l] = aw[k, q, l] + fw[k, f + j, l]
    return acc_w, acc_i
