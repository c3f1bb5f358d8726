"""Wiener increments and twice-iterated stochastic integrals.

Conventions: ``I[l, k]`` holds the Ito integral of dW^l (inner, earlier) then
dW^k (outer). Batched arrays carry leading axes (paths, steps, ...).
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import rng

ITO_MODES = ("ito-approx", "commutative-ito", "scalar-exact", "oracle")
STRAT_MODES = ("strat-approx", "commutative-strat")

# Two readings of the typeset per-step Gaussian budget; see rho().
RHO_SQRT_3H = "sqrt(3h)"
RHO_SQRT3_TIMES_H = "sqrt(3)*h"
RHO_READING = RHO_SQRT_3H

_MAX_CHUNK_DOUBLES = 4_000_000


@dataclass(frozen=True)
class WienerIncrements:
    m: int
    h: float
    dW: np.ndarray

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step size h must be positive")
        if not np.all(np.isfinite(self.dW)):
            raise ValueError("increments must be finite")


@dataclass(frozen=True)
class IteratedIntegrals:
    """One step's m x m matrix of iterated integrals plus its increments."""

    h: float
    dW: np.ndarray
    values: np.ndarray
    mode: str

    @property
    def m(self):
        return self.dW.shape[-1]


def sample_increments(stream, m, h):
    """Draw m independent N(0, h) increments from ``stream``."""
    if m < 1 or not h > 0:
        raise ValueError("need m >= 1 and h > 0")
    return WienerIncrements(m, h, math.sqrt(h) * stream.normal((m,)))


def diagonal_ito(dW_k, h):
    return (dW_k * dW_k - h) / 2.0


def ito_to_strat(I_lk, l, k, h):
    return I_lk + h / 2.0 if l == k else I_lk


def strat_values(I, h):
    """Ito matrix (..., m, m) -> Stratonovich matrix (diagonal shifted by h/2)."""
    J = np.array(I, dtype=float, copy=True)
    idx = np.arange(J.shape[-1])
    J[..., idx, idx] += h / 2.0
    return J


def commutative_values(dW, h, calculus):
    """Products-of-increments replacement for the iterated integrals."""
    dW = np.asarray(dW, dtype=float)
    V = 0.5 * dW[..., :, None] * dW[..., None, :]
    if calculus == "ito":
        idx = np.arange(dW.shape[-1])
        V[..., idx, idx] = diagonal_ito(dW, h)
    elif calculus != "strat":
        raise ValueError("calculus must be 'ito' or 'strat'")
    return V


def commutative_matrix(w, calculus):
    values = commutative_values(w.dW, w.h, calculus)
    return IteratedIntegrals(w.h, np.asarray(w.dW), values, f"commutative-{calculus}")


def rho(m, h, reading=None):
    """Standard Gaussians per step needed for O(h^{3/2}) Levy-area accuracy.

    ``reading`` selects how the denominator is grouped: ``"sqrt(3h)"``
    (default, grows like h^{-1/2}) or ``"sqrt(3)*h"`` (grows like h^{-1}).
    Scalar noise needs none.
    """
    if m < 1 or not h > 0:
        raise ValueError("need m >= 1 and h > 0")
    if m == 1:
        return 0
    reading = reading or RHO_READING
    if reading == RHO_SQRT_3H:
        denom = math.sqrt(3.0 * h) * math.pi
    elif reading == RHO_SQRT3_TIMES_H:
        denom = math.sqrt(3.0) * h * math.pi
    else:
        raise ValueError(f"unknown rho reading {reading!r}")
    return math.ceil(m ** 1.5 / denom + (m * m + m) / 2)


def fourier_terms(m, h, reading=None):
    """Truncation depth of the Fourier series implied by the rho budget."""
    if m == 1:
        return 0
    return max(1, (rho(m, h, reading) - (m * m + m) // 2) // (2 * m))


def extra_gaussians(m, h, reading=None):
    """Auxiliary normals consumed per step by the Levy-area sampler."""
    if m == 1:
        return 0
    return 2 * m * fourier_terms(m, h, reading) + m * (m - 1) // 2


def _pair_index(m):
    return np.triu_indices(m, 1)


def tail_sqrt_cov(dW, h):
    """Square root of the asymptotic tail covariance, batched over dW (..., m).

    Returns (..., M, M) with M = m(m-1)/2, pairs (i < j) in row-major order.
    """
    dW = np.asarray(dW, dtype=float)
    m = dW.shape[-1]
    pi_, pj = _pair_index(m)
    M = pi_.size
    wi, wj = dW[..., pi_], dW[..., pj]
    d_ii = (pi_[:, None] == pi_[None, :])
    d_ij = (pi_[:, None] == pj[None, :])
    d_ji = (pj[:, None] == pi_[None, :])
    d_jj = (pj[:, None] == pj[None, :])
    S = (d_ii * (wj[..., :, None] * wj[..., None, :])
         - d_ij * (wj[..., :, None] * wi[..., None, :])
         - d_ji * (wi[..., :, None] * wj[..., None, :])
         + d_jj * (wi[..., :, None] * wi[..., None, :]))
    eye = np.eye(M)
    S = 2.0 * eye + (2.0 / h) * S
    a = np.sqrt(1.0 + np.sum(dW * dW, axis=-1) / h)[..., None, None]
    return (S + 2.0 * a * eye) / (math.sqrt(2.0) * (1.0 + a)), S


def levy_from_normals(z, dW, h, P, kernels=None):
    """Approximate Ito iterated integrals from auxiliary normals.

    z: (K, 2Pm + M) normals, dW: (K, m). Truncated Fourier sum of depth P plus
    a Gaussian tail-sum correction. Returns (K, m, m).
    """
    k = kernels or _kernels
    K, m = dW.shape
    pi_, pj = _pair_index(m)
    M = pi_.size
    X = z[:, :P * m].reshape(K, P, m)
    Y = z[:, P * m:2 * P * m].reshape(K, P, m)
    G = z[:, 2 * P * m:2 * P * m + M]
    F = k.fourier_area(X, Y, dW, math.sqrt(2.0 / h))
    tail_var = math.pi ** 2 / 6.0 - sum(1.0 / (r * r) for r in range(1, P + 1))
    sqrtS, _ = tail_sqrt_cov(dW, h)
    tail = np.einsum("kpq,kq->kp", sqrtS, G) * math.sqrt(max(tail_var, 0.0))
    area = (h / (2.0 * math.pi)) * (F[:, pi_, pj] + tail)
    I = np.empty((K, m, m))
    upper = 0.5 * dW[:, pi_] * dW[:, pj] + area
    I[:, pi_, pj] = upper
    # pairing identity I_kl = W_k W_l - I_lk
    I[:, pj, pi_] = dW[:, pj] * dW[:, pi_] - upper
    idx = np.arange(m)
    I[:, idx, idx] = diagonal_ito(dW, h)
    return I


def approx_iterated(stream, w, calculus="ito"):
    """Approximate iterated integrals for one step, drawing from ``stream``."""
    m, h = w.m, w.h
    dW = np.asarray(w.dW, dtype=float).reshape(1, m)
    if m == 1:
        I = diagonal_ito(dW, h).reshape(1, 1, 1)
    else:
        P = fourier_terms(m, h)
        z = stream.normal((1, extra_gaussians(m, h)))
        I = levy_from_normals(z, dW, h, P)
    values = I[0]
    if calculus == "strat":
        values = strat_values(values, h)
    elif calculus != "ito":
        raise ValueError("calculus must be 'ito' or 'strat'")
    return IteratedIntegrals(h, dW[0].copy(), values, f"{calculus}-approx")


def sample_path_data(seed, paths, n_steps, h, m, levy=True, level=None, start=0,
                     count=None, kernels=None):
    """Increments and (optionally) approximate Ito iterated integrals for a batch.

    Stream layout: increments for step n of path p sit at positions
    n*m .. n*m+m-1 of stream (p, DW tag); the Levy-area normals at
    n*E .. n*E+E-1 of stream (p, LEVY tag). ``level`` keys both tags and
    defaults to ``n_steps``. ``start``/``count`` select a block of steps so long
    grids can be produced piecewise. Returns (dW, I or None, gaussians_per_path).
    """
    paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    B = paths.size
    level = n_steps if level is None else level
    count = n_steps - start if count is None else count
    if start < 0 or count < 0 or start + count > n_steps:
        raise ValueError("block outside the grid")
    sq = math.sqrt(h)
    dW = sq * rng.normals(seed, paths, rng.make_tag(rng.DW, level), start * m, count * m,
                          kernels=kernels).reshape(B, count, m)
    gauss = count * m
    if not levy:
        return dW, None, gauss
    if m == 1:
        return dW, diagonal_ito(dW, h)[..., None], gauss
    P = fourier_terms(m, h)
    E = extra_gaussians(m, h)
    I = np.empty((B, count, m, m))
    tag = rng.make_tag(rng.LEVY, level)
    chunk = max(1, _MAX_CHUNK_DOUBLES // max(1, B * E))
    for n0 in range(0, count, chunk):
        n1 = min(count, n0 + chunk)
        z = rng.normals(seed, paths, tag, (start + n0) * E, (n1 - n0) * E, kernels=kernels)
        z = z.reshape(B * (n1 - n0), E)
        I[:, n0:n1] = levy_from_normals(z, dW[:, n0:n1].reshape(-1, m), h, P,
                                        kernels=kernels).reshape(B, n1 - n0, m, m)
    return dW, I, gauss + count * E


def compose(left, right):
    """Chen composition of two adjacent steps (left first)."""
    if left.mode != right.mode or left.mode not in ITO_MODES:
        raise ValueError(f"cannot compose modes {left.mode!r} and {right.mode!r}")
    a, b = np.asarray(left.dW, float), np.asarray(right.dW, float)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    values = (left.values + right.values) + a[:, None] * b[None, :]
    mode = "ito-approx" if left.mode == "commutative-ito" else left.mode
    return IteratedIntegrals(left.h + right.h, a + b, values, mode)


def aggregate(dW, I, window, kernels=None):
    """Compose consecutive windows of fine steps: (K, n, m) -> (K, n/window, m)."""
    k = kernels or _kernels
    dW = np.ascontiguousarray(dW, dtype=float)
    n = dW.shape[1]
    if window < 1 or n % window:
        raise ValueError(f"{n} fine steps are not an integer multiple of window {window}")
    if window == 1:
        return dW.copy(), None if I is None else np.array(I, dtype=float)
    Ic = None if I is None else np.ascontiguousarray(I, dtype=float)
    return k.chen_aggregate(dW, Ic, window)


def oracle_batch(seed, paths, m, h, K, level=0):
    """Brute-force iterated integrals from K sub-increments per sample.

    Returns (dW (B, m), I (B, m, m)); diagonals use the exact formula.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    B = paths.size
    z = rng.normals(seed, paths, rng.make_tag(rng.ORACLE, level), 0, K * m)
    dw = math.sqrt(h / K) * z.reshape(B, K, m)
    S = np.cumsum(dw, axis=1) - dw
    I = np.einsum("bjl,bjk->blk", S, dw)
    W = dw.sum(axis=1)
    idx = np.arange(m)
    I[:, idx, idx] = diagonal_ito(W, h)
    return W, I


def oracle_iterated(stream, m, h, K):
    """Single-step oracle drawing K*m normals from ``stream``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    dw = math.sqrt(h / K) * stream.normal((K, m))
    S = np.cumsum(dw, axis=0) - dw
    I = S.T @ dw
    W = dw.sum(axis=0)
    idx = np.arange(m)
    I[idx, idx] = diagonal_ito(W, h)
    return IteratedIntegrals(h, W, I, "oracle")


@dataclass
class WienerFineGrid:
    """Fine-grid Wiener data for a batch of paths, aggregable to coarser grids."""

    m: int
    n_fine: int
    h_fine: float
    seed: int
    paths: np.ndarray
    dW: np.ndarray
    I: np.ndarray = None
    gaussians: int = 0

    @classmethod
    def generate(cls, seed, paths, n_fine, h_fine, m, levy=True, kernels=None):
        paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
        dW, I, g = sample_path_data(seed, paths, n_fine, h_fine, m, levy=levy, kernels=kernels)
        return cls(m, n_fine, h_fine, int(seed), paths, dW, I, g)

    def aggregate(self, n_coarse, with_iterated=True, kernels=None):
        """Coarse (dW, I) with ``n_coarse`` steps via Chen composition."""
        if n_coarse < 1 or self.n_fine % n_coarse:
            raise ValueError(f"fine grid of {self.n_fine} steps is not a refinement of {n_coarse}")
        I = self.I if with_iterated else None
        return aggregate(self.dW, I, self.n_fine // n_coarse, kernels=kernels)


_DUMP_HEADER = struct.Struct("<4sIQdQ")
_DUMP_MAGIC = b"SRKW"


def write_path_dump(fileobj, m, n_fine, h_fine, seed, dW, I):
    """Binary dump of one path: header then per-step dW and I, float64 LE."""
    dW = np.asarray(dW, dtype="<f8").reshape(n_fine, m)
    I = np.asarray(I, dtype="<f8").reshape(n_fine, m, m)
    fileobj.write(_DUMP_HEADER.pack(_DUMP_MAGIC, m, n_fine, float(h_fine), int(seed)))
    rows = np.concatenate([dW, I.reshape(n_fine, m * m)], axis=1)
    fileobj.write(rows.astype("<f8").tobytes())


def read_path_dump(fileobj):
    head = fileobj.read(_DUMP_HEADER.size)
    magic, m, n_fine, h_fine, seed = _DUMP_HEADER.unpack(head)
    if magic != _DUMP_MAGIC:
        raise ValueError("not a path dump")
    data = np.frombuffer(fileobj.read(n_fine * (m + m * m) * 8), dtype="<f8")
    rows = data.reshape(n_fine, m + m * m)
    return dict(m=m, n_fine=n_fine, h_fine=h_fine, seed=seed,
                dW=rows[:, :m].copy(), I=rows[:, m:].reshape(n_fine, m, m).copy())
