"""Benchmark SDEs with closed-form or reference solutions, and a matrix exponential."""

import math
from dataclasses import dataclass

import numpy as np

from .sde import SdeProblem
from . import solver
from . import wiener

PROBLEM_NAMES = ("eq1", "eq2", "eq3", "eq4", "eq5", "eq6")
# boundary convention for the tridiagonal Lotka-Volterra noise
LV_BOUNDARY = "clamped"

_PADE13 = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
           1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
           33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0)
_THETA13 = 5.371920351148152


def matrix_exp(M):
    """exp(M) for a (..., n, n) stack by scaling and squaring with a [13/13] Pade core."""
    A = np.asarray(M, dtype=float)
    if A.shape[-1] != A.shape[-2]:
        raise ValueError("matrix_exp needs square matrices")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix_exp needs finite entries")
    n = A.shape[-1]
    norm = np.max(np.sum(np.abs(A), axis=-2), axis=-1)
    with np.errstate(divide="ignore"):
        sq = np.where(norm > _THETA13, np.ceil(np.log2(norm / _THETA13)), 0).astype(int)
    A = A / (2.0 ** sq)[..., None, None]
    b = _PADE13
    eye = np.broadcast_to(np.eye(n), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * eye)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * eye
    R = np.linalg.solve(V - U, V + U)
    for k in range(int(np.max(sq, initial=0))):
        more = sq > k
        if np.ndim(more) == 0:
            R = R @ R
        else:
            R[more] = R[more] @ R[more]
    if not np.all(np.isfinite(R)):
        raise OverflowError("matrix exponential overflowed")
    return R


def _scalar(drift, diff, ddiff, exact, x0, name, params):
    def drift_v(t, x):
        return drift(x)

    def diffusion(t, x):
        return diff(x)[..., None]

    def jac(t, x):
        return ddiff(x)[..., None, None]

    def columns(t, X):
        return diff(X)

    return SdeProblem(1, 1, drift_v, diffusion, [x0], diffusion_jacobian=jac,
                      diffusion_columns=columns, noise_class="scalar",
                      exact_solution=exact, name=name, params=params)


def eq1():
    """Scalar nonlinear SDE with solution arctan(W/10 + tan X0)."""
    x0 = 1.0

    def exact(t, W):
        return np.arctan(W / 10.0 + math.tan(x0))

    return _scalar(lambda x: -np.sin(x) * np.cos(x) ** 3 / 100.0,
                   lambda x: np.cos(x) ** 2 / 10.0,
                   lambda x: -np.sin(x) * np.cos(x) / 5.0,
                   exact, x0, "eq1", {"x0": x0})


def eq2():
    """Scalar SDE with quadratic diffusion (1 - x^2)/2; solution via e^W."""
    x0 = 0.5

    def exact(t, W):
        e = (1.0 + x0) * np.exp(W)
        return (e + x0 - 1.0) / (e - x0 + 1.0)

    return _scalar(lambda x: -0.25 * x * (1.0 - x * x),
                   lambda x: 0.5 * (1.0 - x * x),
                   lambda x: -x,
                   exact, x0, "eq2", {"x0": x0})


def eq3(m=1):
    """Scalar state, additive noise from m Wiener processes."""
    if m < 1:
        raise ValueError("eq3 needs m >= 1")
    alpha = np.full(m, 0.1)
    beta, x0 = 0.5, 1.0

    def drift(t, x):
        return beta / math.sqrt(1.0 + t) - x / (2.0 * (1.0 + t))

    def diffusion(t, x):
        col = alpha * (beta / math.sqrt(1.0 + t))
        return np.broadcast_to(col, x.shape[:-1] + (1, m)).copy()

    def jac(t, x):
        return np.zeros(x.shape[:-1] + (1, m, 1))

    def exact(t, W):
        r = math.sqrt(1.0 + t)
        return x0 / r + beta / r * (t + W @ alpha[:, None])

    return SdeProblem(1, m, drift, diffusion, [x0], diffusion_jacobian=jac,
                      diffusion_columns=lambda t, X: diffusion(t, X[..., 0]),
                      noise_class="additive", exact_solution=exact, name="eq3",
                      params={"m": m, "alpha": 0.1, "beta": beta, "x0": x0})


def eq4(d=2):
    """Linear system dX = AX dt + sum_k B X dW^k with d = m, exact via matrix_exp."""
    if d < 1:
        raise ValueError("eq4 needs d >= 1")
    m = d
    A = np.full((d, d), 1.0 / 20.0)
    np.fill_diagonal(A, -1.5)
    B = np.full((d, d), 1.0 / 100.0)
    np.fill_diagonal(B, 0.2)
    gen = A - 0.5 * m * (B @ B)
    x0 = np.full(d, 2.0)

    def drift(t, x):
        return x @ A.T

    def diffusion(t, x):
        col = x @ B.T
        return np.repeat(col[..., None], m, axis=-1)

    def columns(t, X):
        return np.einsum("iq,...qk->...ik", B, X)

    def jac(t, x):
        J = np.broadcast_to(B[:, None, :], (d, m, d))
        return np.broadcast_to(J, x.shape[:-1] + (d, m, d)).copy()

    def exact(t, W):
        W = np.asarray(W, dtype=float)
        S = np.sum(W, axis=-1)[..., None, None]
        return matrix_exp(gen * t + S * B) @ x0

    return SdeProblem(d, m, drift, diffusion, x0, diffusion_jacobian=jac,
                      diffusion_columns=columns, noise_class="commutative",
                      exact_solution=exact, name="eq4", params={"d": d, "m": m, "x0": 2.0})


def eq5():
    """Two-dimensional flow on a torus driven by four Wiener processes."""
    a = 0.5
    v1 = np.array([math.cos(a), math.sin(a)])
    v2 = np.array([-math.sin(a), math.cos(a)])

    def drift(t, x):
        return np.zeros(x.shape)

    def _cols(x1, x2):
        return np.stack([v1 * np.sin(x1)[..., None], v1 * np.cos(x1)[..., None],
                         v2 * np.sin(x2)[..., None], v2 * np.cos(x2)[..., None]], axis=-1)

    def diffusion(t, x):
        return _cols(x[..., 0], x[..., 1])

    def columns(t, X):
        out = np.empty(X.shape)
        out[..., 0] = v1 * np.sin(X[..., 0, 0])[..., None]
        out[..., 1] = v1 * np.cos(X[..., 0, 1])[..., None]
        out[..., 2] = v2 * np.sin(X[..., 1, 2])[..., None]
        out[..., 3] = v2 * np.cos(X[..., 1, 3])[..., None]
        return out

    def jac(t, x):
        J = np.zeros(x.shape[:-1] + (2, 4, 2))
        c1, s1 = np.cos(x[..., 0])[..., None], np.sin(x[..., 0])[..., None]
        c2, s2 = np.cos(x[..., 1])[..., None], np.sin(x[..., 1])[..., None]
        J[..., :, 0, 0] = v1 * c1
        J[..., :, 1, 0] = -v1 * s1
        J[..., :, 2, 1] = v2 * c2
        J[..., :, 3, 1] = -v2 * s2
        return J

    return SdeProblem(2, 4, drift, diffusion, [2.0, 2.0], diffusion_jacobian=jac,
                      diffusion_columns=columns, noise_class="general", name="eq5",
                      params={"alpha": a, "x0": 2.0})


def eq6(d=2):
    """Stochastic Lotka-Volterra system with tridiagonal multiplicative noise, d = m."""
    if d < 1:
        raise ValueError("eq6 needs d >= 1")
    m = d
    growth = np.full(d, 0.2)
    inter = np.full((d, d), 0.1 / d)
    np.fill_diagonal(inter, 1.5)
    idx = np.arange(d)
    mask = (np.abs(idx[:, None] - idx[None, :]) <= 1).astype(float)

    def drift(t, x):
        return x * (growth + x @ inter.T)

    def diffusion(t, x):
        return mask * (x[..., None, :] / 5.0)

    def columns(t, X):
        diag = np.diagonal(X, axis1=-2, axis2=-1)
        return mask * (diag[..., None, :] / 5.0)

    def jac(t, x):
        J = np.zeros((d, m, d))
        J[:, idx, idx] = mask / 5.0
        return np.broadcast_to(J, x.shape[:-1] + (d, m, d)).copy()

    return SdeProblem(d, m, drift, diffusion, np.full(d, 0.1), diffusion_jacobian=jac,
                      diffusion_columns=columns, noise_class="general", name="eq6",
                      params={"d": d, "m": m, "x0": 0.1, "boundary": LV_BOUNDARY})


def get_problem(name, dim=None):
    """Construct a benchmark problem; ``dim`` is m for eq3 and d = m for eq4/eq6."""
    if name in ("eq1", "eq2", "eq5"):
        return {"eq1": eq1, "eq2": eq2, "eq5": eq5}[name]()
    if name == "eq3":
        return eq3(dim or 1)
    if name == "eq4":
        return eq4(dim or 2)
    if name == "eq6":
        return eq6(dim or 2)
    raise KeyError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_NAMES)}")


@dataclass(frozen=True)
class ReferenceConfig:
    scheme: str = "MIL"
    h_ref: float = 2.0 ** -14
    shared_paths: bool = True

    def n_steps(self, p):
        n = (p.T - p.t0) / self.h_ref
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError("h_ref does not divide the time interval")
        return int(round(n))


def reference_trajectory(p, cfg, seed, path_index):
    """Reference terminal state on a stored fine grid for one path.

    Returns (grid, terminal state); the grid can be aggregated for any coarser
    run of the same path index.
    """
    n = cfg.n_steps(p)
    s = solver.get_scheme(cfg.scheme)
    grid = wiener.WienerFineGrid.generate(seed, [path_index], n, cfg.h_ref, p.m,
                                          levy=s.needs_levy(p.m))
    traj = solver.integrate(p, s, n, grid=grid)
    return grid, traj.Y[0, -1]
