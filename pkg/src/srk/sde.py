"""SDE problem model, Ito/Stratonovich drift conversion and commutativity probe.

All callables are batched over leading axes: ``drift(t, x)`` maps (..., d) to
(..., d), ``diffusion(t, x)`` returns the (..., d, m) matrix whose column k is
b^k, and ``diffusion_jacobian(t, x)`` returns (..., d, m, d) with entry
[i, k, q] = d b^{i,k} / d x_q.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng

CALCULI = ("ito", "strat")
NOISE_CLASSES = ("general", "commutative", "additive", "scalar")


@dataclass(frozen=True)
class SdeProblem:
    d: int
    m: int
    drift: Callable
    diffusion: Callable
    x0: np.ndarray
    diffusion_jacobian: Optional[Callable] = None
    # optional fast path: (t, X (..., d, m)) -> (..., d, m), column k at X[..., k]
    diffusion_columns: Optional[Callable] = None
    calculus: str = "ito"
    noise_class: str = "general"
    exact_solution: Optional[Callable] = None
    t0: float = 0.0
    T: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("dimensions must be positive")
        if self.calculus not in CALCULI:
            raise ValueError(f"calculus must be one of {CALCULI}")
        if self.noise_class not in NOISE_CLASSES:
            raise ValueError(f"noise_class must be one of {NOISE_CLASSES}")
        if self.noise_class == "scalar" and self.m != 1:
            raise ValueError("scalar noise requires m = 1")
        if not self.T > self.t0:
            raise ValueError("need T > t0")
        x0 = np.asarray(self.x0, dtype=float).reshape(self.d)
        object.__setattr__(self, "x0", x0)

    def column(self, t, x, k):
        return self.diffusion(t, x)[..., k]

    def columns_at(self, t, X):
        """Column k of the diffusion evaluated at X[..., k] for every k."""
        if self.diffusion_columns is not None:
            return self.diffusion_columns(t, X)
        out = np.empty(X.shape)
        for k in range(self.m):
            out[..., k] = self.diffusion(t, X[..., k])[..., k]
        return out

    def jacobian(self, t, x):
        if self.diffusion_jacobian is not None:
            return self.diffusion_jacobian(t, x)
        return _fd_jacobian_all(self, t, np.asarray(x, dtype=float))

    @property
    def has_exact(self):
        return self.exact_solution is not None

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_ito(self):
        if self.calculus == "ito":
            return self
        if self.noise_class == "additive":
            return self.replace(calculus="ito")
        drift = self.drift

        def ito_drift(t, x):
            return drift(t, x) + strat_drift_correction(self, t, x)

        return self.replace(drift=ito_drift, calculus="ito")

    def to_stratonovich(self):
        if self.calculus == "strat":
            return self
        if self.noise_class == "additive":
            return self.replace(calculus="strat")
        drift = self.drift

        def strat_drift(t, x):
            return drift(t, x) - strat_drift_correction(self, t, x)

        return self.replace(drift=strat_drift, calculus="strat")

    def to_calculus(self, calculus):
        return self.to_ito() if calculus == "ito" else self.to_stratonovich()

    def validate(self, n_probes=16, seed=0):
        """Spot-check the declared invariants at random states; raises ValueError."""
        x = _probe_states(self, n_probes, seed)
        t = self.t0
        b = self.diffusion(t, x)
        if b.shape != (n_probes, self.d, self.m):
            raise ValueError(f"diffusion returned shape {b.shape}, expected (n, {self.d}, {self.m})")
        if self.noise_class == "additive":
            b2 = self.diffusion(t, x[::-1])
            if np.max(np.abs(b - b2)) != 0.0:
                raise ValueError("additive problem has state-dependent diffusion")
        if self.diffusion_jacobian is not None:
            J = self.diffusion_jacobian(t, x)
            Jfd = _fd_jacobian_all(self, t, x)
            scale = 1.0 + np.max(np.abs(Jfd))
            if np.max(np.abs(J - Jfd)) > 1e-6 * scale:
                raise ValueError("analytic diffusion Jacobian disagrees with finite differences")


def _probe_states(p, n, seed):
    z = rng.normals(seed, [0], rng.make_tag(rng.PROBE), 0, n * p.d)[0]
    return p.x0 + z.reshape(n, p.d)


def _eps(x, eps):
    if eps is not None:
        if not eps > 0:
            raise ValueError("eps must be positive")
        return np.full(x.shape, float(eps))
    return 1e-5 * (1.0 + np.abs(x))


def fd_jacobian(p, t, x, k, eps=None):
    """Central-difference Jacobian of column k at x, a (d, d) matrix."""
    x = np.asarray(x, dtype=float).reshape(p.d)
    e = _eps(x, eps)
    J = np.empty((p.d, p.d))
    for q in range(p.d):
        step = np.zeros(p.d)
        step[q] = e[q]
        J[:, q] = (p.column(t, x + step, k) - p.column(t, x - step, k)) / (2.0 * e[q])
    return J


def _fd_jacobian_all(p, t, x, eps=None):
    e = _eps(x, eps)
    J = np.empty(x.shape[:-1] + (p.d, p.m, p.d))
    for q in range(p.d):
        step = np.zeros(x.shape)
        step[..., q] = e[..., q]
        diff = p.diffusion(t, x + step) - p.diffusion(t, x - step)
        J[..., q] = diff / (2.0 * e[..., q, None, None])
    return J


def strat_drift_correction(p, t, x):
    """Half the sum over columns of (d b^j / dx) b^j; batched over x."""
    x = np.asarray(x, dtype=float)
    if p.noise_class == "additive":
        return np.zeros(x.shape)
    b = p.diffusion(t, x)
    J = p.jacobian(t, x)
    return 0.5 * np.einsum("...ijq,...qj->...i", J, b)


def commutator(p, t, x):
    """(..., d, m, m) array of L^{j1} b^{j2} - L^{j2} b^{j1}."""
    b = p.diffusion(t, x)
    J = p.jacobian(t, x)
    L = np.einsum("...qa,...kbq->...kab", b, J)
    return L - np.swapaxes(L, -1, -2)


def check_commutativity(p, n_probes=64, tol=1e-8, seed=0):
    """Numerical probe of the commutativity condition; not a proof."""
    if p.m == 1 or p.noise_class == "additive":
        return "commutative"
    x = _probe_states(p, n_probes, seed)
    z = rng.normals(seed, [1], rng.make_tag(rng.PROBE), 0, n_probes)[0]
    ts = p.t0 + (p.T - p.t0) * (0.5 + 0.5 * np.tanh(z))
    for t, xi in zip(ts, x):
        c = np.max(np.abs(commutator(p, t, xi)))
        if c > tol * (1.0 + np.linalg.norm(xi)):
            return "non-commutative"
    return "commutative"
