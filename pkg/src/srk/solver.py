"""One-step maps and trajectory integration.

States are batched: ``Y`` has shape (..., d), increments (..., m) and iterated
integrals (..., m, m). All steps of a scheme share the helpers below so that
schemes which coincide mathematically also coincide bit for bit.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import tableau as tb
from . import wiener

SELECTORS = ("ito-approx", "strat-approx", "commutative-ito", "commutative-strat", "additive", "none")

# iterated-integral modes a selector accepts in a StepContext
_ACCEPTS = {
    "ito-approx": ("ito-approx", "scalar-exact", "oracle"),
    "strat-approx": ("strat-approx",),
    "commutative-ito": ("commutative-ito",),
    "commutative-strat": ("commutative-strat",),
}
_ITO_MODES = ("ito-approx", "scalar-exact", "oracle", "commutative-ito")
_STRAT_MODES = ("strat-approx", "commutative-strat")


class ImplicitSolveError(RuntimeError):
    """Fixed-point iteration for an implicit drift stage did not converge."""


@dataclass(frozen=True)
class ImplicitConfig:
    tol: float = 1e-12
    max_iter: int = 50


@dataclass(frozen=True)
class Scheme:
    name: str
    kind: str
    tableau: tb.ExtendedTableau = None
    selector: str = "none"
    calculus: str = "ito"  # calculus the problem must be in; None = either
    implicit: ImplicitConfig = ImplicitConfig()
    fd_jacobian: bool = False

    @property
    def uses_iterated(self):
        """Whether the scheme consumes approximated mixed iterated integrals."""
        return self.selector in ("ito-approx", "strat-approx") or self.kind in ("milstein", "spli")

    def needs_levy(self, m):
        return self.uses_iterated and m > 1

    def bind(self, p):
        """Check compatibility with problem ``p`` and convert its calculus if needed."""
        if self.selector == "additive" and p.noise_class != "additive":
            raise ValueError(f"{self.name} requires additive noise; {p.name} is {p.noise_class}")
        if self.kind == "milstein" and p.diffusion_jacobian is None and not self.fd_jacobian:
            raise ValueError(f"{self.name} needs a diffusion Jacobian")
        if self.calculus is None or p.calculus == self.calculus:
            return p
        return p.to_calculus(self.calculus)


def _srk(name, base, selector, calculus):
    return Scheme(name, "srk", tb.builtin(base).replace(name=name), selector, calculus)


def _registry():
    return {
        "EM": Scheme("EM", "em", tb.builtin("EM"), "none", "ito"),
        "MIL": Scheme("MIL", "milstein", None, "ito-approx", "ito"),
        "SPLI": Scheme("SPLI", "spli", None, "ito-approx", "ito"),
        "SRI2s1": _srk("SRI2s1", "SRI2s1", "ito-approx", "ito"),
        "SRI2s2": _srk("SRI2s2", "SRI2s2", "ito-approx", "ito"),
        "SRIC2s1": _srk("SRIC2s1", "SRI2s1", "commutative-ito", "ito"),
        "SRIC2s2": _srk("SRIC2s2", "SRI2s2", "commutative-ito", "ito"),
        "SRS2s1": _srk("SRS2s1", "SRI2s1", "strat-approx", "strat"),
        "SRS2s2": _srk("SRS2s2", "SRI2s2", "strat-approx", "strat"),
        "SRSC2s1": _srk("SRSC2s1", "SRI2s1", "commutative-strat", "strat"),
        "SRSC2s2": _srk("SRSC2s2", "SRI2s2", "commutative-strat", "strat"),
        "SRA2s1": Scheme("SRA2s1", "additive", tb.builtin("SRA2s1"), "additive", None),
        "SRA2s2": Scheme("SRA2s2", "additive", tb.builtin("SRA2s2"), "additive", None),
        "SSBE": Scheme("SSBE", "additive", tb.builtin("SSBE"), "additive", None),
    }


SCHEMES = _registry()
SCHEME_NAMES = tuple(SCHEMES)


def get_scheme(name):
    try:
        return SCHEMES[name]
    except KeyError:
        raise KeyError(f"unknown scheme {name!r}; known: {', '.join(SCHEME_NAMES)}") from None


def custom_scheme(t, selector, name=None, implicit=ImplicitConfig()):
    """Wrap a user tableau as a runnable scheme."""
    if selector not in SELECTORS:
        raise ValueError(f"selector must be one of {SELECTORS}")
    if selector == "additive":
        return Scheme(name or t.name or "custom", "additive", t, selector, None, implicit)
    calculus = "strat" if selector.endswith("strat") else "ito"
    return Scheme(name or t.name or "custom", "srk", t, selector, calculus, implicit)


@dataclass
class Counters:
    """Scalar function-evaluation totals summed over all paths."""

    drift: float = 0
    diffusion: float = 0
    jacobian: float = 0
    gaussians: float = 0
    steps: int = 0
    paths: int = 0

    def per_step(self):
        n = max(1, self.steps * self.paths)
        return dict(drift=self.drift / n, diffusion=self.diffusion / n,
                    jacobian=self.jacobian / n, gaussians=self.gaussians / n)

    def merge(self, other):
        return Counters(self.drift + other.drift, self.diffusion + other.diffusion,
                        self.jacobian + other.jacobian, self.gaussians + other.gaussians,
                        self.steps, self.paths + other.paths)


@dataclass
class StepContext:
    t: float
    h: float
    Y: np.ndarray
    dW: np.ndarray
    iterated: np.ndarray = None
    mode: str = None

    @classmethod
    def from_integrals(cls, t, Y, ii):
        return cls(t, ii.h, np.asarray(Y, float), np.asarray(ii.dW, float), ii.values, ii.mode)


def select_iterated(selector, dW, I_ito, h):
    """Iterated-integral matrix a selector consumes, and its mode label."""
    if selector == "ito-approx":
        return I_ito, "ito-approx"
    if selector == "strat-approx":
        return wiener.strat_values(I_ito, h), "strat-approx"
    if selector == "commutative-ito":
        return wiener.commutative_values(dW, h, "ito"), "commutative-ito"
    if selector == "commutative-strat":
        return wiener.commutative_values(dW, h, "strat"), "commutative-strat"
    return None, None


def _batch_size(Y):
    return int(np.prod(Y.shape[:-1])) if Y.ndim > 1 else 1


def _count(counters, **kw):
    if counters is not None:
        for k, v in kw.items():
            setattr(counters, k, getattr(counters, k) + v)


def noise_sum(b, w):
    """Sum over columns of b^k weighted by w_k."""
    return np.einsum("...dk,...k->...d", b, w)


def _weighted(coeffs, vals):
    acc = None
    for c, v in zip(coeffs, vals):
        if c != 0.0:
            acc = c * v if acc is None else acc + c * v
    return acc


def _advance(Y, coeffs, vals, h):
    acc = _weighted(coeffs, vals)
    return Y if acc is None else Y + acc * h


def _drift_stages(p, t, h, Y, ar, need, implicit, counters):
    """Drift evaluations a(t + c0_j h, H0_j) for the stages listed in ``need``."""
    s = len(need)
    A0, c0 = ar["A0"], ar["c0"]
    nb = _batch_size(Y)
    vals = [None] * s
    if not np.any(np.triu(A0)):
        for i in range(s):
            if need[i]:
                H = _advance(Y, A0[i, :i], vals[:i], h)
                vals[i] = p.drift(t + c0[i] * h, H)
                _count(counters, drift=p.d * nb)
        return vals
    return _implicit_drift_stages(p, t, h, Y, ar, need, implicit, counters)


def _implicit_drift_stages(p, t, h, Y, ar, need, cfg, counters):
    A0, c0 = ar["A0"], ar["c0"]
    s = A0.shape[0]
    shape = Y.shape
    Yb = Y.reshape(-1, p.d)
    B = Yb.shape[0]
    H = np.repeat(Yb[None], s, axis=0)
    scale = cfg.tol * (1.0 + np.max(np.abs(Yb), axis=-1))
    active = np.arange(B)
    evals = 0
    for _ in range(cfg.max_iter):
        Ya = Yb[active]
        a = [p.drift(t + c0[j] * h, H[j, active]) for j in range(s)]
        evals += s * active.size
        new = np.stack([_advance(Ya, A0[i], a, h) for i in range(s)])
        delta = np.max(np.abs(new - H[:, active]), axis=(0, 2))
        H[:, active] = new
        active = active[delta > scale[active]]
        if active.size == 0:
            break
    else:
        raise ImplicitSolveError(
            f"implicit stage did not converge in {cfg.max_iter} iterations (h={h:g} too large?)")
    vals = [None] * s
    for j in range(s):
        if need[j]:
            vals[j] = p.drift(t + c0[j] * h, H[j]).reshape(shape)
            evals += B
    _count(counters, drift=p.d * evals)
    return vals


def _stage_needs(ar):
    alpha, A0, A1 = ar["alpha"], ar["A0"], ar["A1"]
    B1, beta1, beta2 = ar["B1"], ar["beta1"], ar["beta2"]
    s = alpha.size
    need_a = [bool(alpha[j] != 0 or np.any(A0[:, j]) or np.any(A1[:, j])) for j in range(s)]
    need_b = [bool(beta1[i] != 0 or beta2[i] != 0 or np.any(B1[:, i])) for i in range(s)]
    return need_a, need_b


def _check_mode(s, ctx):
    accepted = _ACCEPTS.get(s.selector)
    if accepted is None:
        return
    if ctx.iterated is None:
        raise ValueError(f"{s.name} needs iterated integrals ({s.selector})")
    if ctx.mode is not None and ctx.mode not in accepted:
        raise ValueError(f"selector {s.selector} cannot consume iterated integrals in mode {ctx.mode}")


def srk_step(p, s, ctx, counters=None):
    """One step of the general SRK method with the scheme's integral selector."""
    _check_mode(s, ctx)
    ar = s.tableau.arrays
    t, h, Y, dW = ctx.t, ctx.h, ctx.Y, ctx.dW
    nb = _batch_size(Y)
    need_a, need_b = _stage_needs(ar)
    a = _drift_stages(p, t, h, Y, ar, need_a, s.implicit, counters)
    A1, B1, c1 = ar["A1"], ar["B1"], ar["c1"]
    Ihat = ctx.iterated
    b = [None] * s.tableau.s
    for i in range(s.tableau.s):
        if not need_b[i]:
            continue
        base = _advance(Y, A1[i], a, h)
        terms = [B1[i, j] * (b[j] @ Ihat) for j in range(i) if B1[i, j] != 0]
        if terms:
            H = base[..., None] + sum(terms[1:], terms[0])
            b[i] = p.columns_at(t + c1[i] * h, H)
        else:
            b[i] = p.diffusion(t + c1[i] * h, base)
        _count(counters, diffusion=p.d * p.m * nb)
    noise = None
    for i in range(s.tableau.s):
        if b[i] is None:
            continue
        w = ar["beta1"][i] * dW
        if ar["beta2"][i] != 0:
            w = w + ar["beta2"][i]
        term = noise_sum(b[i], w)
        noise = term if noise is None else noise + term
    out = _advance(Y, ar["alpha"], a, h)
    return out if noise is None else out + noise


def additive_step(p, s, ctx, counters=None):
    """Step of the reduced method for additive noise: no iterated integrals."""
    if p.noise_class != "additive":
        raise ValueError("additive_step requires an additive-noise problem")
    ar = s.tableau.arrays
    t, h, Y, dW = ctx.t, ctx.h, ctx.Y, ctx.dW
    nb = _batch_size(Y)
    need_a = [bool(ar["alpha"][j] != 0 or np.any(ar["A0"][:, j])) for j in range(s.tableau.s)]
    a = _drift_stages(p, t, h, Y, ar, need_a, s.implicit, counters)
    noise = None
    for i, b1 in enumerate(ar["beta1"]):
        if b1 == 0:
            continue
        b = p.diffusion(t + ar["c1"][i] * h, Y)
        _count(counters, diffusion=p.d * p.m * nb)
        term = noise_sum(b, b1 * dW)
        noise = term if noise is None else noise + term
    out = _advance(Y, ar["alpha"], a, h)
    return out if noise is None else out + noise


def em_step(p, ctx, counters=None):
    t, h, Y = ctx.t, ctx.h, ctx.Y
    nb = _batch_size(Y)
    _count(counters, drift=p.d * nb, diffusion=p.d * p.m * nb)
    return Y + p.drift(t, Y) * h + noise_sum(p.diffusion(t, Y), ctx.dW)


def milstein_step(p, ctx, counters=None):
    """Y + a h + sum_k b^k dW_k + sum_{j,k} (L^j b^k) I_(j,k), all at (t, Y)."""
    if ctx.iterated is None:
        raise ValueError("Milstein step needs iterated integrals")
    if ctx.mode is not None and ctx.mode not in _ITO_MODES and p.calculus == "ito":
        raise ValueError(f"Ito problem cannot consume {ctx.mode} integrals")
    t, h, Y = ctx.t, ctx.h, ctx.Y
    nb = _batch_size(Y)
    b = p.diffusion(t, Y)
    J = p.jacobian(t, Y)
    _count(counters, drift=p.d * nb, diffusion=p.d * p.m * nb, jacobian=p.d * p.d * p.m * nb)
    corr = np.einsum("...ikq,...qj,...jk->...i", J, b, ctx.iterated)
    return Y + p.drift(t, Y) * h + noise_sum(b, ctx.dW) + corr


def spli_step(p, ctx, counters=None):
    """Derivative-free order-1 scheme with supporting values Y + a h + b^j sqrt(h)."""
    if ctx.iterated is None:
        raise ValueError("SPLI step needs iterated integrals")
    want = _ITO_MODES if p.calculus == "ito" else _STRAT_MODES
    if ctx.mode is not None and ctx.mode not in want:
        raise ValueError(f"{p.calculus} problem cannot consume {ctx.mode} integrals")
    t, h, Y = ctx.t, ctx.h, ctx.Y
    nb = _batch_size(Y)
    a = p.drift(t, Y)
    b = p.diffusion(t, Y)
    sq = math.sqrt(h)
    pre = Y + a * h
    diffs = np.stack([p.diffusion(t, pre + b[..., j] * sq) - b for j in range(p.m)], axis=-3)
    _count(counters, drift=p.d * nb, diffusion=p.d * (p.m * p.m + p.m) * nb)
    corr = np.einsum("...jik,...jk->...i", diffs, ctx.iterated) / sq
    return pre + noise_sum(b, ctx.dW) + corr


def step(p, s, ctx, counters=None):
    """Dispatch one step of scheme ``s`` (problem already in the right calculus)."""
    if s.kind == "srk":
        return srk_step(p, s, ctx, counters)
    if s.kind == "additive":
        return additive_step(p, s, ctx, counters)
    if s.kind == "em":
        return em_step(p, ctx, counters)
    if s.kind == "milstein":
        return milstein_step(p, ctx, counters)
    if s.kind == "spli":
        return spli_step(p, ctx, counters)
    raise ValueError(f"unknown scheme kind {s.kind!r}")


class Stepper:
    """Advance a batch of states through consecutive steps of one scheme."""

    def __init__(self, p, s, N, Y0=None, batch=1):
        self.scheme = s
        self.problem = s.bind(p)
        self.N = N
        self.h = (p.T - p.t0) / N
        self.n = 0
        Y0 = self.problem.x0 if Y0 is None else Y0
        self.Y = np.array(np.broadcast_to(Y0, (batch, p.d)), dtype=float)
        self.counters = Counters(paths=batch)

    def time(self, n):
        return self.problem.t0 + n * self.h

    def advance(self, dW, I=None, record=False):
        """Consume (B, n, m) increments (and (B, n, m, m) Ito integrals)."""
        s, p, h = self.scheme, self.problem, self.h
        out = np.empty(dW.shape[:2] + (p.d,)) if record else None
        if I is None and s.uses_iterated:
            if p.m != 1:
                raise ValueError(f"{s.name} needs iterated integrals for m > 1")
            I = wiener.diagonal_ito(dW, h)[..., None]
        for j in range(dW.shape[1]):
            dWj = dW[:, j]
            Ij = None if I is None else I[:, j]
            if s.kind in ("milstein", "spli") and p.calculus == "strat":
                Ihat, mode = wiener.strat_values(Ij, h), "strat-approx"
            elif s.kind in ("milstein", "spli"):
                Ihat, mode = Ij, "ito-approx"
            else:
                Ihat, mode = select_iterated(s.selector, dWj, Ij, h)
            ctx = StepContext(self.time(self.n), h, self.Y, dWj, Ihat, mode)
            self.Y = step(p, s, ctx, self.counters)
            self.n += 1
            if record:
                out[:, j] = self.Y
        self.counters.steps = self.n
        return out


@dataclass
class Trajectory:
    t: np.ndarray
    Y: np.ndarray
    counters: Counters
    scheme: str
    W: np.ndarray = field(default=None, repr=False)


def integrate(p, scheme, N, seed=0, paths=0, grid=None):
    """Integrate ``N`` equidistant steps of ``scheme`` on ``p``.

    ``paths`` may be an int (single path, Y of shape (N+1, d)) or a sequence
    (Y of shape (B, N+1, d)). With ``grid`` (a WienerFineGrid) the coarse data
    are Chen-aggregated from the fine grid instead of drawn fresh, and Y is
    batched over the grid's paths.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    s = get_scheme(scheme) if isinstance(scheme, str) else scheme
    single = grid is None and np.ndim(paths) == 0
    path_arr = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    h = (p.T - p.t0) / N
    levy = s.needs_levy(p.m)
    if grid is None:
        dW, I, gauss = wiener.sample_path_data(seed, path_arr, N, h, p.m, levy=levy)
    else:
        if not math.isclose(grid.h_fine * grid.n_fine, p.T - p.t0, rel_tol=1e-12):
            raise ValueError("fine grid does not span the problem's time interval")
        dW, I = grid.aggregate(N, with_iterated=levy and grid.I is not None)
        if levy and I is None:
            raise ValueError("fine grid carries no iterated integrals")
        gauss, path_arr = grid.gaussians, grid.paths
    st = Stepper(p, s, N, batch=path_arr.size)
    Y = np.empty((path_arr.size, N + 1, p.d))
    Y[:, 0] = st.Y
    Y[:, 1:] = st.advance(dW, I, record=True)
    st.counters.gaussians = gauss * path_arr.size
    W = np.concatenate([np.zeros((path_arr.size, 1, p.m)), np.cumsum(dW, axis=1)], axis=1)
    t = p.t0 + h * np.arange(N + 1)
    if single:
        Y, W = Y[0], W[0]
    return Trajectory(t, Y, st.counters, s.name, W)
