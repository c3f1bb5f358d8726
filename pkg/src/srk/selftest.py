"""Invariant batteries run by ``srk selftest``."""

import math
import time

import numpy as np

from . import bench, solver, tableau, testeqs, wiener
from .sde import SdeProblem


def _check(name, ok, detail=""):
    return (name, bool(ok), detail)


def tableau_battery():
    out = []
    expected = {"EM": (0.5, 1), "SSBE": (0.5, 1), "SRI2s1": (1.0, 1), "SRI2s2": (1.0, 2)}
    for name, (pS, pD) in expected.items():
        r = tableau.check_order_conditions(tableau.builtin(name), "general-ito", exact=True)
        out.append(_check(f"tableau {name} general-ito", (r.pS, r.pD) == (pS, pD), f"pS={r.pS} pD={r.pD}"))
    for name, pD in (("SRA2s1", 1), ("SRA2s2", 2)):
        r = tableau.check_order_conditions(tableau.builtin(name), "additive", exact=True)
        out.append(_check(f"tableau {name} additive", (r.pS, r.pD) == (1.0, pD), f"pS={r.pS} pD={r.pD}"))
    t = tableau.builtin("SRI2s1")
    demoted = t.replace(B1=[[0, 0], [0, 0]])
    r = tableau.check_order_conditions(demoted, "general-ito", exact=True)
    only = [c.id for c in r.failed(stochastic_only=True)]
    out.append(_check("tableau B1-zeroed demotion", r.pS == 0.5 and only == ["beta2.B1e"]))
    back = tableau.parse_tableau(tableau.serialize_tableau(tableau.builtin("SRI2s2")))
    out.append(_check("tableau text round trip", back == tableau.builtin("SRI2s2")))
    return out


def moment_battery(samples):
    out = []
    for h in (1.0, 0.25):
        dW, I, _ = wiener.sample_path_data(11, np.arange(samples), 1, h, 2)
        dW, I = dW[:, 0], I[:, 0]
        i12 = I[:, 0, 1]
        n = samples
        v = np.mean(dW ** 2)
        # dW^2 / h is chi-square(1): variance 2
        out.append(_check(f"E[dW^2]=h (h={h})", abs(v / h - 1) < 5 * math.sqrt(2 / n), f"{v:.5g}"))
        mu = np.mean(i12)
        out.append(_check(f"E[I12]=0 (h={h})", abs(mu) < 4 * np.std(i12) / math.sqrt(n), f"{mu:.3g}"))
        m2 = np.mean(i12 ** 2)
        tol = 5 * np.std(i12 ** 2) / math.sqrt(n) / (h * h / 2)
        out.append(_check(f"E[I12^2]=h^2/2 (h={h})", abs(m2 / (h * h / 2) - 1) < tol, f"{m2:.5g}"))
        pair = np.max(np.abs(I[:, 0, 1] + I[:, 1, 0] - dW[:, 0] * dW[:, 1]))
        out.append(_check(f"pairing identity (h={h})", pair <= 1e-15 * (1 + np.max(np.abs(dW)) ** 2)))
    return out


def chen_battery():
    out = []
    n = 2 ** 8
    dW, I, _ = wiener.sample_path_data(5, np.arange(8), n, 1.0 / n, 3)
    cw, cI = wiener.aggregate(dW, I, n)
    diag = np.diagonal(cI[:, 0], axis1=-2, axis2=-1)
    want = wiener.diagonal_ito(cw[:, 0], 1.0)
    rel = np.max(np.abs(diag - want) / (1 + np.abs(want)))
    out.append(_check("Chen diagonal over 2^8 steps", rel <= 1e-12, f"{rel:.2e}"))
    g = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        parts = [wiener.IteratedIntegrals(1.0, g.normal(size=3), g.normal(size=(3, 3)), "ito-approx")
                 for _ in range(3)]
        a = wiener.compose(wiener.compose(parts[0], parts[1]), parts[2]).values
        b = wiener.compose(parts[0], wiener.compose(parts[1], parts[2])).values
        worst = max(worst, np.max(np.abs(a - b)) / (1 + np.max(np.abs(a))))
    out.append(_check("Chen associativity", worst <= 1e-12, f"{worst:.2e}"))
    return out


def _linear_scalar(a_coef=0.0):
    return SdeProblem(1, 1, lambda t, x: a_coef * x, lambda t, x: x[..., None], [1.0],
                      diffusion_jacobian=lambda t, x: np.ones(x.shape[:-1] + (1, 1, 1)),
                      noise_class="scalar")


def hand_battery():
    out = []
    p = _linear_scalar()
    dW, h = np.array([0.5]), 0.25
    I = wiener.diagonal_ito(dW, h).reshape(1, 1)
    ctx = solver.StepContext(0.0, h, np.array([1.0]), dW, I, "ito-approx")
    y_srk = solver.srk_step(p, solver.get_scheme("SRI2s1"), ctx)
    y_mil = solver.milstein_step(p, ctx)
    out.append(_check("SRI2s1 hand expansion = 1.5", y_srk[0] == 1.5 and y_mil[0] == 1.5,
                      f"{y_srk[0]!r} {y_mil[0]!r}"))
    lam, hh = 1.0, 0.5
    q = SdeProblem(1, 1, lambda t, x: -lam * x, lambda t, x: np.zeros(x.shape + (1,)), [1.0],
                   noise_class="additive")
    ctx = solver.StepContext(0.0, hh, np.array([1.0]), np.array([0.0]))
    y = solver.additive_step(q, solver.get_scheme("SSBE"), ctx)
    out.append(_check("SSBE implicit stage", abs(y[0] - 1 / (1 + lam * hh)) <= 1e-12, f"{y[0]!r}"))
    e = testeqs.eq4(2)
    x = np.array([[1.0, -0.5]])
    ctx = solver.StepContext(0.0, 0.1, x, np.array([[0.3, -0.2]]))
    out.append(_check("EM tableau = EM formula",
                      np.array_equal(solver.srk_step(e, solver.get_scheme("EM"), ctx), solver.em_step(e, ctx))))
    return out


def cost_battery():
    return [_check("cost EM d=m=1", bench.cost("EM", 1, 1, 0.5) == 3),
            _check("cost SRIC2s1 d=m=10", bench.cost("SRIC2s1", 10, 10, 2 ** -6) == 220),
            _check("rho(1, h) = 0", wiener.rho(1, 0.01) == 0)]


def run(fast=True):
    """Run all batteries; returns (results, seconds)."""
    t0 = time.time()
    res = []
    res += tableau_battery()
    res += moment_battery(100_000 if fast else 1_000_000)
    res += chen_battery()
    res += hand_battery()
    res += cost_battery()
    return res, time.time() - t0
