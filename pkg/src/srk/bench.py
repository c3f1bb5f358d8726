"""Convergence studies: error vs step size and vs computational cost."""

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import sde
from . import solver
from . import testeqs
from . import wiener

METRICS = ("terminal-L2", "terminal-Lp", "sup-grid-Lp")
COUPLINGS = ("auto", "fresh", "shared")
CSV_COLUMNS = ("scheme", "h", "err", "mc_stderr", "cost_per_step", "total_cost", "gamma", "p_eff")

_BLOCK_BYTES = 64 * 2**20


def _eval_cost(name, d, m):
    """Function-evaluation part of the per-step cost (drift + diffusion + Jacobian)."""
    rows = {
        "EM": d + d * m,
        "MIL": d + d * m + d * d * m,
        "SPLI": d + d * (m * m + m),
        "SRI2s1": d + 2 * d * m,
        "SRI2s2": 2 * d + 2 * d * m,
        "SRA2s1": d + d * m,
        "SRA2s2": 2 * d + d * m,
        "SSBE": d + d * m,
    }
    aliases = {"SRS2s1": "SRI2s1", "SRIC2s1": "SRI2s1", "SRSC2s1": "SRI2s1",
               "SRS2s2": "SRI2s2", "SRIC2s2": "SRI2s2", "SRSC2s2": "SRI2s2"}
    key = aliases.get(name, name)
    if key not in rows:
        raise KeyError(f"no cost model for scheme {name!r}")
    return rows[key]


def eval_counts(scheme, d, m):
    """Expected per-step counter totals (drift + diffusion + Jacobian evaluations)."""
    return _eval_cost(scheme, d, m)


def cost(scheme, d, m, h, reading=None):
    """Per-step cost: evaluations + m increments + rho(m, h) if mixed integrals are needed."""
    s = solver.get_scheme(scheme)
    c = _eval_cost(s.name, d, m) + m
    if s.uses_iterated and m > 1:
        c += wiener.rho(m, h, reading)
    return c


def _lsq_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    xm, ym = x.mean(), y.mean()
    return float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))


def empirical_order(pairs, window=None):
    """Least-squares slope of log2(err) against log2(h)."""
    pairs = [(h, e) for h, e in pairs if window is None or h in window]
    if len(pairs) < 2:
        raise ValueError("need at least two (h, err) pairs")
    if any(h <= 0 or e <= 0 for h, e in pairs):
        raise ValueError("h and err must be positive")
    hs, es = zip(*pairs)
    return _lsq_slope(np.log2(hs), np.log2(es))


@dataclass(frozen=True)
class EffectiveOrder:
    p_eff: float
    pairwise: tuple  # ratios over consecutive pairs, largest h first


def effective_order(pairs, scheme, d, m, window=None, T=1.0, reading=None):
    """Negated slope of log2(err) against log2(N * cost) plus pairwise ratios."""
    pairs = sorted(((h, e) for h, e in pairs if window is None or h in window), reverse=True)
    if len(pairs) < 2:
        raise ValueError("need at least two (h, err) pairs")
    if any(h <= 0 or e <= 0 for h, e in pairs):
        raise ValueError("h and err must be positive")
    tot = [T / h * cost(scheme, d, m, h, reading) for h, _ in pairs]
    le = np.log2([e for _, e in pairs])
    lc = np.log2(tot)
    slope = -_lsq_slope(lc, le)
    ratios = tuple(float(abs((le[i] - le[i + 1]) / (lc[i] - lc[i + 1]))) for i in range(len(pairs) - 1))
    return EffectiveOrder(slope, ratios)


@dataclass(frozen=True)
class StudyConfig:
    problem: str = "eq1"
    dim: int = None
    schemes: tuple = ("EM", "SRI2s1")
    h_exponents: tuple = tuple(range(4, 13))  # h = 2^-j (T - t0), strictly decreasing
    paths: int = 1000
    seed: int = 0
    metric: str = "terminal-L2"
    p: float = 2.0
    reference: testeqs.ReferenceConfig = None
    coupling: str = "auto"
    fit_window: tuple = None  # h exponents; default: four smallest h with small MC noise
    chunk_paths: int = 250
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "h_exponents", tuple(int(j) for j in self.h_exponents))
        if self.fit_window is not None:
            object.__setattr__(self, "fit_window", tuple(int(j) for j in self.fit_window))
        ex = self.h_exponents
        if len(ex) < 1 or any(b <= a for a, b in zip(ex, ex[1:])):
            raise ValueError("h list must be strictly decreasing (exponents strictly increasing)")
        if min(ex) < 0:
            raise ValueError("h exponents must be non-negative")
        if self.paths < 2:
            raise ValueError("need at least 2 paths")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")
        if self.metric == "terminal-L2" and self.p != 2.0:
            raise ValueError("terminal-L2 implies p = 2")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        if self.chunk_paths < 1 or self.threads < 1:
            raise ValueError("chunk_paths and threads must be positive")
        for s in self.schemes:
            solver.get_scheme(s)

    def replace(self, **kw):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return StudyConfig(**d)


@dataclass
class Row:
    scheme: str
    h: float
    N: int
    err: float
    mc_stderr: float
    cost_per_step: float
    total_cost: float
    counters: dict = field(default_factory=dict)


@dataclass
class SchemeSummary:
    scheme: str
    gamma: float
    p_eff: float
    pairwise: tuple
    window: tuple


@dataclass
class ConvergenceReport:
    rows: list
    summary: dict
    meta: dict

    def rows_for(self, scheme):
        return [r for r in self.rows if r.scheme == scheme]

    def err(self, scheme):
        return {r.h: r.err for r in self.rows_for(scheme)}


def default_window(rows, n=4, max_rel_stderr=0.2):
    """The n smallest h whose MC stderr is at most 20% of err."""
    ok = [r for r in rows if r.err > 0 and r.mc_stderr <= max_rel_stderr * r.err]
    ok.sort(key=lambda r: r.h)
    return tuple(sorted(r.h for r in ok[:n]))


def _config_hash(cfg):
    blob = json.dumps(_cfg_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _cfg_dict(cfg):
    d = asdict(cfg)
    d.pop("threads")
    return d


class _Plan:
    """Resolved study: bound problem, coupling mode and data levels."""

    def __init__(self, cfg):
        self.cfg = cfg
        p = testeqs.get_problem(cfg.problem, cfg.dim)
        self.problem = p
        self.span = p.T - p.t0
        self.Ns = [2 ** j for j in cfg.h_exponents]
        self.schemes = [solver.get_scheme(s) for s in cfg.schemes]
        commutative = None
        for s in self.schemes:
            s.bind(p)
            if s.selector.startswith("commutative"):
                if commutative is None:
                    commutative = sde.check_commutativity(p)
                if commutative != "commutative":
                    raise ValueError(f"{s.name} requires commutative noise but {p.name} is not")
        self.reference = None
        if not p.has_exact:
            ref = cfg.reference or testeqs.ReferenceConfig()
            n_ref = ref.n_steps(p)
            if any(n_ref % N for N in self.Ns):
                raise ValueError("every h must be an integer multiple of h_ref")
            if cfg.coupling == "fresh":
                raise ValueError("reference-solution problems need shared coupling")
            self.reference = ref
            self.ref_scheme = solver.get_scheme(ref.scheme)
            self.ref_scheme.bind(p)
            self.n_ref = n_ref
        coupling = cfg.coupling
        if coupling == "auto":
            coupling = "fresh" if p.has_exact else "shared"
        self.coupling = coupling
        if coupling == "shared":
            n_data = self.n_ref if self.reference else max(self.Ns)
            self.groups = [(n_data, self.Ns)]
        else:
            self.groups = [(N, [N]) for N in self.Ns]

    def levy_needed(self, N_list, with_ref):
        m = self.problem.m
        need = any(s.needs_levy(m) for s in self.schemes)
        if with_ref:
            need = need or self.ref_scheme.needs_levy(m)
        return need


def _run_chunk(plan, path_ids):
    cfg, p = plan.cfg, plan.problem
    B, m = path_ids.size, p.m
    sup = cfg.metric == "sup-grid-Lp"
    out = {}
    counters = {}
    for n_data, N_list in plan.groups:
        with_ref = plan.reference is not None
        levy = plan.levy_needed(N_list, with_ref)
        h_data = plan.span / n_data
        win_max = n_data // min(N_list)
        per_step = B * (m + (m * m if levy else 0)) * 8
        L = win_max * max(1, _BLOCK_BYTES // max(1, per_step * win_max))
        L = min(L, n_data)
        steppers = {(s.name, N): solver.Stepper(p, s, N, batch=B) for N in N_list for s in plan.schemes}
        ref = solver.Stepper(p, plan.ref_scheme, n_data, batch=B) if with_ref else None
        W = {N: np.zeros((B, m)) for N in N_list}
        sup_err = {k: np.zeros(B) for k in steppers}
        for b0 in range(0, n_data, L):
            cnt = min(L, n_data - b0)
            dW, I, _ = wiener.sample_path_data(cfg.seed, path_ids, n_data, h_data, m, levy=levy,
                                               start=b0, count=cnt)
            ref_traj = ref.advance(dW, I, record=sup) if ref else None
            for N in N_list:
                win = n_data // N
                dWc, Ic = wiener.aggregate(dW, I, win)
                if sup:
                    Wc = W[N][:, None, :] + np.cumsum(dWc, axis=1)
                    if ref is not None:
                        truth = ref_traj[:, win - 1::win]
                    else:
                        n0 = b0 // win
                        h = plan.span / N
                        truth = np.stack([p.exact_solution(p.t0 + (n0 + j + 1) * h, Wc[:, j])
                                          for j in range(Wc.shape[1])], axis=1)
                W[N] = W[N] + np.sum(dWc, axis=1)
                for s in plan.schemes:
                    st = steppers[(s.name, N)]
                    traj = st.advance(dWc, Ic if s.needs_levy(m) else None, record=sup)
                    if sup:
                        e = np.max(np.linalg.norm(traj - truth, axis=-1), axis=1)
                        sup_err[(s.name, N)] = np.maximum(sup_err[(s.name, N)], e)
        for (name, N), st in steppers.items():
            if sup:
                e = sup_err[(name, N)]
            else:
                truth = ref.Y if ref is not None else p.exact_solution(p.T, W[N])
                e = np.linalg.norm(st.Y - truth, axis=-1)
            out[(name, N)] = e
            counters[(name, N)] = st.counters
    return out, counters


def run_study(cfg, progress=None):
    """Run a convergence study; deterministic given the seed, independent of threads."""
    plan = _Plan(cfg)
    p = plan.problem
    ids = np.arange(cfg.paths, dtype=np.uint64)
    chunks = [ids[i:i + cfg.chunk_paths] for i in range(0, cfg.paths, cfg.chunk_paths)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(lambda c: _run_chunk(plan, c), chunks))
    else:
        results = []
        for i, c in enumerate(chunks):
            results.append(_run_chunk(plan, c))
            if progress:
                progress(i + 1, len(chunks))
    rows = []
    q = 2.0 if cfg.metric == "terminal-L2" else cfg.p
    for s in plan.schemes:
        for N in plan.Ns:
            e = np.concatenate([r[0][(s.name, N)] for r in results])
            X = e ** q
            mean = float(np.mean(X))
            err = mean ** (1.0 / q)
            se_mean = float(np.std(X, ddof=1)) / math.sqrt(X.size)
            stderr = err / (q * mean) * se_mean if mean > 0 else 0.0
            tot = solver.Counters()
            for r in results:
                tot = tot.merge(r[1][(s.name, N)])
            tot.steps = N
            per = tot.per_step()
            h = plan.span / N
            per["gaussians"] = p.m + (wiener.extra_gaussians(p.m, h) if s.needs_levy(p.m) else 0)
            c = cost(s.name, p.d, p.m, h)
            rows.append(Row(s.name, h, N, err, stderr, c, N * c, per))
    summary = {}
    for s in plan.schemes:
        srows = [r for r in rows if r.scheme == s.name]
        if cfg.fit_window is not None:
            window = tuple(sorted(plan.span / 2 ** j for j in cfg.fit_window))
        else:
            window = default_window(srows)
        pairs = [(r.h, r.err) for r in srows if r.h in window]
        gamma = p_eff = float("nan")
        pairwise = ()
        if len(pairs) >= 2:
            gamma = empirical_order(pairs)
            eo = effective_order(pairs, s.name, p.d, p.m, T=plan.span)
            p_eff, pairwise = eo.p_eff, eo.pairwise
        summary[s.name] = SchemeSummary(s.name, gamma, p_eff, pairwise, window)
    meta = dict(seed=cfg.seed, config_hash=_config_hash(cfg), problem=p.name, d=p.d, m=p.m,
                paths=cfg.paths, metric=cfg.metric, p=q, coupling=plan.coupling,
                rho_reading=wiener.RHO_READING, lv_boundary=testeqs.LV_BOUNDARY,
                reference=None if plan.reference is None else asdict(plan.reference),
                config=_cfg_dict(cfg))
    return ConvergenceReport(rows, summary, meta)


def _g17(x):
    return repr(float(x))


def emit_report(report, fmt="csv"):
    """Serialize a report: CSV rows plus a '# summary' block, or JSON with meta."""
    if fmt == "json":
        doc = dict(meta=report.meta,
                   rows=[dict(scheme=r.scheme, h=r.h, N=r.N, err=r.err, mc_stderr=r.mc_stderr,
                              cost_per_step=r.cost_per_step, total_cost=r.total_cost,
                              gamma=report.summary[r.scheme].gamma,
                              p_eff=report.summary[r.scheme].p_eff, counters=r.counters)
                         for r in report.rows],
                   summary={k: dict(gamma=v.gamma, p_eff=v.p_eff, pairwise=list(v.pairwise),
                                    window=list(v.window))
                            for k, v in report.summary.items()})
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError("format must be csv or json")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        sm = report.summary[r.scheme]
        w.writerow([r.scheme, _g17(r.h), _g17(r.err), _g17(r.mc_stderr), _g17(r.cost_per_step),
                    _g17(r.total_cost), _g17(sm.gamma), _g17(sm.p_eff)])
    if report.rows:
        buf.write("# summary\n")
        for name, sm in report.summary.items():
            pw = ";".join(_g17(x) for x in sm.pairwise)
            win = ";".join(_g17(x) for x in sm.window)
            buf.write(f"# {name},gamma={_g17(sm.gamma)},p_eff={_g17(sm.p_eff)},pairwise={pw},window={win}\n")
    return buf.getvalue()


def _num(x):
    return float(x)


def parse_report(text):
    """Inverse of emit_report for either format."""
    text = text.lstrip()
    if text.startswith("{"):
        doc = json.loads(text)
        rows = [Row(r["scheme"], r["h"], r["N"], r["err"], r["mc_stderr"], r["cost_per_step"],
                    r["total_cost"], r.get("counters", {})) for r in doc["rows"]]
        summary = {k: SchemeSummary(k, v["gamma"], v["p_eff"], tuple(v["pairwise"]), tuple(v["window"]))
                   for k, v in doc["summary"].items()}
        return ConvergenceReport(rows, summary, doc.get("meta", {}))
    lines = text.splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.DictReader(body)
    rows, summary = [], {}
    for r in reader:
        h = _num(r["h"])
        rows.append(Row(r["scheme"], h, int(round(1.0 / h)) if h > 0 else 0, _num(r["err"]),
                        _num(r["mc_stderr"]), _num(r["cost_per_step"]), _num(r["total_cost"])))
        summary.setdefault(r["scheme"], SchemeSummary(r["scheme"], _num(r["gamma"]), _num(r["p_eff"]), (), ()))
    for ln in lines:
        if ln.startswith("# ") and "gamma=" in ln:
            name, *kv = ln[2:].split(",")
            fields = dict(x.split("=", 1) for x in kv)
            pw = tuple(_num(x) for x in fields["pairwise"].split(";") if x)
            win = tuple(_num(x) for x in fields["window"].split(";") if x)
            summary[name] = SchemeSummary(name, _num(fields["gamma"]), _num(fields["p_eff"]), pw, win)
    return ConvergenceReport(rows, summary, {})
