"""Command-line front end: ``srk bench|check-tableau|export-tableau|simulate|cost|selftest``."""

import argparse
import csv
import json
import os
import sys

from . import bench, solver, tableau, testeqs, wiener
from . import selftest as _selftest

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_CHECK = 0, 1, 2, 3

_CONFIG_KEYS = {f for f in bench.StudyConfig.__dataclass_fields__}


class UsageError(Exception):
    pass


def _csv_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _seed(value):
    if value is not None:
        return value
    env = os.environ.get("SRK_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SRK_SEED must be an integer, got {env!r}") from None


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    ref = doc.get("reference")
    if ref is not None:
        extra = set(ref) - set(testeqs.ReferenceConfig.__dataclass_fields__)
        if extra:
            raise UsageError(f"unknown reference keys: {', '.join(sorted(extra))}")
        doc["reference"] = testeqs.ReferenceConfig(**ref)
    return doc


def _study_config(args):
    kw = _load_config(args.config) if args.config else {}
    if args.problem is not None:
        kw["problem"] = args.problem
    if args.dim is not None:
        kw["dim"] = args.dim
    if args.schemes is not None:
        kw["schemes"] = _csv_list(args.schemes)
    if args.hmin is not None or args.hmax is not None:
        lo = args.hmax if args.hmax is not None else 4
        hi = args.hmin if args.hmin is not None else 12
        kw["h_exponents"] = list(range(lo, hi + 1))
    if args.paths is not None:
        kw["paths"] = args.paths
    seed = args.seed if args.seed is not None else kw.get("seed")
    kw["seed"] = _seed(seed)
    if args.metric is not None:
        kw["metric"] = args.metric
    if args.p is not None:
        kw["p"] = args.p
    if args.coupling is not None:
        kw["coupling"] = args.coupling
    if args.fit_window is not None:
        kw["fit_window"] = [int(x) for x in _csv_list(args.fit_window)]
    if args.href is not None or args.ref_scheme is not None:
        base = kw.get("reference") or testeqs.ReferenceConfig()
        kw["reference"] = testeqs.ReferenceConfig(
            args.ref_scheme or base.scheme,
            2.0 ** -args.href if args.href is not None else base.h_ref,
            base.shared_paths)
    if args.threads is not None:
        kw["threads"] = args.threads
    if args.chunk is not None:
        kw["chunk_paths"] = args.chunk
    try:
        return bench.StudyConfig(**kw)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def cmd_bench(args):
    cfg = _study_config(args)
    try:
        bench._Plan(cfg)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    report = bench.run_study(cfg)
    fmt = args.format or ("json" if args.out and args.out.endswith(".json") else "csv")
    text = bench.emit_report(report, fmt)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    out = sys.stderr if not args.out else sys.stdout
    print(f"{'scheme':<10} {'gamma':>8} {'p_eff':>8}  pairwise(last)", file=out)
    for name, sm in report.summary.items():
        last = f"{sm.pairwise[-1]:.3f}" if sm.pairwise else "-"
        print(f"{name:<10} {sm.gamma:8.3f} {sm.p_eff:8.3f}  {last}", file=out)
    return EXIT_OK


def _load_tableau(args):
    if args.builtin:
        try:
            return tableau.builtin(args.builtin)
        except KeyError as exc:
            raise UsageError(str(exc)) from None
    if not args.path:
        raise UsageError("give a tableau file or --builtin NAME")
    try:
        with open(args.path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.path}: {exc}") from None
    try:
        return tableau.parse_tableau(text)
    except ValueError as exc:
        raise UsageError(f"{args.path}: {exc}") from None


def cmd_check_tableau(args):
    t = _load_tableau(args)
    mode = args.mode or (t.noise_mode_hint or "general-ito")
    r = tableau.check_order_conditions(t, mode, exact=True)
    print(f"tableau {t.name or args.path} (s={t.s}), mode {mode}")
    for c in r.conditions:
        status = "ok" if c.satisfied else "FAIL"
        print(f"  {c.id:<16} lhs={str(c.lhs):<8} required={str(c.required):<6} {status}")
    print(f"(pD, pS) = ({r.pD}, {r.pS})")
    want = args.order
    if r.pS is None or r.pS < want:
        print(f"order {want:g} conditions not met")
        return EXIT_CHECK
    return EXIT_OK


def cmd_export_tableau(args):
    try:
        t = tableau.builtin(args.name)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    text = tableau.serialize_tableau(t)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args):
    try:
        p = testeqs.get_problem(args.problem, args.dim)
        s = solver.get_scheme(args.scheme)
        s.bind(p)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    tr = solver.integrate(p, s, args.steps, seed=_seed(args.seed), paths=args.path)
    fh = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"y{i + 1}" for i in range(p.d)])
        for t, y in zip(tr.t, tr.Y):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in y])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_cost(args):
    try:
        schemes = _csv_list(args.scheme)
        hs = [float(x) for x in _csv_list(args.h)]
        for s in schemes:
            solver.get_scheme(s)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if any(h <= 0 for h in hs) or args.d < 1 or args.m < 1:
        raise UsageError("need h > 0, d >= 1, m >= 1")
    print("scheme,d,m,h,rho,cost")
    for s in schemes:
        for h in hs:
            uses = solver.get_scheme(s).uses_iterated and args.m > 1
            rho = wiener.rho(args.m, h) if uses else 0
            print(f"{s},{args.d},{args.m},{h!r},{rho},{bench.cost(s, args.d, args.m, h)}")
    return EXIT_OK


def cmd_selftest(args):
    results, secs = _selftest.run(fast=args.fast)
    bad = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))
        bad += not ok
    print(f"{len(results) - bad}/{len(results)} passed in {secs:.1f}s")
    return EXIT_OK if bad == 0 else EXIT_CHECK


def build_parser():
    epilog = ("schemes: " + ", ".join(solver.SCHEME_NAMES)
              + "\nproblems: " + ", ".join(testeqs.PROBLEM_NAMES)
              + "\nmetrics: " + ", ".join(bench.METRICS)
              + "\ncouplings: " + ", ".join(bench.COUPLINGS)
              + "\nexit codes: 0 ok, 1 runtime error, 2 usage error, 3 check failed"
              + "\nenvironment: SRK_SEED supplies the seed when --seed is absent")
    ap = argparse.ArgumentParser(prog="srk", description="Stochastic Runge-Kutta solvers and convergence benchmarks.",
                                 epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a convergence study", epilog=epilog,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    b.add_argument("--config", help="JSON file with StudyConfig keys (flags override)")
    b.add_argument("--problem", choices=testeqs.PROBLEM_NAMES)
    b.add_argument("--dim", type=int, help="m for eq3, d = m for eq4/eq6")
    b.add_argument("--schemes", help="comma-separated scheme names")
    b.add_argument("--hmin", type=int, help="exponent j of the smallest step 2^-j")
    b.add_argument("--hmax", type=int, help="exponent j of the largest step 2^-j")
    b.add_argument("--paths", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--metric", choices=bench.METRICS)
    b.add_argument("--p", type=float, help="moment for the Lp metrics")
    b.add_argument("--coupling", choices=bench.COUPLINGS)
    b.add_argument("--fit-window", help="comma-separated exponents used for slope fits")
    b.add_argument("--href", type=int, help="reference step exponent (h_ref = 2^-href)")
    b.add_argument("--ref-scheme", help="reference scheme name (default MIL)")
    b.add_argument("--threads", type=int)
    b.add_argument("--chunk", type=int, help="paths per work unit (affects nothing but memory)")
    b.add_argument("--format", choices=("csv", "json"))
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("check-tableau", help="verify order conditions of a tableau file")
    c.add_argument("path", nargs="?")
    c.add_argument("--builtin", help="check a built-in tableau instead of a file")
    c.add_argument("--mode", choices=tableau.NOISE_MODES)
    c.add_argument("--order", type=float, default=1.0, help="required stochastic order (default 1)")
    c.set_defaults(func=cmd_check_tableau)

    e = sub.add_parser("export-tableau", help="write a built-in tableau in text form")
    e.add_argument("name", choices=tableau.BUILTIN_NAMES)
    e.add_argument("--out")
    e.set_defaults(func=cmd_export_tableau)

    s = sub.add_parser("simulate", help="integrate one path and print the trajectory")
    s.add_argument("--problem", required=True, choices=testeqs.PROBLEM_NAMES)
    s.add_argument("--dim", type=int)
    s.add_argument("--scheme", required=True, choices=solver.SCHEME_NAMES)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--path", type=int, default=0, help="path index within the seed")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("cost", help="print per-step costs from the cost model")
    k.add_argument("--scheme", required=True, help="scheme name(s), comma-separated")
    k.add_argument("--d", type=int, required=True)
    k.add_argument("--m", type=int, required=True)
    k.add_argument("--h", required=True, help="step size(s), comma-separated")
    k.set_defaults(func=cmd_cost)

    t = sub.add_parser("selftest", help="run the invariant batteries")
    t.add_argument("--fast", action="store_true", help="reduced sample counts")
    t.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"srk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - surface as runtime failure
        print(f"srk {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
