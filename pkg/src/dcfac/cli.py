"""Command-line interface: ``solve``, ``bench``, ``verify`` and ``gen``.

Reports are JSON with sorted keys; the bench table is CSV. Both schemas are
described in FORMATS.md. Exit codes: 0 success (normal exit for ``solve``),
2 when ``solve`` stops at the iteration or time limit, 1 on any error.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import io
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from .driver import PenaltyConfig, solve
from .instances import (
    gen_product_maxcut,
    gen_product_random,
    load_instance,
    parse_edgelist,
    read_manifest,
    write_canonical,
)
from .oracle import run_gradcheck, run_invariants, run_tiny_exact

__all__ = ["main", "BENCH_HEADER", "report_dict", "bench_rows"]

REPORT_FORMAT = "dcfac-report"
REPORT_SCHEMA_VERSION = 1
BENCH_HEADER = ["name", "n", "bval", "obj", "gap_percent", "time_s",
                "infeas_inf", "normal_exit", "note"]
SEED_ENV = "DCFAC_SEED"


class _Parser(argparse.ArgumentParser):
    # usage errors exit with status 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"dcfac: error: {SEED_ENV}={raw!r} is not an integer") from None


def _num(v):
    """JSON-safe float: non-finite values become null."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _vec(a):
    return [_num(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def _trace_dicts(trace):
    return [dict(k=pt.k, f=_num(pt.f), specnorm_sq=_num(pt.specnorm_sq),
                 merit=_num(pt.merit), residual=_num(pt.residual),
                 theta=_num(pt.theta), L=_num(pt.L), beta=_num(pt.beta))
            for pt in trace]


def report_dict(rep, inst, cfg, *, emit_x=False, timing=True, traces=False):
    """Structured report of a solve; deterministic given ``timing=False``."""
    doc = {
        "format": REPORT_FORMAT,
        "schema_version": REPORT_SCHEMA_VERSION,
        "instance": {
            "name": inst.name, "kind": inst.kind, "n": inst.n_binary, "p": inst.p,
            "known_best": _num(inst.known_best),
        },
        "config": {
            "rho0": cfg.rho0, "sigma": cfg.sigma, "eps": cfg.eps, "rho_max": cfg.rho_max,
            "l_max": cfg.l_max, "m": rep.m, "seed": cfg.seed, "beta_mode": cfg.beta_mode,
            "time_limit": cfg.time_limit,
        },
        "obj": _num(rep.obj),
        "obj_extracted": _num(rep.obj_extracted),
        "f_final": _num(rep.f_final),
        "gap": _num(rep.gap),
        "gap_percent": None if rep.gap is None else _num(100.0 * rep.gap),
        "infeas_inf": _num(rep.infeas_inf),
        "infeas_two": _num(rep.infeas_two),
        "rank_one_gap": _num(rep.rank_one_gap),
        "outer_iters": rep.outer_iters,
        "inner_iters": rep.inner_iters,
        "rho_final": _num(rep.rho_final),
        "rho_trace": _vec(rep.rho_trace),
        "specnorm_trace": _vec(rep.specnorm_trace),
        "bound_trace_term": _num(rep.bound_trace_term),
        "bound_rigorous": rep.bound_rigorous,
        "extraction_ratio": _num(rep.extraction_ratio),
        "wall_time": _num(rep.wall_time) if timing else None,
        "exited_normally": rep.exited_normally,
        "exit_reason": rep.exit_reason,
        "m": rep.m,
        "p": rep.p,
        "seed": rep.seed,
        "beta_mode": rep.beta_mode,
    }
    if emit_x:
        doc["x"] = _vec(rep.x)
        doc["x_binary"] = [int(v) for v in rep.x_binary]
        doc["solution"] = [int(v) for v in rep.solution(inst)]
    if traces:
        doc["inner_traces"] = [_trace_dicts(t) for t in rep.inner_traces]
    return doc


def _dump(doc):
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _write_text(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _config_from_args(args):
    kw = dict(seed=args.seed, beta_mode=args.beta, time_limit=args.time_limit)
    for name in ("rho0", "sigma", "eps", "rho_max", "lmax", "m"):
        val = getattr(args, name, None)
        if val is not None:
            kw["l_max" if name == "lmax" else name] = val
    if getattr(args, "trace", False):
        kw["record_inner_traces"] = True
    return PenaltyConfig(**kw)


def _pretty_report(doc):
    inst = doc["instance"]
    rows = [
        ("instance", f"{inst['name']} ({inst['kind']}, n={inst['n']})"),
        ("objective", f"{doc['obj']}"),
        ("best known", "-" if inst["known_best"] is None else f"{inst['known_best']}"),
        ("gap %", "-" if doc["gap_percent"] is None else f"{doc['gap_percent']:.3f}"),
        ("infeasibility", f"{doc['infeas_inf']:.2e}"),
        ("iterations", f"{doc['outer_iters']} outer / {doc['inner_iters']} inner"),
        ("exit", doc["exit_reason"]),
        ("time s", "-" if doc["wall_time"] is None else f"{doc['wall_time']:.2f}"),
    ]
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k:<{width}}  {v}\n" for k, v in rows)


# -- subcommands -----------------------------------------------------------

def cmd_solve(args):
    inst = load_instance(args.instance, args.format, kind=args.kind, known_best=args.bval)
    cfg = _config_from_args(args)
    rep = solve(inst.objective, inst, cfg)
    doc = report_dict(rep, inst, cfg, emit_x=args.emit_x, timing=not args.no_timing,
                      traces=args.trace)
    if args.pretty:
        if args.out not in (None, "-"):
            _write_text(_dump(doc), args.out)
        sys.stdout.write(_pretty_report(doc))
    else:
        _write_text(_dump(doc), args.out)
    return 0 if rep.exited_normally else 2


def _fmt_csv(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _bench_one(job):
    entry, cfg, timing = job
    name = Path(entry.path).stem
    try:
        inst = load_instance(entry.path, entry.fmt, kind=entry.kind,
                             known_best=entry.known_best)
        name = inst.name or name
        rep = solve(inst.objective, inst, cfg)
    except Exception as exc:  # recorded in-row; the run continues
        return dict(name=name, n=None, bval=entry.known_best, obj=None, gap_percent=None,
                    time_s=None, infeas_inf=None, normal_exit=None,
                    note=f"{type(exc).__name__}: {exc}".replace("\n", " "))
    gap = None if rep.gap is None else 100.0 * rep.gap
    return dict(name=name, n=inst.n_binary, bval=inst.known_best, obj=rep.obj,
                gap_percent=gap, time_s=rep.wall_time if timing else None,
                infeas_inf=rep.infeas_inf, normal_exit=rep.exited_normally,
                note="" if rep.exited_normally else rep.exit_reason)


def bench_rows(entries, cfg, jobs=1, timing=True):
    """Solve every manifest entry; rows come back in manifest order."""
    work = [(e, cfg, timing) for e in entries]
    if jobs <= 1 or len(work) <= 1:
        return [_bench_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_bench_one, work))


def format_bench_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for r in rows:
        w.writerow([r[k] if k in ("name", "note") else _fmt_csv(r[k]) for k in BENCH_HEADER])
    return buf.getvalue()


def _pretty_bench(rows):
    cols = ["name", "n", "bval", "obj", "gap_percent", "time_s", "infeas_inf", "normal_exit"]
    cells = [[c for c in cols]]
    for r in rows:
        cells.append([
            str(r["name"]), _fmt_csv(r["n"]),
            "-" if r["bval"] is None else f"{r['bval']:g}",
            "-" if r["obj"] is None else f"{r['obj']:.4f}",
            "-" if r["gap_percent"] is None else f"{r['gap_percent']:.3f}",
            "-" if r["time_s"] is None else f"{r['time_s']:.2f}",
            "-" if r["infeas_inf"] is None else f"{r['infeas_inf']:.1e}",
            "-" if r["normal_exit"] is None else ("yes" if r["normal_exit"] else "no"),
        ])
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) + "\n" for row in cells)


def cmd_bench(args):
    entries = read_manifest(args.manifest)
    cfg = _config_from_args(args)
    rows = bench_rows(entries, cfg, jobs=args.jobs, timing=not args.no_timing)
    _write_text(format_bench_csv(rows), args.out)
    if args.pretty:
        sys.stderr.write(_pretty_bench(rows))
    return 0


def cmd_verify(args):
    kw = {}
    if args.trials is not None:
        kw["trials"] = args.trials
    if args.seed is not None:
        kw["seed"] = args.seed
    suite = {"tiny-exact": run_tiny_exact, "invariants": run_invariants,
             "gradcheck": run_gradcheck}[args.suite]
    res = suite(**kw)
    for line in res.lines:
        print(line)
    print(f"{res.name}: {'PASS' if res.passed else 'FAIL'}")
    return 0 if res.passed else 1


def cmd_gen(args):
    if args.family == "product-random":
        if args.l is None:
            raise ValueError("--l is required for product-random")
        if args.w1 or args.w2:
            raise ValueError("--w1/--w2 only apply to product-maxcut")
        inst = gen_product_random(args.l, args.seed)
        prov = {"family": "product-random", "l": args.l, "seed": args.seed,
                "rng": inst.meta.get("rng")}
    else:
        if not (args.w1 and args.w2):
            raise ValueError("--w1 and --w2 are required for product-maxcut")
        W1 = parse_edgelist(Path(args.w1).read_text()).to_matrix()
        W2 = parse_edgelist(Path(args.w2).read_text()).to_matrix()
        inst = gen_product_maxcut(W1, W2, name=f"{Path(args.w1).stem}x{Path(args.w2).stem}")
        prov = {"family": "product-maxcut", "w1": Path(args.w1).name,
                "w2": Path(args.w2).name}
    _write_text(write_canonical(inst, provenance=prov), args.out)
    return 0


# -- argument parsing --------------------------------------------------------

def _solver_flags(p):
    p.add_argument("--rho0", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--rho-max", dest="rho_max", type=float)
    p.add_argument("--lmax", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--beta", choices=["nesterov", "zero"], default="nesterov")
    p.add_argument("--time-limit", dest="time_limit", type=float)
    p.add_argument("--no-timing", dest="no_timing", action="store_true",
                   help="omit wall-clock fields so output is reproducible byte for byte")
    p.add_argument("--pretty", action="store_true", help="also print a human-readable table")


def build_parser():
    parser = _Parser(prog="dcfac", description="Factorized DC-penalty solver for binary "
                     "quadratic programs and products of binary quadratics.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one instance and emit a JSON report")
    s.add_argument("--instance", required=True)
    s.add_argument("--format", required=True, choices=["edgelist", "orlib", "canonical"])
    s.add_argument("--kind", required=True, choices=["maxcut", "ubqp", "product"])
    s.add_argument("--bval", type=float)
    _solver_flags(s)
    s.add_argument("--out")
    s.add_argument("--emit-x", dest="emit_x", action="store_true")
    s.add_argument("--trace", action="store_true", help="record and emit every inner trace")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="solve every instance of a manifest, write CSV")
    b.add_argument("--manifest", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out")
    _solver_flags(b)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="run a built-in verification battery")
    v.add_argument("--suite", required=True, choices=["tiny-exact", "invariants", "gradcheck"])
    v.add_argument("--trials", type=int)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="generate a product instance in canonical format")
    g.add_argument("--family", required=True, choices=["product-random", "product-maxcut"])
    g.add_argument("--l", type=int)
    g.add_argument("--w1")
    g.add_argument("--w2")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("solve", "bench", "gen") and args.seed is None:
        args.seed = default_seed()
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, NotImplementedError) as exc:
        print(f"dcfac: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
