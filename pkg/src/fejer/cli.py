"""Command line entry point: ``fejer run|check|rate|oracle``."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

from . import harness
from .moduli import CounterFunction


def _print_rows(name: str, rows, out=None) -> None:
    out = out or sys.stdout
    for r in rows:
        line = f"{name}: {r.check} {r.status.upper()}"
        if r.bound:
            line += f" bound={r.bound}"
        if r.witness:
            line += f" witness={r.witness}"
        if r.slack:
            line += f" slack={r.slack}"
        print(line, file=out)


def _job(path: str, out_dir: str, seed, budget, only):
    cfg = harness.load_config(path)
    exp, rows = harness.run_experiment(cfg, seed=seed, budget=budget, only=only)
    harness.emit_csv(exp, rows, out_dir)
    return exp.name, rows


def _run(args) -> int:
    paths = args.configs
    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            futs = [ex.submit(_job, p, args.out, args.seed, args.budget, None) for p in paths]
            results = [f.result() for f in futs]
    else:
        results = [_job(p, args.out, args.seed, args.budget, None) for p in paths]
    failed = False
    for name, rows in results:
        _print_rows(name, rows)
        failed |= any(r.status == "fail" for r in rows)
    return 1 if failed else 0


def _check(args) -> int:
    name, rows = _job(args.config, args.out, args.seed, args.budget, args.only)
    _print_rows(name, rows)
    return 1 if any(r.status == "fail" for r in rows) else 0


def _rate(args) -> int:
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    exp = harness.build_experiment(cfg)
    row = harness.check_rate(exp, args.delta, args.window if args.window is not None else cfg["window"])
    _print_rows(exp.name, [row])
    return 1 if row.status == "fail" else 0


def _oracle(args) -> int:
    cfg = harness.load_config(args.config)
    CounterFunction.parse(args.g)
    exp = harness.build_experiment(cfg)
    row = harness.check_metastability(exp, args.k, args.g, args.budget or harness.DEFAULT_BUDGET)
    _print_rows(exp.name, [row])
    return 1 if row.status == "fail" else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fejer", description="Run iterations and check their quantitative bounds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--budget", type=int, default=None, help="recursion step budget for rate evaluation")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", parents=[common], help="run every check of one or more configs")
    p.add_argument("configs", nargs="+")
    p.add_argument("--jobs", type=int, default=1, help="parallel experiments")
    p.set_defaults(fn=_run)

    p = sub.add_parser("check", parents=[common], help="run a single check")
    p.add_argument("config")
    p.add_argument("--only", required=True, help="check identifier")
    p.set_defaults(fn=_check)

    p = sub.add_parser("rate", parents=[common], help="rate of convergence and its window check")
    p.add_argument("config")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--window", type=int, default=None)
    p.set_defaults(fn=_rate)

    p = sub.add_parser("oracle", parents=[common], help="metastability bound against brute force")
    p.add_argument("config")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--g", default="const:0", help="const:c or linear:a,b")
    p.set_defaults(fn=_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (harness.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
