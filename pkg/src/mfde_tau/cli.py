"""``mfde-tau`` command line: solve, sweep and plot."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from . import expr as ex
from . import plot
from .assemble import AssemblyError
from .canonical import CanonicalError
from .pipeline import PATH_CHOICES, Run, run
from .problem import CATALOG, MfdeProblem, ProblemError, catalog, from_config
from .solution import ContinuityError, eval_at, grid

log = logging.getLogger("mfde_tau")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4
EXIT_DOMAIN = 5

CSV_HEADER = ("n", "K", "d", "path", "global_error", "per_subinterval_errors", "residual", "cond_estimate", "status")

SOLVER_ERRORS = (np.linalg.LinAlgError, AssemblyError, CanonicalError, ContinuityError)


def exit_code(err: BaseException) -> int:
    if isinstance(err, SOLVER_ERRORS):
        return EXIT_SOLVER
    if isinstance(err, ex.EvalDomainError):
        return EXIT_DOMAIN
    if isinstance(err, OSError):
        return EXIT_IO
    if isinstance(err, (ValueError, KeyError, TypeError)):
        return EXIT_CONFIG
    return 1


# ------------------------------------------------------------------ problem source


def _parse_params(items: Sequence[str]) -> dict[str, float]:
    params = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ProblemError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            params[key] = float(value)
        except ValueError:
            raise ProblemError(f"--param {key}: {value!r} is not a number") from None
    return params


def problem_source(args) -> dict:
    """A picklable description of where the problem comes from."""
    if args.catalog:
        if args.catalog not in CATALOG:
            raise ProblemError(f"unknown catalog problem {args.catalog!r}; choose from {', '.join(CATALOG)}")
        params = _parse_params(args.param)
        if args.m is not None:
            params["m"] = args.m
        return {"catalog": args.catalog, "params": params}
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ProblemError("config: top-level JSON value must be an object")
    return cfg


def build_problem(source: dict, K: Optional[int], m: Optional[float] = None) -> MfdeProblem:
    if "catalog" in source and "params" in source and isinstance(source["params"], dict):
        params = dict(source["params"])
        if K is not None:
            params["K"] = K
        if m is not None:
            params["m"] = m
        return catalog(source["catalog"], params)
    return from_config(source, K=K, m=m)


# ------------------------------------------------------------------ list parsing


def int_list(text: str) -> list[int]:
    """``"7,8,9"`` or ``"7:12"`` (inclusive) or a mix, e.g. ``"3,5,7:9"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition(":")
        try:
            if sep:
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None
    return out


def resolve_d(spec: str, n: int) -> int:
    if spec == "n":
        return n
    try:
        return int(spec)
    except ValueError:
        raise ProblemError(f"-d must be an integer or 'n', got {spec!r}") from None


# ------------------------------------------------------------------ report rows


def cell_record(result: Run) -> dict:
    sol = result.solution
    errs = result.errors
    return {
        "n": sol.n,
        "K": sol.K,
        "d": sol.d,
        "path": result.path,
        "global_error": errs.global_error if errs else None,
        "per_subinterval": list(errs.per_subinterval) if errs else None,
        "residual": max(result.residual),
        "cond_estimate": sol.diagnostics.cond_estimate,
        "status": "ok",
    }


def failed_record(n: int, K: int, d: Any, path: str, err: BaseException) -> dict:
    return {
        "n": n,
        "K": K,
        "d": d,
        "path": path,
        "global_error": None,
        "per_subinterval": None,
        "residual": None,
        "cond_estimate": None,
        "status": f"{type(err).__name__}: {err}",
    }


def _field(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(records: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        per = ";".join(repr(e) for e in r["per_subinterval"]) if r["per_subinterval"] else ""
        writer.writerow([
            _field(r["n"]), _field(r["K"]), _field(r["d"]), r["path"],
            _field(r["global_error"]), per, _field(r["residual"]),
            _field(r["cond_estimate"]), r["status"],
        ])
    return buf.getvalue()


def metadata() -> dict:
    return {"generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"), "version": __version__}


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


# ------------------------------------------------------------------ commands


def _solve(args) -> tuple[MfdeProblem, Run]:
    source = problem_source(args)
    Ks = [None] if args.K is None else args.K
    if len(args.n) != 1 or len(Ks) != 1:
        raise ProblemError(f"{args.command} takes a single -n and -K (use sweep for lists)")
    n, K = args.n[0], Ks[0]
    problem = build_problem(source, K)
    result = run(problem, n, resolve_d(args.d, n), args.path, compare=args.compare_paths)
    return problem, result


def _summary(result: Run) -> str:
    sol = result.solution
    parts = [f"{result.problem.name}: K={sol.K} n={sol.n} d={sol.d} path={result.path} order={result.system.order}"]
    if result.errors:
        parts.append(f"global error {result.errors.global_error:.3e}")
    parts.append(f"residual {max(result.residual):.3e}")
    parts.append(f"cond {sol.diagnostics.cond_estimate:.2e}")
    if result.comparison:
        parts.append(f"path difference {result.comparison.max_value_diff:.3e}")
    return ", ".join(parts)


def overlay_svg(problem: MfdeProblem, result: Run) -> str:
    t = grid(result.solution.K)
    numeric = eval_at(result.solution, problem, t)
    exact = ex.evaluate(problem.exact, t) if problem.exact is not None else None
    return plot.solution_overlay(t, numeric, exact, title=f"{problem.name}, K={problem.K}, n={result.solution.n}")


def cmd_solve(args) -> int:
    problem, result = _solve(args)
    report = {"metadata": metadata(), **result.to_dict()}
    text = _dump(report)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.csv:
        _write(args.csv, csv_text([cell_record(result)]))
    if args.svg:
        _write(args.svg, overlay_svg(problem, result))
    print(_summary(result), file=sys.stderr)
    return EXIT_OK


def cmd_plot(args) -> int:
    if not args.svg:
        raise ProblemError("plot needs --svg FILE")
    problem, result = _solve(args)
    _write(args.svg, overlay_svg(problem, result))
    if args.out:
        _write(args.out, _dump({"metadata": metadata(), **result.to_dict()}))
    print(_summary(result), file=sys.stderr)
    return EXIT_OK


def sweep_cell(source: dict, n: int, K: Optional[int], d_spec: str, path: str) -> dict:
    """One (n, K) solve; failures come back as a record instead of raising."""
    try:
        d = resolve_d(d_spec, n)
    except ProblemError as err:
        return failed_record(n, K, d_spec, path, err)
    try:
        problem = build_problem(source, K)
        return cell_record(run(problem, n, d, path))
    except Exception as err:  # recorded per cell, the sweep goes on
        return failed_record(n, K, d, path, err)


def _check_halving(records: Sequence[dict]) -> None:
    by_cell = {(r["n"], r["K"]): r["global_error"] for r in records if r["global_error"] is not None}
    for (n, K), err in sorted(by_cell.items()):
        later = by_cell.get((n + 2, K))
        if later is not None and later > 10 * err:
            log.warning("K=%d: error at n=%d (%.3e) exceeds 10x the error at n=%d (%.3e)", K, n + 2, later, n, err)


def cmd_sweep(args) -> int:
    Ks = [None] if args.K is None else args.K
    if not args.n or not Ks:
        raise ProblemError("sweep lists for -n and -K must be non-empty")
    source = problem_source(args)
    cells = [(n, K) for n in args.n for K in Ks]
    jobs = [(source, n, K, args.d, args.path) for n, K in cells]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(sweep_cell, *zip(*jobs)))
    else:
        records = [sweep_cell(*job) for job in jobs]
    _check_halving(records)
    text = csv_text(records)
    if args.csv:
        _write(args.csv, text)
    else:
        sys.stdout.write(text)
    if args.out:
        _write(args.out, _dump({"metadata": metadata(), "cells": records}))
    if args.svg:
        _write(args.svg, plot.error_vs_K(records, title=f"{source.get('catalog', source.get('name', 'problem'))}: error vs K"))
    failed = [r for r in records if r["status"] != "ok"]
    for r in failed:
        log.warning("n=%s K=%s failed: %s", r["n"], r["K"], r["status"])
    if failed and len(failed) == len(records):
        return EXIT_SOLVER
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfde-tau", description="Segmented Tau solver for mixed-type functional differential equations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--catalog", metavar="NAME", help=f"reference problem ({', '.join(CATALOG)})")
    src.add_argument("--config", metavar="FILE", help="JSON problem description")
    common.add_argument("-K", type=int_list, help="number of unit subintervals plus one (sweep: list); a config file may supply it")
    common.add_argument("-n", type=int_list, required=True, help="degree of each solution piece (sweep: list)")
    common.add_argument("-d", default="0", help="degree of the coefficient approximations, or 'n'")
    common.add_argument("--m", type=float, help="parameter m of exp1 (or exp5 modulation index)")
    common.add_argument("--param", action="append", default=[], metavar="NAME=VALUE", help="extra catalog parameter")
    common.add_argument("--path", choices=PATH_CHOICES, default="direct", help="assembly route (default: direct)")
    common.add_argument("--compare-paths", action="store_true", help="also solve with the other assembly and report the difference")
    common.add_argument("--out", metavar="FILE", help="JSON report")
    common.add_argument("--csv", metavar="FILE", help="CSV table")
    common.add_argument("--svg", metavar="FILE", help="SVG figure")
    common.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("solve", parents=[common], help="solve one configuration").set_defaults(func=cmd_solve)
    sw = sub.add_parser("sweep", parents=[common], help="Cartesian sweep over n and K")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    sw.set_defaults(func=cmd_sweep)
    sub.add_parser("plot", parents=[common], help="plot numerical and analytic solutions").set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except Exception as err:
        code = exit_code(err)
        if code == 1:
            raise
        print(f"mfde-tau: error: {err}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
