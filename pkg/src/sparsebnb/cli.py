"""Command-line front end: ``gen``, ``tune``, ``solve`` and ``bench``.

Every flag can also be supplied through an environment variable named
``SPARSEBNB_<FLAG>`` (upper case, dashes as underscores), e.g.
``SPARSEBNB_GAP_TOL=1e-3``. Explicit flags take precedence.

Exit codes: 0 on success (Optimal or GapReached for ``solve``), 1 on bad
flags or IO failure, 2 when a time or node limit stopped the search.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .admm import AdmmOptions
from .core import ProblemData
from .data import (
    SyntheticSpec,
    default_big_m,
    generate,
    load_csv,
    save_csv,
    tune_lambda2,
    Instance,
    write_report,
)
from .exceptions import SparseBnbError
from .tree import BnbOptions, SolveReport, Status, solve
from .upper_bound import FpgOptions

ENV_PREFIX = "SPARSEBNB_"
EXIT_OK, EXIT_USAGE, EXIT_LIMIT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _positive(kind):
    def conv(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val

    return conv


def _nonneg(text):
    val = float(text)
    if not val >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return val


def _unit_interval(text):
    val = float(text)
    if not 0.0 <= val < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1), got {text}")
    return val


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"batch sizes must be positive integers, got {text!r}")
    return vals


def _add_spec_flags(p):
    p.add_argument("--n", type=_positive(int), required=True)
    p.add_argument("--p", type=_positive(int), required=True)
    p.add_argument("--k0", type=int, required=True)
    p.add_argument("--corr", type=_unit_interval, default=0.0)
    p.add_argument("--snr", type=_positive(float), default=10.0)
    p.add_argument("--seed", type=int, default=0)


def _add_solver_flags(p, batch_list=False):
    p.add_argument("--lambda0", type=_nonneg, required=True)
    p.add_argument("--lambda2", type=_positive(float), required=True)
    p.add_argument("--big-m", type=_positive(float), required=True)
    p.add_argument("--rho", type=_positive(float), default=1.0)
    if batch_list:
        p.add_argument("--batch", type=_int_list, default=[1, 8, 32])
    else:
        p.add_argument("--batch", type=_positive(int), default=1)
    p.add_argument("--gap-tol", type=_nonneg, default=1e-2)
    p.add_argument("--time-limit", type=_positive(float), default=math.inf)
    p.add_argument("--node-limit", type=_positive(int), default=None)
    p.add_argument("--subproblem-tol", type=_positive(float), default=1e-4)
    p.add_argument("--admm-max-iters", type=_positive(int), default=10_000)
    p.add_argument("--fpg-tol", type=_positive(float), default=1e-8)
    p.add_argument("--fpg-max-iters", type=_positive(int), default=5000)
    p.add_argument("--threads", type=_positive(int), default=None)
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsebnb", description="Exact l0-l2 sparse regression by branch-and-bound.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic instance as X.csv, y.csv, truth.csv")
    _add_spec_flags(g)
    g.add_argument("--out", type=Path, required=True, help="output directory")

    t = sub.add_parser("tune", help="print the tuned lambda2 and the matching box bound")
    _add_spec_flags(t)

    s = sub.add_parser("solve", help="certify the optimum for a CSV instance")
    s.add_argument("--x", type=Path, required=True)
    s.add_argument("--y", type=Path, required=True)
    s.add_argument("--center", action="store_true")
    s.add_argument("--normalize", action="store_true")
    s.add_argument("--report", type=Path, default=Path("report.json"))
    s.add_argument("--no-wall-time", action="store_true", help="omit wall time for reproducible reports")
    _add_solver_flags(s)

    b = sub.add_parser("bench", help="sweep batch sizes on a synthetic instance")
    _add_spec_flags(b)
    _add_solver_flags(b, batch_list=True)
    return parser


def _env_defaults(parser: argparse.ArgumentParser, command: str, env) -> List[str]:
    """Translate ``SPARSEBNB_*`` variables into flags for ``command``."""
    subparser = None
    for action in parser._subparsers._group_actions:
        subparser = action.choices.get(command)
    if subparser is None:
        return []
    extra = []
    for action in subparser._actions:
        longs = [o for o in action.option_strings if o.startswith("--")]
        if not longs or longs[0] == "--help":
            continue
        key = ENV_PREFIX + longs[0][2:].upper().replace("-", "_")
        if key not in env:
            continue
        if action.nargs == 0:
            if env[key].strip().lower() in ("1", "true", "yes", "on"):
                extra.append(longs[0])
        else:
            extra.extend([longs[0], env[key]])
    return extra


def parse_args(argv: Sequence[str], env=None) -> argparse.Namespace:
    env = os.environ if env is None else env
    parser = build_parser()
    argv = list(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    if command in ("gen", "tune", "solve", "bench"):
        # env values go first so explicit flags override them
        i = argv.index(command)
        argv = argv[: i + 1] + _env_defaults(parser, command, env) + argv[i + 1 :]
    return parser.parse_args(argv)


def _spec(args) -> SyntheticSpec:
    return SyntheticSpec(args.n, args.p, args.k0, args.corr, args.snr, args.seed)


def _options(args, batch: int) -> BnbOptions:
    return BnbOptions(
        batch_size=batch,
        gap_tol=args.gap_tol,
        time_limit=args.time_limit,
        node_limit=args.node_limit,
        rho=args.rho,
        admm=AdmmOptions(tol=args.subproblem_tol, max_iters=args.admm_max_iters),
        fpg=FpgOptions(tol=args.fpg_tol, max_iters=args.fpg_max_iters),
    )


def _progress_printer(stream):
    def emit(info):
        fields = " ".join(f"{k}={v:.10g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())
        print(fields, file=stream, flush=True)

    return emit


def _config_echo(args) -> dict:
    keep = (
        "lambda0", "lambda2", "big_m", "rho", "batch", "gap_tol", "time_limit",
        "node_limit", "subproblem_tol", "admm_max_iters", "fpg_tol", "fpg_max_iters",
        "threads", "center", "normalize",
    )
    out = {}
    for k in keep:
        if hasattr(args, k):
            v = getattr(args, k)
            out[k] = None if isinstance(v, float) and math.isinf(v) else v
    return out


def _cmd_gen(args, out) -> int:
    inst = generate(_spec(args))
    args.out.mkdir(parents=True, exist_ok=True)
    save_csv(args.out / "X.csv", inst.X)
    save_csv(args.out / "y.csv", inst.y)
    save_csv(args.out / "truth.csv", inst.beta_true)
    print(f"wrote n={args.n} p={args.p} k0={args.k0} sigma={inst.sigma:.17g} to {args.out}", file=out)
    return EXIT_OK


def _cmd_tune(args, out) -> int:
    inst = generate(_spec(args))
    lam = tune_lambda2(inst)
    print(f"lambda2={lam:.17g}", file=out)
    print(f"big_m={default_big_m(inst, lam):.17g}", file=out)
    return EXIT_OK


def _exit_for(report: SolveReport) -> int:
    return EXIT_OK if report.status in (Status.OPTIMAL, Status.GAP_REACHED) else EXIT_LIMIT


def _cmd_solve(args, out, err) -> int:
    X, y = load_csv(args.x, args.y, center=args.center, normalize=args.normalize)
    prob = ProblemData(X, y, args.lambda0, args.lambda2, args.big_m)
    report = solve(prob, _options(args, args.batch), progress=None if args.quiet else _progress_printer(err))
    write_report(report, args.report, _config_echo(args), wall_time=not args.no_wall_time)
    print(
        f"status={report.status.value} objective={report.best_objective:.17g} "
        f"gap={report.gap:.6g} nodes={report.nodes_solved} report={args.report}",
        file=out,
    )
    return _exit_for(report)


def _cmd_bench(args, out, err) -> int:
    inst: Instance = generate(_spec(args))
    prob = inst.problem(args.lambda0, args.lambda2, args.big_m)
    print("K,nodes,rounds,wall_time,nodes_per_sec,gap,objective,status", file=out)
    code = EXIT_OK
    for K in args.batch:
        rep = solve(prob, _options(args, K), progress=None if args.quiet else _progress_printer(err))
        rate = rep.nodes_solved / rep.wall_time if rep.wall_time > 0 else float("inf")
        print(
            f"{K},{rep.nodes_solved},{rep.rounds},{rep.wall_time:.4f},{rate:.2f},"
            f"{rep.gap:.6g},{rep.best_objective:.12g},{rep.status.value}",
            file=out,
            flush=True,
        )
        code = max(code, _exit_for(rep))
    return code


def run(argv: Optional[Sequence[str]] = None, env=None, out=None, err=None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv, env)
    except UsageError as exc:
        print(str(exc).rstrip(), file=err)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    threads = getattr(args, "threads", None)
    try:
        with threadpool_limits(limits=threads):
            if args.command == "gen":
                return _cmd_gen(args, out)
            if args.command == "tune":
                return _cmd_tune(args, out)
            if args.command == "solve":
                return _cmd_solve(args, out, err)
            return _cmd_bench(args, out, err)
    except (SparseBnbError, OSError) as exc:
        print(f"sparsebnb {args.command}: error: {exc}", file=err)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
