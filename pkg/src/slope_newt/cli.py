import argparse
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .data.readers import read_dense_csv, read_lambda_file, read_libsvm
from .data.writers import (report_json_text, result_record, write_compare_csv, write_path_csv, write_profile_csv,
                           write_report_json, write_trace_csv)
from .experiments.compare import compare_solvers, performance_profile
from .experiments.path import PathGrid, run_path, support_monotonicity
from .models.errors import SlopeError, ValidationError
from .models.problem import LambdaSeq, ProblemData, oscar_weights, oscar_weights_from_factor
from .models.report import Algorithm
from .simulation.synthetic import synth_instance
from .solvers import AdmmConfig, AlmConfig, ApgConfig, make_solver
from .utils.logging import logger

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2

SYNTHETIC_KEYS = {"m": int, "n": int, "g": int, "sd": float, "seed": int}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def parse_synthetic(spec: str) -> Dict[str, Any]:
    """Parses ``m=..,n=..,g=..,sd=..,seed=..``; unspecified keys take defaults."""
    values = {"m": 100, "n": 500, "g": 3, "sd": 0.0, "seed": 0}
    for item in filter(None, spec.split(",")):
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or key not in SYNTHETIC_KEYS:
            raise ValidationError(f"unknown synthetic parameter {item!r}; expected keys {sorted(SYNTHETIC_KEYS)}")
        try:
            values[key] = SYNTHETIC_KEYS[key](raw)
        except ValueError:
            raise ValidationError(f"invalid value in {item!r}") from None
    return values


def load_problem(args: argparse.Namespace) -> Tuple[ProblemData, str]:
    """Builds the instance from ``--data``/``--format`` or ``--synthetic`` and returns it with a label."""
    if args.synthetic is not None:
        params = parse_synthetic(args.synthetic)
        p, _ = synth_instance(params["m"], params["n"], params["g"], params["sd"], params["seed"])
        label = "synthetic:" + ",".join(f"{k}={params[k]}" for k in ("m", "n", "g", "sd", "seed"))
        return p, label
    if args.format == "libsvm":
        return read_libsvm(args.data, args.num_features), args.data
    return read_dense_csv(args.data), args.data


def build_weights(args: argparse.Namespace, p: ProblemData) -> Tuple[LambdaSeq, Dict[str, Any]]:
    if args.w2 is not None and args.w1 is None:
        raise ValidationError("--w2 only applies together with --w1")
    if args.lambda_file is not None:
        lam = read_lambda_file(args.lambda_file)
        if len(lam) != p.n:
            raise ValidationError(f"weight file has {len(lam)} entries, expected n={p.n}")
        return lam, {"source": "file", "path": args.lambda_file}
    if args.oscar_a is not None:
        w1, w2 = oscar_weights_from_factor(args.oscar_a, p)
        return oscar_weights(w1, w2, p.n), {"source": "factor", "a": args.oscar_a, "w1": w1, "w2": w2}
    if args.w1 is None:
        raise ValidationError("one of --lambda-file, --w1/--w2 or --oscar-a is required")
    w2 = args.w2 if args.w2 is not None else 0.0
    return oscar_weights(args.w1, w2, p.n), {"source": "oscar", "w1": args.w1, "w2": w2}


def build_config(algorithm: Algorithm, args: argparse.Namespace) -> Any:
    """Solver configuration from the shared flags; ``--max-outer`` caps iterations of the first-order methods."""
    tol = {"tol_G": args.tol_g, "tol_D": args.tol_d}
    if algorithm == Algorithm.NEWT_ALM:
        extra = {} if args.max_outer is None else {"max_outer": args.max_outer}
        return AlmConfig(sigma0=args.sigma0, **tol, **extra)
    extra = {} if args.max_outer is None else {"max_iters": args.max_outer}
    if algorithm == Algorithm.ADMM:
        if args.sigma0 is not None:
            extra["sigma"] = args.sigma0
        return AdmmConfig(**tol, **extra)
    return ApgConfig(**tol, **extra)


def cmd_solve(args: argparse.Namespace) -> int:
    p, label = load_problem(args)
    lam, weights = build_weights(args, p)
    algorithm = Algorithm(args.algo)
    report = make_solver(algorithm, build_config(algorithm, args)).solve(p, lam)

    record = result_record(report, label, weights, args.top_k)
    if args.out:
        write_report_json(args.out, record)
    else:
        sys.stdout.write(report_json_text(record))
    if args.trace:
        write_trace_csv(args.trace, report.history)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_path(args: argparse.Namespace) -> int:
    p, _ = load_problem(args)
    grid = PathGrid.from_spec(p, args.w1_grid, args.w2_rule, args.top_k, args.warm)
    algorithm = Algorithm(args.algo)
    points = run_path(p, grid, algorithm, build_config(algorithm, args), args.workers)
    write_path_csv(args.out, points)
    failed = sum(pt.error is not None for pt in points)
    not_converged = sum(not pt.report.converged for pt in points)
    logger.info("Path summary: %d points, %d not converged (%d failed), support monotonicity %.3f",
                len(points), not_converged, failed, support_monotonicity(points))
    return EXIT_OK if not not_converged else EXIT_NOT_CONVERGED


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_compare(args: argparse.Namespace) -> int:
    p, label = load_problem(args)
    try:
        algorithms = [Algorithm(a.strip()) for a in args.algos.split(",") if a.strip()]
    except ValueError:
        raise ValidationError(f"unknown algorithm in {args.algos!r}") from None
    configs = {a: build_config(a, args) for a in algorithms}
    rows = compare_solvers(p, _float_list(args.factors), algorithms, configs, label)
    write_compare_csv(args.out, rows)
    if args.profile:
        write_profile_csv(args.profile, performance_profile(rows, _float_list(args.taus)))
    return EXIT_OK if all(row.converged for row in rows) else EXIT_NOT_CONVERGED


def _add_source_flags(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--data", help="input file")
    source.add_argument("--synthetic", help="m=..,n=..,g=..,sd=..,seed=..")
    parser.add_argument("--format", choices=["libsvm", "csv"], default="libsvm")
    parser.add_argument("--num-features", type=int, default=None, help="LIBSVM column count override")
    parser.add_argument("--algo", choices=[a.value for a in Algorithm], default=Algorithm.NEWT_ALM.value)
    parser.add_argument("--tol-g", type=float, default=1e-6)
    parser.add_argument("--tol-d", type=float, default=1e-6)
    parser.add_argument("--max-outer", type=int, default=None)
    parser.add_argument("--sigma0", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="slope-newt", description="SLOPE/OSCAR regression solvers")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    solve = commands.add_parser("solve", help="solve a single instance")
    _add_source_flags(solve)
    weights = solve.add_mutually_exclusive_group()
    weights.add_argument("--lambda-file")
    weights.add_argument("--w1", type=float)
    weights.add_argument("--oscar-a", type=float)
    solve.add_argument("--w2", type=float)
    solve.add_argument("--top-k", type=int, default=10)
    solve.add_argument("--out", help="result JSON (stdout when omitted)")
    solve.add_argument("--trace", help="per-iteration trace CSV")
    solve.set_defaults(func=cmd_solve)

    path = commands.add_parser("path", help="sweep a grid of OSCAR weights")
    _add_source_flags(path)
    path.add_argument("--w1-grid", required=True, help="lo:hi:count[:lin|log], in units of ||A^T b||_inf")
    path.add_argument("--w2-rule", default="scaled", help="fixed:F | fixed:auto | scaled | grid:lo:hi:count")
    path.add_argument("--top-k", type=int, default=10)
    path.add_argument("--warm", action=argparse.BooleanOptionalAction, default=True)
    path.add_argument("--workers", type=int, default=None)
    path.add_argument("--out", required=True, help="path CSV")
    path.set_defaults(func=cmd_path)

    compare = commands.add_parser("compare", help="compare solvers over weight factors")
    _add_source_flags(compare)
    compare.add_argument("--factors", default="1e-3,1e-4")
    compare.add_argument("--algos", default="newt-alm,admm,apg")
    compare.add_argument("--taus", default="1,2,4,8,16,32")
    compare.add_argument("--out", required=True, help="comparison CSV")
    compare.add_argument("--profile", help="performance profile CSV")
    compare.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the ``slope-newt`` command.

    :return: 0 when every solve converged, 1 when one did not, 2 on invalid
        flags, unreadable or malformed input.
    :rtype: int
    """
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ValidationError, OSError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except SlopeError as e:
        logger.error("solver failed: %s", e)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
