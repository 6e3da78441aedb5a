"""Command-line entry point: ``hdgfrac --alpha 0.5 --degree 1 --levels 4,8,16,32``."""

from __future__ import annotations

import argparse
import importlib.util
import sys
from dataclasses import asdict

from .bench import ManufacturedProblem, RunConfig, convergence_study, emit_table


def _levels(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from None


def _load_problem(path: str, alpha: float, T: float) -> ManufacturedProblem:
    # user module must define problem(alpha, T) -> ManufacturedProblem
    spec = importlib.util.spec_from_file_location("_user_problem", path)
    if spec is None or spec.loader is None:
        raise ValueError(f"cannot import problem file {path}")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    if not hasattr(mod, "problem"):
        raise ValueError(f"{path} does not define problem(alpha, T)")
    return mod.problem(alpha, T)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdgfrac", description=(
        "Convergence study of the HDG / fractional Crank-Nicolson solver for "
        "subdiffusion on the unit interval."))
    p.add_argument("--config", help="key=value run configuration; command-line flags override it")
    p.add_argument("--alpha", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--levels", type=_levels, help="comma-separated element counts, e.g. 4,8,16,32")
    p.add_argument("--ratio-c", type=float, dest="ratio_c", help="constant c in delta^2 = c h^(k+2)")
    p.add_argument("--final-time", type=float, dest="final_time")
    p.add_argument("--format", choices=("csv", "md"))
    p.add_argument("--norm-points", type=int, dest="norm_points")
    p.add_argument("--full-precision", action="store_true", default=None, dest="full_precision")
    p.add_argument("--problem", choices=("manufactured", "file"), default="manufactured")
    p.add_argument("--problem-file", help="python file defining problem(alpha, T)")
    p.add_argument("--out", help="write the table here instead of stdout")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        base = RunConfig.from_file(args.config) if args.config else RunConfig()
        values = asdict(base)
        for key in values:
            v = getattr(args, key, None)
            if v is not None:
                values[key] = v
        config = RunConfig(**values)
        problem = None
        if args.problem == "file":
            if not args.problem_file:
                raise ValueError("--problem file needs --problem-file PATH")
            problem = _load_problem(args.problem_file, config.alpha, config.final_time)
        table = convergence_study(config, problem)
        text = emit_table(table, config.format, config.full_precision)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"hdgfrac: error: {exc}", file=sys.stderr)
        return 1
    return 0
