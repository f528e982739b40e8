"""Command-line entry point: ``permconc <command> [options]``.

Exit status is 0 on success, 1 on a domain or input error (one line on
stderr starting with ``error:``), and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds as B
from . import empirics as E
from . import indep_test as IT
from .constants import constants_table_text
from .errors import InvalidParameterError, MalformedInputError, PermConcError
from .kernels import parse_kernel
from .moments import matrix_moments
from .perm_core import check_seed, exact_distribution, read_matrix_csv, sample_distribution
from .report import (
    ExperimentSpec,
    curve_to_csv,
    rows_to_csv,
    serialize_report,
)


class UsageError(Exception):
    pass


def parse_mode(text: str) -> tuple[str, int | None]:
    """``exact`` or ``mc:B``."""
    if text == "exact":
        return "exact", None
    name, _, arg = text.partition(":")
    if name == "mc":
        try:
            b = int(arg)
        except ValueError:
            raise UsageError(f"bad mode {text!r}; expected exact or mc:B") from None
        if b < 1:
            raise UsageError("mc:B needs B >= 1")
        return "mc", b
    raise UsageError(f"bad mode {text!r}; expected exact or mc:B")


def parse_grid(text: str) -> list[float]:
    """``t0:t1:steps`` gives ``steps`` equally spaced values from t0 to t1."""
    try:
        t0, t1, steps = text.split(":")
        t0, t1, steps = float(t0), float(t1), int(steps)
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected t0:t1:steps") from None
    if steps < 1 or t1 < t0:
        raise UsageError("grid needs steps >= 1 and t0 <= t1")
    return [float(v) for v in np.linspace(t0, t1, steps)]


def _need(args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise UsageError(f"--{name} is required")


def _seed_for(mode: str, seed):
    if mode == "mc":
        if seed is None:
            raise UsageError("--seed is required for mc mode")
        return check_seed(seed)
    return seed


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _distribution(a, mode_text: str, seed):
    mode, b = parse_mode(mode_text)
    seed = _seed_for(mode, seed)
    return exact_distribution(a) if mode == "exact" else sample_distribution(a, b, seed)


# -- commands ------------------------------------------------------------------

def cmd_moments(args) -> None:
    _need(args, "matrix")
    _write(serialize_report(matrix_moments(read_matrix_csv(args.matrix))), args.output)


def cmd_bounds(args) -> None:
    _need(args, "family")
    if args.family not in B.FAMILIES:
        raise UsageError(f"unknown family {args.family!r}; choose from {', '.join(B.FAMILIES)}")
    if (args.grid is None) == (args.x is None):
        raise UsageError("give exactly one of --grid and --x")
    inputs = parse_grid(args.grid) if args.grid is not None else [args.x]
    meta = {"family": args.family, "inputs": "x" if args.family in B.THRESHOLD_FAMILIES else "t"}
    if args.family.startswith("bernstein-classical"):
        if args.v is None or args.c is None:
            raise UsageError("bernstein-classical families need --v and --c")
        mode = args.family.rsplit("-", 1)[1]
        evals = [B.bernstein_classical(args.v, args.c, x, mode) for x in inputs]
        meta.update(v=args.v, c=args.c)
    else:
        _need(args, "matrix")
        a = read_matrix_csv(args.matrix)
        dist = None
        if args.family in ("sqrt-median-upper", "sqrt-median-lower", "median-pos"):
            dist = _distribution(a, args.mode, args.seed)
            meta.update(median_source=args.mode, seed=dist.seed)
        evals = E.evaluate_family(a, args.family, inputs, dist)
        meta["matrix"] = str(args.matrix)
    meta["constants"] = B.BoundFamily.get(args.family).constants
    meta["rows"] = len(evals)
    table = rows_to_csv(["t_or_x", "raw_bound", "capped_bound", "threshold"],
                        [(e.input_threshold, e.probability_bound, e.capped_bound, e.threshold)
                         for e in evals])
    if args.output is None:
        sys.stdout.write(table)
        if args.meta is not None:
            _write(serialize_report(meta), args.meta)
    else:
        _write(table, args.output)
        _write(serialize_report(meta), args.meta or args.output + ".json")


def cmd_tails(args) -> None:
    _need(args, "matrix")
    a = read_matrix_csv(args.matrix)
    dist = _distribution(a, args.mode, args.seed)
    grid = parse_grid(args.grid) if args.grid else None
    if grid is None:
        grid = E.default_grid(dist, args.center, points=args.points)
    curve = E.tail_curve(dist, args.center, grid)
    if args.csv is not None:
        _write(curve_to_csv(curve), args.csv)
    _write(serialize_report(curve), args.output)


def cmd_verify(args) -> None:
    _need(args, "spec")
    spec = E.SweepSpec.from_dict(_load_json(args.spec))
    if spec.mode == "mc" and spec.seed is None:
        raise UsageError("mc sweeps need a seed")
    result = E.sweep_experiment(spec, workers=args.workers)
    if args.curves_dir is not None:
        # plot-ready CSV per matrix and family: t, empirical tail, capped bound
        out = Path(args.curves_dir)
        out.mkdir(parents=True, exist_ok=True)
        for m in result.matrices:
            for r in m.reports:
                (out / f"n{m.n}_m{m.index}_{r.family.name}.csv").write_text(
                    rows_to_csv(["t", "empirical_tail", "capped_bound"],
                                [(row.t, row.empirical_tail, row.capped_bound) for row in r.rows]),
                    encoding="utf-8", newline="\n")
    _write(serialize_report(result), args.output)


def cmd_indep_test(args) -> None:
    _need(args, "sample", "kernel", "alpha")
    mode, b = parse_mode(args.mode)
    seed = _seed_for(mode, args.seed)
    sample = IT.read_paired_csv(args.sample)
    kernel = parse_kernel(args.kernel, args.sup_norm, dim=sample.first.shape[1])
    report = IT.run_test(sample, kernel, args.alpha, mode, b, seed,
                         diagnostics=args.diagnostics, beta=args.beta)
    _write(serialize_report(report), args.output)


def run_power_check(spec: ExperimentSpec, workers: int = 1) -> dict:
    """Run the level or power simulation described by ``spec.params``."""
    p = dict(spec.params)
    known = {"simulation", "generator", "kernel", "sup_norm", "n", "alpha", "beta", "trials",
             "mode", "moments"}
    extra = set(p) - known
    if extra:
        raise InvalidParameterError(f"unknown power-check parameters {sorted(extra)}")
    missing = {"generator", "kernel", "n", "alpha", "trials"} - set(p)
    if missing:
        raise InvalidParameterError(f"power-check spec missing {sorted(missing)}")
    if spec.seed is None:
        raise UsageError("power-check specs need a seed")
    mode, b = parse_mode(p.get("mode", "exact"))
    generator = IT.generator_from_spec(p["generator"])
    kernel = parse_kernel(p["kernel"], p.get("sup_norm"), dim=int(p["generator"].get("dim", 1)))
    n, alpha, trials = int(p["n"]), float(p["alpha"]), int(p["trials"])
    simulation = p.get("simulation", "power")
    if simulation == "level":
        rate = IT.level_simulation(generator, kernel, n, alpha, trials, spec.seed, mode, b, workers)
        result = {"rejection_rate": rate, "trials": trials, "n": n, "alpha": alpha,
                  "mode": mode, "B": b, "seed": spec.seed}
    elif simulation == "power":
        moments = None
        if p.get("moments") is not None:
            m = p["moments"]
            moments = IT.PopulationMoments(float(m["E_P_phi"]), float(m["E_indep_phi"]),
                                           float(m["m_P"]), float(m["m_indep"]), exact=False)
        result = IT.power_simulation(generator, kernel, n, alpha, trials, spec.seed, mode, b,
                                     float(p.get("beta", 0.2)), moments, workers).to_dict()
    else:
        raise InvalidParameterError(f"simulation must be 'level' or 'power', got {simulation!r}")
    return {"experiment": spec.to_dict(), "result": result}


def cmd_power_check(args) -> None:
    _need(args, "spec")
    raw = _load_json(args.spec)
    raw.setdefault("command", "power-check")
    spec = ExperimentSpec.from_dict(raw)
    if spec.command != "power-check":
        raise InvalidParameterError(f"spec is for {spec.command!r}, not power-check")
    _write(serialize_report(run_power_check(spec, args.workers)), args.output)


def _load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInputError(f"{path}: {exc.strerror}") from None
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInputError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(body, dict):
        raise MalformedInputError(f"{path}: expected a JSON object")
    return body


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permconc",
                                     description="Concentration bounds for permuted sums and "
                                                 "a permutation test of independence.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--constants", action="store_true",
                       help="print the frozen constant table and exit")
        p.add_argument("--output", "-o", help="write the main output here instead of stdout")
        p.set_defaults(func=func)
        return p

    p = add("moments", cmd_moments, "Closed-form moments of the permuted sum of a matrix.")
    p.add_argument("--matrix", help="CSV matrix, n rows of n values, no header")

    p = add("bounds", cmd_bounds, "Evaluate one bound family on a grid of inputs.")
    p.add_argument("--matrix")
    p.add_argument("--family", help=", ".join(B.FAMILIES))
    p.add_argument("--grid", help="t0:t1:steps")
    p.add_argument("--x", type=float, help="single input value")
    p.add_argument("--mode", default="exact", help="median source for median families: exact | mc:B")
    p.add_argument("--seed", type=int)
    p.add_argument("--v", type=float, help="variance proxy (bernstein-classical only)")
    p.add_argument("--c", type=float, help="range proxy (bernstein-classical only)")
    p.add_argument("--meta", help="JSON metadata path (default: OUTPUT.json)")

    p = add("tails", cmd_tails, "Exact or Monte Carlo tail curve of the permuted sum.")
    p.add_argument("--matrix")
    p.add_argument("--center", choices=("mean", "median"), default="mean")
    p.add_argument("--mode", default="exact", help="exact | mc:B")
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", help="t0:t1:steps (default: 64 points up to the largest deviation)")
    p.add_argument("--points", type=int, default=E.DEFAULT_GRID_POINTS)
    p.add_argument("--csv", help="also write the curve as CSV")

    p = add("verify", cmd_verify, "Run a bound-domination sweep from a JSON spec.")
    p.add_argument("--spec")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--curves-dir", help="directory for per-report CSV curves")

    p = add("indep-test", cmd_indep_test, "Permutation test of independence on paired data.")
    p.add_argument("--sample", help="CSV with 2k columns: k for X1, then k for X2")
    p.add_argument("--kernel", help="product | gaussian:s | haar:j | coincidence:d")
    p.add_argument("--sup-norm", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--mode", default="exact", help="exact | mc:B")
    p.add_argument("--seed", type=int)
    p.add_argument("--diagnostics", action="store_true", help="add quantile and variance bounds")
    p.add_argument("--beta", type=float, default=0.2, help="second kind level for diagnostics")

    p = add("power-check", cmd_power_check, "Level or power simulation from a JSON spec.")
    p.add_argument("--spec")
    p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.constants:
        sys.stdout.write(constants_table_text())
        return 0
    try:
        args.func(args)
    except UsageError as exc:
        parser.exit(2, f"{parser.prog} {args.command}: error: {exc}\n")
    except PermConcError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {_one_line(exc)}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: OSError: {_one_line(exc)}\n")
        return 1
    return 0


def _one_line(exc: Exception) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
