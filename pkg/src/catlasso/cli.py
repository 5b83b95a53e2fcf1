"""Command line interface: ``catlasso encode | fit | simulate``.

Exit codes: 0 success, 2 invalid input or configuration, 3 solver
non-convergence (diagnostics and any partial results are still written).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .design import (
    SCHEMES,
    CategoricalVariable,
    DesignError,
    code_matrix,
    indicator_matrix,
)
from .solver import VARIANTS, NonConvergenceError, PenaltySpec, SolverConfig, fit, objective
from .standardize import build_design, centered_block, scaled_block

logger = logging.getLogger("catlasso")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3
ENCODINGS = ("indicator",) + SCHEMES + ("standardized", "centered")
_STANDARDIZED_VARIANTS = {"group_only", "sgl_scaling", "sgl_svd_scaling"}


class InputError(Exception):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@contextlib.contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    """Read a CSV with a header row; every row must have one value per column."""
    try:
        fh = sys.stdin if path == "-" else open(path, newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    with fh if path != "-" else contextlib.nullcontext(fh):
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file, a header row is required") from None
        header = [h.strip() for h in header]
        if not header or any(not h for h in header):
            raise InputError(f"{path}: line 1: empty column name in header")
        if len(set(header)) != len(header):
            raise InputError(f"{path}: line 1: duplicate column names")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}: line {line}: expected {len(header)} fields, got {len(row)}"
                )
            for name, value in zip(header, row):
                if not value.strip():
                    raise InputError(f"{path}: line {line}: empty value in column {name!r}")
            rows.append([v.strip() for v in row])
    if not rows:
        raise InputError(f"{path}: no data rows")
    return header, rows


def _variables(header, rows, names) -> list[CategoricalVariable]:
    out = []
    for name in names:
        if name not in header:
            raise InputError(f"unknown column {name!r}")
        col = header.index(name)
        try:
            out.append(CategoricalVariable.from_values([r[col] for r in rows], name=name))
        except DesignError as exc:
            raise InputError(str(exc)) from exc
    return out


def _columns(arg: str | None, header: list[str], exclude=()) -> list[str]:
    if arg:
        return [c.strip() for c in arg.split(",") if c.strip()]
    return [h for h in header if h not in exclude]


def cmd_encode(args) -> int:
    header, rows = read_table(args.input)
    variables = _variables(header, rows, _columns(args.columns, header))
    names, mats = [], []
    for var in variables:
        if args.scheme in SCHEMES:
            if var.num_levels < 2:
                raise InputError(f"{var.name}: '{args.scheme}' coding needs at least 2 levels")
            mats.append(code_matrix(var, args.scheme))
            names += [f"{var.name}_{i}" for i in range(1, var.num_levels)]
            continue
        x = indicator_matrix(var)
        if args.scheme == "standardized":
            x = scaled_block(x, label=var.name).matrix
        elif args.scheme == "centered":
            x = centered_block(x, label=var.name).matrix
        mats.append(x)
        names += [f"{var.name}_{lab}" for lab in var.labels]
    table = np.hstack(mats)
    with _open_out(args.output) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in table:
            writer.writerow(["%d" % v if float(v).is_integer() and args.scheme in
                             ("indicator",) + SCHEMES else _fmt(v) for v in row])
    return EXIT_OK


def _interaction_pair(arg: str, names: list[str]) -> tuple[int, int]:
    parts = arg.split(":")
    if len(parts) != 2 or parts[0] == parts[1]:
        raise InputError(f"--interaction expects 'v1:v2' with two distinct columns, got {arg!r}")
    for p in parts:
        if p not in names:
            raise InputError(f"--interaction column {p!r} is not a predictor")
    return names.index(parts[0]), names.index(parts[1])


def _write_fit(fh, design, result, diagnostics: dict) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["term", "block", "level", "value"])
    writer.writerow(["intercept", "", "", _fmt(result.intercept)])
    for blk, theta, var_labels in zip(design.blocks, result.theta, diagnostics.pop("levels")):
        for lab, value in zip(var_labels, theta):
            writer.writerow(["theta", blk.label, lab, _fmt(value)])
    for key, value in diagnostics.items():
        writer.writerow([key, "", "", value if isinstance(value, str) else _fmt(value)])


def cmd_fit(args) -> int:
    header, rows = read_table(args.input)
    if args.response not in header:
        raise InputError(f"response column {args.response!r} not found")
    col = header.index(args.response)
    y = np.empty(len(rows))
    for i, r in enumerate(rows):
        try:
            y[i] = float(r[col])
        except ValueError:
            raise InputError(f"{args.input}: line {i + 2}: response {r[col]!r} is not a number") from None
        if not np.isfinite(y[i]):
            raise InputError(f"{args.input}: line {i + 2}: response is not finite")
    names = _columns(args.columns, header, exclude=(args.response,))
    variables = _variables(header, rows, names)
    standardized = args.variant in _STANDARDIZED_VARIANTS
    pair = None
    if args.interaction:
        if not standardized:
            raise InputError(f"--interaction needs a standardized variant, not {args.variant!r}")
        pair = _interaction_pair(args.interaction, names)
    try:
        design = build_design(variables, standardized=standardized, interaction=pair)
        penalty = PenaltySpec(args.lam, args.tau, args.lam_lasso, args.variant)
    except (DesignError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    level_labels = [list(v.labels) for v in variables]
    if pair is not None:
        v1, v2 = variables[pair[0]], variables[pair[1]]
        level_labels.append([f"{a}:{b}" for a in v1.labels for b in v2.labels])
    cfg = SolverConfig(max_iter=args.max_iter)
    status = EXIT_OK
    try:
        result = fit(design, y, penalty, cfg)
    except NonConvergenceError as exc:
        logger.error("%s", exc)
        result, status = exc.fit, EXIT_SOLVER
    diagnostics = {
        "levels": level_labels,
        "objective": objective(design, y, result, penalty),
        "kkt_residual": result.kkt,
        "iterations": str(result.n_iter),
        "converged": "true" if result.converged else "false",
    }
    with _open_out(args.output) as fh:
        _write_fit(fh, design, result, diagnostics)
    return status


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


_SIM_FLAGS = ("setting", "p", "L", "s", "t", "n_train", "n_val", "sigma", "reps", "seed",
              "methods")


def cmd_simulate(args) -> int:
    values = read_config(args.config) if args.config else {}
    for name in _SIM_FLAGS:
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag
    if "setting" not in values:
        raise InputError("simulate needs --setting (or 'setting' in the config file)")
    try:
        cfg = experiments.SimulationConfig.from_mapping({k: str(v) for k, v in values.items()})
        experiments.level_counts(cfg.t, cfg.L, cfg.n_train)
        experiments.level_counts(cfg.t, cfg.L, cfg.n_val)
    except ValueError as exc:
        raise InputError(f"invalid configuration: {exc}") from exc
    status = EXIT_OK
    try:
        results = experiments.run_setting(cfg, jobs=args.jobs)
    except experiments.SimulationError as exc:
        logger.error("%s", exc)
        results, status = exc.results, EXIT_SOLVER
    with _open_out(args.output) as fh:
        experiments.write_results(results, fh)
    summary_path = args.summary
    if summary_path is None and args.output != "-":
        out = Path(args.output)
        summary_path = str(out.with_name(out.stem + "_summary.csv"))
    if summary_path is not None and results:
        with _open_out(summary_path) as fh:
            experiments.write_summary(experiments.summarize(results), fh)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catlasso", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="write indicator, coded or standardized matrices")
    enc.add_argument("--input", required=True)
    enc.add_argument("--output", default="-")
    enc.add_argument("--columns", help="comma-separated categorical columns (default: all)")
    enc.add_argument("--scheme", choices=ENCODINGS, default="indicator")
    enc.set_defaults(func=cmd_encode)

    fp = sub.add_parser("fit", help="fit a (sparse) group lasso and write coefficients")
    fp.add_argument("--input", required=True)
    fp.add_argument("--output", default="-")
    fp.add_argument("--response", default="y")
    fp.add_argument("--columns", help="comma-separated predictors (default: all but response)")
    fp.add_argument("--lambda", dest="lam", type=float, required=True)
    fp.add_argument("--tau", type=float, default=1.0)
    fp.add_argument("--lambda-lasso", dest="lam_lasso", type=float, default=0.0)
    fp.add_argument("--variant", choices=VARIANTS, default="group_only")
    fp.add_argument("--interaction", metavar="V1:V2")
    fp.add_argument("--max-iter", type=int, default=10_000)
    fp.set_defaults(func=cmd_fit)

    sim = sub.add_parser("simulate", help="run a simulation setting")
    sim.add_argument("--config", help="flat 'key = value' file; flags override it")
    sim.add_argument("--setting", type=int)
    sim.add_argument("--s", type=int)
    sim.add_argument("--t")
    sim.add_argument("--p", type=int)
    sim.add_argument("--L", type=int)
    sim.add_argument("--n-train", type=int)
    sim.add_argument("--n-val", type=int)
    sim.add_argument("--sigma", type=float)
    sim.add_argument("--reps", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--methods", help="comma-separated subset of the setting's methods")
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--output", default="-")
    sim.add_argument("--summary", help="summary CSV path (default: next to --output)")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="catlasso: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"catlasso {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
