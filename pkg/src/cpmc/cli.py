"""Command-line surface: decompose, compare, slice, eval, selftest.

All numeric CSV output uses 17 significant digits (full float64 round-trip
precision); node indices in files and on the command line are 1-based.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, build_runspec, make_oracle, parse_config_file
from .mc import global_discrepancy, sample_global_ensemble
from .model import cp_values0, eval_cp, load_cpd1, save_cpd1
from .selftest import run_selftest
from .solvers import METHODS, ConvergenceRecord, init_random_start, measure_grid, run

log = logging.getLogger(__name__)

_CSV_HEADER = "sweep,eps_mc,eps_grid_mean,grad_norm,wall_seconds"

_SOLVER_KEYS = (
    "method", "r", "L_ens", "L_ens_t", "eta", "sigma", "eps2", "max_sweeps",
    "tau_mode", "tau", "master_seed", "f39_rad", "pivot_tol",
)
_ORACLE_KEYS = ("oracle", "oracle_path", "d", "N")
_OUTPUT_KEYS = ("cores_out", "csv_out", "plot")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _record_fields(record: ConvergenceRecord) -> str:
    return ",".join([
        str(record.sweep),
        _fmt(record.eps_mc),
        _fmt(record.eps_grid_mean),
        _fmt(record.grad_norm),
        _fmt(record.wall_seconds),
    ])


def _write_convergence_csv(path, records) -> None:
    lines = [_CSV_HEADER] + [_record_fields(rec) for rec in records]
    Path(path).write_text("\n".join(lines) + "\n")


def _write_comparison_csv(path, records_by_method) -> None:
    lines = ["method," + _CSV_HEADER]
    for method, records in records_by_method.items():
        lines.extend(f"{method},{_record_fields(rec)}" for rec in records)
    Path(path).write_text("\n".join(lines) + "\n")


def _write_grid_csv(path, grid) -> None:
    lines = [",".join(_fmt(v) for v in row) for row in np.asarray(grid)]
    Path(path).write_text("\n".join(lines) + "\n")


def _figure_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".png")


def _add_solver_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("solver options (override the config file)")
    group.add_argument("--method", choices=METHODS, help="core-update scheme")
    group.add_argument("--r", type=int, help="decomposition rank")
    group.add_argument("--L-ens", dest="L_ens", type=int, help="points per hyperplane ensemble")
    group.add_argument("--L-ens-t", dest="L_ens_t", type=int, help="points for the global estimate")
    group.add_argument("--eta", type=float, help="Tikhonov regularization coefficient")
    group.add_argument("--sigma", type=float, help="random-start dispersion")
    group.add_argument("--eps2", type=float, help="stopping threshold on eps_mc")
    group.add_argument("--max-sweeps", dest="max_sweeps", type=int, help="sweep budget")
    group.add_argument("--tau-mode", dest="tau_mode", choices=("auto-quadratic", "fixed"),
                       help="steepest-descent step rule")
    group.add_argument("--tau", type=float, help="fixed steepest-descent step")
    group.add_argument("--master-seed", dest="master_seed", type=int, help="run seed")
    group.add_argument("--f39-rad", dest="f39_rad", choices=("linear", "squared"),
                       help="radial term form of the f39 benchmark")
    group.add_argument("--pivot-tol", dest="pivot_tol", type=float, help="singularity threshold")


def _add_oracle_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("target selection")
    group.add_argument("--oracle", choices=("f38", "f39", "cpd", "dense"),
                       help="target tensor: analytic benchmark, CPD1 file, or .npy array")
    group.add_argument("--oracle-path", dest="oracle_path",
                       help="cores file (cpd) or dense .npy array (dense)")
    group.add_argument("--d", type=int, help="tensor order (f38/f39 require 6)")
    group.add_argument("--N", type=int, help="nodes per coordinate for analytic targets")


def _collect_overrides(args, keys) -> dict:
    return {key: getattr(args, key) for key in keys if getattr(args, key, None) is not None}


def _build_spec(args, with_method=True):
    file_values = parse_config_file(args.config) if args.config else {}
    keys = _SOLVER_KEYS + _ORACLE_KEYS + _OUTPUT_KEYS
    if not with_method:
        keys = tuple(k for k in keys if k != "method")
        file_values.pop("method", None)
    overrides = _collect_overrides(args, keys)
    return build_runspec(file_values, overrides)


def cmd_decompose(args) -> int:
    spec = _build_spec(args)
    oracle = make_oracle(spec)
    model, records = run(oracle, spec.solver)
    save_cpd1(model, spec.cores_out)
    _write_convergence_csv(spec.csv_out, records)
    if spec.plot:
        from .plots import convergence_figure

        convergence_figure(records, _figure_path(spec.csv_out),
                           title=f"{spec.oracle} / {spec.solver.method}")
    final = records[-1]
    converged = final.eps_mc <= spec.solver.eps2
    status = "converged" if converged else "max sweeps reached"
    print(f"final eps_mc={_fmt(final.eps_mc)} after {final.sweep} sweeps ({status})")
    print(f"cores written to {spec.cores_out}, convergence log to {spec.csv_out}")
    return 0 if converged else 2


def cmd_compare(args) -> int:
    spec = _build_spec(args, with_method=False)
    oracle = make_oracle(spec)
    cfg = spec.solver
    dims = oracle.dims

    # Shared sweep-0 row: same seed, same initial model, same ensembles.
    init_model = init_random_start(dims, cfg.r, cfg.sigma, cfg.master_seed)
    eps0 = global_discrepancy(
        init_model, oracle, sample_global_ensemble(dims, cfg.L_ens_t, (cfg.master_seed, 0))
    )
    stats0 = measure_grid(init_model, oracle, cfg, sweep_no=0)
    row0 = ConvergenceRecord(0, eps0, stats0.eps_grid_mean, stats0.grad_norm, 0.0)

    records_by_method = {}
    for method in METHODS:
        log.info("running method %s", method)
        _, records = run(oracle, replace(cfg, method=method))
        records_by_method[method] = [row0] + records
    _write_comparison_csv(spec.csv_out, records_by_method)
    if spec.plot:
        from .plots import comparison_figure

        comparison_figure(records_by_method, _figure_path(spec.csv_out),
                          title=f"{spec.oracle} method comparison")
    for method, records in records_by_method.items():
        final = records[-1]
        print(f"{method}: eps_mc={_fmt(final.eps_mc)} after {final.sweep} sweeps")
    print(f"comparison log written to {spec.csv_out}")
    return 0


def cmd_slice(args) -> int:
    model = load_cpd1(args.cores)
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = _collect_overrides(args, _ORACLE_KEYS + ("f39_rad", "slice_out", "plot"))
    merged_keys = set(file_values) | set(overrides)
    if "d" not in merged_keys:
        overrides["d"] = model.d
    if "N" not in merged_keys:
        overrides["N"] = model.dims[0]
    spec = build_runspec(file_values, overrides)
    oracle = make_oracle(spec)
    if tuple(oracle.dims) != model.dims:
        raise ConfigError(f"cores dims {model.dims} do not match oracle dims {oracle.dims}")

    c1, c2 = args.plane
    d = model.d
    if not (1 <= c1 <= d and 1 <= c2 <= d) or c1 == c2:
        raise ConfigError(f"plane coordinates must be distinct and in 1..{d}, got {c1},{c2}")
    dims = model.dims
    center = args.center
    if center is not None and not all(
        1 <= center <= dims[s] for s in range(d) if s not in (c1 - 1, c2 - 1)
    ):
        raise ConfigError(f"center node {center} out of range for dims {dims}")

    n1, n2 = dims[c1 - 1], dims[c2 - 1]
    points0 = np.empty((n1 * n2, d), dtype=np.int64)
    for s in range(d):
        # ceil(N/2), 1-based, unless an explicit center was given
        fixed = (center if center is not None else (dims[s] + 1) // 2) - 1
        points0[:, s] = fixed
    grid1, grid2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    points0[:, c1 - 1] = grid1.ravel()
    points0[:, c2 - 1] = grid2.ravel()

    oracle_grid = oracle.values0(points0).reshape(n1, n2)
    residual_grid = cp_values0(model.cores, points0).reshape(n1, n2) - oracle_grid

    prefix = Path(spec.slice_out)
    oracle_path = prefix.parent / f"{prefix.name}_oracle.csv"
    residual_path = prefix.parent / f"{prefix.name}_residual.csv"
    _write_grid_csv(oracle_path, oracle_grid)
    _write_grid_csv(residual_path, residual_grid)
    if spec.plot:
        from .plots import slice_figure

        slice_figure(oracle_grid, residual_grid, prefix.parent / f"{prefix.name}.png",
                     (c1, c2), title=f"section by plane ({c1},{c2})")
    print(f"slice grids written to {oracle_path} and {residual_path}")
    return 0


def cmd_eval(args) -> int:
    model = load_cpd1(args.cores)
    try:
        index = [int(part) for part in args.index.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad multi-index {args.index!r}: {exc}") from exc
    value = eval_cp(model, index)
    print(_fmt(value))
    return 0


def cmd_selftest(args) -> int:
    results = run_selftest(corrupt_gradient_sign=args.corrupt_gradient_sign)
    failures = [res for res in results if not res.ok]
    for res in results:
        print(f"{'PASS' if res.ok else 'FAIL'} {res.name}: {res.detail}")
    if failures:
        print(f"{len(failures)} of {len(results)} properties failed: "
              + ", ".join(res.name for res in failures))
        return 3
    print(f"all {len(results)} properties passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpmc",
        description="Rank-r canonical decomposition of function-defined tensors "
                    "via Monte-Carlo hyperplane discrepancies.",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress per-sweep log lines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="run one solver and write cores + convergence log")
    p.add_argument("--config", help="flat key=value run configuration file")
    _add_solver_options(p)
    _add_oracle_options(p)
    p.add_argument("--cores-out", dest="cores_out", help="output CPD1 cores file")
    p.add_argument("--csv-out", dest="csv_out", help="output convergence CSV")
    p.add_argument("--plot", dest="plot", action=argparse.BooleanOptionalAction,
                   help="render the convergence figure next to the CSV")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("compare", help="run all three methods from one shared start")
    p.add_argument("--config", help="flat key=value run configuration file")
    _add_solver_options(p)
    _add_oracle_options(p)
    p.add_argument("--cores-out", dest="cores_out", help=argparse.SUPPRESS)
    p.add_argument("--csv-out", dest="csv_out", help="output merged comparison CSV")
    p.add_argument("--plot", dest="plot", action=argparse.BooleanOptionalAction,
                   help="render the comparison figure next to the CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("slice", help="export a 2-D section of the target and the error")
    p.add_argument("--config", help="flat key=value run configuration file")
    p.add_argument("--cores", required=True, help="CPD1 cores file")
    _add_oracle_options(p)
    p.add_argument("--f39-rad", dest="f39_rad", choices=("linear", "squared"),
                   help="radial term form of the f39 benchmark")
    p.add_argument("--plane", nargs=2, type=int, required=True, metavar=("C1", "C2"),
                   help="the two 1-based coordinates spanning the section")
    p.add_argument("--center", type=int,
                   help="1-based node for the fixed coordinates (default: middle node)")
    p.add_argument("--out", dest="slice_out", help="output path prefix (default: slice)")
    p.add_argument("--plot", dest="plot", action=argparse.BooleanOptionalAction,
                   help="render the section figure next to the CSVs")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("eval", help="evaluate a cores file at one multi-index")
    p.add_argument("--cores", required=True, help="CPD1 cores file")
    p.add_argument("index", help="1-based multi-index, e.g. 1,2,3,4,5,6")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftest", help="run the property battery against the dense reference")
    p.add_argument("--corrupt-gradient-sign", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, OSError, IndexError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
