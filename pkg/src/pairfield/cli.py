"""Command-line entry point: run, validate, inspect, version.

Exit codes: 0 success, 1 validation error (bad usage or bad config),
2 runtime/numerical error, 3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import sys

from . import io as pfio
from .charges import compute_charge_record, upper_triangle_labels
from .dynamics import Potential
from .lattice import integrate_values
from .scenario import (
    VERSION,
    ConfigError,
    ScenarioError,
    build_potential,
    load_config,
    potential_spec_from_dict,
    run_scenario,
)

import numpy as np


class UsageError(Exception):
    pass


def _thread_cap(n: int):
    """Limit BLAS/OpenMP pools for the run; falls back to env hints."""
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=n)
    except ImportError:
        import contextlib
        import os

        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)
        return contextlib.nullcontext()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pairfield", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    run = sub.add_parser("run", help="execute a scenario config")
    run.add_argument("config", help="path to a JSON scenario config")
    run.add_argument("--output-dir", default=None, help="override the config's output directory")
    run.add_argument(
        "--threads",
        type=int,
        default=1,
        help="linear-algebra thread cap (default 1; determinism is only guaranteed at 1)",
    )
    run.add_argument(
        "--allow-large-dt",
        action="store_true",
        help="accept a dt beyond the stiffness bound (same effect as evolution.allow_large_dt)",
    )
    run.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed recorded in the manifest for randomized scenarios (no built-in task draws randomness)",
    )
    val = sub.add_parser("validate", help="parse and validate a config without running it")
    val.add_argument("config", help="path to a JSON scenario config")
    ins = sub.add_parser("inspect", help="print grid, time, norm and charges of a saved state")
    ins.add_argument("file", help="path to a .pfld checkpoint or lattice snapshot")
    sub.add_parser("version", help="print the package version")
    return parser


def _fmt(value: float) -> str:
    return repr(float(value))


def _inspect(path) -> int:
    if pfio.is_checkpoint(path):
        state, constants, manifest = pfio.load_state(path)
        descriptor = manifest.get("potential")
        if isinstance(descriptor, dict) and "type" in descriptor:
            spec = potential_spec_from_dict(descriptor, state.grid.ndim)
            pot = build_potential(spec, state.grid, constants)
        else:
            pot = Potential.zero(state.grid)
            descriptor = {"type": "zero"}
        rec = compute_charge_record(state, pot, constants)
        print("kind: field state checkpoint")
        print(f"grid points: {state.grid.points}")
        print(f"grid lengths: {tuple(_fmt(v) for v in state.grid.lengths)}")
        print(f"constants: h={_fmt(constants.h)} m={_fmt(constants.m)} c={_fmt(constants.c)}")
        print(f"potential: {descriptor}")
        print(f"time: {_fmt(rec.time)}")
        print(f"norm: {_fmt(rec.norm)}")
        print(f"energy: {_fmt(rec.energy)}")
        for j, value in enumerate(rec.momentum):
            print(f"m_{j + 1}: {_fmt(value)}")
        for label, value in zip(upper_triangle_labels(rec.ndim), rec.angular_momentum):
            print(f"{label}: {_fmt(value)}")
        print(f"phase_charge: {_fmt(rec.phase_charge)}")
        print(f"adiabatic_residual: {_fmt(rec.adiabatic_residual)}")
        return 0
    lat = pfio.load_lattice(path)
    complex_valued = np.iscomplexobj(lat.values)
    print(f"kind: {'complex' if complex_valued else 'real'} lattice snapshot")
    print(f"grid points: {lat.grid.points}")
    print(f"grid lengths: {tuple(_fmt(v) for v in lat.grid.lengths)}")
    print(f"integral_of_square_magnitude: {_fmt(integrate_values(lat.grid, np.abs(lat.values) ** 2))}")
    if not complex_valued:
        print(f"integral: {_fmt(integrate_values(lat.grid, lat.values))}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1

    try:
        if args.command == "version":
            print(VERSION)
            return 0
        if args.command == "validate":
            load_config(args.config)
            print("OK")
            return 0
        if args.command == "run":
            if args.threads < 1:
                print("error: --threads must be at least 1", file=sys.stderr)
                return 1
            cfg = load_config(args.config, allow_large_dt=args.allow_large_dt)
            with _thread_cap(args.threads):
                manifest = run_scenario(cfg, output_dir=args.output_dir, seed=args.seed)
            outdir = args.output_dir if args.output_dir is not None else cfg.output_dir
            print(f"wrote {len(manifest['files']) + 1} files to {outdir}")
            return 0
        return _inspect(args.file)
    except ConfigError as exc:
        for line in exc.errors:
            print(line, file=sys.stderr)
        return 1
    except pfio.FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except ScenarioError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
