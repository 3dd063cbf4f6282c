"""
``catsense`` command line.

Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 validation
failure. A JSON file passed with ``--config`` supplies defaults that explicit
flags override.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from .experiments import COMMANDS, ConfigError, RunConfig, run, workers_from_env
from .evolution import t2_to_lambda
from .metrology import DegenerateWorkingPoint, NumericalFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4


def parse_n_range(text: str) -> list[int]:
    """``A..B`` (step 2, keeps parity), ``A..B:S``, ``a,b,c`` or a single integer."""
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = (int(x) for x in span.split(".."))
            step_n = int(step) if step else 2
            if step_n < 1 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1, step_n))
        return sorted(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size range {text!r}; use A..B, A..B:S or a,b,c") from None


def parse_t_range(text: str) -> tuple[list[float], int | None]:
    """``A..B/P`` (P log-spaced points), ``A..B`` or a single value."""
    try:
        if ".." in text:
            span, _, pts = text.partition("/")
            lo, hi = (float(x) for x in span.split(".."))
            if not 0 < lo < hi:
                raise ValueError
            return [lo, hi], int(pts) if pts else None
        return [float(text)], None
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad time range {text!r}; use A..B/P or a single value") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catsense", description="Cat-state Ramsey sensing experiments.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--family", help="probe state family, e.g. ghz, staircase, rho_ex, mz_projected_thermal")
    parser.add_argument("--obs", choices=("mz", "mx", "my"), help="additive observable")
    parser.add_argument("--N", dest="ns", type=parse_n_range, help="system sizes: A..B (step 2), A..B:S, list")
    parser.add_argument("--b", type=float, help="dimensionless Zeeman weight of the thermal state")
    parser.add_argument("--M", dest="m", type=int, help="magnetization sector for the projected state")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("--lambda", dest="lam", type=float, help="noise amplitude")
    noise.add_argument("--T2", dest="t2", type=float, help="coherence time, sets lambda = 1/(sqrt(2) T2)")
    parser.add_argument("--tauc", dest="tau_c", type=float, help="noise correlation time")
    parser.add_argument("--p2", type=float, help="fixed phase budget; omitted means scan the working point")
    parser.add_argument("--T", dest="total_time", type=float, help="total sensing time")
    parser.add_argument("--t", dest="t_spec", type=parse_t_range, help="interaction time A..B/points or value")
    parser.add_argument("--eta", help="readout rule: optimal, self, sector, majority[:axis]")
    parser.add_argument("--model", choices=("simulate", "closed-form"))
    parser.add_argument("--n-traj", dest="n_traj", type=int, help="Monte Carlo trajectories")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output file (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--config", help="JSON config file; flags override its entries")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        if "T2" in data:
            data["lam"] = t2_to_lambda(float(data.pop("T2")))
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "t2", "t_spec")}
    data.update(flags)
    if args.t2 is not None:
        if args.t2 <= 0:
            raise ConfigError("T2 must be positive")
        data["lam"] = t2_to_lambda(args.t2)
    if args.t_spec is not None:
        data["t_values"], points = args.t_spec
        if points is not None:
            data["t_points"] = points
    data.setdefault("threads", workers_from_env())
    return RunConfig.from_dict(data)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = config_from_args(args)
        result = run(cfg)
    except (ConfigError, TypeError) as exc:
        print(f"catsense: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, DegenerateWorkingPoint, np.linalg.LinAlgError, OverflowError, FloatingPointError) as exc:
        print(f"catsense: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = result.render(cfg.format)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not result.passed:
        print("catsense: validation failed", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
