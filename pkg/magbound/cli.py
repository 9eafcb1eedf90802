"""
Command-line driver.

    python -m magbound.cli pure-hcrb 0.8 0.42426407 0.42426407 0
    python -m magbound.cli pure-hcrb --random 20 --seed 7
    python -m magbound.cli channel-hcrb 0.1
    python -m magbound.cli copies-bound 0.1 2
    python -m magbound.cli qc-bound 0.2 --independent-qc-measurements
    python -m magbound.cli sweep --config sweep.cfg --resume
    python -m magbound.cli entanglement-curve --samples 500

Exit codes: 0 success, 2 non-convergence, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from magbound.config import load_sweep_config, settings
from magbound.errors import InvalidConfigError, NonConvergenceError
from magbound.models.states import RealTwoQubitState, sample_real_states
from magbound.schemas import BoundResult, SweepConfig
from magbound.services import experiments

logger = logging.getLogger("magbound")

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_INVALID_CONFIG = 3


def _sweep_config(args: argparse.Namespace, gamma: Optional[float] = None) -> SweepConfig:
    if gamma is not None and not 0.0 <= gamma <= 1.0:
        raise InvalidConfigError(f"gamma {gamma} outside [0, 1]")
    overrides = {"seed": args.seed, "out": getattr(args, "out", None)}
    if getattr(args, "independent_qc_measurements", False):
        overrides["independent_qc_measurements"] = True
    if args.config:
        return load_sweep_config(args.config, **overrides)
    data = {k: v for k, v in overrides.items() if v is not None}
    data.setdefault("seed", settings.default_seed)
    data["gamma_grid"] = [0.0 if gamma is None else gamma]
    try:
        return SweepConfig.model_validate(data)
    except ValueError as exc:
        raise InvalidConfigError(str(exc)) from exc


def _print_result(result: BoundResult) -> None:
    print(json.dumps(result.model_dump(), indent=2))


def cmd_pure_hcrb(args: argparse.Namespace) -> int:
    if args.random:
        rng = np.random.default_rng(settings.default_seed if args.seed is None else args.seed)
        states = sample_real_states(args.random, rng)
    elif len(args.r) == 4:
        try:
            states = [RealTwoQubitState(np.array(args.r, dtype=float))]
        except ValueError as exc:
            raise InvalidConfigError(str(exc)) from exc
    else:
        raise InvalidConfigError("pure-hcrb needs four amplitudes or --random n")
    table = experiments.pure_hcrb_table(states)
    with pd.option_context("display.float_format", "{:.8f}".format, "display.width", 160):
        print(table.to_string(index=False))
    return EXIT_OK


def cmd_channel_hcrb(args: argparse.Namespace) -> int:
    config = _sweep_config(args, args.gamma)
    result, artifacts = experiments.channel_hcrb(
        args.gamma, config.optimizer, config.restarts, config.restart_tol, config.seed
    )
    _print_result(result)
    print("psi0 =", np.array2string(artifacts.psi0, precision=6))
    return EXIT_OK


def cmd_copies_bound(args: argparse.Namespace) -> int:
    config = _sweep_config(args, args.gamma)
    result = experiments.copies_bound(
        args.gamma, args.k, config.optimizer, config.restarts, config.restart_tol, config.seed
    )
    _print_result(result)
    return EXIT_OK


def cmd_qc_bound(args: argparse.Namespace) -> int:
    config = _sweep_config(args, args.gamma)
    result = experiments.qc_bound(
        args.gamma,
        config.optimizer,
        config.restarts,
        config.restart_tol,
        config.seed,
        independent_measurements=config.independent_qc_measurements,
    )
    _print_result(result)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    if not args.config:
        raise InvalidConfigError("sweep needs --config")
    config = _sweep_config(args)
    frame = experiments.run_sweep(config, resume=args.resume)
    print(f"{len(frame)} rows written to {config.out}")
    return EXIT_OK


def cmd_entanglement_curve(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(settings.default_seed if args.seed is None else args.seed)
    table = experiments.entanglement_table(sample_real_states(args.samples, rng))
    with pd.option_context("display.float_format", "{:.6f}".format):
        print(table.to_string(index=False))
    print("argmin C^H:", table.attrs["argmin_holevo"])
    print("argmin C^S:", table.attrs["argmin_sld"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magbound", description="Cramer-Rao bounds for two-qubit 3D magnetometry")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", type=Path, default=None)
    common.add_argument("--out", type=Path, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pure-hcrb", parents=[common], help="closed-form and solver HCRB of real pure states")
    p.add_argument("r", nargs="*", type=float)
    p.add_argument("--random", type=int, default=0, metavar="N")
    p.set_defaults(func=cmd_pure_hcrb)

    p = sub.add_parser("channel-hcrb", parents=[common], help="HCRB minimized over input states")
    p.add_argument("gamma", type=float)
    p.set_defaults(func=cmd_channel_hcrb)

    p = sub.add_parser("copies-bound", parents=[common], help="k-copy projective bound")
    p.add_argument("gamma", type=float)
    p.add_argument("k", type=int, choices=[1, 2, 3])
    p.set_defaults(func=cmd_copies_bound)

    p = sub.add_parser("qc-bound", parents=[common], help="entangled input, product measurement bound")
    p.add_argument("gamma", type=float)
    p.add_argument("--independent-qc-measurements", action="store_true")
    p.set_defaults(func=cmd_qc_bound)

    p = sub.add_parser("sweep", parents=[common], help="all bounds across a gamma grid into CSV")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--independent-qc-measurements", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("entanglement-curve", parents=[common], help="bounds against concurrence")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_entanglement_curve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_INVALID_CONFIG
    except NonConvergenceError as exc:
        logger.error("did not converge: %s", exc)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
