"""``ccflow`` command line: simulate, check, degenerate, list-models.

Every failure prints one line ``ccflow: error[<CODE>]: <message>`` to stderr and
exits with a non-zero status specific to the error class.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ccflow.errors import CCFlowError, ConfigError
from ccflow.hamiltonian import METHODS
from ccflow.models import degeneration_sweep
from ccflow.runner import (
    MODELS,
    RunConfig,
    build_model,
    check_algebra,
    check_model,
    load_algebra,
    simulate,
    write_report,
    write_trajectory_csv,
)

SEED_ENV = "CCFLOW_SEED"
CHECK_FAILED_STATUS = 1
USAGE_STATUS = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fail(code: str, message: str, status: int) -> int:
    print(f"ccflow: error[{code}]: {message}", file=sys.stderr)
    return status


def _parse_vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}") from exc


def _parse_param(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(args) -> RunConfig:
    """Config file (or stdin for ``-``), then ``CCFLOW_SEED``, then flags."""
    if args.config == "-":
        cfg = RunConfig.from_json(sys.stdin.read())
    elif args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = RunConfig.from_json(text)
    elif args.model:
        cfg = RunConfig(model=args.model)
    else:
        raise ConfigError("give a config file or --model")
    if args.model:
        if args.model != cfg.model:
            cfg.params = {}
        cfg.model = args.model
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            cfg.seed = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env_seed!r}") from exc
    for key in ("dt", "t_final", "method", "seed", "out_trajectory", "out_report"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    if args.initial_state is not None:
        cfg.initial_state = _parse_vector(args.initial_state)
    for item in args.param or []:
        key, value = _parse_param(item)
        cfg.params = {**cfg.params, key: value}
    return cfg.validate()


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    model, traj, report = simulate(cfg, timing=args.timing)
    data = report.to_dict()
    if args.print_config:
        print(cfg.to_json())
    if cfg.out_trajectory:
        write_trajectory_csv(traj, cfg.out_trajectory)
    if cfg.out_report:
        write_report(data, cfg.out_report)
    if not cfg.out_report:
        print(json.dumps(data, indent=2, sort_keys=True))
    bad = [v for v in report.residuals() if not (np.isfinite(v) and v >= 0)]
    if bad:
        return _fail("E_BAD_RESIDUAL", f"non-finite or negative residuals in report: {bad}", CHECK_FAILED_STATUS)
    return 0


def cmd_check(args) -> int:
    results = []
    if args.algebra_file:
        results += check_algebra(load_algebra(args.algebra_file))
    if args.model:
        model = build_model(args.model, dict(_parse_param(p) for p in args.param or []))
        seed = int(os.environ.get(SEED_ENV, args.seed))
        model_results, matrix = check_model(model, args.samples, seed)
        results += model_results
        if matrix is not None:
            names, mat = matrix
            print("bracket residual matrix " + " ".join(names))
            for name, row in zip(names, mat):
                print(f"  {name:>12s} " + " ".join(f"{v:.3e}" for v in row))
    if not results:
        raise _UsageError("check needs a model name or --algebra-file")
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        failed += not r.passed
        print(f"{status} {r.name}: {r.value:.3e} (threshold {r.threshold:.0e})")
    if failed:
        return _fail("E_CHECK_FAILED", f"{failed} of {len(results)} checks failed", CHECK_FAILED_STATUS)
    return 0


def cmd_degenerate(args) -> int:
    if not args.D:
        raise _UsageError("degenerate needs at least one value of D")
    if any(not d > 0 for d in args.D):
        raise ConfigError(f"every D must be positive, got {args.D}")
    M0 = _parse_vector(args.M0)
    if len(M0) != 3:
        raise ConfigError("M0 must have 3 components")
    rows, monotone = degeneration_sweep(args.D, M0, args.T, args.dt, args.method)
    print(f"{'D':>12s} {'sup_gap':>24s}")
    for row in rows:
        print(f"{row.D:12g} {row.gap!r:>24s}")
    if monotone is not None:
        print(f"strictly_decreasing: {str(monotone).lower()}")
    if args.out:
        payload = {"M0": M0, "T": args.T, "dt": args.dt, "method": args.method,
                   "rows": [{"D": r.D, "gap": r.gap} for r in rows], "strictly_decreasing": monotone}
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_list_models(args) -> int:
    for name, entry in MODELS.items():
        params = ", ".join(f"{k}={v!r}" for k, v in entry.defaults.items()) or "-"
        model = build_model(name)
        print(f"{name:22s} {entry.summary}")
        print(f"{'':22s}   coords: {' '.join(model.coords)}; params: {params}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccflow", description="Carnot-Caratheodory geodesic flows and their first integrals.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sim = sub.add_parser("simulate", help="integrate a model and write trajectory/report")
    sim.add_argument("config", nargs="?", help="JSON config path, or '-' for stdin")
    sim.add_argument("--model")
    sim.add_argument("--param", action="append", metavar="KEY=VALUE", help="model parameter (JSON value)")
    sim.add_argument("--initial-state", help="comma separated state vector")
    sim.add_argument("--dt", type=float)
    sim.add_argument("--t-final", dest="t_final", type=float)
    sim.add_argument("--method", choices=METHODS)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out-trajectory", dest="out_trajectory")
    sim.add_argument("--out-report", dest="out_report")
    sim.add_argument("--timing", action="store_true", help="add wall-clock time to the report")
    sim.add_argument("--print-config", action="store_true", help="echo the resolved config")
    sim.set_defaults(func=cmd_simulate)

    chk = sub.add_parser("check", help="validate structure, gradients and involution")
    chk.add_argument("model", nargs="?")
    chk.add_argument("--param", action="append", metavar="KEY=VALUE")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--samples", type=int, default=100)
    chk.add_argument("--algebra-file", help="JSON with basis_names and structure_constants to validate")
    chk.set_defaults(func=cmd_check)

    deg = sub.add_parser("degenerate", help="G_D Euler flows versus the CC limit")
    deg.add_argument("--D", type=float, nargs="*", default=[10.0, 100.0, 1000.0])
    deg.add_argument("--M0", default="1,1,1")
    deg.add_argument("--T", type=float, default=5.0)
    deg.add_argument("--dt", type=float, default=1e-3)
    deg.add_argument("--method", choices=METHODS, default="implicit_midpoint")
    deg.add_argument("--out", help="write the table as JSON")
    deg.set_defaults(func=cmd_degenerate)

    lst = sub.add_parser("list-models", help="show available models")
    lst.set_defaults(func=cmd_list_models)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("missing command (simulate, check, degenerate, list-models)")
        return args.func(args)
    except _UsageError as exc:
        return _fail("E_USAGE", str(exc), USAGE_STATUS)
    except CCFlowError as exc:
        return _fail(exc.code, str(exc), exc.exit_status)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return _fail("E_INVALID", str(exc), USAGE_STATUS)


if __name__ == "__main__":
    sys.exit(main())
