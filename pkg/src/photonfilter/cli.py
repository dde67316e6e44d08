"""Command line: ``photonfilter run`` writes CSV/JSON tables, ``photonfilter verify`` checks acceptance."""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, acceptance, experiments
from .experiments import ConfigError
from .fock import CutoffTooSmallError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_sets(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v)
    return out


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    bad = set(cfg) - {"experiment", "params", "seed", "out", "threads"}
    if bad:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(bad))}")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="photonfilter", description="Photon-number filter and counter simulations.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write a CSV (or JSON for plan)")
    run.add_argument("--experiment", choices=sorted(experiments.RUNNERS))
    run.add_argument("--config", help="JSON file with experiment, params, seed, out")
    run.add_argument("--out", help="output path; '-' or omitted prints to stdout")
    run.add_argument("--seed", type=int, help="seed for stochastic runs")
    run.add_argument("--threads", type=int, default=None, help="worker processes for grid sweeps")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one parameter (JSON value)")

    ver = sub.add_parser("verify", help="run the acceptance checks")
    ver.add_argument("--only", help="restrict to one module (fock, cascade, counter, loss, cavity)")
    return ap


def _run(args) -> int:
    cfg = _load_config(args.config)
    experiment = args.experiment or cfg.get("experiment")
    if experiment is None:
        raise ConfigError("no experiment given (use --experiment or a config file)")
    overrides = dict(cfg.get("params", {}))
    overrides.update(_parse_sets(args.set))
    params = experiments.resolve(experiment, overrides)
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0 or seed >= 2**64):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    threads = args.threads if args.threads is not None else int(cfg.get("threads", 1))
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    out = args.out if args.out is not None else cfg.get("out")
    echo = dict(params)
    if seed is not None:
        echo["seed"] = seed

    result = experiments.run_experiment(experiment, params, seed, threads)
    if isinstance(result, dict):
        result["params"] = echo
        text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    else:
        result.params = echo
        text = experiments.to_csv(result, experiment)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {out}: {exc}") from exc
    return EXIT_OK


def _verify(args) -> int:
    try:
        outcomes = acceptance.run(args.only)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    failed = [o for o in outcomes if not o.passed]
    print(f"{len(outcomes) - len(failed)}/{len(outcomes)} criteria passed")
    return EXIT_FAIL if failed else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return _run(args) if args.command == "run" else _verify(args)
    except (ConfigError, CutoffTooSmallError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
