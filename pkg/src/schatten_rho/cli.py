"""Command-line entry point.

Exit codes: 0 when every row-level invariant holds, 2 on an invariant
violation or module error, 3 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from .distances import parse_exponent
from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_CONFIG = 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def _exponent(text: str) -> float:
    try:
        return parse_exponent(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schatten-rho",
        description="Schatten-norm distances between Gaussian measures and the metrization counterexample.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        # defaults stay None so a --config file can fill them in
        sp.add_argument("--p", type=_exponent, help="Schatten exponent in [1, inf]; 'inf' allowed")
        sp.add_argument("--ns", type=_int_list, help="increasing list of n values, e.g. 1,10,100")
        sp.add_argument("--dims", type=_int_list, help="increasing list of truncation dimensions")
        sp.add_argument("--samples", dest="mc_samples", type=int, help="Monte Carlo sample count (>= 1000)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--output", help="output path (default: stdout)")
        sp.add_argument("--config", help="JSON file with any of the options above")
        sp.add_argument("--dim-pad", dest="dim_pad", type=int, help="extra zero coordinates, d = n + pad")
        sp.add_argument("--workers", type=int, help="threads for rows and sampling blocks")
        sp.add_argument("--profile", choices=("constant", "gauss_bump"))
        sp.add_argument("--amplitude", type=float)
        sp.add_argument("--sigma", type=float)
        sp.add_argument("--offset", type=float, help="|x - y| along e_1 for radial-growth")
        sp.add_argument("--budget", type=int, help="optimizer evaluations for rho-lower")
        sp.add_argument("--method", choices=("exact", "mc"), help="expectation method for rho-lower")
    return parser


_KNOWN = {f.name for f in fields(ExperimentConfig)} - {"experiment"}
_ALIASES = {"samples": "mc_samples", "dim-pad": "dim_pad"}


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    lines = text.splitlines()
    out = {}
    for key, value in raw.items():
        name = _ALIASES.get(key, key)
        if name not in _KNOWN:
            lineno = next((i + 1 for i, ln in enumerate(lines) if f'"{key}"' in ln), 1)
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if name == "p":
            try:
                value = parse_exponent(value)
            except ValueError as exc:
                raise ConfigError(f"{path}: p: {exc}")
        out[name] = value
    return out


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config_file(args.config) if args.config else {}
    for name in _KNOWN:
        given = getattr(args, name, None)
        if given is not None:
            values[name] = given
    try:
        cfg = ExperimentConfig(experiment=args.experiment, **values)
    except TypeError as exc:
        raise ConfigError(str(exc))
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = make_config(args)
    except ConfigError as exc:
        for line in str(exc).splitlines():
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        table = run(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT

    text = table.render(cfg.format)
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for msg in table.failures:
        print(f"invariant violated: {msg}", file=sys.stderr)
    return EXIT_OK if table.ok else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
