"""``qnn-dyn`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from ..kernels import ResourceCapError
from ..linalg import ContractError, DimensionError
from ..train import NumericalAbort
from .config import KINDS, ConfigError, ExperimentConfig, load_default
from .runners import run_experiment, verify_run
from .selftest import run_selftest

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 1, 2, 3, 4


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --seeds value {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qnn-dyn", description="Training-dynamics experiments for periodic-ansatz QNNs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", help="JSON config (defaults to the packaged one)")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")
        sp.add_argument("--allow-large", action="store_true", help="lift the desk-scale dimension caps")
    vp = sub.add_parser("verify", help="recompute a run record from its CSVs")
    vp.add_argument("--out", required=True, help="run directory containing run_record.json")
    sub.add_parser("selftest", help="run the built-in property checks")
    return ap


def _run(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else load_default(args.command)
    if cfg.kind != args.command:
        raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.command!r}")
    if args.seeds:
        cfg = cfg.replace(seeds=_parse_seeds(args.seeds))
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    out = args.out or cfg.output_dir
    rec = run_experiment(cfg, out, threads=args.threads, allow_large=args.allow_large)
    print(f"{cfg.kind}: config {rec.config_hash}, {len(rec.seed_files)} seed files, {rec.wall_clock:.1f} s -> {out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "selftest":
            return EXIT_OK if run_selftest() else EXIT_FAIL
        if args.command == "verify":
            ok, problems = verify_run(args.out)
            for p in problems:
                print(f"MISMATCH {p}")
            print("verify: OK" if ok else "verify: FAILED")
            return EXIT_OK if ok else EXIT_FAIL
        return _run(args)
    except (ConfigError, DimensionError, ContractError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
