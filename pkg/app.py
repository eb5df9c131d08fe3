import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from harness.plotting import emit_plot
from harness.runner import run
from harness.spec import (
    KIND_BOUNDS,
    KIND_LIPSCHITZ,
    KIND_PACKING,
    KIND_RELU,
    KIND_RISK,
    ExperimentSpec,
)
from storage.results import PLOT_FILE
from utils.validation import CsvParseError, SpecValidationError

# Configure logging (default INFO). Allow override via LOG_LEVEL env.
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
numeric_level = getattr(logging, LOG_LEVEL, logging.INFO)
logging.basicConfig(level=numeric_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

# Suppress noisy third-party loggers
for noisy in [
    "matplotlib",
    "matplotlib.font_manager",
    "PIL",
]:
    logging.getLogger(noisy).setLevel(logging.WARNING)

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CELLS = 1
EXIT_BAD_INPUT = 2

COMMAND_KINDS = {
    "bounds": KIND_BOUNDS,
    "risk": KIND_RISK,
    "verify-relu": KIND_RELU,
    "verify-lipschitz": KIND_LIPSCHITZ,
    "verify-packing": KIND_PACKING,
}


def _default_relu_cases() -> list:
    cases = [{"n": n, "k": k, "r": r} for n, k, r in ((8, 2, 1.0), (32, 4, 1.0), (64, 4, 2.0))]
    cases += [{"R": R} for R in (1, 2, 4, 8, 16)]
    for k0, n0 in ((1, 4), (2, 4), (2, 6), (3, 6)):
        for regime in ("wide", "deep", "mixed(6)"):
            cases.append({"k0": k0, "n0": n0, "regime": regime})
    return cases


def _default_packing_cases() -> list:
    cases = [{"n_over_k": b, "k": k} for k in (1, 2, 3, 4) for b in (4, 6, 8)]
    cases += [{"k": k, "r": 1.0, "eps": eps} for k in (1, 2) for eps in (0.25, 0.5, 1.0, 2.0)]
    return cases


DEFAULT_SPECS = {
    KIND_BOUNDS: {
        "kind": KIND_BOUNDS,
        "description": "packing and sample-complexity bounds over n/k and k",
        "grid": {"n_over_k": [4, 8, 16], "k": [1, 2, 4]},
    },
    KIND_RISK: {
        "kind": KIND_RISK,
        "description": "exhaustive-decoder risk against m under the hard prior",
        "grid": {"n": [16], "k": [2], "alpha": [1.0], "m": list(range(1, 17))},
        "trials": 500,
    },
    KIND_RELU: {
        "kind": KIND_RELU,
        "description": "ReLU constructions against their direct definitions and budgets",
        "cases": _default_relu_cases(),
    },
    KIND_LIPSCHITZ: {
        "kind": KIND_LIPSCHITZ,
        "description": "empirical Lipschitz ratios of the rectangular generator",
        "grid": {"n_over_k": [2, 4, 8, 16, 32], "k": [1, 2], "r": [0.5, 1.0], "x_max": [1.0]},
    },
    KIND_PACKING: {
        "kind": KIND_PACKING,
        "description": "packing family combinatorics and greedy covers",
        "cases": _default_packing_cases(),
    },
}


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gensense",
        description="Bounds, constructions and Monte Carlo experiments for compressive sensing with generative priors",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, kind in COMMAND_KINDS.items():
        p = sub.add_parser(command, help=f"run a {kind} experiment")
        p.add_argument("--spec", help="experiment spec (JSON); a built-in default is used when omitted")
        p.add_argument("--out", help="output directory (default: GENSENSE_OUT_DIR or ./results)")
        p.add_argument("--seed", type=int, help="override the spec seed")
        p.add_argument("--trials", type=int, help="override the spec trial count")
        p.add_argument("--threads", type=int, help="override the spec thread count")
    p = sub.add_parser("plot", help="render plot.svg from a results CSV")
    p.add_argument("--csv", required=True, help="results CSV written by a risk run")
    p.add_argument("--out", help="output directory (default: next to the CSV)")
    return parser


def load_spec(kind: str, path: Optional[str]) -> ExperimentSpec:
    if path is None:
        return ExperimentSpec.from_dict(DEFAULT_SPECS[kind])
    spec = ExperimentSpec.from_file(path)
    if spec.kind != kind:
        raise SpecValidationError([f"spec kind {spec.kind!r} does not match this command ({kind})"])
    return spec


def _run_experiment(args) -> int:
    kind = COMMAND_KINDS[args.command]
    try:
        spec = load_spec(kind, args.spec)
        spec = spec.with_overrides(seed=args.seed, trials=args.trials, threads=args.threads, output_dir=args.out)
    except SpecValidationError as e:
        print(f"invalid spec: {len(e.errors)} error(s)", file=sys.stderr)
        for error in e.errors:
            print(f"  - {error}", file=sys.stderr)
        return EXIT_BAD_INPUT

    manifest = run(spec)
    counts = manifest.status_counts()
    print(
        f"{manifest.kind} {manifest.manifest_id}: {counts['ok']} ok, "
        f"{counts['skipped']} skipped, {counts['failed']} failed"
    )
    return EXIT_OK if manifest.all_ok else EXIT_FAILED_CELLS


def _run_plot(args) -> int:
    out_dir = args.out or os.path.dirname(os.path.abspath(args.csv))
    os.makedirs(out_dir, exist_ok=True)
    try:
        path = emit_plot(args.csv, os.path.join(out_dir, PLOT_FILE))
    except CsvParseError as e:
        print(f"cannot plot {args.csv}: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as e:
        print(f"cannot read {args.csv}: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    print(path)
    return EXIT_OK


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    args = create_parser().parse_args(argv)
    logger.debug(f"Command {args.command}")
    if args.command == "plot":
        return _run_plot(args)
    return _run_experiment(args)
