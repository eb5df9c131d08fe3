"""Experiment runner.

Cells run independently (optionally on a thread pool) and hand their rows
back to a single aggregator that writes every output file in cell order, so
file contents do not depend on scheduling.
"""

import dataclasses
import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from harness.checks import (
    CheckResult,
    covering_check,
    double_triangle_check,
    lipschitz_check,
    packing_check,
    recursive_check,
    sawtooth_check,
)
from harness.plotting import emit_plot
from harness.spec import (
    GRID_ORDER,
    KIND_BOUNDS,
    KIND_LIPSCHITZ,
    KIND_PACKING,
    KIND_RELU,
    KIND_RISK,
    ExperimentSpec,
    relu_case_kind,
)
from models.group_sparse import GenModelParams
from sensing.decoders import FAMILY_LS, FAMILY_SIGNED, ExhaustiveDecoder, ZeroDecoder, enum_cap
from sensing.measurement import SensingConfig
from sensing.risk import MODE_WORST, HardPrior, estimate_risk
from storage.results import (
    MANIFEST_FILE,
    PLOT_FILE,
    RESULTS_FILE,
    STATUS_FAILED,
    STATUS_OK,
    STATUS_SKIPPED,
    TRIALS_FILE,
    CellStatus,
    ResultStore,
    RunManifest,
)
from theory.minimax import BoundConstants, xi_choice
from theory.report import build_report
from utils.rng import RNG_ALGORITHM, describe
from utils.validation import EnumerationCapError, check_cap, require_multiple

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"

ROW_PREFIX = ["cell", "status", "reason", "seed", "rng_algorithm"]
TRIAL_COLUMNS = ["cell", "trial", "m", "n", "k", "alpha", "xi", "decoder", "sq_error", "seed"]
THRESHOLD_FIELDS = ("required_m_lower", "upper_m_rect", "upper_m_sphere", "upper_m_relu", "lower_m_relu")


class CellSkipped(Exception):
    """Raised inside a cell when a desk-scale guardrail applies."""


@dataclass
class CellOutcome:
    index: int
    status: str
    reason: Optional[str] = None
    values: Dict[str, Any] = field(default_factory=dict)
    trial_rows: List[Dict[str, Any]] = field(default_factory=list)


def trial_budget() -> int:
    return int(float(os.getenv("GENSENSE_TRIAL_BUDGET", str(10 ** 6))))


def manifest_id_for(spec: ExperimentSpec) -> str:
    """Deterministic id: the same spec, tool version, RNG and seed give the same id."""
    key = f"{spec.spec_hash()}|{TOOL_VERSION}|{RNG_ALGORITHM}|{spec.seed}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


def resolve_constants(spec: ExperimentSpec) -> BoundConstants:
    return dataclasses.replace(BoundConstants.from_env(), **spec.constants)


def _from_check(result: CheckResult) -> tuple:
    status = STATUS_OK if result.ok else STATUS_FAILED
    return status, result.reason, result.metrics


def _bounds_cell(spec: ExperimentSpec, cell: Dict[str, Any], constants: BoundConstants) -> CellOutcome:
    report = build_report(
        cell["n"], cell["k"],
        m=cell.get("m"), r=cell.get("r"), alpha=cell.get("alpha"), L=cell.get("L"),
        d=cell.get("d"), w=cell.get("w"), k0=cell.get("k0"), n0=cell.get("n0"),
        constants=constants,
    )
    return CellOutcome(0, STATUS_OK, values=report.to_flat_dict())


def _make_decoder(spec: ExperimentSpec, cell: Dict[str, Any], xi: float):
    n, k = cell["n"], cell["k"]
    B = require_multiple(n, k)
    if spec.decoder == "zero":
        return ZeroDecoder()
    if spec.decoder == "exhaustive_ls":
        check_cap("supports", float(B + 1) ** k, enum_cap())
        return ExhaustiveDecoder(k, FAMILY_LS, xi=xi, x_max=cell.get("x_max", xi))
    check_cap("signed supports", float(2 * B) ** k, enum_cap())
    return ExhaustiveDecoder(k, FAMILY_SIGNED, xi=xi)


def _risk_cell(spec: ExperimentSpec, cell: Dict[str, Any], constants: BoundConstants, trial_threads: int) -> CellOutcome:
    n, k, m, alpha = cell["n"], cell["k"], cell["m"], cell["alpha"]
    total = spec.trials * (spec.panel_size if spec.mode == MODE_WORST else 1)
    budget = trial_budget()
    if total > budget:
        raise CellSkipped(f"{total} trials exceed the budget of {budget}")

    frob = constants.C_A * n
    sigma2 = alpha / m
    xi = cell.get("xi")
    if xi is None:
        if alpha == 0:
            raise CellSkipped("alpha = 0 gives xi_choice = 0; set xi explicitly")
        xi = xi_choice(n, k, sigma2, frob)

    decoder = _make_decoder(spec, cell, xi)
    cfg = SensingConfig(
        m=m, n=n, alpha=alpha, seed=spec.seed,
        normalize_frobenius=frob if spec.normalize_frobenius else None,
    )
    estimate = estimate_risk(
        HardPrior(n, k, xi), decoder, cfg, spec.trials,
        mode=spec.mode, threads=trial_threads, panel_size=spec.panel_size,
        k=k, xi=xi, record_trials=spec.emit_trials,
    )

    report = build_report(
        n, k, m=m, r=cell.get("r"), alpha=alpha, L=cell.get("L"),
        d=cell.get("d"), w=cell.get("w"), k0=cell.get("k0"), n0=cell.get("n0"),
        constants=constants,
    )
    values: Dict[str, Any] = {
        "decoder": decoder.name,
        "mode": estimate.mode,
        "xi": xi,
        "trials": estimate.trials,
        "mean_sq_error": estimate.mean_sq_error,
        "std_error": estimate.std_error,
        "minimax_lower": report.minimax_lower,
        "target_risk": constants.C1 * alpha,
    }
    for name in THRESHOLD_FIELDS:
        value = getattr(report, name)
        if value is not None:
            values[f"threshold_{name}"] = value
    trial_rows = [dataclasses.asdict(record) for record in estimate.trial_records]
    return CellOutcome(0, STATUS_OK, values=values, trial_rows=trial_rows)


def _relu_cell(cell: Dict[str, Any]) -> CellOutcome:
    case = relu_case_kind(cell)
    if case == "recursive":
        result = recursive_check(cell["k0"], cell["n0"], cell["regime"], xi=cell.get("xi", 1.0), k=cell.get("k", 1))
    elif case == "sawtooth":
        result = sawtooth_check(cell["R"])
    else:
        result = double_triangle_check(cell["n"], cell["k"], cell["r"], cell.get("x_max", 1.0))
    status, reason, metrics = _from_check(result)
    return CellOutcome(0, status, reason, metrics)


def _lipschitz_cell(spec: ExperimentSpec, cell: Dict[str, Any]) -> CellOutcome:
    budget = trial_budget()
    if spec.pairs > budget:
        raise CellSkipped(f"{spec.pairs} pairs exceed the budget of {budget}")
    params = GenModelParams(cell["n"], cell["k"], cell["r"], cell["x_max"])
    status, reason, metrics = _from_check(lipschitz_check(params, spec.pairs, spec.seed))
    return CellOutcome(0, status, reason, metrics)


def _packing_cell(cell: Dict[str, Any]) -> CellOutcome:
    if "eps" in cell:
        result = covering_check(cell["k"], cell.get("r", 1.0), cell["eps"])
    else:
        result = packing_check(cell["n"], cell["k"], cell.get("t"))
    status, reason, metrics = _from_check(result)
    return CellOutcome(0, status, reason, metrics)


def run_cell(spec: ExperimentSpec, index: int, constants: BoundConstants, trial_threads: int = 1) -> CellOutcome:
    """Run one cell, turning guardrails into ``skipped`` and errors into ``failed``."""
    cell = spec.cells[index]
    try:
        if spec.kind == KIND_BOUNDS:
            outcome = _bounds_cell(spec, cell, constants)
        elif spec.kind == KIND_RISK:
            outcome = _risk_cell(spec, cell, constants, trial_threads)
        elif spec.kind == KIND_RELU:
            outcome = _relu_cell(cell)
        elif spec.kind == KIND_LIPSCHITZ:
            outcome = _lipschitz_cell(spec, cell)
        elif spec.kind == KIND_PACKING:
            outcome = _packing_cell(cell)
        else:
            raise ValueError(f"unknown kind {spec.kind!r}")
    except (CellSkipped, EnumerationCapError) as e:
        logger.warning(f"Cell {index} skipped: {e}")
        return CellOutcome(index, STATUS_SKIPPED, str(e))
    except Exception as e:
        logger.exception(f"Cell {index} failed")
        return CellOutcome(index, STATUS_FAILED, f"{type(e).__name__}: {e}")

    outcome.index = index
    if outcome.status == STATUS_FAILED:
        logger.error(f"Cell {index} failed: {outcome.reason}")
    else:
        logger.debug(f"Cell {index} ok")
    return outcome


def _columns(spec: ExperimentSpec, rows: List[Dict[str, Any]]) -> List[str]:
    params = [key for key in GRID_ORDER if any(key in cell for cell in spec.cells)]
    columns = ROW_PREFIX + params
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def run(spec: ExperimentSpec, out_dir: Optional[str] = None) -> RunManifest:
    """
    Execute every cell of a spec and write the run directory.

    Args:
        spec: Validated experiment spec
        out_dir: Output directory (defaults to the spec's, then GENSENSE_OUT_DIR)

    Returns:
        RunManifest with one status per cell
    """
    store = ResultStore(out_dir or spec.output_dir)
    manifest_id = manifest_id_for(spec)
    rng_info = describe()
    manifest = RunManifest(
        manifest_id=manifest_id,
        spec_hash=spec.spec_hash(),
        kind=spec.kind,
        seed=spec.seed,
        tool_version=TOOL_VERSION,
        rng_algorithm=rng_info["rng_algorithm"],
        numpy_version=rng_info["numpy_version"],
        started_at=datetime.now(timezone.utc).isoformat(),
    )
    constants = resolve_constants(spec)
    logger.info(f"Running {spec.kind} with {len(spec.cells)} cells (manifest {manifest_id})")

    indices = range(len(spec.cells))
    if len(spec.cells) == 1 or spec.threads == 1:
        outcomes = [run_cell(spec, i, constants, spec.threads) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            outcomes = list(pool.map(lambda i: run_cell(spec, i, constants), indices))

    rows, trial_rows = [], []
    for outcome in outcomes:
        row = {
            "cell": outcome.index,
            "status": outcome.status,
            "reason": outcome.reason,
            "seed": spec.seed,
            "rng_algorithm": RNG_ALGORITHM,
        }
        row.update(spec.cells[outcome.index])
        for key, value in outcome.values.items():
            row.setdefault(key, value)
        rows.append(row)
        for trial in outcome.trial_rows:
            trial_rows.append({"cell": outcome.index, **trial})
        manifest.cells.append(CellStatus(outcome.index, outcome.status, outcome.reason))

    store.save_table(RESULTS_FILE, _columns(spec, rows), rows, manifest_id)
    manifest.outputs.append(RESULTS_FILE)
    if spec.kind == KIND_RISK and spec.emit_trials:
        store.save_table(TRIALS_FILE, TRIAL_COLUMNS, trial_rows, manifest_id)
        manifest.outputs.append(TRIALS_FILE)
    if spec.kind == KIND_RISK and spec.plot:
        try:
            emit_plot(store.path(RESULTS_FILE), store.path(PLOT_FILE))
            manifest.outputs.append(PLOT_FILE)
        except Exception:
            logger.exception("Plot emission failed")

    manifest.finished_at = datetime.now(timezone.utc).isoformat()
    manifest.outputs.append(MANIFEST_FILE)
    store.save_manifest(manifest)
    counts = manifest.status_counts()
    logger.info(
        f"Run {manifest_id} finished: {counts[STATUS_OK]} ok, "
        f"{counts[STATUS_SKIPPED]} skipped, {counts[STATUS_FAILED]} failed"
    )
    return manifest
