"""Experiment specifications.

A spec is one JSON document.  Cells come either from ``grid`` (the Cartesian
product of its lists, expanded in the fixed key order below) or from an
explicit ``cases`` list.  Unknown keys anywhere are rejected, and every
problem found is reported at once.
"""

import hashlib
import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from models.recursive import parse_regime
from utils.validation import InvalidInputError, SpecValidationError, unknown_keys

logger = logging.getLogger(__name__)

KIND_BOUNDS = "bounds_sweep"
KIND_RISK = "risk_curve"
KIND_RELU = "relu_verify"
KIND_LIPSCHITZ = "lipschitz_verify"
KIND_PACKING = "packing_verify"
KINDS = (KIND_BOUNDS, KIND_RISK, KIND_RELU, KIND_LIPSCHITZ, KIND_PACKING)

# grid key -> (type, lower bound, lower bound inclusive)
PARAMETERS = {
    "n": (int, 1, True),
    "k": (int, 1, True),
    "n_over_k": (int, 1, True),
    "m": (int, 1, True),
    "alpha": (float, 0.0, True),
    "L": (float, 0.0, False),
    "r": (float, 0.0, False),
    "x_max": (float, 0.0, False),
    "xi": (float, 0.0, False),
    "eps": (float, 0.0, False),
    "t": (float, 0.0, True),
    "k0": (int, 1, True),
    "n0": (int, 1, True),
    "d": (int, 1, True),
    "w": (int, 1, True),
    "R": (int, 1, True),
    "regime": (str, None, None),
}
GRID_ORDER = list(PARAMETERS)

TOP_LEVEL = (
    "kind", "description", "grid", "cases", "trials", "seed", "threads", "decoder",
    "mode", "panel_size", "pairs", "normalize_frobenius", "emit_trials", "plot",
    "output_dir", "constants",
)
CONSTANT_KEYS = ("C0", "C1", "C_A", "C_upper", "L_validity")
DECODERS = ("exhaustive_signed", "exhaustive_ls", "zero")
MODES = ("prior_averaged", "worst_case_over_sampled_signals")

# execution settings; they never change file contents
UNHASHED_KEYS = ("threads", "output_dir")

REQUIRED = {
    KIND_BOUNDS: ("k",),
    KIND_RISK: ("n", "k", "m", "alpha"),
    KIND_LIPSCHITZ: ("n", "k", "r", "x_max"),
    KIND_PACKING: ("k",),
    KIND_RELU: (),
}


@dataclass
class ExperimentSpec:
    kind: str
    cells: List[Dict[str, Any]]
    trials: int = 100
    seed: int = 0
    threads: int = 1
    decoder: str = "exhaustive_signed"
    mode: str = "prior_averaged"
    panel_size: int = 16
    pairs: int = 100000
    normalize_frobenius: bool = False
    emit_trials: bool = False
    plot: bool = True
    output_dir: Optional[str] = None
    constants: Dict[str, float] = field(default_factory=dict)
    description: str = ""
    payload: Dict[str, Any] = field(default_factory=dict, repr=False)

    def spec_hash(self) -> str:
        hashed = {key: value for key, value in self.payload.items() if key not in UNHASHED_KEYS}
        canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, seed=None, trials=None, threads=None, output_dir=None) -> "ExperimentSpec":
        """Apply command-line overrides. Seed and trials enter the hash; threads and output_dir do not."""
        payload = dict(self.payload)
        if seed is not None:
            payload["seed"] = seed
        if trials is not None:
            payload["trials"] = trials
        if threads is not None:
            payload["threads"] = threads
        spec = ExperimentSpec.from_dict(payload)
        spec.output_dir = output_dir or self.output_dir
        return spec

    @classmethod
    def from_file(cls, path: str) -> "ExperimentSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise SpecValidationError([f"cannot read spec {path}: {e}"])
        return cls.from_dict(payload)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ExperimentSpec":
        if not isinstance(payload, dict):
            raise SpecValidationError(["spec must be a JSON object"])
        errors: List[str] = []
        for key in unknown_keys(payload, TOP_LEVEL):
            errors.append(f"unknown key '{key}'")

        kind = payload.get("kind")
        if kind not in KINDS:
            errors.append(f"kind must be one of {', '.join(KINDS)}; got {kind!r}")

        cells = _expand_cells(payload, kind, errors)
        options = _validate_options(payload, errors)

        if errors:
            logger.warning(f"Spec rejected with {len(errors)} errors")
            raise SpecValidationError(errors)
        spec = cls(kind=kind, cells=cells, payload=payload, **options)
        logger.debug(f"Loaded {kind} spec with {len(cells)} cells")
        return spec


def _check_value(name: str, value: Any, where: str, errors: List[str]) -> Any:
    typ, low, inclusive = PARAMETERS[name]
    if typ is str:
        if name == "regime":
            try:
                parse_regime(value)
            except InvalidInputError as e:
                errors.append(f"{where}.{name}: {e}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{where}.{name}: expected a number, got {value!r}")
        return value
    if typ is int and int(value) != value:
        errors.append(f"{where}.{name}: expected an integer, got {value!r}")
        return value
    if (inclusive and value < low) or (not inclusive and value <= low):
        errors.append(f"{where}.{name}: must be {'>=' if inclusive else '>'} {low}, got {value}")
    return typ(value)


def _normalize_cell(raw: Dict[str, Any], where: str, errors: List[str]) -> Dict[str, Any]:
    cell = {}
    for key in GRID_ORDER:
        if key in raw:
            cell[key] = _check_value(key, raw[key], where, errors)
    if "n_over_k" in cell and "k" in cell and "n" not in cell:
        if isinstance(cell["n_over_k"], int) and isinstance(cell["k"], int):
            cell["n"] = cell["n_over_k"] * cell["k"]
    n, k = cell.get("n"), cell.get("k")
    if isinstance(n, int) and isinstance(k, int) and k > 0 and n % k != 0:
        errors.append(f"{where}: n={n} is not a multiple of k={k}")
    k0, n0 = cell.get("k0"), cell.get("n0")
    if isinstance(n0, int) and isinstance(k0, int) and k0 > 0 and n0 % k0 != 0:
        errors.append(f"{where}: n0={n0} is not a multiple of k0={k0}")
    return cell


def _expand_cells(payload: Dict[str, Any], kind: Optional[str], errors: List[str]) -> List[Dict[str, Any]]:
    grid = payload.get("grid")
    cases = payload.get("cases")
    if grid is None and cases is None:
        errors.append("spec needs a non-empty 'grid' or 'cases'")
        return []
    if grid is not None and cases is not None:
        errors.append("give either 'grid' or 'cases', not both")
        return []

    raw_cells: List[Dict[str, Any]] = []
    if grid is not None:
        if not isinstance(grid, dict) or not grid:
            errors.append("grid must be a non-empty object")
            return []
        for key in unknown_keys(grid, PARAMETERS):
            errors.append(f"grid: unknown key '{key}'")
        keys = [key for key in GRID_ORDER if key in grid]
        lists = []
        for key in keys:
            values = grid[key]
            if not isinstance(values, list):
                values = [values]
            if not values:
                errors.append(f"grid.{key}: empty list")
            lists.append(values)
        raw_cells = [dict(zip(keys, combo)) for combo in itertools.product(*lists)]
    else:
        if not isinstance(cases, list) or not cases:
            errors.append("cases must be a non-empty list")
            return []
        for i, case in enumerate(cases):
            if not isinstance(case, dict):
                errors.append(f"cases[{i}]: expected an object")
                continue
            for key in unknown_keys(case, PARAMETERS):
                errors.append(f"cases[{i}]: unknown key '{key}'")
            raw_cells.append(case)

    if not raw_cells:
        errors.append("grid expands to no cells")
    cells = []
    for i, raw in enumerate(raw_cells):
        where = f"cell[{i}]"
        cell = _normalize_cell(raw, where, errors)
        for key in REQUIRED.get(kind, ()):
            if key not in cell:
                errors.append(f"{where}: missing '{key}'")
        if kind == KIND_BOUNDS and "n" not in cell:
            errors.append(f"{where}: needs 'n' or 'n_over_k'")
        if kind == KIND_PACKING and "n" not in cell and "eps" not in cell:
            errors.append(f"{where}: packing case needs 'n' or 'n_over_k'; covering case needs 'eps'")
        if kind == KIND_RELU and not _relu_case_kind(cell):
            errors.append(f"{where}: relu case needs (n, k, r), (R) or (k0, n0, regime)")
        cells.append(cell)
    return cells


def _relu_case_kind(cell: Dict[str, Any]) -> Optional[str]:
    if {"k0", "n0", "regime"} <= cell.keys():
        return "recursive"
    if "R" in cell:
        return "sawtooth"
    if {"n", "k", "r"} <= cell.keys():
        return "double_triangle"
    return None


def relu_case_kind(cell: Dict[str, Any]) -> str:
    kind = _relu_case_kind(cell)
    if kind is None:
        raise InvalidInputError(f"unrecognized relu case {cell}")
    return kind


def _validate_options(payload: Dict[str, Any], errors: List[str]) -> Dict[str, Any]:
    options: Dict[str, Any] = {}
    for key, default in (("trials", 100), ("seed", 0), ("threads", 1), ("panel_size", 16), ("pairs", 100000)):
        value = payload.get(key, default)
        low = 0 if key == "seed" else 1
        if isinstance(value, bool) or not isinstance(value, int) or value < low:
            errors.append(f"{key}: expected an integer >= {low}, got {value!r}")
        options[key] = value
    if "threads" not in payload:
        options["threads"] = int(os.getenv("GENSENSE_THREADS", "1"))

    for key in ("normalize_frobenius", "emit_trials", "plot"):
        if key in payload:
            if not isinstance(payload[key], bool):
                errors.append(f"{key}: expected true or false, got {payload[key]!r}")
            options[key] = payload[key]

    decoder = payload.get("decoder", "exhaustive_signed")
    if decoder not in DECODERS:
        errors.append(f"decoder must be one of {', '.join(DECODERS)}; got {decoder!r}")
    options["decoder"] = decoder
    mode = payload.get("mode", "prior_averaged")
    if mode not in MODES:
        errors.append(f"mode must be one of {', '.join(MODES)}; got {mode!r}")
    options["mode"] = mode

    constants = payload.get("constants", {})
    if not isinstance(constants, dict):
        errors.append("constants must be an object")
        constants = {}
    for key in unknown_keys(constants, CONSTANT_KEYS):
        errors.append(f"constants: unknown key '{key}'")
    for key, value in constants.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
            errors.append(f"constants.{key}: expected a positive number, got {value!r}")
    options["constants"] = dict(constants)

    if "output_dir" in payload:
        options["output_dir"] = payload["output_dir"]
    options["description"] = str(payload.get("description", ""))
    return options
