import json
import os

import pytest

from harness.checks import (
    _failures,
    covering_check,
    double_triangle_check,
    lipschitz_check,
    packing_check,
    recursive_check,
    sawtooth_check,
)
from harness.runner import ROW_PREFIX, TOOL_VERSION, manifest_id_for, run, run_cell, resolve_constants
from harness.spec import GRID_ORDER, KIND_BOUNDS, KIND_RISK, ExperimentSpec, relu_case_kind
from models.group_sparse import GenModelParams
from storage.results import MANIFEST_FILE, PLOT_FILE, RESULTS_FILE, TRIALS_FILE, ResultStore, read_table
from utils.rng import RNG_ALGORITHM
from utils.validation import InvalidInputError, SpecValidationError

BOUNDS = {"kind": "bounds_sweep", "grid": {"n_over_k": [4, 8, 16], "k": [1, 2, 4]}}
RISK = {
    "kind": "risk_curve",
    "grid": {"n": [8], "k": [2], "alpha": [0.5], "m": [1, 2, 4]},
    "trials": 30,
    "seed": 5,
    "emit_trials": True,
}


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


class TestSpec:
    def test_grid_expansion_order(self):
        spec = ExperimentSpec.from_dict(BOUNDS)
        assert len(spec.cells) == 9
        assert spec.cells[0] == {"k": 1, "n_over_k": 4, "n": 4}
        assert spec.cells[1] == {"k": 1, "n_over_k": 8, "n": 8}
        assert spec.cells[-1]["n"] == 64

    def test_defaults(self):
        spec = ExperimentSpec.from_dict(BOUNDS)
        assert (spec.trials, spec.seed, spec.threads) == (100, 0, 1)
        assert spec.decoder == "exhaustive_signed"
        assert spec.plot and not spec.emit_trials

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv("GENSENSE_THREADS", "3")
        assert ExperimentSpec.from_dict(BOUNDS).threads == 3
        assert ExperimentSpec.from_dict({**BOUNDS, "threads": 2}).threads == 2

    def test_cases(self):
        spec = ExperimentSpec.from_dict({"kind": "relu_verify", "cases": [{"R": 4}, {"n": 8, "k": 2, "r": 1.0}]})
        assert [relu_case_kind(c) for c in spec.cells] == ["sawtooth", "double_triangle"]

    def test_reports_every_error(self):
        payload = {"kind": "risk_curve", "grid": {"n": [7], "k": [2], "m": [0]}, "bogus": 1}
        with pytest.raises(SpecValidationError) as info:
            ExperimentSpec.from_dict(payload)
        errors = info.value.errors
        assert "unknown key 'bogus'" in errors
        assert any("not a multiple" in e for e in errors)
        assert any("cell[0].m" in e for e in errors)
        assert any("missing 'alpha'" in e for e in errors)

    @pytest.mark.parametrize("payload,fragment", [
        ({"kind": "bounds_sweep"}, "non-empty 'grid' or 'cases'"),
        ({"kind": "bounds_sweep", "grid": {"k": []}}, "empty list"),
        ({"kind": "bounds_sweep", "grid": {"k": [1]}, "cases": [{"k": 1}]}, "not both"),
        ({"kind": "bounds_sweep", "grid": {"k": [2]}}, "needs 'n' or 'n_over_k'"),
        ({"kind": "bounds_sweep", "grid": {"n": [4], "k": [1], "q": [1]}}, "grid: unknown key 'q'"),
        ({"kind": "sweep", "grid": {"n": [4], "k": [1]}}, "kind must be one of"),
        ({"kind": "relu_verify", "cases": [{"k0": 2, "n0": 4, "regime": "mixed(3)"}]}, "even"),
        ({"kind": "relu_verify", "cases": [{"k0": 2}]}, "relu case needs"),
        ({**RISK, "decoder": "lasso"}, "decoder must be one of"),
        ({**RISK, "trials": 0}, "trials"),
        ({**RISK, "emit_trials": "yes"}, "emit_trials"),
        ({**RISK, "constants": {"C9": 1.0}}, "constants: unknown key 'C9'"),
        ({**RISK, "constants": {"C1": -1}}, "constants.C1"),
    ])
    def test_rejections(self, payload, fragment):
        with pytest.raises(SpecValidationError) as info:
            ExperimentSpec.from_dict(payload)
        assert any(fragment in e for e in info.value.errors)

    def test_spec_errors_are_input_errors(self):
        with pytest.raises(InvalidInputError):
            ExperimentSpec.from_dict([])

    def test_from_file(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(RISK))
        assert ExperimentSpec.from_file(str(path)).kind == KIND_RISK
        with pytest.raises(SpecValidationError):
            ExperimentSpec.from_file(str(tmp_path / "missing.json"))
        path.write_text("{not json")
        with pytest.raises(SpecValidationError):
            ExperimentSpec.from_file(str(path))

    def test_hash_and_overrides(self):
        spec = ExperimentSpec.from_dict(RISK)
        assert spec.spec_hash() == ExperimentSpec.from_dict(dict(RISK)).spec_hash()
        changed = spec.with_overrides(seed=6, trials=10, output_dir="elsewhere")
        assert (changed.seed, changed.trials, changed.output_dir) == (6, 10, "elsewhere")
        assert changed.spec_hash() != spec.spec_hash()
        assert manifest_id_for(changed) != manifest_id_for(spec)
        assert spec.with_overrides().spec_hash() == spec.spec_hash()

    def test_execution_settings_stay_out_of_hash(self):
        spec = ExperimentSpec.from_dict({**RISK, "output_dir": "runs/a"})
        moved = spec.with_overrides(threads=4, output_dir="runs/b")
        assert moved.threads == 4
        assert moved.spec_hash() == spec.spec_hash()
        assert manifest_id_for(moved) == manifest_id_for(spec)

    def test_constants_override(self, monkeypatch):
        monkeypatch.setenv("GENSENSE_C_UPPER", "2")
        spec = ExperimentSpec.from_dict({**BOUNDS, "constants": {"C1": 0.25}})
        constants = resolve_constants(spec)
        assert constants.C1 == 0.25
        assert constants.C_upper == 2.0


class TestChecks:
    def test_lipschitz(self):
        result = lipschitz_check(GenModelParams(16, 2, 1.0, 1.0), pairs=25000, seed=0)
        assert result.ok, result.reason
        assert result.metrics["violations"] == 0
        assert result.metrics["max_ratio"] <= result.metrics["L"] * (1 + 1e-9)
        assert result.metrics["adversarial_min_ratio"] == pytest.approx(16.0)

    @pytest.mark.parametrize("n,k,r", [(8, 2, 1.0), (32, 4, 1.0), (64, 4, 2.0)])
    def test_double_triangle(self, n, k, r):
        result = double_triangle_check(n, k, r)
        assert result.ok, result.reason
        assert result.metrics["max_error"] <= 1e-9

    @pytest.mark.parametrize("R", [1, 2, 4, 8, 16])
    def test_sawtooth(self, R):
        result = sawtooth_check(R)
        assert result.ok, result.reason
        assert result.metrics["breakpoints"] == 2 * R + 1

    @pytest.mark.parametrize("regime", ["wide", "deep", "mixed(6)"])
    def test_recursive(self, regime):
        result = recursive_check(2, 4, regime)
        assert result.ok, result.reason
        assert result.metrics["patterns"] == result.metrics["expected_patterns"] == 16

    def test_recursive_parallel_copies(self):
        assert recursive_check(1, 4, "deep", k=2).ok

    @pytest.mark.parametrize("n,k", [(8, 2), (12, 3), (32, 4), (4, 2)])
    def test_packing(self, n, k):
        result = packing_check(n, k)
        assert result.ok, result.reason
        assert result.metrics["cov_error"] <= 1e-12

    def test_covering(self):
        result = covering_check(2, 1.0, 0.5)
        assert result.ok
        assert result.metrics["cover_size"] <= 44

    def test_failure_names(self):
        assert _failures({"a": True, "b": False, "c": False}) == "b, c"
        assert _failures({"a": True}) is None


class TestRunner:
    def test_bounds_sweep(self, out_dir):
        manifest = run(ExperimentSpec.from_dict(BOUNDS), out_dir)
        assert manifest.all_ok
        table = read_table(os.path.join(out_dir, RESULTS_FILE))
        assert len(table.rows) == 9
        assert table.columns[:len(ROW_PREFIX)] == ROW_PREFIX
        assert table.columns[len(ROW_PREFIX):len(ROW_PREFIX) + 3] == ["n", "k", "n_over_k"]
        assert all(row["status"] == "ok" for row in table.rows)
        assert all(row["ratio_holds"] == "true" for row in table.rows)
        assert all(row["rng_algorithm"] == RNG_ALGORITHM for row in table.rows)
        assert table.manifest_id == manifest.manifest_id

    def test_rerun_is_byte_identical(self, tmp_path):
        spec = ExperimentSpec.from_dict(RISK)
        first = run(spec, str(tmp_path / "a"))
        second = run(spec, str(tmp_path / "b"))
        assert first.manifest_id == second.manifest_id
        for name in (RESULTS_FILE, TRIALS_FILE, PLOT_FILE):
            assert _read(tmp_path / "a" / name) == _read(tmp_path / "b" / name)

    def test_threads_do_not_change_output(self, tmp_path):
        spec = ExperimentSpec.from_dict(RISK)
        serial = run(spec.with_overrides(threads=1), str(tmp_path / "serial"))
        threaded = run(spec.with_overrides(threads=2), str(tmp_path / "threaded"))
        assert serial.manifest_id == threaded.manifest_id
        for name in (RESULTS_FILE, TRIALS_FILE, PLOT_FILE):
            assert _read(tmp_path / "serial" / name) == _read(tmp_path / "threaded" / name)

    def test_threads_from_env_do_not_change_output(self, tmp_path, monkeypatch):
        run(ExperimentSpec.from_dict(RISK), str(tmp_path / "serial"))
        monkeypatch.setenv("GENSENSE_THREADS", "3")
        threaded = ExperimentSpec.from_dict(RISK)
        assert threaded.threads == 3
        run(threaded, str(tmp_path / "threaded"))
        assert _read(tmp_path / "serial" / RESULTS_FILE) == _read(tmp_path / "threaded" / RESULTS_FILE)

    def test_risk_outputs(self, out_dir):
        manifest = run(ExperimentSpec.from_dict(RISK), out_dir)
        assert manifest.outputs == [RESULTS_FILE, TRIALS_FILE, PLOT_FILE, MANIFEST_FILE]
        store = ResultStore(out_dir)
        results = store.load_table()
        assert [row["m"] for row in results.rows] == ["1", "2", "4"]
        for row in results.rows:
            assert float(row["mean_sq_error"]) >= 0.0
            assert float(row["target_risk"]) == 0.5
            assert row["threshold_required_m_lower"] != ""
        trials = store.load_table(TRIALS_FILE)
        assert len(trials.rows) == 90
        assert trials.columns[0] == "cell"
        assert {row["decoder"] for row in trials.rows} == {"exhaustive_signed"}

    def test_manifest(self, out_dir):
        manifest = run(ExperimentSpec.from_dict(BOUNDS), out_dir)
        data = ResultStore(out_dir).load_manifest()
        assert data["manifest_id"] == manifest.manifest_id
        assert data["kind"] == KIND_BOUNDS
        assert data["tool_version"] == TOOL_VERSION
        assert data["rng_algorithm"] == RNG_ALGORITHM
        assert data["started_at"] and data["finished_at"]
        assert [c["status"] for c in data["cells"]] == ["ok"] * 9
        assert PLOT_FILE not in data["outputs"]

    def test_trial_budget_skips_cells(self, out_dir, monkeypatch):
        monkeypatch.setenv("GENSENSE_TRIAL_BUDGET", "10")
        manifest = run(ExperimentSpec.from_dict(RISK), out_dir)
        assert manifest.status_counts() == {"ok": 0, "skipped": 3, "failed": 0}
        assert manifest.all_ok
        assert "budget" in manifest.cells[0].reason

    def test_enumeration_cap_skips_cells(self, out_dir, monkeypatch):
        monkeypatch.setenv("GENSENSE_ENUM_CAP", "10")
        manifest = run(ExperimentSpec.from_dict(RISK), out_dir)
        assert [c.status for c in manifest.cells] == ["skipped"] * 3
        assert "exceeds cap" in manifest.cells[0].reason

    def test_zero_noise_without_xi_is_skipped(self, out_dir):
        spec = ExperimentSpec.from_dict({**RISK, "grid": {"n": [8], "k": [2], "alpha": [0.0], "m": [2]}})
        assert run_cell(spec, 0, resolve_constants(spec)).status == "skipped"
        spec = ExperimentSpec.from_dict({**RISK, "grid": {"n": [8], "k": [2], "alpha": [0.0], "m": [8], "xi": [1.0]}})
        outcome = run_cell(spec, 0, resolve_constants(spec))
        assert outcome.status == "ok"
        assert outcome.values["mean_sq_error"] == 0.0

    def test_errors_become_failed_cells(self, out_dir):
        spec = ExperimentSpec.from_dict({**RISK, "grid": {"n": [4], "k": [4], "alpha": [1.0], "m": [2]}})
        manifest = run(spec, out_dir)
        assert manifest.cells[0].status == "failed"
        assert manifest.cells[0].reason.startswith("InvalidInputError: ")
        assert not manifest.all_ok

    def test_relu_kind(self, out_dir):
        spec = ExperimentSpec.from_dict({
            "kind": "relu_verify",
            "cases": [{"n": 8, "k": 2, "r": 1.0}, {"R": 4}, {"k0": 2, "n0": 4, "regime": "wide"}],
        })
        manifest = run(spec, out_dir)
        assert manifest.all_ok
        rows = read_table(os.path.join(out_dir, RESULTS_FILE)).rows
        assert [row["construction"] for row in rows] == ["double_triangle", "sawtooth", "recursive"]
        assert rows[2]["regime"] == "wide"

    def test_lipschitz_kind(self, out_dir, monkeypatch):
        spec = ExperimentSpec.from_dict({
            "kind": "lipschitz_verify",
            "grid": {"n_over_k": [4], "k": [1, 2], "r": [1.0], "x_max": [1.0]},
            "pairs": 5000,
        })
        assert [c.status for c in run(spec, out_dir).cells] == ["ok", "ok"]
        monkeypatch.setenv("GENSENSE_TRIAL_BUDGET", "100")
        assert [c.status for c in run(spec, out_dir).cells] == ["skipped", "skipped"]

    def test_packing_kind(self, out_dir):
        spec = ExperimentSpec.from_dict({
            "kind": "packing_verify",
            "cases": [{"n_over_k": 4, "k": 2}, {"k": 1, "r": 1.0, "eps": 1.0}],
        })
        manifest = run(spec, out_dir)
        assert manifest.all_ok
        rows = read_table(os.path.join(out_dir, RESULTS_FILE)).rows
        assert rows[0]["nmax_oracle"] == "3"
        assert rows[1]["cover_size"] != ""

    def test_spec_constants_reach_rows(self, out_dir):
        spec = ExperimentSpec.from_dict({**BOUNDS, "constants": {"C1": 0.5}})
        run(spec, out_dir)
        rows = read_table(os.path.join(out_dir, RESULTS_FILE)).rows
        assert all(row["const_C1"] == "0.5" for row in rows)

    def test_grid_columns_follow_fixed_order(self, out_dir):
        spec = ExperimentSpec.from_dict({"kind": "bounds_sweep", "grid": {"m": [4], "alpha": [1.0], "k": [2], "n": [16]}})
        run(spec, out_dir)
        columns = read_table(os.path.join(out_dir, RESULTS_FILE)).columns
        params = [c for c in columns[len(ROW_PREFIX):] if c in GRID_ORDER]
        assert params[:4] == ["n", "k", "m", "alpha"]
