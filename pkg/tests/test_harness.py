import csv
import hashlib
import json
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from scenario_eval import cli, harness, plots, world_gen
from scenario_eval.errors import ConfigError

SMOKE_CONFIG = """\
[experiment]
n_locations = 5
n_models = 1
seed = 7

[sir]
horizon = 200
step = 0.5

[approaches]
run_approach2 = false
run_approach3 = false
"""

FAST_CONFIG = """\
[experiment]
n_locations = 12
n_models = 2
seed = 3

[sir]
horizon = 200
step = 0.5

[approaches]
n_samples = 600
"""


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def digest_dir(out_dir):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(Path(out_dir).glob("*.csv"))}


class TestConfigLoading:
    def test_defaults_when_unset(self, tmp_path):
        settings = harness.load_settings(write_config(tmp_path, "[experiment]\nseed = 5\n"))
        assert settings.experiment.seed == 5
        assert settings.experiment.n_locations == 50
        assert settings.n_samples == 10_000

    def test_full_roundtrip(self, tmp_path):
        text = """\
[experiment]
n_locations = 20
n_models = 4
scenario_values = 0.25, 0.45
seed = 99
x_realized_low = 0.25
x_realized_high = 0.45
perfect_models = true

[sir]
infectious_period = 8
initial_infected = 0.002
population = 2000
horizon = 400
step = 0.5

[approaches]
n_samples = 1000
basis_dim = 4
covariate_variants = false
plausibility_threshold = 0.08
threads = 2
"""
        settings = harness.load_settings(write_config(tmp_path, text))
        exp = settings.experiment
        assert exp.n_locations == 20 and exp.n_models == 4
        assert exp.scenario_values == (0.25, 0.45)
        assert exp.x_realized_range == (0.25, 0.45)
        assert exp.perfect_models is True
        assert exp.infectious_period == 8 and exp.i0 == 0.002
        assert exp.population == 2000 and exp.horizon == 400 and exp.step == 0.5
        assert settings.basis_dim == 4
        assert settings.covariate_variants is False
        assert settings.plausibility_threshold == 0.08
        assert settings.threads == 2

    @pytest.mark.parametrize("text,fragment", [
        ("[experiment]\nn_locations = abc\n", "n_locations"),
        ("[experiment]\nmystery = 3\n", "mystery"),
        ("[mystery]\nseed = 1\n", "unknown section"),
        ("not an ini file at all", "contains no section"),
        ("[experiment]\nseed = -4\n", "seed"),
    ])
    def test_diagnostics(self, tmp_path, text, fragment):
        with pytest.raises(ConfigError) as info:
            harness.load_settings(write_config(tmp_path, text))
        assert fragment in str(info.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            harness.load_settings(tmp_path / "nope.cfg")

    def test_spline_needs_enough_locations(self):
        with pytest.raises(ConfigError) as info:
            harness.RunSettings(
                experiment=world_gen.ExperimentConfig(n_locations=6))
        assert "n_locations" in str(info.value)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    config = write_config(tmp, FAST_CONFIG)
    report = harness.run(config, tmp / "out")
    return tmp, config, report


@pytest.fixture(scope="module")
def plotted(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("plots")
    config_path = tmp / "run.cfg"
    config_path.write_text(FAST_CONFIG, encoding="utf-8")
    harness.run(config_path, tmp / "out")
    plots.plot_report_dir(tmp / "out")
    return tmp / "out"


class TestRunOutputs:
    def test_all_files_present(self, run_dir):
        tmp, _, _ = run_dir
        for name in harness.DATA_FILES + (harness.MANIFEST_FILE,):
            assert (tmp / "out" / name).exists()

    def test_report_row_count(self, run_dir):
        tmp, _, report = run_dir
        # 5 approach-variants x models x scenarios
        assert len(report.report_rows) == 5 * 2 * 2
        with open(tmp / "out" / "report.csv", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 5 * 2 * 2

    def test_manifest_digests_match_files(self, run_dir):
        tmp, _, _ = run_dir
        manifest = json.loads((tmp / "out" / harness.MANIFEST_FILE).read_text())
        for name, digest in manifest["files"].items():
            actual = hashlib.sha256((tmp / "out" / name).read_bytes()).hexdigest()
            assert actual == digest
        assert manifest["seed"] == 3

    def test_rerun_identical_data_files(self, run_dir):
        tmp, config, _ = run_dir
        harness.run(config, tmp / "out2")
        assert digest_dir(tmp / "out") == digest_dir(tmp / "out2")

    def test_threads_do_not_change_outputs(self, run_dir):
        tmp, config, _ = run_dir
        harness.run(config, tmp / "out4", threads=4)
        assert digest_dir(tmp / "out") == digest_dir(tmp / "out4")

    def test_seed_override_changes_world(self, run_dir):
        tmp, config, _ = run_dir
        harness.run(config, tmp / "out_seed", seed=12)
        assert digest_dir(tmp / "out") != digest_dir(tmp / "out_seed")

    def test_decomposition_identity_in_file(self, run_dir):
        tmp, _, _ = run_dir
        with open(tmp / "out" / "decomposition.csv", encoding="utf-8") as handle:
            for row in csv.DictReader(handle):
                observed = float(row["observed_deviation"])
                parts = float(row["calibration_error"]) + float(row["scenario_spec_error"])
                assert abs(observed - parts) <= 1e-12

    def test_report_recomputable_from_data_files(self, run_dir):
        # true means in report.csv must be derivable from projections.csv +
        # world.csv alone; estimate means from approach_estimates.csv.
        tmp, _, _ = run_dir
        out = tmp / "out"
        with open(out / "world.csv", encoding="utf-8") as handle:
            cf = {(int(r["location_id"]), r["x_kind"]): float(r["y_value"])
                  for r in csv.DictReader(handle) if r["x_kind"] != "realized"}
        with open(out / "projections.csv", encoding="utf-8") as handle:
            true_means = {}
            for r in csv.DictReader(handle):
                if r["x_kind"] == "realized":
                    continue
                key = (int(r["model_id"]), r["x_kind"])
                err = float(r["y_projected"]) - cf[(int(r["location_id"]), r["x_kind"])]
                true_means.setdefault(key, []).append(err)
        kind_of = {0: "scenario_low", 1: "scenario_high"}
        with open(out / "approach_estimates.csv", encoding="utf-8") as handle:
            est_means = {(r["approach"], r["variant"], int(r["model_id"]),
                          int(r["scenario_index"])): float(r["mean"])
                         for r in csv.DictReader(handle)
                         if r["location_id"] == "-1"}
        with open(out / "report.csv", encoding="utf-8") as handle:
            for r in csv.DictReader(handle):
                if r["n_est"] == "0":
                    continue
                m = int(r["model_id"])
                j = int(r["scenario_index"])
                expected_true = np.mean(true_means[(m, kind_of[j])])
                assert float(r["true_mean"]) == pytest.approx(expected_true, abs=1e-12)
                est = est_means[(r["approach"], r["variant"], m, j)]
                assert float(r["mae_of_means"]) == pytest.approx(
                    abs(est - expected_true), abs=1e-12)

    def test_smoke_run_plausible_only(self, tmp_path):
        # Too few locations for the regression strategies; strategy 1 still
        # runs end to end and quickly.
        config = write_config(tmp_path, SMOKE_CONFIG)
        start = time.monotonic()
        report = harness.run(config, tmp_path / "out")
        elapsed = time.monotonic() - start
        assert elapsed < 5.0
        for name in harness.DATA_FILES:
            assert (tmp_path / "out" / name).exists()
        assert {row[0] for row in report.report_rows} == {1}


class TestEnvOverride:
    def test_out_dir_resolution(self, tmp_path, monkeypatch):
        monkeypatch.delenv(harness.OUT_DIR_ENV, raising=False)
        assert harness.resolve_out_dir("explicit") == Path("explicit")
        assert harness.resolve_out_dir(None) == Path("scenario_eval_report")
        monkeypatch.setenv(harness.OUT_DIR_ENV, str(tmp_path / "env_out"))
        assert harness.resolve_out_dir(None) == tmp_path / "env_out"
        assert harness.resolve_out_dir("explicit") == Path("explicit")


class TestCli:
    def test_run_and_plot_roundtrip(self, tmp_path, capsys):
        config = write_config(tmp_path, FAST_CONFIG)
        out = tmp_path / "cli_out"
        assert cli.main(["run", "--config", str(config), "--out", str(out)]) == 0
        captured = capsys.readouterr()
        assert "wrote report" in captured.out
        assert cli.main(["plot", "--in", str(out)]) == 0
        for name in ("error_densities.svg", "accuracy_summary.svg",
                     "decomposition.svg"):
            assert (out / name).exists()

    def test_bad_config_exit_2(self, tmp_path, capsys):
        config = write_config(tmp_path, "[experiment]\nn_locations = -2\n")
        code = cli.main(["run", "--config", str(config), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_plot_inputs_exit_2(self, tmp_path, capsys):
        assert cli.main(["plot", "--in", str(tmp_path / "empty")]) == 2


class TestPlots:
    def test_svgs_are_wellformed_xml(self, plotted):
        for name in ("error_densities.svg", "accuracy_summary.svg",
                     "decomposition.svg"):
            root = ET.parse(plotted / name).getroot()
            assert root.tag.endswith("svg")

    def test_replot_byte_identical(self, plotted, tmp_path):
        plots.plot_report_dir(plotted, tmp_path / "again")
        for name in ("error_densities.svg", "accuracy_summary.svg",
                     "decomposition.svg"):
            assert (plotted / name).read_bytes() == \
                (tmp_path / "again" / name).read_bytes()

    def test_empty_plausible_bucket_annotated(self, tmp_path):
        # Clamp realized coverage near the low scenario so the high scenario
        # is never plausible, then check the annotation shows up.
        text = FAST_CONFIG + "x_realized_low = 0.30\nx_realized_high = 0.34\n"
        lines = text.splitlines()
        idx = lines.index("seed = 3") + 1
        text = "\n".join(lines[:idx] + ["x_realized_low = 0.30",
                                        "x_realized_high = 0.34"] + lines[idx:-2]) + "\n"
        config = tmp_path / "clamped.cfg"
        config.write_text(text, encoding="utf-8")
        harness.run(config, tmp_path / "out")
        plots.plot_report_dir(tmp_path / "out")
        svg = (tmp_path / "out" / "error_densities.svg").read_text(encoding="utf-8")
        assert "no plausible locations" in svg
