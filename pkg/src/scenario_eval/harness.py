"""Run the full evaluation experiment and write its report files.

A run executes: world generation -> the three estimation strategies
(strategy 1; strategies 2 and 3 each with and without the R0 covariate) ->
accuracy metrics, and writes a directory of CSV tables plus a manifest:

    world.csv              ground truth per location and scenario point
    projections.csv        per (model, location, scenario point) projections
    approach_estimates.csv quantile summaries of every estimated distribution
    report.csv             MAE-of-means and KS test per (approach, variant,
                           model, scenario)
    decomposition.csv      observed deviation split into calibration and
                           scenario-specification error per (model, location,
                           scenario)
    a1_deviation.csv       strategy-1 estimate accuracy vs scenario deviation
    implied_obs_ks.csv     KS of strategy-2 implied observations vs truth
    location_mae.csv       per-location estimate accuracy
    manifest.json          config hash, seed, version, file digests

Everything a report number needs is recomputable from the data CSVs plus
the seeded sampling procedure; re-running the same config produces byte
identical data files regardless of thread count.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, approaches, metrics, world_gen
from .approaches import (
    APPROACH_ERROR_REGRESSION,
    APPROACH_OBSERVATION_MODEL,
    APPROACH_PLAUSIBLE,
    POOLED,
    VARIANT_COVARIATE,
    VARIANT_NO_COVARIATE,
    VARIANT_PLAUSIBLE,
)
from .errors import ConfigError
from .spline_fit import SplineSpec
from .world_gen import ExperimentConfig, x_kind_label

DATA_FILES = (
    "world.csv",
    "projections.csv",
    "approach_estimates.csv",
    "report.csv",
    "decomposition.csv",
    "a1_deviation.csv",
    "implied_obs_ks.csv",
    "location_mae.csv",
)
MANIFEST_FILE = "manifest.json"
OUT_DIR_ENV = "SCENARIO_EVAL_OUT"


@dataclass(frozen=True)
class RunSettings:
    """Experiment configuration plus harness toggles."""

    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    n_samples: int = 10_000
    basis_dim: int = 5
    run_approach1: bool = True
    run_approach2: bool = True
    run_approach3: bool = True
    covariate_variants: bool = True     # run strategies 2/3 both with and without R0
    plausibility_threshold: float | None = None
    threads: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1", "approaches.n_samples")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1", "approaches.threads")
        needed = self.basis_dim + 2 + 1   # spline columns + intercept + covariate, exclusive bound
        if (self.run_approach2 or self.run_approach3) and \
                self.experiment.n_locations <= needed:
            raise ConfigError(
                f"strategies 2/3 need n_locations > {needed} to fit the spline "
                f"(basis_dim={self.basis_dim}); got {self.experiment.n_locations}. "
                "Reduce basis_dim or disable run_approach2/run_approach3",
                "experiment.n_locations")


def default_settings() -> RunSettings:
    return RunSettings()


_EXPERIMENT_FIELDS = {
    "n_locations": int,
    "n_models": int,
    "seed": int,
    "scenario_values": "floats",
    "perfect_models": "bool",
    "x_realized_low": float,
    "x_realized_high": float,
    "r0_true_low": float,
    "r0_true_high": float,
    "alpha_true_mean": float,
    "alpha_true_sd": float,
    "global_bias_sd": float,
    "local_bias_sd": float,
    "alpha_center_low": float,
    "alpha_center_high": float,
    "alpha_model_sd": float,
}
_SIR_FIELDS = {
    "infectious_period": float,
    "initial_infected": float,
    "population": float,
    "horizon": float,
    "step": float,
}
_APPROACH_FIELDS = {
    "n_samples": int,
    "basis_dim": int,
    "run_approach1": "bool",
    "run_approach2": "bool",
    "run_approach3": "bool",
    "covariate_variants": "bool",
    "plausibility_threshold": "optional_float",
    "threads": int,
}


def _parse_value(raw: str, kind, context: str):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "bool":
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "floats":
            return tuple(float(part) for part in raw.replace(",", " ").split())
        if kind == "optional_float":
            return float(raw) if raw.strip() else None
        raise AssertionError(kind)
    except ValueError as exc:
        raise ConfigError(str(exc), context) from exc


def load_settings(path) -> RunSettings:
    """Parse a key = value config file with [experiment], [sir] and
    [approaches] sections; every field is optional and defaults to the
    built-in experiment. Unknown sections or fields are errors."""
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(str(exc), str(path)) from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), str(path)) from exc

    known = {"experiment": _EXPERIMENT_FIELDS, "sir": _SIR_FIELDS,
             "approaches": _APPROACH_FIELDS}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]", str(path))
        for key in parser[section]:
            if key not in known[section]:
                raise ConfigError(f"unknown field {key!r}", f"{path}:[{section}]")

    def section_values(section: str, fields: dict) -> dict:
        out = {}
        if parser.has_section(section):
            for key, kind in fields.items():
                if parser.has_option(section, key):
                    out[key] = _parse_value(parser.get(section, key), kind,
                                            f"{path}:[{section}] {key}")
        return out

    exp_raw = section_values("experiment", _EXPERIMENT_FIELDS)
    sir_raw = section_values("sir", _SIR_FIELDS)
    app_raw = section_values("approaches", _APPROACH_FIELDS)

    exp_kwargs = {}
    range_pairs = {
        "x_realized_range": ("x_realized_low", "x_realized_high"),
        "r0_true_range": ("r0_true_low", "r0_true_high"),
        "alpha_center_range": ("alpha_center_low", "alpha_center_high"),
    }
    defaults = ExperimentConfig()
    for target, (lo_key, hi_key) in range_pairs.items():
        if lo_key in exp_raw or hi_key in exp_raw:
            lo_default, hi_default = getattr(defaults, target)
            exp_kwargs[target] = (exp_raw.pop(lo_key, lo_default),
                                  exp_raw.pop(hi_key, hi_default))
    exp_kwargs.update(exp_raw)
    sir_renames = {"initial_infected": "i0"}
    for key, value in sir_raw.items():
        exp_kwargs[sir_renames.get(key, key)] = value
    try:
        experiment = replace(defaults, **exp_kwargs)
    except ConfigError:
        raise
    return RunSettings(experiment=experiment, **app_raw)


@dataclass(frozen=True)
class EvaluationReport:
    """In-memory result of a run: inputs, strategy outputs, metric tables."""

    settings: RunSettings
    world: world_gen.TrueWorld
    ensemble: world_gen.ModelEnsemble
    true_errors: np.ndarray
    results: dict                 # (approach, variant) -> strategy result object
    report_rows: list
    estimate_rows: list
    decomposition_rows: list
    a1_deviation_rows: list
    implied_obs_ks_rows: list
    location_mae_rows: list


def _variant_list(settings: RunSettings):
    """(approach id, variant label, include_covariate) for enabled strategies."""
    out = []
    if settings.run_approach1:
        out.append((APPROACH_PLAUSIBLE, VARIANT_PLAUSIBLE, None))
    for enabled, approach_id in ((settings.run_approach2, APPROACH_ERROR_REGRESSION),
                                 (settings.run_approach3, APPROACH_OBSERVATION_MODEL)):
        if enabled:
            if settings.covariate_variants:
                out.append((approach_id, VARIANT_NO_COVARIATE, False))
            out.append((approach_id, VARIANT_COVARIATE, True))
    return out


def evaluate(settings: RunSettings) -> EvaluationReport:
    """Run the whole experiment in memory (no files)."""
    config = settings.experiment
    world, ensemble = world_gen.generate(config, threads=settings.threads)
    errs = world_gen.true_errors(world, ensemble)
    spec = SplineSpec(basis_dim=settings.basis_dim)
    seed = config.seed

    results = {}
    for approach_id, variant, with_cov in _variant_list(settings):
        if approach_id == APPROACH_PLAUSIBLE:
            results[(approach_id, variant)] = approaches.evaluate_plausible(
                world, ensemble, settings.plausibility_threshold)
        elif approach_id == APPROACH_ERROR_REGRESSION:
            results[(approach_id, variant)] = approaches.infer_error_distribution(
                world, ensemble, with_cov, settings.n_samples, seed, spec)
        else:
            results[(approach_id, variant)] = approaches.infer_observations(
                world, ensemble, with_cov, settings.n_samples, seed, spec)

    report_rows = _report_rows(settings, world, errs, results)
    estimate_rows = _estimate_rows(world, results)
    decomposition_rows = _decomposition_rows(world, ensemble)
    a1_rows = _a1_deviation_rows(world, errs, results)
    implied_rows = _implied_obs_rows(world, ensemble, results)
    location_rows = _location_mae_rows(world, errs, results)
    return EvaluationReport(
        settings=settings, world=world, ensemble=ensemble, true_errors=errs,
        results=results, report_rows=report_rows, estimate_rows=estimate_rows,
        decomposition_rows=decomposition_rows, a1_deviation_rows=a1_rows,
        implied_obs_ks_rows=implied_rows, location_mae_rows=location_rows)


REPORT_HEADER = ("approach", "variant", "model_id", "scenario_index", "scenario_x",
                 "n_est", "est_mean", "true_mean", "mae_of_means",
                 "ks_d", "ks_n", "ks_m", "ks_critical", "ks_significant")


def _report_rows(settings, world, errs, results):
    rows = []
    for (approach_id, variant), result in results.items():
        for m in range(errs.shape[0]):
            for j in range(world.n_scenarios):
                dist = result.pooled[(m, j)]
                true_vec = errs[m, :, j]
                base = (approach_id, variant, m, j,
                        float(world.scenario_values[j]))
                if dist is None:
                    rows.append(base + (0, "", float(true_vec.mean()), "",
                                        "", "", "", "", ""))
                    continue
                mae = metrics.mae_of_means(dist, true_vec)
                if dist.samples.size >= 5:
                    ks = metrics.ks_two_sample(dist.samples, true_vec)
                    ks_part = (ks.statistic, ks.n, ks.m, ks.critical_value,
                               ks.significant)
                else:
                    ks_part = ("", "", "", "", "")
                rows.append(base + (dist.samples.size, float(dist.samples.mean()),
                                    float(true_vec.mean()), mae) + ks_part)
    return rows


ESTIMATE_HEADER = ("approach", "variant", "model_id", "scenario_index",
                   "location_id", "mean", "median", "q25", "q75", "q05", "q95",
                   "n_samples")


def _estimate_rows(world, results):
    rows = []
    for (approach_id, variant), result in results.items():
        for (m, j), dist in sorted(result.pooled.items()):
            if dist is None:
                continue
            s = dist.summary
            rows.append((approach_id, variant, m, j, POOLED,
                         float(dist.samples.mean()), s.median, s.q25, s.q75,
                         s.q05, s.q95, s.n_samples))
        if approach_id == APPROACH_PLAUSIBLE:
            chosen = result.selection.chosen_index
            for m in range(result.point_errors.shape[0]):
                for l in range(world.n_locations):
                    if chosen[l] < 0:
                        continue
                    e = float(result.point_errors[m, l])
                    rows.append((approach_id, variant, m, int(chosen[l]), l,
                                 e, e, e, e, e, e, 1))
        else:
            for (m, j, l), dist in sorted(result.per_location.items()):
                s = dist.summary
                rows.append((approach_id, variant, m, j, l,
                             float(dist.samples.mean()), s.median, s.q25, s.q75,
                             s.q05, s.q95, s.n_samples))
    return rows


DECOMPOSITION_HEADER = ("model_id", "location_id", "scenario_index", "projected",
                        "counterfactual_obs", "realized_obs", "observed_deviation",
                        "calibration_error", "scenario_spec_error", "total_error")


def _decomposition_rows(world, ensemble):
    rows = []
    for m in range(ensemble.n_models):
        for l in range(world.n_locations):
            for j in range(world.n_scenarios):
                d = metrics.decompose(float(ensemble.projections[m, l, j]),
                                      float(world.y_counterfactual[l, j]),
                                      float(world.y_observed[l]))
                rows.append((m, l, j, d.projected, d.counterfactual_obs,
                             d.realized_obs, d.observed_deviation,
                             d.calibration_error, d.scenario_spec_error,
                             d.total_error))
    return rows


A1_DEVIATION_HEADER = ("model_id", "location_id", "plausible_scenario",
                       "deviation", "estimated_error", "true_error",
                       "abs_difference")


def _a1_deviation_rows(world, errs, results):
    key = (APPROACH_PLAUSIBLE, VARIANT_PLAUSIBLE)
    if key not in results:
        return []
    result = results[key]
    chosen = result.selection.chosen_index
    rows = []
    for m in range(errs.shape[0]):
        for l in range(world.n_locations):
            if chosen[l] < 0:
                continue
            est = float(result.point_errors[m, l])
            true = float(errs[m, l, chosen[l]])
            rows.append((m, l, int(chosen[l]), float(result.selection.deviation[l]),
                         est, true, abs(est - true)))
    return rows


IMPLIED_OBS_HEADER = ("variant", "model_id", "scenario_index", "ks_d",
                      "ks_critical", "ks_significant")


def _implied_obs_rows(world, ensemble, results):
    rows = []
    for (approach_id, variant), result in results.items():
        if approach_id != APPROACH_ERROR_REGRESSION:
            continue
        for m in range(ensemble.n_models):
            for j in range(world.n_scenarios):
                implied = approaches.implied_observations(result, ensemble,
                                                          world, m, j)
                ks = metrics.ks_two_sample(implied, world.y_counterfactual[:, j])
                rows.append((variant, m, j, ks.statistic, ks.critical_value,
                             ks.significant))
    return rows


LOCATION_MAE_HEADER = ("approach", "variant", "model_id", "scenario_index",
                       "location_id", "est_mean", "true_error", "abs_difference")


def _location_mae_rows(world, errs, results):
    rows = []
    for (approach_id, variant), result in results.items():
        if approach_id == APPROACH_PLAUSIBLE:
            chosen = result.selection.chosen_index
            for m in range(errs.shape[0]):
                for l in range(world.n_locations):
                    if chosen[l] < 0:
                        continue
                    est = float(result.point_errors[m, l])
                    true = float(errs[m, l, chosen[l]])
                    rows.append((approach_id, variant, m, int(chosen[l]), l,
                                 est, true, abs(est - true)))
        else:
            for (m, j, l), dist in sorted(result.per_location.items()):
                est = float(dist.samples.mean())
                true = float(errs[m, l, j])
                rows.append((approach_id, variant, m, j, l, est, true,
                             abs(est - true)))
    return rows


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])


WORLD_HEADER = ("location_id", "r0_true", "alpha_true", "x_kind", "x_value",
                "y_value")


def _world_rows(world):
    S = world.n_scenarios
    for l in range(world.n_locations):
        for j in range(S):
            yield (l, float(world.r0_true[l]), float(world.alpha_true[l]),
                   x_kind_label(j, S), float(world.scenario_values[j]),
                   float(world.y_counterfactual[l, j]))
        yield (l, float(world.r0_true[l]), float(world.alpha_true[l]),
               world_gen.REALIZED, float(world.x_realized[l]),
               float(world.y_observed[l]))


PROJECTIONS_HEADER = ("model_id", "location_id", "x_kind", "x_value",
                      "y_projected", "y_observed_or_counterfactual")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_report(report: EvaluationReport, out_dir,
                 config_bytes: bytes | None = None) -> dict:
    """Write all report files to ``out_dir``; returns the manifest dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "world.csv", WORLD_HEADER, _world_rows(report.world))
    _write_csv(out / "projections.csv", PROJECTIONS_HEADER,
               world_gen.csv_rows(report.world, report.ensemble))
    _write_csv(out / "approach_estimates.csv", ESTIMATE_HEADER,
               report.estimate_rows)
    _write_csv(out / "report.csv", REPORT_HEADER, report.report_rows)
    _write_csv(out / "decomposition.csv", DECOMPOSITION_HEADER,
               report.decomposition_rows)
    _write_csv(out / "a1_deviation.csv", A1_DEVIATION_HEADER,
               report.a1_deviation_rows)
    _write_csv(out / "implied_obs_ks.csv", IMPLIED_OBS_HEADER,
               report.implied_obs_ks_rows)
    _write_csv(out / "location_mae.csv", LOCATION_MAE_HEADER,
               report.location_mae_rows)

    settings_dict = asdict(report.settings)
    config_digest = hashlib.sha256(
        config_bytes if config_bytes is not None
        else json.dumps(settings_dict, sort_keys=True, default=str).encode()
    ).hexdigest()
    manifest = {
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": report.settings.experiment.seed,
        "config_sha256": config_digest,
        "n_locations": report.settings.experiment.n_locations,
        "n_models": report.settings.experiment.n_models,
        "redraw_count": report.ensemble.redraw_count,
        "files": {name: _sha256(out / name) for name in DATA_FILES},
    }
    with open(out / MANIFEST_FILE, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return manifest


def run(config_path, out_dir, seed: int | None = None,
        threads: int | None = None) -> EvaluationReport:
    """Load settings (or defaults when ``config_path`` is None), evaluate,
    and write the report directory."""
    config_bytes = None
    if config_path is None:
        settings = default_settings()
    else:
        settings = load_settings(config_path)
        config_bytes = Path(config_path).read_bytes()
    if seed is not None:
        settings = replace(settings,
                           experiment=replace(settings.experiment, seed=seed))
        config_bytes = None   # overridden seed invalidates the file hash alone
    if threads is not None:
        settings = replace(settings, threads=threads)
    report = evaluate(settings)
    write_report(report, out_dir, config_bytes)
    return report


def resolve_out_dir(cli_value: str | None, default: str = "scenario_eval_report") -> Path:
    """Output directory precedence: explicit CLI value, then the
    SCENARIO_EVAL_OUT environment variable, then the default."""
    if cli_value is not None:
        return Path(cli_value)
    env = os.environ.get(OUT_DIR_ENV)
    return Path(env) if env else Path(default)
