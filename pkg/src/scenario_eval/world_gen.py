"""Generate simulated worlds for evaluating scenario projections.

A world consists of a ground truth and an ensemble of imperfect projection
models, per location:

  truth:    x*_l ~ U(x range)               realized vaccination coverage
            R0*_l ~ U(R0 range)             true basic reproduction number
            a*_l ~ N(alpha mean, alpha sd)  true heterogeneity exponent
  model m:  b_m ~ N(0, global bias sd)      shared R0 bias
            b_ml ~ N(0, local bias sd)      location R0 bias
            c_m ~ U(alpha center range)     model alpha center
            a_ml ~ N(c_m, model alpha sd)   model heterogeneity exponent
            R0_ml = R0*_l + b_m + b_ml      (redrawn b_ml if R0_ml <= 0)

From these, every final size the experiment needs is computed with the SIR
solver:

  y_counterfactual[l, j] : truth at each scenario coverage x_j (never
                           observable in reality, known here by construction)
  y_observed[l]          : truth at the realized coverage x*_l
  projections[m, l, j]   : model m at each scenario coverage
  reprojection[m, l]     : model m rerun honestly at the realized x*_l,
                           from the same (R0_ml, a_ml) as its projections

All draws come from keyed substreams, so outputs are bit-identical for a
given seed regardless of thread count or the number of other entities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sir_core
from .errors import ConfigError, StructuralError
from .streams import KIND_LOCATION, KIND_MODEL, KIND_PAIR, substream

DEFAULT_SEED = 38

SCENARIO_LOW = "scenario_low"
SCENARIO_HIGH = "scenario_high"
REALIZED = "realized"


@dataclass(frozen=True)
class ExperimentConfig:
    """Full parameterization of one simulated world."""

    n_locations: int = 50
    n_models: int = 10
    scenario_values: tuple[float, ...] = (0.30, 0.50)
    seed: int = DEFAULT_SEED
    x_realized_range: tuple[float, float] = (0.30, 0.50)
    r0_true_range: tuple[float, float] = (2.0, 3.0)
    alpha_true_mean: float = 0.975
    alpha_true_sd: float = 0.01
    global_bias_sd: float = 0.05
    local_bias_sd: float = 0.05
    alpha_center_range: tuple[float, float] = (0.95, 1.0)
    alpha_model_sd: float = 0.01
    perfect_models: bool = False
    infectious_period: float = sir_core.DEFAULT_INFECTIOUS_PERIOD
    i0: float = sir_core.DEFAULT_I0
    population: float = sir_core.DEFAULT_POPULATION
    horizon: float = sir_core.DEFAULT_HORIZON
    step: float = sir_core.DEFAULT_STEP

    def __post_init__(self):
        if self.n_locations < 2:
            raise ConfigError("n_locations must be >= 2", "n_locations")
        if self.n_models < 1:
            raise ConfigError("n_models must be >= 1", "n_models")
        values = tuple(float(x) for x in self.scenario_values)
        if len(values) < 1 or any(not 0 <= x < 1 for x in values):
            raise ConfigError("scenario values must lie in [0, 1)", "scenario_values")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("scenario values must be strictly increasing",
                              "scenario_values")
        object.__setattr__(self, "scenario_values", values)
        for name in ("x_realized_range", "r0_true_range", "alpha_center_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError("range must satisfy low < high", name)
        for name in ("alpha_true_sd", "global_bias_sd", "local_bias_sd",
                     "alpha_model_sd"):
            if getattr(self, name) < 0:
                raise ConfigError("standard deviation must be >= 0", name)
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer", "seed")


@dataclass(frozen=True)
class TrueWorld:
    """Ground truth: per-location parameters, observation, counterfactuals."""

    scenario_values: np.ndarray          # (S,)
    r0_true: np.ndarray                  # (L,)
    alpha_true: np.ndarray               # (L,)
    x_realized: np.ndarray               # (L,)
    y_observed: np.ndarray               # (L,)
    y_counterfactual: np.ndarray         # (L, S)

    @property
    def n_locations(self) -> int:
        return len(self.x_realized)

    @property
    def n_scenarios(self) -> int:
        return len(self.scenario_values)


@dataclass(frozen=True)
class ModelEnsemble:
    """Projection models: biased parameters, projections, honest reprojections."""

    global_bias: np.ndarray              # (M,)
    alpha_center: np.ndarray             # (M,)
    local_bias: np.ndarray               # (M, L)
    alpha_model: np.ndarray              # (M, L)
    r0_model: np.ndarray                 # (M, L)
    projections: np.ndarray              # (M, L, S)
    reprojection: np.ndarray             # (M, L)
    redraw_count: int = 0

    @property
    def n_models(self) -> int:
        return len(self.global_bias)


def generate(config: ExperimentConfig, threads: int = 1) -> tuple[TrueWorld, ModelEnsemble]:
    """Draw one world and compute every projected/observed final size.

    Deterministic given ``config`` (including its seed); ``threads`` only
    parallelizes the SIR solves.
    """
    L, M = config.n_locations, config.n_models
    scen = np.asarray(config.scenario_values)
    S = len(scen)
    seed = config.seed

    x_realized = np.empty(L)
    r0_true = np.empty(L)
    alpha_true = np.empty(L)
    for l in range(L):
        g = substream(seed, KIND_LOCATION, l)
        x_realized[l] = g.uniform(*config.x_realized_range)
        r0_true[l] = g.uniform(*config.r0_true_range)
        alpha_true[l] = g.normal(config.alpha_true_mean, config.alpha_true_sd)

    global_bias = np.empty(M)
    alpha_center = np.empty(M)
    for m in range(M):
        g = substream(seed, KIND_MODEL, m)
        global_bias[m] = g.normal(0.0, config.global_bias_sd)
        alpha_center[m] = g.uniform(*config.alpha_center_range)

    local_bias = np.empty((M, L))
    alpha_model = np.empty((M, L))
    redraws = 0
    for m in range(M):
        for l in range(L):
            g = substream(seed, KIND_PAIR, m, l)
            local_bias[m, l] = g.normal(0.0, config.local_bias_sd)
            alpha_model[m, l] = g.normal(alpha_center[m], config.alpha_model_sd)
            while r0_true[l] + global_bias[m] + local_bias[m, l] <= 0:
                local_bias[m, l] = g.normal(0.0, config.local_bias_sd)
                redraws += 1

    if config.perfect_models:
        global_bias = np.zeros(M)
        local_bias = np.zeros((M, L))
        alpha_model = np.broadcast_to(alpha_true, (M, L)).copy()
    r0_model = r0_true[None, :] + global_bias[:, None] + local_bias

    # One flat batch for every solve the experiment needs, sliced afterwards:
    # [counterfactuals (L*S) | observed (L) | projections (M*L*S) | reprojections (M*L)]
    batch_r0 = np.concatenate([
        np.repeat(r0_true, S),
        r0_true,
        np.repeat(r0_model.reshape(-1), S),
        r0_model.reshape(-1),
    ])
    batch_alpha = np.concatenate([
        np.repeat(alpha_true, S),
        alpha_true,
        np.repeat(alpha_model.reshape(-1), S),
        alpha_model.reshape(-1),
    ])
    batch_v = np.concatenate([
        np.tile(scen, L),
        x_realized,
        np.tile(scen, M * L),
        np.tile(x_realized, M),
    ])
    sizes = sir_core.final_size_batch(
        batch_r0, batch_alpha, batch_v,
        i0=config.i0, infectious_period=config.infectious_period,
        population=config.population, horizon=config.horizon, step=config.step,
        threads=threads)

    n_cf, n_obs, n_proj = L * S, L, M * L * S
    y_counterfactual = sizes[:n_cf].reshape(L, S)
    y_observed = sizes[n_cf:n_cf + n_obs]
    projections = sizes[n_cf + n_obs:n_cf + n_obs + n_proj].reshape(M, L, S)
    reprojection = sizes[n_cf + n_obs + n_proj:].reshape(M, L)

    world = TrueWorld(
        scenario_values=scen, r0_true=r0_true, alpha_true=alpha_true,
        x_realized=x_realized, y_observed=y_observed,
        y_counterfactual=y_counterfactual)
    ensemble = ModelEnsemble(
        global_bias=global_bias, alpha_center=alpha_center,
        local_bias=local_bias, alpha_model=alpha_model, r0_model=r0_model,
        projections=projections, reprojection=reprojection,
        redraw_count=redraws)
    return world, ensemble


def true_errors(world: TrueWorld, ensemble: ModelEnsemble) -> np.ndarray:
    """Signed errors projections[m, l, j] - y_counterfactual[l, j], shape (M, L, S)."""
    if ensemble.projections.shape[1:] != world.y_counterfactual.shape:
        raise StructuralError(
            f"ensemble projections {ensemble.projections.shape} do not match "
            f"world counterfactuals {world.y_counterfactual.shape}")
    return ensemble.projections - world.y_counterfactual[None, :, :]


def x_kind_label(scenario_index: int, n_scenarios: int) -> str:
    """Stable scenario labels: low/high when there are two, indexed otherwise."""
    if n_scenarios == 2:
        return SCENARIO_LOW if scenario_index == 0 else SCENARIO_HIGH
    return f"scenario_{scenario_index}"


def csv_rows(world: TrueWorld, ensemble: ModelEnsemble):
    """Serialize to rows (model_id, location_id, x_kind, x_value, y_projected,
    y_observed_or_counterfactual): one row per (model, location,
    scenario-point), where the scenario points are every modeled scenario
    plus the realized coverage."""
    S = world.n_scenarios
    for m in range(ensemble.n_models):
        for l in range(world.n_locations):
            for j in range(S):
                yield (m, l, x_kind_label(j, S), float(world.scenario_values[j]),
                       float(ensemble.projections[m, l, j]),
                       float(world.y_counterfactual[l, j]))
            yield (m, l, REALIZED, float(world.x_realized[l]),
                   float(ensemble.reprojection[m, l]), float(world.y_observed[l]))
