import numpy as np
import pytest

from scenario_eval import sir_core
from scenario_eval.errors import NumericalInstabilityError, ParameterDomainError
from scenario_eval.sir_core import SirParams, final_size, final_size_batch, simulate

from conftest import final_size_fixed_point


class TestParamValidation:
    def test_accepts_valid(self):
        SirParams(r0=2.5, alpha=0.975, v=0.3)

    @pytest.mark.parametrize("kwargs", [
        dict(r0=-0.1, alpha=1.0, v=0.3),
        dict(r0=2.5, alpha=0.0, v=0.3),
        dict(r0=2.5, alpha=-1.0, v=0.3),
        dict(r0=2.5, alpha=1.0, v=1.0),
        dict(r0=2.5, alpha=1.0, v=-0.2),
        dict(r0=2.5, alpha=1.0, v=0.3, infectious_period=0.0),
        dict(r0=2.5, alpha=1.0, v=0.3, i0=0.0),
        dict(r0=2.5, alpha=1.0, v=0.999, i0=0.01),
        dict(r0=float("nan"), alpha=1.0, v=0.3),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ParameterDomainError):
            SirParams(**kwargs)

    def test_grid_validation(self):
        params = SirParams(r0=2.0, alpha=1.0, v=0.3)
        with pytest.raises(ParameterDomainError):
            simulate(params, horizon=0.0)
        with pytest.raises(ParameterDomainError):
            simulate(params, horizon=10.0, step=-1.0)


class TestNoTransmission:
    def test_r0_zero_keeps_s_constant(self):
        traj = simulate(SirParams(r0=0.0, alpha=1.0, v=0.4))
        assert np.allclose(traj.s, traj.s[0], atol=1e-15)
        assert traj.i[-1] < 1e-20
        assert final_size(SirParams(r0=0.0, alpha=1.0, v=0.4)) == 0.0

    def test_r0_zero_any_coverage(self):
        for v in (0.0, 0.3, 0.9):
            assert final_size(SirParams(r0=0.0, alpha=0.9, v=v)) == 0.0


class TestFinalSizeOracle:
    def test_matches_fixed_point_at_default_horizon(self):
        # Clearly supercritical case converges well inside the default horizon.
        got = final_size(SirParams(r0=2.5, alpha=1.0, v=0.3))
        expected = final_size_fixed_point(2.5, 0.3)
        assert got == pytest.approx(expected, abs=1e-3)

    def test_matches_refined_step(self):
        params = SirParams(r0=2.5, alpha=1.0, v=0.3)
        coarse = final_size(params, step=0.25)
        fine = final_size(params, step=0.0025)
        assert coarse == pytest.approx(fine, abs=1e-3)

    def test_subcritical_minor_outbreak(self):
        # R_eff = 2.0 * 0.4 = 0.8 < 1: branching bound i0/(1 - R_eff) = 0.005
        # on the infected fraction keeps the relative size well under 0.05.
        params = SirParams(r0=2.0, alpha=1.0, v=0.6)
        size = final_size(params)
        assert 0.0 < size < 0.05
        new_infections = size * (1.0 - 0.6)
        assert new_infections < params.i0 / (1.0 - 0.8)


class TestFinalSizeBehavior:
    def test_monotone_in_coverage(self):
        high = final_size(SirParams(r0=3.0, alpha=1.0, v=0.5))
        low = final_size(SirParams(r0=3.0, alpha=1.0, v=0.3))
        assert high < low

    def test_heterogeneity_damps_outbreaks(self):
        # alpha below 1 reduces transmission on the count scale.
        damped = final_size(SirParams(r0=2.5, alpha=0.95, v=0.3))
        classic = final_size(SirParams(r0=2.5, alpha=1.0, v=0.3))
        assert damped < classic

    def test_final_size_equals_trajectory_extract(self):
        params = SirParams(r0=2.5, alpha=1.0, v=0.3)
        assert final_size(params) == simulate(params).final_size

    def test_classic_alpha_ignores_population(self):
        a = final_size(SirParams(r0=2.5, alpha=1.0, v=0.3, population=1.0))
        b = final_size(SirParams(r0=2.5, alpha=1.0, v=0.3, population=1e6))
        assert a == b


def _random_draws(n, rng):
    r0 = rng.uniform(1.5, 3.5, n)
    alpha = rng.uniform(0.9, 1.05, n)
    v = rng.uniform(0.25, 0.55, n)
    return r0, alpha, v


class TestInvariants:
    def test_conservation_and_monotone_compartments(self):
        rng = np.random.default_rng(7)
        r0, alpha, v = _random_draws(25, rng)
        for k in range(25):
            traj = simulate(SirParams(r0=r0[k], alpha=alpha[k], v=v[k]))
            assert np.max(np.abs(traj.s + traj.i + traj.r - 1.0)) <= 1e-6
            assert np.all(np.diff(traj.s) <= 0)
            assert np.all(np.diff(traj.r) >= 0)

    def test_bounds_on_random_draws(self):
        rng = np.random.default_rng(11)
        r0, alpha, v = _random_draws(200, rng)
        sizes = final_size_batch(r0, alpha, v)
        assert np.all(sizes >= 0.0) and np.all(sizes <= 1.0)

    def test_monotonicity_grid(self):
        # Strict monotonicity in r0 (up), v (down), alpha (up), restricted to
        # the clearly supercritical part of the grid.
        r0s = np.linspace(2.0, 3.0, 5)
        vs = np.linspace(0.3, 0.5, 5)
        alphas = np.linspace(0.95, 1.0, 5)
        rr, vv, aa = np.meshgrid(r0s, vs, alphas, indexing="ij")
        sizes = final_size_batch(rr.ravel(), aa.ravel(), vv.ravel()).reshape(5, 5, 5)
        supercritical = rr * (1.0 - vv) > 1.2
        for i in range(5):
            for j in range(5):
                for k in range(5):
                    if not supercritical[i, j, k]:
                        continue
                    if i + 1 < 5:
                        assert sizes[i + 1, j, k] > sizes[i, j, k]
                    if j + 1 < 5 and supercritical[i, j + 1, k]:
                        assert sizes[i, j + 1, k] < sizes[i, j, k]
                    if k + 1 < 5:
                        assert sizes[i, j, k + 1] > sizes[i, j, k]

    def test_step_refinement_at_default(self):
        params = SirParams(r0=2.5, alpha=0.975, v=0.4)
        assert abs(final_size(params, step=0.25)
                   - final_size(params, step=0.125)) <= 1e-4


class TestBatch:
    def test_batch_matches_scalar_bitwise(self):
        r0 = np.array([2.0, 2.5, 3.0])
        alpha = np.array([0.95, 0.975, 1.0])
        v = np.array([0.3, 0.4, 0.5])
        batch = final_size_batch(r0, alpha, v)
        for k in range(3):
            assert batch[k] == final_size(SirParams(r0=r0[k], alpha=alpha[k], v=v[k]))

    def test_threads_do_not_change_results(self):
        rng = np.random.default_rng(3)
        r0, alpha, v = _random_draws(37, rng)
        a = final_size_batch(r0, alpha, v, threads=1)
        b = final_size_batch(r0, alpha, v, threads=4)
        assert np.array_equal(a, b)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ParameterDomainError):
            final_size_batch(np.array([2.0, 2.5]), np.array([1.0]), np.array([0.3]))

    def test_batch_domain_validation(self):
        with pytest.raises(ParameterDomainError):
            final_size_batch(np.array([-1.0]), np.array([1.0]), np.array([0.3]))


class TestInstability:
    def test_blowup_raises(self):
        # An absurd transmission rate with a strongly superlinear infection
        # term overflows the fixed-step integrator.
        with pytest.raises(NumericalInstabilityError):
            final_size(SirParams(r0=1e8, alpha=5.0, v=0.3), horizon=50.0, step=0.5)
