import numpy as np
import pytest

from scenario_eval import world_gen


@pytest.fixture(scope="session")
def default_world():
    """One full-size world at the default seed, shared across tests."""
    config = world_gen.ExperimentConfig()
    return world_gen.generate(config)


def final_size_fixed_point(r0: float, v: float, i0: float = 0.001) -> float:
    """Independent oracle for the classic (alpha = 1) relative final size.

    Solves s_inf = s0 * exp(-r0 * (r_inf - r_start)) with r_inf = 1 - s_inf,
    s0 = 1 - v, r_start = v - i0, by bisection, and returns (s0 - s_inf)/s0.
    """
    s0 = 1.0 - v
    r_start = v - i0

    def excess(s_inf):
        return s0 * np.exp(-r0 * (1.0 - s_inf - r_start)) - s_inf

    lo, hi = 1e-14, s0
    assert excess(lo) > 0 and excess(hi) < 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    s_inf = 0.5 * (lo + hi)
    return (s0 - s_inf) / s0
