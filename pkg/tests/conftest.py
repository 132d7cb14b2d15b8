import numpy as np
import pytest

import regime_stop as rs


@pytest.fixture(scope="session")
def model_const():
    """Single-state market from the constant-drift study: T=1, mu=0.2, sigma=0.5."""
    return rs.single_state_model(mu=0.2, sigma=0.5, horizon=1.0)


@pytest.fixture(scope="session")
def model_mixed():
    """Two-state market with drifts of mixed signs, T=0.5."""
    return rs.validate_model(
        rs.RegimeModel(
            mu=[0.2, -0.2],
            sigma=[0.5, 0.3],
            generator=[[-2.5, 2.5], [2.0, -2.0]],
            horizon=0.5,
        )
    )


@pytest.fixture(scope="session")
def solved_const(model_const):
    """n=50 solve of the constant-drift model plus its boundary."""
    grid = rs.make_grid(model_const, n=50)
    value, stop = rs.solve_surfaces(model_const, grid)
    curve = rs.extract_boundary(value, stop)
    return grid, value, stop, curve


@pytest.fixture(scope="session")
def solved_mixed_small(model_mixed):
    """n=25 solve of the mixed-sign model for module-level checks."""
    grid = rs.make_grid(model_mixed, n=25)
    value, stop = rs.solve_surfaces(model_mixed, grid)
    curve = rs.extract_boundary(value, stop)
    return grid, value, stop, curve


@pytest.fixture(scope="session")
def solved_mixed_full(model_mixed):
    """n=100 solve of the mixed-sign model (the heavy acceptance config)."""
    grid = rs.make_grid(model_mixed, n=100)
    value, stop = rs.solve_surfaces(model_mixed, grid)
    curve = rs.extract_boundary(value, stop)
    return grid, value, stop, curve


@pytest.fixture()
def rng():
    return np.random.default_rng(20240809)
