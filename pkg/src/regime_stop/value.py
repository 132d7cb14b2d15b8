"""The optimal value surface via backward induction.

The stored surface is the discrete value function with immediate stopping
allowed: at each node the one-step conditional expectation of
min(stop-value, value) is clipped from above by the stop-value at the same
node.  Stopping is optimal exactly where the two surfaces coincide, which is
what the boundary module classifies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .density import QuadratureSpec
from .grids import SolverGrid
from .kernels import StepKernels, interp_layer
from .model import RegimeModel
from .stopvalue import StopValueSurface, solve_stop_value, terminal_layer

__all__ = ["ValueSurface", "solve_surfaces", "value_step", "value_step_mc"]


@dataclass
class ValueSurface:
    """Optimal value over (time step, ratio node, state), dominated by stop."""

    grid: SolverGrid
    values: np.ndarray  # (n+1, P, m)
    stop: StopValueSurface

    @property
    def num_states(self) -> int:
        return self.values.shape[2]

    def layer(self, k: int) -> np.ndarray:
        return self.values[k]

    def value_at(self, t: float, a, state) -> np.ndarray:
        k = self.grid.ceil_index(t)
        return interp_layer(self.grid, self.values[k], np.asarray(a, dtype=float), state)


def solve_surfaces(
    model: RegimeModel,
    grid: SolverGrid,
    spec: QuadratureSpec | None = None,
    switch_time_interp: bool = False,
) -> Tuple[ValueSurface, StopValueSurface]:
    """Both backward passes: stop-value first, then the value surface.

    Wall clock is linear in the number of time steps at fixed grid and
    quadrature: the kernels are precomputed once and every step costs the
    same.
    """
    spec = spec or QuadratureSpec()
    kern = StepKernels(model, grid, spec)
    stop = solve_stop_value(
        model, grid, spec, kernels=kern, switch_time_interp=switch_time_interp
    )
    n = grid.n
    m = model.num_states
    delta = grid.delta
    values = np.empty_like(stop.values)
    values[n] = terminal_layer(grid, m)
    for k in range(n, 0, -1):
        switch_layers = None
        if switch_time_interp and m > 1:
            if k < n:
                s_slope = (stop.values[k + 1] - stop.values[k]) / delta
                v_slope = (values[k + 1] - values[k]) / delta
                switch_layers = [
                    (
                        stop.values[k] + (r - delta) * s_slope,
                        values[k] + (r - delta) * v_slope,
                    )
                    for r in kern.r_nodes
                ]
            else:
                switch_layers = [(stop.values[k], values[k]) for _ in kern.r_nodes]
        raw = kern.value_step(stop.values[k], values[k], switch_layers)
        values[k - 1] = np.minimum(raw, stop.values[k - 1])
    return ValueSurface(grid=grid, values=values, stop=stop), stop


def value_step(
    model: RegimeModel,
    grid: SolverGrid,
    spec: QuadratureSpec,
    stop_layer: np.ndarray,
    value_layer: np.ndarray,
) -> np.ndarray:
    """Raw one-step expectation of min(stop, value); wrapper for probing.

    Does not clip by the stop-value at the earlier step, so the caller sees
    the bare continuation value.
    """
    return StepKernels(model, grid, spec).value_step(stop_layer, value_layer)


def value_step_mc(
    model: RegimeModel,
    grid: SolverGrid,
    stop_layer: np.ndarray,
    value_layer: np.ndarray,
    k: int,
    a: float,
    state: int,
    paths: int,
    rng: np.random.Generator,
):
    """Monte Carlo estimate of the same one-step expectation at one point.

    Simulates the chain on one grid interval with exact jump times and the
    within-step maximum by bridge sampling, then averages the interpolated
    min(stop, value) at the resulting ratio and end state.  Returns
    (estimate, standard error).
    """
    from .oracle import simulate_paths

    if not 1 <= k <= grid.n:
        raise ValueError("k must be in 1..n")
    t0 = (k - 1) * grid.delta
    t1 = k * grid.delta
    batch = simulate_paths(
        model,
        t0=t0,
        t1=t1,
        a0=a,
        state0=state,
        paths=paths,
        substeps=1,
        rng=rng,
        record_times=np.array([t0, t1]),
    )
    ratio = np.exp(batch.log_max[:, -1] - batch.log_price[:, -1])
    end_state = batch.state[:, -1]
    sv = interp_layer(grid, stop_layer, ratio, end_state)
    vv = interp_layer(grid, value_layer, ratio, end_state)
    vals = np.minimum(sv, vv)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(len(vals)))
    return est, se
