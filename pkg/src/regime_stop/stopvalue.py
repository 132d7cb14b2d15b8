"""The stop-value surface: expected terminal max/price ratio when stopping now.

Computed three ways.  The production path is the backward recursion over the
solver grid; the constant-coefficient direct integral and a Monte Carlo
estimator serve as independent oracles for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import QuadratureSpec, triangle_rule
from .grids import SolverGrid
from .kernels import StepKernels, interp_layer
from .model import RegimeModel

__all__ = [
    "StopValueSurface",
    "terminal_layer",
    "solve_stop_value",
    "stop_value_direct",
    "stop_value_mc",
]


@dataclass
class StopValueSurface:
    """Tabulated stop-value over (time step, ratio node, state)."""

    grid: SolverGrid
    values: np.ndarray  # (n+1, P, m)

    @property
    def num_states(self) -> int:
        return self.values.shape[2]

    def layer(self, k: int) -> np.ndarray:
        return self.values[k]

    def value_at(self, t: float, a, state) -> np.ndarray:
        """Surface at arbitrary (t, a, state); time rounds up to the grid."""
        k = self.grid.ceil_index(t)
        return interp_layer(self.grid, self.values[k], np.asarray(a, dtype=float), state)


def terminal_layer(grid: SolverGrid, num_states: int) -> np.ndarray:
    """Terminal condition: the surface equals the ratio itself, every state."""
    return np.tile(grid.a_nodes[:, None], (1, num_states))


def solve_stop_value(
    model: RegimeModel,
    grid: SolverGrid,
    spec: QuadratureSpec | None = None,
    kernels: StepKernels | None = None,
    switch_time_interp: bool = False,
) -> StopValueSurface:
    """Full backward pass for the stop-value surface.

    ``switch_time_interp`` evaluates the jump-term integrand on layers
    linearly extended to the actual jump time instead of frozen at the next
    grid time; it exists for accuracy studies and defaults to off.
    """
    spec = spec or QuadratureSpec()
    kern = kernels or StepKernels(model, grid, spec)
    m = model.num_states
    n = grid.n
    values = np.empty((n + 1, len(grid.a_nodes), m))
    values[n] = terminal_layer(grid, m)
    delta = grid.delta
    for k in range(n, 0, -1):
        switch_layers = None
        if switch_time_interp and m > 1:
            if k < n:
                # extend backward from layers k and k+1 to the jump time
                slope = (values[k + 1] - values[k]) / delta
                switch_layers = [
                    values[k] + (r - delta) * slope for r in kern.r_nodes
                ]
            else:
                switch_layers = [values[k] for _ in kern.r_nodes]
        values[k - 1] = kern.stop_value_step(values[k], switch_layers)
    return StopValueSurface(grid=grid, values=values)


def stop_value_step(
    model: RegimeModel,
    grid: SolverGrid,
    spec: QuadratureSpec,
    layer: np.ndarray,
) -> np.ndarray:
    """Single backward step on one layer; convenience wrapper for probing."""
    return StepKernels(model, grid, spec).stop_value_step(layer)


def stop_value_direct(
    lam: float,
    sigma: float,
    t: float,
    a,
    horizon: float,
    spec: QuadratureSpec | None = None,
):
    """Constant-coefficient stop-value by a single drift-tilted integral.

    Evaluates E[a v exp(sigma * max of lam-drifted BM over the remaining
    horizon)] directly against the (endpoint, max) density, with no time
    stepping.  Exact a at t = horizon.

    The integrand has a derivative kink in y where sigma*y crosses log(a),
    so the outer integral is split there; each piece keeps the usual tensor
    rule and Gauss-Legendre stays spectrally accurate.
    """
    from .density import _gauss_legendre, max_joint_density

    spec = spec or QuadratureSpec()
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    tau = horizon - t
    if tau < 0:
        raise ValueError("t must be <= horizon")
    if tau == 0.0:
        out = a_arr.copy()
        return float(out[0]) if np.isscalar(a) else out

    radius = spec.trunc_sd * np.sqrt(tau)
    gy, wy = _gauss_legendre(spec.nodes_y)
    gs, ws = _gauss_legendre(spec.nodes_x)
    s_unit = 0.5 * (gs + 1.0)
    ws_unit = 0.5 * ws

    la = np.log(a_arr)
    out = np.empty_like(a_arr)
    for i, l0 in enumerate(la):
        split = min(l0 / sigma, radius)
        total = 0.0
        for ylo, yhi in ((0.0, split), (split, radius)):
            if yhi <= ylo:
                continue
            y = ylo + 0.5 * (yhi - ylo) * (gy + 1.0)
            wyp = 0.5 * (yhi - ylo) * wy
            span = y[:, None] + radius
            x = -radius + s_unit[None, :] * span
            jac = span * ws_unit[None, :]
            yy = np.broadcast_to(y[:, None], x.shape)
            w = wyp[:, None] * jac * max_joint_density(tau, x, yy)
            expo = (
                np.maximum(l0, sigma * yy)
                + lam * x
                - 0.5 * lam * lam * tau
            )
            total += float(np.sum(np.exp(expo) * w))
        out[i] = total
    return float(out[0]) if np.isscalar(a) else out


def stop_value_mc(
    model: RegimeModel,
    t: float,
    a: float,
    state: int,
    paths: int,
    rng: np.random.Generator,
    substeps: int = 1,
):
    """Monte Carlo estimate of the stop-value with its standard error.

    Simulates the regime path exactly and the running maximum by bridge-max
    sampling, so the estimate carries no time-discretisation bias beyond
    regime handling inside the path engine.
    """
    from .oracle import simulate_paths

    if paths < 2:
        raise ValueError("paths must be >= 2")
    horizon = model.horizon
    if t > horizon:
        raise ValueError("t must be <= horizon")
    if t == horizon:
        return float(a), 0.0
    batch = simulate_paths(
        model,
        t0=t,
        t1=horizon,
        a0=1.0,
        state0=state,
        paths=paths,
        substeps=substeps,
        rng=rng,
        record_times=np.array([t, horizon]),
    )
    ratio = np.exp(batch.log_max[:, -1])
    vals = np.maximum(float(a), ratio)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(len(vals)))
    return est, se
