"""Time and ratio-axis discretisation for the backward induction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import RegimeModel, drift_params

DEFAULT_A_POINTS = 200
A_MAX_SIGMAS = 6.0


def default_a_max(model: RegimeModel) -> float:
    """Saturation level for the max/price ratio grid.

    The log ratio the horizon can reach is bounded by the best-case log-price
    drift plus a six-standard-deviation diffusion move; beyond that the tail
    mass is below 1e-8 and the surfaces are extended additively (constant
    offset).  Keeping the cap this tight preserves grid resolution where the
    boundary actually lives.
    """
    log_drift = np.max(model.mu - 0.5 * model.sigma**2)
    scale = (
        max(log_drift, 0.0) * model.horizon
        + A_MAX_SIGMAS * model.sigma.max() * np.sqrt(model.horizon)
    )
    return float(np.exp(scale))


@dataclass(frozen=True)
class SolverGrid:
    """Uniform time grid plus a log-spaced ratio grid on [1, a_max].

    ``log_a`` is uniform, which is what the kernels interpolate on;
    ``a_nodes[0]`` is exactly 1.
    """

    n: int
    horizon: float
    a_nodes: np.ndarray
    log_a: np.ndarray

    @property
    def delta(self) -> float:
        return self.horizon / self.n

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n + 1)

    @property
    def log_step(self) -> float:
        return float(self.log_a[1] - self.log_a[0])

    @property
    def a_max(self) -> float:
        return float(self.a_nodes[-1])

    def ceil_index(self, s: float) -> int:
        """Smallest k with t_k >= s (s must lie in [0, horizon])."""
        if s < 0.0 or s > self.horizon * (1.0 + 1e-12):
            raise ValueError(f"time {s} outside [0, {self.horizon}]")
        k = int(np.ceil(s / self.delta - 1e-12))
        return min(max(k, 0), self.n)

    def ceil_time(self, s: float) -> float:
        return self.ceil_index(s) * self.delta


def make_grid(
    model: RegimeModel,
    n: int,
    a_points: int = DEFAULT_A_POINTS,
    a_max: float | None = None,
) -> SolverGrid:
    if n < 1:
        raise ValueError("n must be >= 1")
    if a_points < 2:
        raise ValueError("a_points must be >= 2")
    if a_max is None:
        a_max = default_a_max(model)
    if not a_max > 1.0:
        raise ValueError("a_max must be > 1")
    log_a = np.linspace(0.0, np.log(a_max), a_points)
    a_nodes = np.exp(log_a)
    return SolverGrid(n=n, horizon=model.horizon, a_nodes=a_nodes, log_a=log_a)
