"""Regime-switching market model and derived per-state quantities.

The market is a geometric Brownian motion whose drift and volatility are
driven by an observable continuous-time Markov chain on states {0..m-1}
with generator matrix ``q``.  A single state with ``q = [[0]]`` selects the
constant-coefficient behaviour everywhere downstream; there is no separate
code path for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BadGeneratorRow,
    ModelValidationError,
    NegativeOffDiagonal,
    NonPositiveSigma,
)

GENERATOR_ROW_TOL = 1e-12


@dataclass(frozen=True)
class RegimeModel:
    """Per-state drift/volatility, chain generator and horizon.

    Immutable after validation; safe to share across threads.
    """

    mu: np.ndarray
    sigma: np.ndarray
    generator: np.ndarray
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)))
        object.__setattr__(self, "sigma", np.atleast_1d(np.asarray(self.sigma, dtype=float)))
        object.__setattr__(self, "generator", np.atleast_2d(np.asarray(self.generator, dtype=float)))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def num_states(self) -> int:
        return len(self.mu)


@dataclass(frozen=True)
class DriftParams:
    """Volatility-normalised drift ``mu/sigma - sigma/2`` per state.

    ``constant`` is populated only for single-state models, where it is the
    scalar drift of the normalised log-price.
    """

    u: np.ndarray
    constant: Optional[float] = field(default=None)


def validate_model(model: RegimeModel, repair: bool = False) -> RegimeModel:
    """Check every model invariant and return the validated model.

    Reports all violations at once through ModelValidationError.  With
    ``repair=True`` an inconsistent generator diagonal is recomputed as the
    negative off-diagonal row sum instead of being rejected; off-diagonal
    signs are still enforced.  Idempotent on valid models.
    """
    violations = []

    mu, sigma, q = model.mu, model.sigma, model.generator
    m = model.num_states

    if mu.shape != (m,) or sigma.shape != (m,):
        violations.append(ValueError(f"mu/sigma must both have length {m}"))
    if q.shape != (m, m):
        violations.append(ValueError(f"generator must be {m}x{m}, got {q.shape}"))
    if model.horizon <= 0.0:
        violations.append(ValueError(f"horizon {model.horizon} must be > 0"))

    if violations:
        raise ModelValidationError(violations)

    for j in range(m):
        if not sigma[j] > 0.0:
            violations.append(NonPositiveSigma(j, float(sigma[j])))

    for i in range(m):
        for j in range(m):
            if i != j and q[i, j] < 0.0:
                violations.append(NegativeOffDiagonal(i, j, float(q[i, j])))

    if repair:
        off = q.copy()
        np.fill_diagonal(off, 0.0)
        fixed = off - np.diag(off.sum(axis=1))
        model = RegimeModel(mu=mu, sigma=sigma, generator=fixed, horizon=model.horizon)
        q = model.generator

    for i in range(m):
        residual = float(q[i].sum())
        if abs(residual) > GENERATOR_ROW_TOL:
            violations.append(BadGeneratorRow(i, residual))
    for j in range(m):
        if q[j, j] > 0.0:
            violations.append(ValueError(f"generator diagonal [{j},{j}] = {q[j, j]} must be <= 0"))

    if violations:
        raise ModelValidationError(violations)
    return model


def drift_params(model: RegimeModel) -> DriftParams:
    """Recompute ``u = mu/sigma - sigma/2`` from the model; exact, no caching."""
    u = model.mu / model.sigma - model.sigma / 2.0
    constant = float(u[0]) if model.num_states == 1 else None
    return DriftParams(u=u, constant=constant)


def single_state_model(mu: float, sigma: float, horizon: float) -> RegimeModel:
    """Convenience constructor for the constant-coefficient market."""
    return validate_model(
        RegimeModel(mu=[mu], sigma=[sigma], generator=[[0.0]], horizon=horizon)
    )
