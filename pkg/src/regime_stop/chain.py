"""Continuous-time Markov chain utilities: transition matrices, jump-time
laws and exact path sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import math

import numpy as np

from .model import RegimeModel

ROW_SUM_TOL = 1e-10
_TAYLOR_TERMS = 12


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix exp(dt * Q).

    ``residual`` is the largest |row sum - 1| before renormalisation, exposed
    so tests can check the raw exponential rather than the cleaned-up one.
    """

    dt: float
    probs: np.ndarray
    residual: float


@dataclass(frozen=True)
class ChainPath:
    """One realisation of the chain: initial state plus its jumps.

    ``states[0]`` is the state at the start time; ``states[i]`` holds after
    ``jump_times[i-1]``.  Consecutive states always differ and jump times are
    strictly increasing.
    """

    jump_times: Tuple[float, ...]
    states: Tuple[int, ...]

    def state_at(self, t: float) -> int:
        idx = 0
        for jt in self.jump_times:
            if jt <= t:
                idx += 1
            else:
                break
        return self.states[idx]


def transition_matrix(model: RegimeModel, dt: float) -> TransitionMatrix:
    """exp(dt*Q) by scaling-and-squaring of a fixed 12-term Taylor series.

    The state space is tiny (a handful of regimes) so nothing fancier is
    needed beyond renormalising rows to sum to 1 afterwards.
    """
    if dt < 0.0:
        raise ValueError("dt must be >= 0")
    q = model.generator
    m = q.shape[0]
    if dt == 0.0:
        return TransitionMatrix(dt=0.0, probs=np.eye(m), residual=0.0)

    a = q * dt
    norm = np.abs(a).sum(axis=1).max()
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0)
    a = a / (2 ** squarings)

    p = np.eye(m)
    term = np.eye(m)
    for k in range(1, _TAYLOR_TERMS + 1):
        term = term @ a / k
        p = p + term
    for _ in range(squarings):
        p = p @ p

    residual = float(np.abs(p.sum(axis=1) - 1.0).max())
    p = np.clip(p, 0.0, None)
    p = p / p.sum(axis=1, keepdims=True)
    return TransitionMatrix(dt=float(dt), probs=p, residual=residual)


def sample_holding_and_jump(
    model: RegimeModel, state: int, rng: np.random.Generator
) -> Tuple[float, int]:
    """Draw the exponential holding time in ``state`` and the landing state.

    Holding time ~ Exp(-q[j,j]); the landing state follows the embedded-chain
    row -q[j,i]/q[j,j].  An absorbing state (zero exit rate) returns an
    infinite holding time and no jump.
    """
    q = model.generator
    rate = -q[state, state]
    if rate <= 0.0:
        return math.inf, state
    holding = rng.exponential(1.0 / rate)
    probs = q[state].copy()
    probs[state] = 0.0
    probs = probs / rate
    nxt = int(rng.choice(model.num_states, p=probs))
    return float(holding), nxt


def sample_chain_path(
    model: RegimeModel, initial_state: int, t0: float, t1: float, rng: np.random.Generator
) -> ChainPath:
    """Exact chain path on [t0, t1] from composition of holding-time draws."""
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    jump_times: List[float] = []
    states: List[int] = [initial_state]
    t = t0
    state = initial_state
    while True:
        holding, nxt = sample_holding_and_jump(model, state, rng)
        t = t + holding
        if t >= t1:
            break
        jump_times.append(t)
        states.append(nxt)
        state = nxt
    return ChainPath(jump_times=tuple(jump_times), states=tuple(states))


def stationary_distribution(model: RegimeModel) -> np.ndarray:
    """Solve pi Q = 0 with pi summing to 1 (for irreducible generators)."""
    q = model.generator
    m = q.shape[0]
    a = np.vstack([q.T, np.ones(m)])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi
