"""Independent Monte Carlo ground truth for the solver.

Simulates full regime-switching price paths with their running maxima and
evaluates stopping policies on them, including the first-hitting policy
induced by a computed boundary.  Regime jump times are sampled exactly; the
log-price over each constant-regime piece gets an exact Gaussian increment;
and the within-piece maximum is drawn from the Brownian-bridge maximum law
given the endpoints, which removes the discrete-max bias that would
otherwise push every maximum-based estimate low.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .boundary import BoundaryCurve
from .model import RegimeModel, drift_params

_CHUNK = 1 << 16


@dataclass
class PathBatch:
    """Recorded path snapshots, normalised by the starting price.

    ``log_price`` is log(Y_t / Y_t0); ``log_max`` is the running maximum of
    max(a0 * Y_t0, sup Y) over [t0, t], also normalised, so the max/price
    ratio at any recorded time is exp(log_max - log_price).  When
    ``antithetic`` is set, rows 2i and 2i+1 form a mirrored pair.
    """

    times: np.ndarray
    log_price: np.ndarray
    log_max: np.ndarray
    state: np.ndarray
    a0: float
    antithetic: bool = False
    stream_label: str = ""

    @property
    def paths(self) -> int:
        return self.log_price.shape[0]

    @property
    def ratio(self) -> np.ndarray:
        return np.exp(self.log_max - self.log_price)


@dataclass(frozen=True)
class PolicySpec:
    """A stopping rule measurable in (time, ratio, regime).

    Boundary policies use the left-constant boundary value on each grid
    interval and are checked at the batch's recorded times, which matches the
    grid-valued stopping times the solver optimises over.
    """

    kind: str
    time: Optional[float] = None
    curve: Optional[BoundaryCurve] = None

    @staticmethod
    def immediate() -> "PolicySpec":
        return PolicySpec(kind="immediate")

    @staticmethod
    def fixed_time(t: float) -> "PolicySpec":
        return PolicySpec(kind="fixed_time", time=float(t))

    @staticmethod
    def hit_boundary(curve: BoundaryCurve) -> "PolicySpec":
        return PolicySpec(kind="hit_boundary", curve=curve)


def _refine_times(record_times: np.ndarray, substeps: int) -> Tuple[np.ndarray, np.ndarray]:
    """All advance targets plus a flag marking which of them are recorded."""
    pieces = [np.array([record_times[0]])]
    flags = [np.array([True])]
    for lo, hi in zip(record_times[:-1], record_times[1:]):
        inner = lo + (hi - lo) * np.arange(1, substeps + 1) / substeps
        pieces.append(inner)
        f = np.zeros(substeps, dtype=bool)
        f[-1] = True
        flags.append(f)
    return np.concatenate(pieces), np.concatenate(flags)


class _ChunkSim:
    """Vectorised simulation of one chunk of paths."""

    def __init__(self, model: RegimeModel, rng: np.random.Generator,
                 bridge_max: bool, antithetic: bool):
        self.model = model
        self.rng = rng
        self.bridge = bridge_max
        self.anti = antithetic
        self.sigma = model.sigma
        self.u = drift_params(model).u
        q = model.generator
        self.exit_rate = -np.diag(q)
        m = model.num_states
        emb = np.zeros((m, m))
        for j in range(m):
            if self.exit_rate[j] > 0.0:
                emb[j] = q[j] / self.exit_rate[j]
                emb[j, j] = 0.0
        self.emb_cum = np.cumsum(emb, axis=1)
        self.emb_cum[self.exit_rate <= 0.0] = 1.0

    def _holding(self, states: np.ndarray) -> np.ndarray:
        e = self.rng.standard_exponential(len(states))
        rate = self.exit_rate[states]
        out = np.full(len(states), np.inf)
        np.divide(e, rate, out=out, where=rate > 0.0)
        return out

    def _landing(self, states: np.ndarray) -> np.ndarray:
        v = self.rng.random(len(states))
        rows = self.emb_cum[states]
        return (v[:, None] >= rows).sum(axis=1).astype(states.dtype)

    def run(self, t0: float, a0: float, state0: int, base_paths: int,
            targets: np.ndarray, recorded: np.ndarray):
        rng = self.rng
        copies = 2 if self.anti else 1
        b = base_paths
        state = np.full(b, state0, dtype=np.int64)
        t_curr = np.full(b, t0)
        next_jump = t0 + self._holding(state)

        logy = np.zeros((copies, b))
        logm = np.full((copies, b), np.log(a0))

        n_rec = int(recorded.sum())
        out_y = np.empty((copies, b, n_rec))
        out_m = np.empty((copies, b, n_rec))
        out_s = np.empty((b, n_rec), dtype=np.int16)

        def advance(mask: np.ndarray, dt: np.ndarray):
            cnt = int(mask.sum())
            if cnt == 0:
                return
            st = state[mask]
            sig = self.sigma[st]
            uu = self.u[st]
            dw = rng.standard_normal(cnt) * np.sqrt(dt)
            drift = sig * uu * dt
            if self.bridge:
                ubr = 1.0 - rng.random(cnt)
                bridge_term = -2.0 * sig * sig * dt * np.log(ubr)
            for c in range(copies):
                dlog = drift + sig * dw if c == 0 else drift - sig * dw
                w0 = logy[c, mask]
                w1 = w0 + dlog
                if self.bridge:
                    mseg = w0 + 0.5 * (dlog + np.sqrt(dlog * dlog + bridge_term))
                else:
                    mseg = np.maximum(w0, w1)
                logm[c, mask] = np.maximum(logm[c, mask], mseg)
                logy[c, mask] = w1

        all_mask = np.ones(b, dtype=bool)
        rec_idx = 0
        if recorded[0]:
            out_y[:, :, 0] = logy
            out_m[:, :, 0] = logm
            out_s[:, 0] = state
            rec_idx = 1
        for target, rec in zip(targets[1:], recorded[1:]):
            while True:
                jm = next_jump < target
                if not jm.any():
                    break
                advance(jm, next_jump[jm] - t_curr[jm])
                t_curr[jm] = next_jump[jm]
                land = self._landing(state[jm])
                state[jm] = land
                next_jump[jm] = t_curr[jm] + self._holding(land)
            advance(all_mask, target - t_curr)
            t_curr[:] = target
            if rec:
                out_y[:, :, rec_idx] = logy
                out_m[:, :, rec_idx] = logm
                out_s[:, rec_idx] = state
                rec_idx += 1

        if self.anti:
            # interleave so pairs sit in adjacent rows
            y = np.empty((2 * b, n_rec))
            mx = np.empty((2 * b, n_rec))
            y[0::2], y[1::2] = out_y[0], out_y[1]
            mx[0::2], mx[1::2] = out_m[0], out_m[1]
            st = np.repeat(out_s, 2, axis=0)
            return y, mx, st
        return out_y[0], out_m[0], out_s


def simulate_paths(
    model: RegimeModel,
    t0: float,
    t1: float,
    a0: float,
    state0: int,
    paths: int,
    substeps: int,
    rng: np.random.Generator,
    record_times: Optional[np.ndarray] = None,
    bridge_max: bool = True,
    antithetic: bool = False,
    stream_label: str = "",
    threads: int = 1,
) -> PathBatch:
    """Simulate a batch of regime-switching paths with running maxima.

    ``record_times`` (default just [t0, t1]) are the snapshot times; each
    recorded interval is refined into ``substeps`` internal advances.  With
    bridge sampling on, the recorded maxima are exact in law for any substep
    count; without it they carry the usual discrete-max downward bias, which
    shrinks as substeps grow.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if a0 < 1.0:
        raise ValueError("initial ratio a0 must be >= 1")
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if record_times is None:
        record_times = np.array([t0, t1])
    record_times = np.asarray(record_times, dtype=float)
    if record_times[0] != t0 or record_times[-1] != t1:
        raise ValueError("record_times must start at t0 and end at t1")

    if t1 == t0:
        shape = (paths, len(record_times))
        return PathBatch(
            times=record_times,
            log_price=np.zeros(shape),
            log_max=np.full(shape, np.log(a0)),
            state=np.full(shape, state0, dtype=np.int16),
            a0=a0,
            antithetic=antithetic,
            stream_label=stream_label,
        )

    targets, recorded = _refine_times(record_times, substeps)

    if antithetic and paths % 2:
        raise ValueError("antithetic batches need an even path count")
    per_chunk = _CHUNK if not antithetic else _CHUNK
    out_paths = paths
    base_total = paths // 2 if antithetic else paths

    n_chunks = (base_total + per_chunk - 1) // per_chunk
    children = rng.spawn(n_chunks) if n_chunks > 1 else [rng]
    sizes = [min(per_chunk, base_total - ci * per_chunk) for ci in range(n_chunks)]

    def run_chunk(ci: int):
        sim = _ChunkSim(model, children[ci], bridge_max, antithetic)
        return sim.run(t0, a0, state0, sizes[ci], targets, recorded)

    # chunk results are assembled by index, so the output is the same no
    # matter how many workers ran them
    if threads > 1 and n_chunks > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_chunk, range(n_chunks)))
    else:
        results = [run_chunk(ci) for ci in range(n_chunks)]

    log_price = np.concatenate([r[0] for r in results], axis=0)
    log_max = np.concatenate([r[1] for r in results], axis=0)
    state = np.concatenate([r[2] for r in results], axis=0)
    assert log_price.shape[0] == out_paths
    return PathBatch(
        times=record_times,
        log_price=log_price,
        log_max=log_max,
        state=state,
        a0=a0,
        antithetic=antithetic,
        stream_label=stream_label,
    )


def _policy_payoffs(batch: PathBatch, policy: PolicySpec) -> np.ndarray:
    """Terminal max over price-at-stop, per path, with tau clamped to the batch."""
    times = batch.times
    p, k1 = batch.log_price.shape
    if policy.kind == "immediate":
        tau_idx = np.zeros(p, dtype=np.int64)
    elif policy.kind == "fixed_time":
        t = min(max(policy.time, times[0]), times[-1])
        idx = int(np.searchsorted(times, t - 1e-12))
        tau_idx = np.full(p, idx, dtype=np.int64)
    elif policy.kind == "hit_boundary":
        curve = policy.curve
        m = curve.num_states
        thr = np.empty((k1, m))
        for k in range(k1):
            for j in range(m):
                thr[k, j] = curve.threshold_at(times[k], j)
        kk = np.broadcast_to(np.arange(k1), (p, k1))
        thr_path = thr[kk, batch.state]
        hit = batch.ratio >= thr_path - 1e-12
        has = hit.any(axis=1)
        tau_idx = np.where(has, hit.argmax(axis=1), k1 - 1)
    else:
        raise ValueError(f"unknown policy kind {policy.kind!r}")
    return np.exp(batch.log_max[:, -1] - batch.log_price[np.arange(p), tau_idx])


def evaluate_policy(batch: PathBatch, policy: PolicySpec) -> Tuple[float, float]:
    """Mean and standard error of the stopped ratio under the policy.

    Antithetic batches are reduced over pair averages so the standard error
    reflects the actual pairing.
    """
    vals = _policy_payoffs(batch, policy)
    if batch.antithetic:
        vals = vals.reshape(-1, 2).mean(axis=1)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(len(vals)))
    return est, se


def boundary_policy_value(
    model: RegimeModel,
    curve: BoundaryCurve,
    t0: float,
    a0: float,
    state0: int,
    paths: int,
    rng: np.random.Generator,
    substeps: int = 1,
    antithetic: bool = False,
) -> Tuple[float, float]:
    """End-to-end validation number for the value surface at one point.

    Simulates paths from (t0, a0, state0) to the horizon and evaluates the
    first-hitting policy of the given boundary.
    """
    horizon = float(curve.times[-1])
    if t0 >= horizon:
        return float(a0), 0.0
    record = curve.times[curve.times >= t0 - 1e-12]
    if abs(record[0] - t0) > 1e-12:
        record = np.concatenate([[t0], record])
    else:
        record = record.copy()
        record[0] = t0
    batch = simulate_paths(
        model, t0, horizon, a0, state0, paths, substeps=1, rng=rng,
        record_times=record, antithetic=antithetic,
    )
    return evaluate_policy(batch, PolicySpec.hit_boundary(curve))


def compare_policies(
    model: RegimeModel,
    curve: BoundaryCurve,
    t0: float,
    a0: float,
    state0: int,
    paths: int,
    rng: np.random.Generator,
    perturbation: float = 0.10,
    threads: int = 1,
) -> List[Tuple[str, float, float]]:
    """Policy table on one common batch: boundary vs simple alternatives.

    Sharing the batch gives all policies common noise, so the dominance of
    the solver boundary shows through at moderate path counts.
    """
    horizon = float(curve.times[-1])
    record = curve.times[curve.times >= t0 - 1e-12]
    batch = simulate_paths(
        model, t0, horizon, a0, state0, paths, substeps=1, rng=rng,
        record_times=record, threads=threads,
    )
    rows = []
    for name, pol in [
        ("hit_boundary", PolicySpec.hit_boundary(curve)),
        ("immediate", PolicySpec.immediate()),
        ("hold_to_end", PolicySpec.fixed_time(horizon)),
        (f"hit_boundary+{perturbation:.0%}", PolicySpec.hit_boundary(curve.scaled(1.0 + perturbation))),
        (f"hit_boundary-{perturbation:.0%}", PolicySpec.hit_boundary(curve.scaled(1.0 - perturbation))),
    ]:
        est, se = evaluate_policy(batch, pol)
        rows.append((name, est, se))
    return rows
