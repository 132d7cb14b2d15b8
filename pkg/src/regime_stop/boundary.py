"""Stop/continue classification and extraction of the per-state boundary.

A node stops when the value and stop-value agree within a relative+absolute
band; the smallest ratio from which everything above stops is the boundary.
The stopping region is an up-set in theory, so isolated continuation pockets
above the first stopping node always indicate numerical noise near the
boundary; they are reported through a warning, never silently absorbed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import DominanceViolation, EmptyStopSet, NonMonotoneSetWarning
from .stopvalue import StopValueSurface
from .value import ValueSurface

DEFAULT_TOL_ABS = 1e-4
DEFAULT_TOL_REL = 1e-4
SMOOTH_WINDOW = 5
# Boundary moves smaller than this many ratio-grid spacings count as noise
# when classifying monotonicity.
NOISE_SPACINGS = 2.0

STOP = "STOP"
CONTINUE = "CONTINUE"


@dataclass(frozen=True)
class BoundaryCurve:
    """Per-state boundary ratios on the solver time grid."""

    times: np.ndarray
    b_raw: np.ndarray       # (n+1, m)
    b_smoothed: np.ndarray  # (n+1, m)
    tol_abs: float
    tol_rel: float
    log_spacing: float      # ratio-grid spacing used for noise thresholds

    @property
    def num_states(self) -> int:
        return self.b_raw.shape[1]

    def scaled(self, factor: float) -> "BoundaryCurve":
        """Multiplicatively perturbed copy, floored at the ratio floor 1."""
        raw = np.maximum(1.0, self.b_raw * factor)
        smooth = np.maximum(1.0, self.b_smoothed * factor)
        return BoundaryCurve(
            times=self.times,
            b_raw=raw,
            b_smoothed=smooth,
            tol_abs=self.tol_abs,
            tol_rel=self.tol_rel,
            log_spacing=self.log_spacing,
        )

    def threshold_at(self, t: float, state: int) -> float:
        """Left-constant boundary value: b(t_k) on [t_k, t_{k+1})."""
        idx = int(np.searchsorted(self.times, t + 1e-12, side="right")) - 1
        idx = min(max(idx, 0), len(self.times) - 1)
        return float(self.b_raw[idx, state])


@dataclass
class ShapeReport:
    """Monotonicity summary of one state's boundary curve."""

    state: int
    nonincreasing_prefix: int   # node count of the longest such prefix
    direction_changes: int      # significant changes, after noise filtering
    max_rise: float             # largest upward move (in ratio units)
    noise_threshold: float      # log-ratio move treated as noise


def classify(v: float, g: float, tol_abs: float = DEFAULT_TOL_ABS,
             tol_rel: float = DEFAULT_TOL_REL) -> str:
    """STOP when the value has merged with the stop-value within tolerance."""
    band = tol_abs + tol_rel * g
    gap = g - v
    if gap < -band:
        raise DominanceViolation(
            f"value {v} exceeds stop-value {g} beyond the tolerance band {band}"
        )
    return STOP if gap <= band else CONTINUE


def _stop_mask(v_layer, g_layer, tol_abs, tol_rel):
    band = tol_abs + tol_rel * g_layer
    gap = g_layer - v_layer
    bad = gap < -band
    if np.any(bad):
        i = np.argwhere(bad)[0]
        raise DominanceViolation(
            f"value exceeds stop-value beyond tolerance at node {tuple(i)}: "
            f"gap {gap[tuple(i)]:.3e}, band {band[tuple(i)]:.3e}"
        )
    return gap <= band


def extract_boundary(
    value: ValueSurface,
    stop: StopValueSurface,
    tol_abs: float = DEFAULT_TOL_ABS,
    tol_rel: float = DEFAULT_TOL_REL,
    refine: bool = True,
) -> BoundaryCurve:
    """Boundary ratios per (time, state) from the two surfaces.

    For each layer and state the boundary is the smallest ratio node that
    stops with everything above it stopping too.  Continuation pockets above
    it trigger a NonMonotoneSetWarning and the curve is taken from the top
    transition.  With ``refine`` the crossing of (stop - value) with the
    classification band is located linearly between the bracketing nodes.
    """
    grid = value.grid
    a = grid.a_nodes
    n1, p, m = value.values.shape
    b = np.empty((n1, m))
    pockets: List[Tuple[int, int, int]] = []

    for k in range(n1):
        vl = value.values[k]
        gl = stop.values[k]
        mask = _stop_mask(vl, gl, tol_abs, tol_rel)
        for j in range(m):
            col = mask[:, j]
            if not col.any():
                raise EmptyStopSet(
                    f"no stopping node at step {k}, state {j}; raise a_max"
                )
            if not col[-1]:
                raise EmptyStopSet(
                    f"top ratio node does not stop at step {k}, state {j}; "
                    f"raise a_max"
                )
            stops = np.flatnonzero(col)
            # smallest index whose whole tail is STOP
            tail_ok = np.flatnonzero(np.cumsum(~col[::-1]) == 0)
            first_tail = p - 1 - tail_ok.max()
            lowest = stops[0]
            if first_tail > lowest:
                for i in range(lowest, first_tail):
                    if not col[i]:
                        pockets.append((k, j, i))
            idx = first_tail
            bval = a[idx]
            if refine and idx > 0:
                gap = gl[:, j] - vl[:, j]
                band = tol_abs + tol_rel * gl[:, j]
                f_lo = gap[idx - 1] - band[idx - 1]   # > 0 (continue)
                f_hi = gap[idx] - band[idx]           # <= 0 (stop)
                if f_lo > 0.0 >= f_hi and f_lo - f_hi > 0.0:
                    w = f_lo / (f_lo - f_hi)
                    la = grid.log_a
                    bval = float(np.exp(la[idx - 1] + w * (la[idx] - la[idx - 1])))
            b[k, j] = bval

    if pockets:
        warnings.warn(
            NonMonotoneSetWarning(
                f"{len(pockets)} continuation pocket(s) above the first "
                f"stopping node at (step, state, node): {pockets[:20]}",
                pockets,
            )
        )

    smoothed = _moving_median(b, SMOOTH_WINDOW)
    # median windows shrink at the ends; keep the endpoints faithful,
    # in particular b(T) = 1
    smoothed[0] = b[0]
    smoothed[-1] = b[-1]
    return BoundaryCurve(
        times=grid.times,
        b_raw=b,
        b_smoothed=smoothed,
        tol_abs=tol_abs,
        tol_rel=tol_rel,
        log_spacing=grid.log_step,
    )


def _moving_median(b: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    n = b.shape[0]
    out = np.empty_like(b)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out[i] = np.median(b[lo:hi], axis=0)
    return out


def shape_report(curve: BoundaryCurve, state: int) -> ShapeReport:
    """Monotonicity summary for one state.

    Works on the raw curve in log-ratio space; a move counts as a direction
    change only once it exceeds the noise threshold of two ratio-grid
    spacings, measured from the running extreme.  Smoothing never happens
    before this thresholding.
    """
    logb = np.log(curve.b_raw[:, state])
    thr = NOISE_SPACINGS * curve.log_spacing

    prefix = len(logb)
    for i in range(1, len(logb)):
        if logb[i] > logb[i - 1] + 1e-12:
            prefix = i
            break

    changes = 0
    max_rise = 0.0
    direction = 0  # -1 falling, +1 rising, 0 not yet established
    hi = lo = logb[0]
    ext = logb[0]       # running extreme of the current run
    run_low = logb[0]   # low anchor of the current rising run
    for x in logb[1:]:
        if direction == 0:
            hi = max(hi, x)
            lo = min(lo, x)
            if x <= hi - thr:
                direction = -1
                ext = x
            elif x >= lo + thr:
                direction = 1
                run_low = lo
                ext = x
                max_rise = max(max_rise, float(np.exp(ext) - np.exp(run_low)))
        elif direction == 1:
            if x > ext:
                ext = x
                max_rise = max(max_rise, float(np.exp(ext) - np.exp(run_low)))
            elif x <= ext - thr:
                changes += 1
                direction = -1
                ext = x
        else:
            if x < ext:
                ext = x
            elif x >= ext + thr:
                changes += 1
                direction = 1
                run_low = ext
                ext = x
                max_rise = max(max_rise, float(np.exp(ext) - np.exp(run_low)))

    return ShapeReport(
        state=state,
        nonincreasing_prefix=prefix,
        direction_changes=changes,
        max_rise=max_rise,
        noise_threshold=thr,
    )
