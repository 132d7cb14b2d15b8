"""One-step integral kernels of the backward inductions.

Both surface recursions share the same geometry: a no-switch term integrating
over the (endpoint, max) density at the full step, plus one term per jump
time integrating the same density over the time to the jump.  The ratio state
moves in log space,

    l' = max(l, sigma_j * y) - sigma_j * x,

which never drops below 0, so the surfaces are only ever queried at ratios
>= 1.  The two recursions differ in their exponential tilt:

* the stop-value (expected terminal ratio when stopping now) carries
  exp((u_j + sigma_j) x - u_j^2 s / 2): the extra sigma_j x accounts for the
  renormalisation of the ratio by the end-of-step price;
* the value recursion is an honest conditional expectation, so it carries the
  plain change-of-drift factor exp(u_j x - u_j^2 s / 2), whose kernel mass
  is exactly 1.

Surfaces are handled as offsets (surface minus the ratio) so the exp(l') part
of every integrand is evaluated exactly and never interpolated; offsets are
bounded, smooth, and extended as constants above the grid top, which is the
additive saturation rule G(t, a) = a + (G(t, a_max) - a_max) for a > a_max.
Offsets are interpolated by a C2 not-a-knot cubic spline; linear
interpolation is kept as an option but its projection bias grows linearly
with the step count at a fixed ratio grid.

Quadrature, spline solve and interpolation are all linear in the layer
offsets, so for the stop-value recursion every (state, time-span) integral
collapses into one precomputed (grid x grid) matrix and a step is a handful
of small matrix-vector products.  The value recursion takes a pointwise
min of the two interpolants inside the integrand, which is nonlinear, so it
keeps explicit interpolation at the quadrature images.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .density import QuadratureSpec, switch_time_rule, triangle_rule
from .errors import InterpolationOutOfRange
from .grids import SolverGrid
from .model import RegimeModel, drift_params

_LPRIME_SLACK = 1e-12


class SplineBasis:
    """Not-a-knot cubic-spline second derivatives on a uniform grid.

    The collocation matrix depends only on the node count, so it is
    LU-factorised once; ``matrix()`` returns the dense map from node values
    to second derivatives for kernel precomputation.
    """

    def __init__(self, points: int, step: float):
        self.step = step
        self.points = points
        p = points
        mat = np.zeros((p, p))
        for i in range(1, p - 1):
            mat[i, i - 1] = 1.0
            mat[i, i] = 4.0
            mat[i, i + 1] = 1.0
        # third derivative continuous across the second and second-to-last knot
        mat[0, 0], mat[0, 1], mat[0, 2] = 1.0, -2.0, 1.0
        mat[p - 1, p - 3], mat[p - 1, p - 2], mat[p - 1, p - 1] = 1.0, -2.0, 1.0
        self._lu = lu_factor(mat)
        diff = np.zeros((p, p))
        for i in range(1, p - 1):
            diff[i, i - 1] = 6.0 / step**2
            diff[i, i] = -12.0 / step**2
            diff[i, i + 1] = 6.0 / step**2
        self._second_map = lu_solve(self._lu, diff)

    def second_derivs(self, values: np.ndarray) -> np.ndarray:
        """Spline second derivatives for (P,) or (P, m) node values."""
        return self._second_map @ values

    def matrix(self) -> np.ndarray:
        return self._second_map


@dataclass
class _KernelNode:
    """Precomputed quadrature data for one (state, time-span) pair."""

    span: float
    idx: np.ndarray          # (P, Q) int32 base index per query point
    frac: np.ndarray         # (P, Q) float32 in [0, 1]; 1 at/above grid top
    b_lo: np.ndarray         # (P, Q) float32 spline basis for M2[idx]
    b_hi: np.ndarray         # (P, Q) float32 spline basis for M2[idx + 1]
    w_stop: np.ndarray       # (Q,) density * Gauss weights * stop tilt
    w_value: np.ndarray      # (Q,) density * Gauss weights * value tilt
    base_stop: np.ndarray    # (P,) exact contribution of the exp(l') part
    base_value: np.ndarray
    mat_stop: np.ndarray     # (P, P) collapsed linear map for the stop kernel

    def interp(self, offsets: np.ndarray, second: Optional[np.ndarray]) -> np.ndarray:
        """Evaluate one offset column at the precomputed query points."""
        lo = offsets[self.idx]
        hi = offsets[self.idx + 1]
        out = lo + (hi - lo) * self.frac
        if second is not None:
            out += self.b_lo * second[self.idx] + self.b_hi * second[self.idx + 1]
        return out


def _build_node(
    log_a: np.ndarray,
    sigma: float,
    u: float,
    span: float,
    spec: QuadratureSpec,
    basis: Optional[SplineBasis],
) -> _KernelNode:
    rule = triangle_rule(spec, span)
    lprime = np.maximum(log_a[:, None], sigma * rule.y[None, :]) - sigma * rule.x[None, :]
    if lprime.min() < -_LPRIME_SLACK:
        raise InterpolationOutOfRange(
            f"state update produced log-ratio {lprime.min()} < 0"
        )
    np.clip(lprime, 0.0, None, out=lprime)

    step = log_a[1] - log_a[0]
    p = len(log_a)
    pos = lprime / step
    idx = np.clip(pos.astype(np.int32), 0, p - 2)
    frac = np.clip(pos - idx, 0.0, 1.0)

    tilt_value = np.exp(u * rule.x - 0.5 * u * u * span)
    w_value = rule.w * tilt_value
    w_stop = w_value * np.exp(sigma * rule.x)

    elp = np.exp(lprime)
    base_stop = elp @ w_stop
    base_value = elp @ w_value

    # spline basis weights: (h^2/6) * ((1-f)^3 - (1-f)) and (f^3 - f)
    if basis is not None:
        g = 1.0 - frac
        scale = step * step / 6.0
        b_lo = scale * (g * g * g - g)
        b_hi = scale * (frac * frac * frac - frac)
    else:
        b_lo = np.zeros_like(frac)
        b_hi = np.zeros_like(frac)

    # collapse the linear stop kernel: out = A @ off + B @ M2, M2 = S @ off
    rows = np.repeat(np.arange(p, dtype=np.int64), idx.shape[1])
    flat_idx = idx.ravel().astype(np.int64)
    a_mat = np.zeros((p, p))
    b_mat = np.zeros((p, p))
    wq = np.broadcast_to(w_stop, frac.shape)
    np.add.at(a_mat.ravel(), rows * p + flat_idx, (wq * (1.0 - frac)).ravel())
    np.add.at(a_mat.ravel(), rows * p + flat_idx + 1, (wq * frac).ravel())
    if basis is not None:
        np.add.at(b_mat.ravel(), rows * p + flat_idx, (wq * b_lo).ravel())
        np.add.at(b_mat.ravel(), rows * p + flat_idx + 1, (wq * b_hi).ravel())
        mat_stop = a_mat + b_mat @ basis.matrix()
    else:
        mat_stop = a_mat

    return _KernelNode(
        span=float(span),
        idx=idx,
        frac=frac.astype(np.float32),
        b_lo=b_lo.astype(np.float32),
        b_hi=b_hi.astype(np.float32),
        w_stop=w_stop,
        w_value=w_value,
        base_stop=base_stop,
        base_value=base_value,
        mat_stop=mat_stop,
    )


class StepKernels:
    """All per-step quadrature data for a (model, grid, quadrature) triple.

    Building this costs a few steps' worth of work, so it is constructed once
    per solve and reused; the recursions are time-homogeneous.
    """

    def __init__(self, model: RegimeModel, grid: SolverGrid, spec: QuadratureSpec,
                 interp: str = "spline"):
        if interp not in ("spline", "linear"):
            raise ValueError("interp must be 'spline' or 'linear'")
        self.model = model
        self.grid = grid
        self.spec = spec
        self.interp_mode = interp
        m = model.num_states
        u = drift_params(model).u
        delta = grid.delta
        q = model.generator

        self.basis = (
            SplineBasis(len(grid.log_a), grid.log_step) if interp == "spline" else None
        )
        self.no_switch: List[_KernelNode] = []
        self.switch: List[List[_KernelNode]] = []
        self.exit_rate = -np.diag(q)
        self.hold_prob = np.exp(np.diag(q) * delta)

        r_nodes, r_weights = switch_time_rule(spec, delta)
        self.r_nodes = r_nodes
        self.r_weights = r_weights

        for j in range(m):
            self.no_switch.append(
                _build_node(grid.log_a, model.sigma[j], u[j], delta, spec, self.basis)
            )
            nodes_j: List[_KernelNode] = []
            if m > 1 and self.exit_rate[j] > 0.0:
                for r in r_nodes:
                    nodes_j.append(
                        _build_node(grid.log_a, model.sigma[j], u[j], r, spec, self.basis)
                    )
            self.switch.append(nodes_j)

    # -- mass diagnostics -------------------------------------------------

    def value_mass(self, state: int) -> float:
        """Total weight of the value kernel; 1 up to truncation error."""
        q = self.model.generator
        total = self.hold_prob[state] * float(self.no_switch[state].w_value.sum())
        for r, w, node in zip(self.r_nodes, self.r_weights, self.switch[state]):
            total += (
                w
                * np.exp(q[state, state] * r)
                * self.exit_rate[state]
                * float(node.w_value.sum())
            )
        return total

    # -- one backward step ------------------------------------------------

    def stop_value_step(
        self,
        layer: np.ndarray,
        switch_layers: Optional[List[np.ndarray]] = None,
    ) -> np.ndarray:
        """Advance the stop-value surface one step toward time zero.

        ``layer`` holds full values (P, m) at step k; the return holds full
        values at k-1.  ``switch_layers`` optionally supplies one layer per
        jump-time node for the exact-in-time variant of the jump term; by
        default the step-k layer is used for every jump time.
        """
        grid = self.grid
        q = self.model.generator
        m = self.model.num_states
        offsets = layer - grid.a_nodes[:, None]
        out = np.empty_like(layer)
        for j in range(m):
            node = self.no_switch[j]
            total = self.hold_prob[j] * (node.base_stop + node.mat_stop @ offsets[:, j])
            for ri, (r, w, rnode) in enumerate(
                zip(self.r_nodes, self.r_weights, self.switch[j])
            ):
                if switch_layers is not None:
                    roff = switch_layers[ri] - grid.a_nodes[:, None]
                else:
                    roff = offsets
                inner = self.exit_rate[j] * rnode.base_stop
                for i in range(m):
                    if i == j:
                        continue
                    inner = inner + q[j, i] * (rnode.mat_stop @ roff[:, i])
                total = total + w * np.exp(q[j, j] * r) * inner
            out[:, j] = total
        return out

    def value_step(
        self,
        stop_layer: np.ndarray,
        value_layer: np.ndarray,
        switch_layers: Optional[List] = None,
    ) -> np.ndarray:
        """One-step conditional expectation of min(stop, value) at step k.

        Returns the raw expectation (P, m); the caller takes the min with the
        stop-value layer at k-1 before storing.  The min of the two surfaces
        is taken pointwise at the quadrature images using both interpolants,
        never on pre-minimised node values.  ``switch_layers`` optionally
        holds one (stop, value) layer pair per jump-time node, extended in
        time the same way as for the stop-value recursion.
        """
        grid = self.grid
        q = self.model.generator
        m = self.model.num_states

        def prep(layer):
            off = layer - grid.a_nodes[:, None]
            sec = self.basis.second_derivs(off) if self.basis else None
            return off, sec

        def col(arr, c):
            return arr[:, c] if arr is not None else None

        s_off, s_sec = prep(stop_layer)
        v_off, v_sec = prep(value_layer)
        r_prepped = None
        if switch_layers is not None:
            r_prepped = [(prep(sl), prep(vl)) for sl, vl in switch_layers]

        out = np.empty_like(stop_layer)
        for j in range(m):
            node = self.no_switch[j]
            integ = np.minimum(
                node.interp(s_off[:, j], col(s_sec, j)),
                node.interp(v_off[:, j], col(v_sec, j)),
            )
            total = self.hold_prob[j] * (node.base_value + integ @ node.w_value)
            for ri, (r, w, rnode) in enumerate(
                zip(self.r_nodes, self.r_weights, self.switch[j])
            ):
                if r_prepped is not None:
                    (rs_off, rs_sec), (rv_off, rv_sec) = r_prepped[ri]
                else:
                    rs_off, rs_sec, rv_off, rv_sec = s_off, s_sec, v_off, v_sec
                inner = self.exit_rate[j] * rnode.base_value
                for i in range(m):
                    if i == j:
                        continue
                    mi = np.minimum(
                        rnode.interp(rs_off[:, i], col(rs_sec, i)),
                        rnode.interp(rv_off[:, i], col(rv_sec, i)),
                    )
                    inner = inner + q[j, i] * (mi @ rnode.w_value)
                total = total + w * np.exp(q[j, j] * r) * inner
            out[:, j] = total
        return out


def interp_layer(
    grid: SolverGrid,
    layer: np.ndarray,
    a: np.ndarray,
    states: np.ndarray,
) -> np.ndarray:
    """Evaluate one surface layer at arbitrary ratios and states.

    Interpolates linearly in log-ratio on the layer offsets; ratios above the
    grid top get the constant top offset (additive saturation).  Ratios below
    1 are a caller bug.
    """
    a = np.asarray(a, dtype=float)
    states = np.asarray(states)
    if np.any(a < 1.0 - 1e-12):
        raise InterpolationOutOfRange(f"ratio {a.min()} below 1")
    la = np.log(np.maximum(a, 1.0))
    offsets = layer - grid.a_nodes[:, None]
    step = grid.log_step
    top = len(grid.log_a) - 1
    pos = la / step
    idx = np.clip(pos.astype(np.int64), 0, top - 1)
    frac = np.clip(pos - idx, 0.0, 1.0)
    lo = offsets[idx, states]
    hi = offsets[idx + 1, states]
    return a + lo + (hi - lo) * frac
