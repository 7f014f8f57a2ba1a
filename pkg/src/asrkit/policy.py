"""Policy lookups at arbitrary (possibly off-grid) market states.

The solver stores values and targets on the tree/grid; live states fall
between nodes.  Lookups snap the inventory to its nearest grid row,
interpolate values along A with the solver's natural cubic spline, and
interpolate linearly between the two neighbouring price columns.  Orders
are interpolated linearly in A (they are grid-valued, a cubic would
overshoot) and clamped to the day's participation window.  The exercise
recommendation re-runs the continuation-vs-settle comparison at the
looked-up state rather than trusting the nearest stored flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grids import candidate_offsets
from .model import intrinsic_value, volume_at
from .solver import EPS_PROBS, EPS_VALUES, PolicyCube, day_costs, ordered_offsets
from .splines import bicubic_eval, spline_eval

__all__ = ["PolicyDecision", "PolicyDomainError", "evaluate_policy", "participation_window"]


class PolicyDomainError(ValueError):
    """Query state is outside the grids by more than the extrapolation margin."""


@dataclass(frozen=True)
class PolicyDecision:
    order: float          # shares to trade today (target - snapped inventory)
    exercise: bool        # settle now (only ever True on exercisable days)
    theta: float
    intrinsic: float
    continuation: float
    extrapolated: bool    # some lookup left the stored grids


def participation_window(cube: PolicyCube, n: int) -> tuple[float, float]:
    """Admissible order sizes (shares) for the day starting at index n."""
    V = volume_at(cube.market, n + 1)
    dt = cube.contract.dt
    return cube.risk.rho_lo * V * dt, cube.risk.rho_hi * V * dt


def _order_from_targets(cube: PolicyCube, tgt_row: np.ndarray, q_row: int, A: float) -> float:
    """Linear-in-A interpolation of the stored target order, in shares."""
    a_grid = cube.grids.A
    delta = cube.grids.q[tgt_row] - cube.grids.q[q_row]
    return float(np.interp(A, a_grid, delta))


def _cont_impact(cube: PolicyCube, n: int, s_row: int, q_row: int, A: float) -> float:
    """Textbook continuation at an S-grid knot of a permanent-impact cube."""
    contract, market, risk = cube.contract, cube.market, cube.risk
    grids = cube.grids
    dt = contract.dt
    s = market.sigma * math.sqrt(dt)
    gamma = risk.gamma
    k = market.k_perm
    V = volume_at(market, n + 1)
    d_min, d_max = candidate_offsets(grids.dq, V, dt, risk)
    offs = ordered_offsets(d_min, d_max)
    costs = day_costs(offs, grids.dq, V, dt, market)
    theta_next = np.asarray(cube.surfaces[n + 1].theta, dtype=np.float64)
    tensors = cube.bicubic_day(n + 1)
    S = float(grids.S[s_row])
    q = float(grids.q[q_row])
    n_q = grids.q.shape[0]
    noise = s * dt / math.sqrt(3.0) if k > 0 else 0.0
    best = math.inf
    for t, d in enumerate(offs):
        j = q_row + d
        if not 0 <= j < n_q:
            continue
        v = d * grids.dq / dt
        det = costs[t] - k * v * q * dt - 0.5 * k * (v * dt) ** 2
        if gamma > 0 and noise > 0:
            x = -gamma * (0.5 * noise * v) * EPS_VALUES
            m = x.max()
            det += (m + math.log(np.sum(EPS_PROBS * np.exp(x - m)))) / gamma
        q_eff = q + (0.5 * v * dt if k > 0 else 0.0)
        vals = np.empty(5)
        for e in range(5):
            sp = S + k * v * dt + s * EPS_VALUES[e]
            a1 = (n * A + sp) / (n + 1)
            vals[e] = bicubic_eval(theta_next, tensors, grids.S, grids.A, sp, a1)[j]
        if gamma > 0:
            x = -gamma * (s * q_eff * EPS_VALUES - vals)
            m = x.max()
            val = det + (m + math.log(np.sum(EPS_PROBS * np.exp(x - m)))) / gamma
        else:
            val = det + float(np.sum(EPS_PROBS * vals))
        best = min(best, val)
    return best


def _cont_base(cube: PolicyCube, n: int, zeta: int, q_row: int, A: float) -> float:
    contract, market, risk = cube.contract, cube.market, cube.risk
    V = volume_at(market, n + 1)
    d_min, d_max = candidate_offsets(cube.grids.dq, V, contract.dt, risk)
    offs = ordered_offsets(d_min, d_max)
    costs = day_costs(offs, cube.grids.dq, V, contract.dt, market)
    theta_next = np.asarray(cube.surfaces[n + 1].theta, dtype=np.float64)
    value, _ = _kernels.cont_single_base(
        theta_next, cube.m2_day(n + 1), n, market.S0,
        market.sigma * math.sqrt(contract.dt), cube.grids.q, cube.grids.A,
        risk.gamma, EPS_PROBS, EPS_VALUES, offs, costs, zeta, q_row, float(A))
    return float(value)


def evaluate_policy(cube: PolicyCube, n: int, S: float, q: float, A: float) -> PolicyDecision:
    """Recommended order / exercise decision and values at a live state.

    Valid for 0 <= n < N (at N settlement is forced, there is no decision).
    """
    contract, market = cube.contract, cube.market
    N = contract.N
    if not 0 <= n < N:
        raise PolicyDomainError(f"day index must be in 0..{N - 1}, got {n}")
    if not all(math.isfinite(v) for v in (S, q, A)):
        raise PolicyDomainError("state must be finite")
    grids = cube.grids
    a_span = grids.A[-1] - grids.A[0]
    if not grids.A[0] - a_span <= A <= grids.A[-1] + a_span:
        raise PolicyDomainError(f"average {A} is beyond the extrapolation margin of the A-grid")
    if not -grids.dq <= q <= grids.q[-1] + grids.dq:
        raise PolicyDomainError(f"inventory {q} is outside the q-grid margin")

    s = market.sigma * math.sqrt(contract.dt)
    extrapolated = not (grids.A[0] <= A <= grids.A[-1]) or not (0.0 <= q <= grids.q[-1])
    q_row = int(np.clip(round(q / grids.dq), 0, grids.q.shape[0] - 1))
    intrinsic = intrinsic_value(float(grids.q[q_row]), S, A, contract, market, cube.risk)

    if cube.impact:
        s_grid = grids.S
        step = s_grid[1] - s_grid[0]
        if not s_grid[0] - 2 * step <= S <= s_grid[-1] + 2 * step:
            raise PolicyDomainError(f"price {S} is outside the S-grid margin")
        zf = (S - s_grid[0]) / step
        lo = int(np.clip(math.floor(zf), 0, s_grid.shape[0] - 2))
        w = float(np.clip(zf - lo, 0.0, 1.0))
        if not 0.0 <= zf <= s_grid.shape[0] - 1:
            extrapolated = True
        rows = (lo, lo + 1)
        cont = ((1 - w) * _cont_impact(cube, n, rows[0], q_row, A)
                + w * _cont_impact(cube, n, rows[1], q_row, A))
        surf = cube.surfaces[n]
        th = []
        od = []
        for r in rows:
            m2 = cube.m2_day(n)
            th.append(float(spline_eval(grids.A, surf.theta[r, q_row], m2[r, q_row], A)))
            od.append(_order_from_targets(cube, surf.target_idx[r, q_row], q_row, A))
        theta = (1 - w) * th[0] + w * th[1]
        order = (1 - w) * od[0] + w * od[1]
    else:
        n_cols = 4 * n + 1
        if s > 0:
            tree_max = 2 * n * s
            if abs(S - market.S0) > tree_max + 2 * s:
                raise PolicyDomainError(
                    f"price {S} is outside the day-{n} tree envelope margin")
            zf = (S - market.S0) / s + 2 * n
        else:
            zf = float(2 * n)
        lo = int(np.clip(math.floor(zf), 0, max(n_cols - 2, 0)))
        hi = min(lo + 1, n_cols - 1)
        w = float(np.clip(zf - lo, 0.0, 1.0))
        if not 0.0 <= zf <= n_cols - 1:
            extrapolated = True
        cont = ((1 - w) * _cont_base(cube, n, lo, q_row, A)
                + (w * _cont_base(cube, n, hi, q_row, A) if w > 0 else 0.0))
        surf = cube.surfaces[n]
        m2 = cube.m2_day(n)
        th_lo = float(spline_eval(grids.A, surf.theta[lo, q_row], m2[lo, q_row], A))
        th_hi = float(spline_eval(grids.A, surf.theta[hi, q_row], m2[hi, q_row], A)) if w > 0 else 0.0
        theta = (1 - w) * th_lo + w * th_hi
        od_lo = _order_from_targets(cube, surf.target_idx[lo, q_row], q_row, A)
        od_hi = _order_from_targets(cube, surf.target_idx[hi, q_row], q_row, A) if w > 0 else 0.0
        order = (1 - w) * od_lo + w * od_hi

    lo_w, hi_w = participation_window(cube, n)
    order = float(np.clip(order, lo_w, hi_w))
    exercise = n in contract.exercise_set and intrinsic <= cont
    return PolicyDecision(order=order, exercise=bool(exercise), theta=float(theta),
                          intrinsic=float(intrinsic), continuation=float(cont),
                          extrapolated=bool(extrapolated))
