"""Backward induction for the optimal buying / exercise policy.

Prices live on a recombining five-branch tree: node (n, zeta) carries the
price S0 + sigma*sqrt(dt)*(zeta - 2n), zeta in 0..4n; innovation eps moves
zeta to zeta + eps + 2 on day n+1.  At every node a matrix of values over
the (q, A) grid is maintained.  One backward day evaluates, per state, the
certainty-equivalent one-day objective over all reachable on-grid
inventory targets (the candidate window [q + rho_lo*V*dt, q + rho_hi*V*dt])
with day-(n+1) values interpolated in A by natural cubic spline, then on
exercisable days takes the minimum against the settle-now value.

Ties in the candidate argmin go to the smallest order, buys before sells,
so output is deterministic.  theta surfaces are float64 end to end; the
persistence layer downcasts to float32.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels
from .grids import GridError, GridSpec, QAGrids, build_grids, candidate_offsets
from .model import (ContractSpec, MarketParams, RiskParams, execution_cost,
                    mean_volume, volume_at)
from .splines import bicubic_tensors, natural_m2, spline_eval

__all__ = ["ValueSurface", "PolicyCube", "BellmanSolver", "solve",
           "ordered_offsets", "day_costs", "interpolate_A", "tree_price"]

CUBE_FORMAT_VERSION = 1

EPS_VALUES = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
EPS_PROBS = np.array([1.0 / 12.0, 1.0 / 6.0, 0.5, 1.0 / 6.0, 1.0 / 12.0])


def tree_price(market: MarketParams, contract: ContractSpec, n: int, zeta: int) -> float:
    """Price at tree node (n, zeta)."""
    return market.S0 + market.sigma * math.sqrt(contract.dt) * (zeta - 2 * n)


def interpolate_A(values: np.ndarray, a_grid: np.ndarray, a_query) -> np.ndarray | float:
    """Natural-cubic-spline interpolation along the A-grid, linear outside.

    values: one row of length n_A sampled on a_grid.  Exact at knots.
    """
    values = np.asarray(values, dtype=np.float64)
    a_grid = np.asarray(a_grid, dtype=np.float64)
    if values.shape != a_grid.shape:
        raise ValueError("values must be sampled on the A-grid")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    m2 = natural_m2(a_grid, values)
    return spline_eval(a_grid, values, m2, a_query)


def ordered_offsets(d_min: int, d_max: int) -> np.ndarray:
    """Candidate offsets sorted by preference: |d| ascending, buys first."""
    offs = sorted(range(d_min, d_max + 1), key=lambda d: (abs(d), 0 if d >= 0 else 1))
    return np.asarray(offs, dtype=np.int64)


def day_costs(offs: np.ndarray, dq: float, volume_day: float, dt: float,
              market: MarketParams) -> np.ndarray:
    """Execution cost L(v/V)*V*dt of each candidate order d*dq."""
    return np.array([
        execution_cost(d * dq / (volume_day * dt), market) * volume_day * dt for d in offs
    ])


@dataclass
class ValueSurface:
    """Per-day value/policy matrices.

    theta/target_idx/exercise have shape (rows, n_q, n_A) where rows is
    4n+1 tree columns (base) or n_S price knots (permanent impact).
    target_idx stores the optimal q-grid index to trade to.
    """

    n: int
    theta: np.ndarray
    target_idx: np.ndarray
    exercise: np.ndarray


@dataclass
class PolicyCube:
    """Full output of a solve: surfaces for n = 0..N plus generating data."""

    contract: ContractSpec
    market: MarketParams
    risk: RiskParams
    grid_spec: GridSpec
    grids: QAGrids
    surfaces: list[ValueSurface]
    impact: bool = False
    version: int = CUBE_FORMAT_VERSION
    diagnostics: dict[str, Any] = field(default_factory=dict)
    _m2_cache: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def n_days(self) -> int:
        return self.contract.N

    def day(self, n: int) -> ValueSurface:
        return self.surfaces[n]

    @property
    def root_row(self) -> int:
        """Row of the day-0 surface holding the S = S0 state."""
        return 2 * self.contract.N if self.impact else 0

    def theta0(self) -> float:
        """Day-0 value at S = S0, q = 0 (constant along A)."""
        return float(self.surfaces[0].theta[self.root_row, 0, 0])

    def m2_day(self, n: int) -> np.ndarray:
        """A-spline second derivatives of day n, cached for replay loops."""
        key = ("a", n)
        if key not in self._m2_cache:
            self._trim_cache()
            self._m2_cache[key] = natural_m2(self.grids.A,
                                             np.asarray(self.surfaces[n].theta,
                                                        dtype=np.float64))
        return self._m2_cache[key]

    def bicubic_day(self, n: int):
        """(DA, DS, DSA) tensors of day n (permanent-impact cubes)."""
        key = ("b", n)
        if key not in self._m2_cache:
            self._trim_cache()
            self._m2_cache[key] = bicubic_tensors(
                np.asarray(self.surfaces[n].theta, dtype=np.float64),
                self.grids.S, self.grids.A)
        return self._m2_cache[key]

    def _trim_cache(self) -> None:
        while len(self._m2_cache) > 3:
            self._m2_cache.pop(next(iter(self._m2_cache)))


class BellmanSolver:
    """Backward solver for the base (tree-lattice) model."""

    def __init__(self, contract: ContractSpec, market: MarketParams, risk: RiskParams,
                 grid_spec: GridSpec):
        if market.k_perm > 0:
            raise GridError("permanent impact set: use the impact solver instead")
        self.contract = contract
        self.market = market
        self.risk = risk
        self.grid_spec = grid_spec
        self.grids = build_grids(grid_spec, contract, market, risk)
        self.s = market.sigma * math.sqrt(contract.dt)

    # -- single-state operations -------------------------------------------------

    def day_candidates(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(preference-ordered offsets, execution costs) for trading on day n."""
        V = volume_at(self.market, n + 1)
        d_min, d_max = candidate_offsets(self.grids.dq, V, self.contract.dt, self.risk)
        offs = ordered_offsets(d_min, d_max)
        return offs, day_costs(offs, self.grids.dq, V, self.contract.dt, self.market)

    def continuation_value(self, n: int, zeta: int, q_index: int, A: float,
                           theta_next: np.ndarray,
                           m2_next: np.ndarray | None = None) -> tuple[float, int]:
        """Optimal one-day continuation at node (n, zeta), inventory row
        q_index, average A, against the day-(n+1) surfaces.

        Returns (theta_tilde, optimal q-grid target index).
        """
        if not (0 <= zeta <= 4 * n):
            raise ValueError(f"zeta must be in 0..{4 * n}, got {zeta}")
        if not np.isfinite(A):
            raise ValueError("A must be finite")
        if m2_next is None:
            m2_next = natural_m2(self.grids.A, np.asarray(theta_next, dtype=np.float64))
        offs, costs = self.day_candidates(n)
        value, target = _kernels.cont_single_base(
            np.asarray(theta_next, dtype=np.float64), m2_next, n, self.market.S0, self.s,
            self.grids.q, self.grids.A, self.risk.gamma, EPS_PROBS, EPS_VALUES,
            offs, costs, zeta, q_index, float(A))
        if not np.isfinite(value):
            raise GridError(
                f"no admissible target on the q-grid at day {n}, q = {self.grids.q[q_index]}"
            )
        return float(value), int(target)

    def intrinsic_surface(self, n: int) -> np.ndarray:
        """Settle-now values on the full (zeta, q, A) grid of day n."""
        rows = 4 * n + 1
        S = self.market.S0 + self.s * (np.arange(rows) - 2.0 * n)
        return _intrinsic_tensor(S, self.grids.q, self.grids.A,
                                 self.contract, self.market, self.risk)

    def terminal_surface(self) -> ValueSurface:
        N = self.contract.N
        theta = self.intrinsic_surface(N)
        rows, n_q, n_a = theta.shape
        target = np.broadcast_to(np.arange(n_q, dtype=np.int32)[None, :, None],
                                 theta.shape).copy()
        exercise = np.ones(theta.shape, dtype=bool)
        return ValueSurface(n=N, theta=theta, target_idx=target, exercise=exercise)

    # -- backward sweep ------------------------------------------------------------

    def backward_step(self, n: int, surface_next: ValueSurface,
                      m2_next: np.ndarray | None = None) -> tuple[ValueSurface, int, int]:
        """Surface of day n from the completed day n+1.

        Returns (surface, extrapolated A-queries, total A-queries).
        """
        theta_next = np.ascontiguousarray(surface_next.theta, dtype=np.float64)
        if m2_next is None:
            m2_next = natural_m2(self.grids.A, theta_next)
        rows = 4 * n + 1
        n_q, n_a = self.grids.q.shape[0], self.grids.A.shape[0]
        cont = np.empty((rows, n_q, n_a))
        target = np.empty((rows, n_q, n_a), dtype=np.int32)
        offs, costs = self.day_candidates(n)
        extrap, total = _kernels.sweep_day_base(
            theta_next, m2_next, n, self.market.S0, self.s, self.grids.q, self.grids.A,
            self.risk.gamma, EPS_PROBS, EPS_VALUES, offs, costs, cont, target)
        if np.isnan(cont).any():
            z, i, _ = np.argwhere(np.isnan(cont))[0]
            raise GridError(
                f"no admissible target on the q-grid at day {n}, node {z}, "
                f"q = {self.grids.q[i]}: participation window misses every grid point"
            )
        if n in self.contract.exercise_set:
            intr = self.intrinsic_surface(n)
            exercise = intr <= cont
            theta = np.minimum(cont, intr)
        else:
            exercise = np.zeros(cont.shape, dtype=bool)
            theta = cont
        return ValueSurface(n=n, theta=theta, target_idx=target, exercise=exercise), extrap, total

    def solve(self) -> PolicyCube:
        """Run the full backward recursion and assemble the policy cube."""
        t0 = time.perf_counter()
        N = self.contract.N
        surfaces: list[ValueSurface | None] = [None] * (N + 1)
        surfaces[N] = self.terminal_surface()
        m2 = natural_m2(self.grids.A, surfaces[N].theta)
        extrap = total = 0
        for n in range(N - 1, -1, -1):
            surf, e_n, t_n = self.backward_step(n, surfaces[n + 1], m2_next=m2)
            extrap += e_n
            total += t_n
            surfaces[n] = surf
            if n > 0:
                m2 = natural_m2(self.grids.A, surf.theta)
        diagnostics = {
            "wall_time_s": time.perf_counter() - t0,
            "extrapolated_queries": int(extrap),
            "total_queries": int(total),
            "extrapolation_fraction": float(extrap) / total if total else 0.0,
            "grid_warnings": list(self.grids.warnings),
        }
        return PolicyCube(contract=self.contract, market=self.market, risk=self.risk,
                          grid_spec=self.grid_spec, grids=self.grids,
                          surfaces=surfaces, impact=False, diagnostics=diagnostics)


def solve(contract: ContractSpec, market: MarketParams, risk: RiskParams,
          grid_spec: GridSpec) -> PolicyCube:
    """Solve the base model; deterministic for fixed inputs."""
    return BellmanSolver(contract, market, risk, grid_spec).solve()


def _intrinsic_tensor(S_vec: np.ndarray, q: np.ndarray, A: np.ndarray,
                      contract: ContractSpec, market: MarketParams,
                      risk: RiskParams) -> np.ndarray:
    """Vectorised settle-now values over (price rows, q, A)."""
    a_eff = (1.0 - contract.beta) * A
    if np.any(a_eff <= 0):
        raise GridError("A-grid reaches non-positive effective averages")
    resid = contract.F / a_eff[None, :] - q[:, None]
    rho = risk.rho_exec
    lin = execution_cost(rho, market) / rho
    cub = risk.gamma * market.sigma ** 2 / (6.0 * rho * mean_volume(market, contract.N))
    block = lin * np.abs(resid) + cub * np.abs(resid) ** 3
    if market.k_perm > 0:
        block = block + 0.5 * market.k_perm * resid * resid
    spread = contract.F * (S_vec[:, None, None] / a_eff[None, None, :] - 1.0)
    return spread + block[None, :, :]
