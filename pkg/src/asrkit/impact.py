"""Permanent-impact variant: the price leaves the tree lattice.

With linear permanent impact k each trade shifts the close by k*v*dt, so
prices no longer live on the tree and the recursion runs on a full
(S, q, A) tensor.  The intraday execution noise couples a second
innovation eps' to the price innovation eps with Cov(eps, eps') = sqrt3/2;
the discrete joint law is built as

    eps' = (sqrt3/2) * eps + (1/2) * eps_tilde

with eps_tilde an independent copy of the five-point law, which reproduces
the covariance matrix [[1, sqrt3/2], [sqrt3/2, 1]] exactly.  Interpolation
in (S, A) is a tensor-product natural cubic spline (fit in A first, then
in S) with linear tails on both axes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .grids import GridError, GridSpec, build_grids, candidate_offsets, required_n_s
from .model import (ContractSpec, INNOVATION_PROBS, INNOVATION_VALUES, MarketParams,
                    RiskParams, volume_at)
from .solver import (EPS_PROBS, EPS_VALUES, PolicyCube, ValueSurface, _intrinsic_tensor,
                     day_costs, ordered_offsets)
from .splines import bicubic_tensors

__all__ = ["JointInnovation", "joint_innovation_support", "ImpactSolver",
           "solve_with_impact"]


@dataclass(frozen=True)
class JointInnovation:
    """One support point of the 25-point joint (eps, eps') law."""

    eps: int
    eps_tilde: int
    prob: Fraction

    @property
    def eps_prime(self) -> float:
        return 0.5 * math.sqrt(3.0) * self.eps + 0.5 * self.eps_tilde


def joint_innovation_support() -> tuple[JointInnovation, ...]:
    """Product construction of the joint law; marginals are the base law."""
    out = []
    for e, pe in zip(INNOVATION_VALUES, INNOVATION_PROBS):
        for et, pt in zip(INNOVATION_VALUES, INNOVATION_PROBS):
            out.append(JointInnovation(eps=e, eps_tilde=et, prob=pe * pt))
    return tuple(out)


class ImpactSolver:
    """Backward solver on the (S, q, A) tensor with permanent impact k >= 0."""

    def __init__(self, contract: ContractSpec, market: MarketParams, risk: RiskParams,
                 grid_spec: GridSpec):
        if grid_spec.n_S is None:
            raise GridError("permanent-impact mode needs n_S in the grid spec")
        need = required_n_s(contract, market, grid_spec)
        if grid_spec.n_S < need:
            raise GridError(
                f"n_S = {grid_spec.n_S} cannot cover the price envelope plus the "
                f"impact drift k*q_max; use n_S >= {need}"
            )
        self.contract = contract
        self.market = market
        self.risk = risk
        self.grid_spec = grid_spec
        self.grids = build_grids(grid_spec, contract, market, risk)
        self.s = market.sigma * math.sqrt(contract.dt)
        self.noise_on = market.k_perm > 0

    def day_candidates(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(ordered offsets, execution costs, intraday-noise premia) of day n."""
        V = volume_at(self.market, n + 1)
        dt = self.contract.dt
        d_min, d_max = candidate_offsets(self.grids.dq, V, dt, self.risk)
        offs = ordered_offsets(d_min, d_max)
        costs = day_costs(offs, self.grids.dq, V, dt, self.market)
        lam = np.zeros_like(costs)
        gamma = self.risk.gamma
        if self.noise_on and gamma > 0.0:
            for t, d in enumerate(offs):
                v = d * self.grids.dq / dt
                c = self.s * v * dt / math.sqrt(3.0) / 2.0  # eps_tilde coefficient
                x = -gamma * c * EPS_VALUES
                m = x.max()
                lam[t] = (m + math.log(np.sum(EPS_PROBS * np.exp(x - m)))) / gamma
        return offs, costs, lam

    def intrinsic_surface(self) -> np.ndarray:
        return _intrinsic_tensor(self.grids.S, self.grids.q, self.grids.A,
                                 self.contract, self.market, self.risk)

    def terminal_surface(self) -> ValueSurface:
        theta = self.intrinsic_surface()
        n_q = self.grids.q.shape[0]
        target = np.broadcast_to(np.arange(n_q, dtype=np.int32)[None, :, None],
                                 theta.shape).copy()
        return ValueSurface(n=self.contract.N, theta=theta, target_idx=target,
                            exercise=np.ones(theta.shape, dtype=bool))

    def backward_step(self, n: int, surface_next: ValueSurface,
                      tensors=None) -> tuple[ValueSurface, int, int]:
        theta_next = np.ascontiguousarray(surface_next.theta, dtype=np.float64)
        if tensors is None:
            tensors = bicubic_tensors(theta_next, self.grids.S, self.grids.A)
        da, ds, dsa = tensors
        offs, costs, lam = self.day_candidates(n)
        shape = theta_next.shape
        cont = np.empty(shape)
        target = np.empty(shape, dtype=np.int32)
        extrap, total = _kernels.sweep_day_impact(
            theta_next, da, ds, dsa, n, self.contract.dt, self.market.k_perm,
            1.0 if self.noise_on else 0.0, self.s, self.grids.q, self.grids.A,
            self.grids.S, self.risk.gamma, EPS_PROBS, EPS_VALUES, offs, costs, lam,
            cont, target)
        if np.isnan(cont).any():
            js, i, _ = np.argwhere(np.isnan(cont))[0]
            raise GridError(
                f"no admissible target on the q-grid at day {n}, price row {js}, "
                f"q = {self.grids.q[i]}"
            )
        if n in self.contract.exercise_set:
            intr = self.intrinsic_surface()
            exercise = intr <= cont
            theta = np.minimum(cont, intr)
        else:
            exercise = np.zeros(shape, dtype=bool)
            theta = cont
        return ValueSurface(n=n, theta=theta, target_idx=target, exercise=exercise), extrap, total

    def solve(self) -> PolicyCube:
        t0 = time.perf_counter()
        N = self.contract.N
        surfaces: list[ValueSurface | None] = [None] * (N + 1)
        surfaces[N] = self.terminal_surface()
        tensors = bicubic_tensors(surfaces[N].theta, self.grids.S, self.grids.A)
        extrap = total = 0
        for n in range(N - 1, -1, -1):
            surf, e_n, t_n = self.backward_step(n, surfaces[n + 1], tensors=tensors)
            extrap += e_n
            total += t_n
            surfaces[n] = surf
            if n > 0:
                tensors = bicubic_tensors(surf.theta, self.grids.S, self.grids.A)
        diagnostics = {
            "wall_time_s": time.perf_counter() - t0,
            "extrapolated_queries": int(extrap),
            "total_queries": int(total),
            "extrapolation_fraction": float(extrap) / total if total else 0.0,
            "grid_warnings": list(self.grids.warnings),
            "k_perm": self.market.k_perm,
        }
        return PolicyCube(contract=self.contract, market=self.market, risk=self.risk,
                          grid_spec=self.grid_spec, grids=self.grids, surfaces=surfaces,
                          impact=True, diagnostics=diagnostics)


def solve_with_impact(contract: ContractSpec, market: MarketParams, risk: RiskParams,
                      grid_spec: GridSpec) -> PolicyCube:
    """Solve the permanent-impact model on the (S, q, A) tensor grid."""
    return ImpactSolver(contract, market, risk, grid_spec).solve()
