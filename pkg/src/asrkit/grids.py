"""Inventory / average-price / price grids for the backward solver.

The q-grid is uniform on [0, q_max].  The A-grid is uniform and centred on
S0 with half-width (xi/2) * sigma * sqrt(N*dt); xi = 3 keeps roughly 2.6
standard deviations of the terminal average (Var[A_N] ~ N*sigma^2*dt / 3).
The optional S-grid (permanent-impact mode) has one knot per tree step
sigma*sqrt(dt), pinned to the tree envelope on the downside and extended
upward to absorb the cumulative impact drift k * q_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ContractSpec, MarketParams, ParameterError, RiskParams

__all__ = ["GridError", "GridSpec", "QAGrids", "build_grids", "suggested_q_max",
           "candidate_offsets", "required_n_s"]


class GridError(ValueError):
    """Grid configuration cannot support the requested solve."""


@dataclass(frozen=True)
class GridSpec:
    """Grid sizes: n_q inventory points, n_A average-price points, q_max top
    of the inventory grid (shares), xi the A-grid width multiplier and n_S
    the number of price knots (permanent-impact mode only)."""

    n_q: int
    n_A: int
    q_max: float
    xi: float = 3.0
    n_S: int | None = None

    def __post_init__(self) -> None:
        if self.n_q < 2:
            raise ParameterError(f"n_q must be >= 2, got {self.n_q}")
        if self.n_A < 4:
            raise ParameterError(f"n_A must be >= 4 (cubic spline needs 4 knots), got {self.n_A}")
        if self.q_max <= 0:
            raise ParameterError(f"q_max must be > 0, got {self.q_max}")
        if self.xi <= 0:
            raise ParameterError(f"xi must be > 0, got {self.xi}")
        if self.n_S is not None and self.n_S < 4:
            raise ParameterError(f"n_S must be >= 4, got {self.n_S}")


@dataclass(frozen=True)
class QAGrids:
    """Realised grids plus any alignment warnings recorded while building."""

    q: np.ndarray
    A: np.ndarray
    S: np.ndarray | None
    warnings: tuple[str, ...]

    @property
    def dq(self) -> float:
        return float(self.q[1] - self.q[0])


def suggested_q_max(contract: ContractSpec, market: MarketParams, xi: float = 3.0) -> float:
    """Inventory ceiling coherent with the lowest representable average price."""
    floor = market.S0 - 0.5 * xi * market.sigma * math.sqrt(contract.N * contract.dt)
    if floor <= 0:
        raise GridError(f"A-grid floor {floor} is not positive; reduce xi or sigma*sqrt(N)")
    return contract.F / floor


def build_grids(spec: GridSpec, contract: ContractSpec, market: MarketParams,
                risk: RiskParams | None = None) -> QAGrids:
    """Build the uniform q/A (and optional S) grids.

    With a constant volume curve the participation extremes rho_lo*V*dt and
    rho_hi*V*dt should be whole multiples of the q-grid step so the bounds
    fall on grid points; a warning is recorded otherwise.
    """
    q = np.linspace(0.0, spec.q_max, spec.n_q)

    half = 0.5 * spec.xi * market.sigma * math.sqrt(contract.N * contract.dt)
    if market.S0 - half <= 0 and market.sigma > 0:
        raise GridError(
            f"A-grid would reach {market.S0 - half} <= 0; shrink xi (= {spec.xi}) or the horizon"
        )
    if half == 0.0:
        # Degenerate sigma = 0: keep a tiny symmetric band so the spline is
        # well posed; every reachable average equals S0 exactly.
        half = 1e-6 * market.S0
    A = market.S0 + 2.0 * half * (np.arange(spec.n_A) / (spec.n_A - 1) - 0.5)

    warnings: list[str] = []
    if risk is not None and not isinstance(market.volume, tuple):
        dq = float(q[1] - q[0])
        for name, rho in (("rho_hi", risk.rho_hi), ("rho_lo", risk.rho_lo)):
            extent = abs(rho) * market.volume * contract.dt
            if extent == 0.0:
                continue
            ratio = extent / dq
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                warnings.append(
                    f"{name}*V*dt = {extent} is not a multiple of the q-grid step {dq}; "
                    "participation bounds fall between grid points"
                )

    S = None
    if spec.n_S is not None:
        step = market.sigma * math.sqrt(contract.dt)
        if step <= 0:
            raise GridError("an S-grid needs sigma > 0")
        lo = -2 * contract.N
        S = market.S0 + step * (lo + np.arange(spec.n_S))

    return QAGrids(q=q, A=A, S=S, warnings=tuple(warnings))


def required_n_s(contract: ContractSpec, market: MarketParams, spec: GridSpec) -> int:
    """Price knots needed to cover the tree envelope plus the impact drift."""
    step = market.sigma * math.sqrt(contract.dt)
    if step <= 0:
        raise GridError("permanent-impact mode needs sigma > 0")
    drift_steps = int(math.ceil(market.k_perm * spec.q_max / step - 1e-12))
    return 4 * contract.N + 1 + max(drift_steps, 0)


def candidate_offsets(dq: float, volume_day: float, dt: float,
                      risk: RiskParams) -> tuple[int, int]:
    """Range of q-grid index offsets reachable in one day.

    Returns (d_min, d_max) with targets q + d*dq, d_min <= d <= d_max,
    matching [q + rho_lo*V*dt, q + rho_hi*V*dt]; endpoints that fall on the
    grid (up to fp tolerance) are included.
    """
    lo = risk.rho_lo * volume_day * dt / dq
    hi = risk.rho_hi * volume_day * dt / dq
    tol = 1e-9
    d_min = int(math.ceil(lo - tol * max(1.0, abs(lo))))
    d_max = int(math.floor(hi + tol * max(1.0, abs(hi))))
    if d_min > d_max:
        raise GridError(
            f"no q-grid point is reachable: participation window [{lo}, {hi}] grid steps "
            f"contains no integer; refine the q-grid (step {dq})"
        )
    return d_min, d_max
