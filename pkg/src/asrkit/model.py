"""Core market/contract model for a fixed-notional ASR.

Discrete daily model.  Prices follow an arithmetic random walk

    S_{n+1} = S_n + sigma * sqrt(dt) * eps_{n+1}           (+ k*v*dt with permanent impact)

with i.i.d. innovations eps drawn from the five-point law below (matches the
first four Gaussian moments).  The bank trades v_n * dt shares on day n+1 at
price S_{n+1} plus an execution cost L(v/V)*V*dt, where V is the daily market
volume and

    L(rho) = eta * |rho|^(1+phi) + psi * |rho|

is a strictly convex, even, superlinear cost density in the participation
rate rho.  The running average A_n = (1/n) * sum_{k<=n} S_k drives the payoff:
at settlement day m the bank delivers F/A_m shares against the notional F
(F/((1-beta)*A_m) when a contractual discount beta is granted), buying the
residual block at a risk-liquidity premium

    ell(q) = (L(rho_exec)/rho_exec) * |q| + gamma * sigma^2 / (6 * rho_exec * Vbar) * |q|^3.

All cash amounts are in EUR, volumes in shares/day, sigma in EUR/sqrt(day).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "ParameterError",
    "ConstraintError",
    "ContractSpec",
    "MarketParams",
    "RiskParams",
    "MarketState",
    "Innovation",
    "INNOVATION_VALUES",
    "INNOVATION_PROBS",
    "innovation_support",
    "execution_cost",
    "mean_volume",
    "volume_at",
    "terminal_premium",
    "intrinsic_value",
    "step_state",
]


class ParameterError(ValueError):
    """A parameter record violates its invariants."""


class ConstraintError(ValueError):
    """A state transition violates an admissibility constraint."""


@dataclass(frozen=True)
class ContractSpec:
    """Fixed-notional ASR contract terms.

    F: cash notional (EUR).  N: trading days until forced settlement.
    exercise_set: day indices (subset of 1..N-1) on which the bank may settle
    early.  beta: price discount granted to the firm, applied as
    F / ((1 - beta) * A) in the settlement payoff.
    """

    F: float
    N: int
    exercise_set: frozenset[int]
    dt: float = 1.0
    beta: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.F) or self.F < 0:
            raise ParameterError(f"notional F must be finite and >= 0, got {self.F}")
        if self.N < 2:
            raise ParameterError(f"horizon N must be >= 2, got {self.N}")
        if self.dt <= 0:
            raise ParameterError(f"day length dt must be > 0, got {self.dt}")
        object.__setattr__(self, "exercise_set", frozenset(int(n) for n in self.exercise_set))
        if not self.exercise_set:
            raise ParameterError("exercise_set must be non-empty")
        if not all(1 <= n <= self.N - 1 for n in self.exercise_set):
            raise ParameterError(
                f"exercise_set must lie in 1..{self.N - 1} (settlement is forced at {self.N})"
            )
        if not 0.0 <= self.beta < 1.0:
            raise ParameterError(f"discount beta must be in [0, 1), got {self.beta}")

    @property
    def n0(self) -> int:
        """First exercisable day index."""
        return min(self.exercise_set)


@dataclass(frozen=True)
class MarketParams:
    """Stock price, liquidity and cost-function parameters.

    volume is either a constant daily market volume or a deterministic
    per-day curve (entry n-1 is the volume of day n, n = 1..N).
    k_perm is the linear permanent impact coefficient (0 disables the
    permanent-impact dynamics entirely).
    """

    S0: float
    sigma: float
    volume: float | tuple[float, ...]
    eta: float
    phi: float
    psi: float = 0.0
    k_perm: float = 0.0

    def __post_init__(self) -> None:
        if self.S0 <= 0:
            raise ParameterError(f"initial price S0 must be > 0, got {self.S0}")
        if self.sigma < 0:
            raise ParameterError(f"volatility sigma must be >= 0, got {self.sigma}")
        if isinstance(self.volume, (list, tuple, np.ndarray)):
            vols = tuple(float(v) for v in self.volume)
            if not vols or any(v <= 0 or not math.isfinite(v) for v in vols):
                raise ParameterError("every daily volume must be finite and > 0")
            object.__setattr__(self, "volume", vols)
        else:
            if self.volume <= 0 or not math.isfinite(self.volume):
                raise ParameterError(f"volume must be > 0, got {self.volume}")
            object.__setattr__(self, "volume", float(self.volume))
        if self.eta <= 0:
            raise ParameterError(f"eta must be > 0, got {self.eta}")
        if self.phi <= 0:
            raise ParameterError(f"phi must be > 0, got {self.phi}")
        if self.psi < 0:
            raise ParameterError(f"psi must be >= 0, got {self.psi}")
        if self.k_perm < 0:
            raise ParameterError(f"k_perm must be >= 0, got {self.k_perm}")


@dataclass(frozen=True)
class RiskParams:
    """Bank preferences and participation constraints.

    gamma: absolute risk aversion (1/EUR); gamma == 0 selects the
    risk-neutral limit where every certainty equivalent
    (1/gamma) * log E[exp(-gamma Z)] is replaced by -E[Z].
    rho_lo/rho_hi bound the participation rate; rho_exec is the constant
    rate assumed for the post-settlement residual execution.
    """

    gamma: float
    rho_lo: float
    rho_hi: float
    rho_exec: float

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if not self.rho_lo < self.rho_hi:
            raise ParameterError(f"need rho_lo < rho_hi, got [{self.rho_lo}, {self.rho_hi}]")
        if self.rho_hi <= 0:
            raise ParameterError(f"rho_hi must be > 0, got {self.rho_hi}")
        if self.rho_exec <= 0:
            raise ParameterError(f"rho_exec must be > 0, got {self.rho_exec}")


@dataclass(frozen=True)
class MarketState:
    """State of the execution program at the start of day n.

    A is the running average of S_1..S_n; by convention A = S0 at n = 0
    (day 0 carries no average yet, the convention keeps transitions uniform).
    """

    n: int
    S: float
    A: float
    q: float = 0.0
    X: float = 0.0


@dataclass(frozen=True)
class Innovation:
    """One support point of the five-branch innovation law."""

    value: int
    prob: Fraction


INNOVATION_VALUES: tuple[int, ...] = (-2, -1, 0, 1, 2)
INNOVATION_PROBS: tuple[Fraction, ...] = (
    Fraction(1, 12),
    Fraction(1, 6),
    Fraction(1, 2),
    Fraction(1, 6),
    Fraction(1, 12),
)


def innovation_support() -> tuple[Innovation, ...]:
    """Five-point innovation law with exact rational probabilities.

    Matches the first four moments of a standard normal:
    E[eps]=0, E[eps^2]=1, E[eps^3]=0, E[eps^4]=3.
    """
    return tuple(Innovation(v, p) for v, p in zip(INNOVATION_VALUES, INNOVATION_PROBS))


def execution_cost(rho: float, market: MarketParams) -> float:
    """Execution cost density L(rho) = eta*|rho|^(1+phi) + psi*|rho| (EUR/share)."""
    if not math.isfinite(rho):
        raise ParameterError(f"participation rate must be finite, got {rho}")
    a = abs(rho)
    return market.eta * a ** (1.0 + market.phi) + market.psi * a


def volume_at(market: MarketParams, day: int) -> float:
    """Market volume of day `day` (1-based, the volume traded over day day)."""
    if isinstance(market.volume, tuple):
        if not 1 <= day <= len(market.volume):
            raise ParameterError(f"volume curve has {len(market.volume)} days, asked for day {day}")
        return market.volume[day - 1]
    return market.volume


def mean_volume(market: MarketParams, n_days: int) -> float:
    """Arithmetic mean of the volume curve over the contract horizon."""
    if isinstance(market.volume, tuple):
        if len(market.volume) < n_days:
            raise ParameterError(
                f"volume curve has {len(market.volume)} days, contract needs {n_days}"
            )
        return float(np.mean(market.volume[:n_days]))
    return market.volume


def terminal_premium(q: float, contract: ContractSpec, market: MarketParams,
                     risk: RiskParams) -> float:
    """Risk-liquidity premium ell(q) of unwinding a residual block of q shares.

    Assumes constant-participation execution at rate rho_exec against the
    average market volume; even, zero at zero, strictly increasing in |q|.
    The cubic term carries the risk aversion and vanishes for gamma = 0.
    """
    rho = risk.rho_exec
    v_bar = mean_volume(market, contract.N)
    lin = execution_cost(rho, market) / rho
    cub = risk.gamma * market.sigma ** 2 / (6.0 * rho * v_bar)
    a = abs(q)
    return lin * a + cub * a ** 3


def intrinsic_value(q: float, S: float, A: float, contract: ContractSpec,
                    market: MarketParams, risk: RiskParams) -> float:
    """Value of settling now at state (q, S, A): the stop-now branch of theta.

    F*(S/A' - 1) + ell(F/A' - q) + (k/2)*(F/A' - q)^2 with A' = (1-beta)*A.
    The quadratic term only contributes under permanent impact (k > 0).
    """
    a_eff = (1.0 - contract.beta) * A
    if a_eff <= 0:
        raise ParameterError(f"average price must stay positive in the payoff, got {a_eff}")
    residual = contract.F / a_eff - q
    val = contract.F * (S / a_eff - 1.0) + terminal_premium(residual, contract, market, risk)
    if market.k_perm > 0:
        val += 0.5 * market.k_perm * residual * residual
    return val


def step_state(state: MarketState, v: float, eps: float, contract: ContractSpec,
               market: MarketParams, risk: RiskParams,
               eps_prime: float | None = None) -> MarketState:
    """Advance one day trading at rate v (shares/day) under innovation eps.

    With permanent impact (k > 0) the trade shifts the close by k*v*dt, the
    cash account pays the intraday average rather than the close (the
    -(k/2)(v dt)^2 correction) and picks up the even-execution noise
    -(sigma*v*dt^{3/2}/sqrt3)*eps_prime; eps_prime is then required.
    """
    dt = contract.dt
    day = state.n + 1
    V = volume_at(market, day)
    tol = 1e-9 * V
    if not (risk.rho_lo * V - tol <= v <= risk.rho_hi * V + tol):
        raise ConstraintError(
            f"trading rate {v} violates participation bounds "
            f"[{risk.rho_lo * V}, {risk.rho_hi * V}] on day {day}"
        )
    k = market.k_perm
    s_new = state.S + market.sigma * math.sqrt(dt) * eps
    if k > 0:
        if eps_prime is None:
            raise ParameterError("permanent-impact step needs the intraday innovation eps_prime")
        s_new += k * v * dt
    q_new = state.q + v * dt
    a_new = (state.n * state.A + s_new) / (state.n + 1)
    x_new = state.X + v * s_new * dt + execution_cost(v / V, market) * V * dt
    if k > 0:
        x_new -= 0.5 * k * (v * dt) ** 2
        x_new -= market.sigma * v * dt ** 1.5 / math.sqrt(3.0) * eps_prime
    return MarketState(n=state.n + 1, S=s_new, A=a_new, q=q_new, X=x_new)
