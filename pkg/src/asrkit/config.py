"""Run configuration: a single JSON document with strict validation.

Sections mirror the parameter records (contract / market / risk / grid)
plus run-level artifact paths and an optional sweep block.  Unknown keys
are rejected so typos fail loudly.  Units: notional in EUR, horizon in
trading days, sigma in EUR/sqrt(day), volume in shares/day, eta in
EUR/(share.day), gamma in 1/EUR, participation rates dimensionless,
q_max in shares.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .grids import GridSpec
from .model import ContractSpec, MarketParams, RiskParams

__all__ = ["RunConfig", "ContractConfig", "MarketConfig", "RiskConfig", "GridConfig",
           "SweepConfig", "load_config", "dump_config"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExerciseWindow(_Strict):
    first: int = Field(ge=1)
    last: int = Field(ge=1)


class ContractConfig(_Strict):
    notional: float = Field(ge=0, description="cash notional F (EUR)")
    days: int = Field(ge=2, description="trading days N until forced settlement")
    exercise_days: list[int] | ExerciseWindow
    dt: float = Field(default=1.0, gt=0, description="day length (days)")
    beta: float = Field(default=0.0, ge=0, lt=1, description="settlement price discount")

    def exercise_set(self) -> frozenset[int]:
        if isinstance(self.exercise_days, ExerciseWindow):
            return frozenset(range(self.exercise_days.first, self.exercise_days.last + 1))
        return frozenset(self.exercise_days)

    @model_validator(mode="after")
    def _check(self) -> "ContractConfig":
        days = self.exercise_set()
        if not days:
            raise ValueError("exercise_days must be non-empty")
        if not all(1 <= d <= self.days - 1 for d in days):
            raise ValueError(f"exercise days must lie in 1..{self.days - 1}")
        return self


class MarketConfig(_Strict):
    initial_price: float = Field(gt=0, description="S0 (EUR)")
    sigma: float = Field(ge=0, description="daily volatility (EUR/sqrt(day))")
    volume: float | list[float] = Field(description="market volume (shares/day)")
    eta: float = Field(gt=0, description="execution-cost level (EUR/(share.day))")
    phi: float = Field(gt=0, description="execution-cost exponent")
    psi: float = Field(default=0.0, ge=0, description="proportional cost (EUR/share)")
    k_perm: float = Field(default=0.0, ge=0, description="permanent impact (EUR/share)")

    @field_validator("volume")
    @classmethod
    def _vol_positive(cls, v):
        vals = v if isinstance(v, list) else [v]
        if not vals or any(x <= 0 for x in vals):
            raise ValueError("volume entries must be positive")
        return v


class RiskConfig(_Strict):
    gamma: float = Field(ge=0, description="absolute risk aversion (1/EUR)")
    rho_lo: float = Field(description="participation lower bound")
    rho_hi: float = Field(gt=0, description="participation upper bound")
    rho_exec: float = Field(gt=0, description="post-settlement participation rate")

    @model_validator(mode="after")
    def _check(self) -> "RiskConfig":
        if not self.rho_lo < self.rho_hi:
            raise ValueError("need rho_lo < rho_hi")
        return self


class GridConfig(_Strict):
    n_q: int = Field(ge=2)
    n_a: int = Field(ge=4, description="A-grid points (cubic spline needs >= 4)")
    q_max: float = Field(gt=0)
    xi: float = Field(default=3.0, gt=0)
    n_s: int | None = Field(default=None, ge=4, description="S-grid points (impact mode)")


class SweepConfig(_Strict):
    param: Literal["eta", "sigma", "gamma", "phi", "psi", "k_perm",
                   "rho_lo", "rho_hi", "rho_exec", "beta", "notional"]
    values: list[float] = Field(min_length=1)


class RunConfig(_Strict):
    contract: ContractConfig
    market: MarketConfig
    risk: RiskConfig
    grid: GridConfig
    out_cube: str | None = None
    out_dir: str | None = None
    seed: int = 0
    sweep: SweepConfig | None = None

    def to_domain(self) -> tuple[ContractSpec, MarketParams, RiskParams, GridSpec]:
        c = ContractSpec(F=self.contract.notional, N=self.contract.days,
                         exercise_set=self.contract.exercise_set(),
                         dt=self.contract.dt, beta=self.contract.beta)
        vol = self.market.volume
        m = MarketParams(S0=self.market.initial_price, sigma=self.market.sigma,
                         volume=tuple(vol) if isinstance(vol, list) else vol,
                         eta=self.market.eta, phi=self.market.phi, psi=self.market.psi,
                         k_perm=self.market.k_perm)
        r = RiskParams(gamma=self.risk.gamma, rho_lo=self.risk.rho_lo,
                       rho_hi=self.risk.rho_hi, rho_exec=self.risk.rho_exec)
        g = GridSpec(n_q=self.grid.n_q, n_A=self.grid.n_a, q_max=self.grid.q_max,
                     xi=self.grid.xi, n_S=self.grid.n_s)
        return c, m, r, g

    def with_param(self, name: str, value: float) -> "RunConfig":
        """Copy of the config with one market/risk/contract scalar replaced."""
        data = self.model_dump()
        section = {"eta": "market", "sigma": "market", "phi": "market", "psi": "market",
                   "k_perm": "market", "gamma": "risk", "rho_lo": "risk",
                   "rho_hi": "risk", "rho_exec": "risk", "beta": "contract",
                   "notional": "contract"}[name]
        data[section][name] = value
        return RunConfig.model_validate(data)


def load_config(file: str | Path) -> RunConfig:
    with open(file) as fh:
        return RunConfig.model_validate(json.load(fh))


def dump_config(config: RunConfig, file: str | Path | None = None) -> str:
    text = json.dumps(config.model_dump(), indent=2, sort_keys=True)
    if file is not None:
        Path(file).write_text(text + "\n")
    return text
