"""Indifference price and maximum contractual discount.

The value of entering the contract, net of execution costs and risk, is
the day-0 root value theta_0(0, S0) of a solved cube.  When it is
negative, the bank can grant the firm a discount beta on the settlement
average; the largest admissible discount beta* is located by bisection on
beta -> price(beta), each evaluation being a full re-solve with the
discounted payoff.  No warm starting: correctness over speed, a solve is
minutes at worst.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .grids import GridSpec
from .model import ContractSpec, MarketParams, ParameterError, RiskParams
from .solver import PolicyCube, solve

__all__ = ["PriceReport", "DiscountReport", "indifference_price", "max_discount",
           "price_for", "DiscountSearchError"]

BETA_CAP = 0.5


class DiscountSearchError(RuntimeError):
    """The discount search detected an inconsistent price profile."""


@dataclass(frozen=True)
class PriceReport:
    pi: float
    pi_over_f: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def text(self) -> str:
        lines = [f"pi: {self.pi:.2f}", f"pi_over_f: {self.pi_over_f:.6%}"]
        lines += [f"{k}: {v}" for k, v in sorted(self.metadata.items())]
        return "\n".join(lines)

    def json_dict(self) -> dict[str, Any]:
        return {"pi": self.pi, "pi_over_f": self.pi_over_f, "metadata": self.metadata}


@dataclass(frozen=True)
class DiscountReport:
    beta_star: float
    bracket: tuple[float, float]
    trace: tuple[tuple[float, float], ...]   # (beta, pi) in evaluation order
    capped: bool = False
    warning: str | None = None

    def text(self) -> str:
        lines = [f"beta_star: {self.beta_star:.6f}",
                 f"bracket: [{self.bracket[0]:.6f}, {self.bracket[1]:.6f}]"]
        if self.capped:
            lines.append(f"warning: search capped at beta = {BETA_CAP}")
        if self.warning:
            lines.append(f"warning: {self.warning}")
        lines += [f"trace: beta={b:.6f} pi={p:.2f}" for b, p in self.trace]
        return "\n".join(lines)

    def json_dict(self) -> dict[str, Any]:
        return {"beta_star": self.beta_star, "bracket": list(self.bracket),
                "trace": [list(t) for t in self.trace], "capped": self.capped,
                "warning": self.warning}


def indifference_price(cube: PolicyCube) -> PriceReport:
    """Read the indifference price off the day-0 surface (q = 0, S = S0)."""
    root = cube.surfaces[0].theta[cube.root_row, 0, :]
    spread = float(np.max(root) - np.min(root))
    tol = 10 * np.finfo(np.float64).eps * max(1.0, abs(float(root[0])))
    if spread > tol:
        raise ParameterError(
            f"malformed cube: day-0 value varies along A by {spread} (tolerance {tol})"
        )
    pi = float(root[0])
    F = cube.contract.F
    meta = {
        "n_days": cube.contract.N,
        "n_q": cube.grid_spec.n_q,
        "n_A": cube.grid_spec.n_A,
        "q_max": cube.grid_spec.q_max,
        "impact": cube.impact,
        "wall_time_s": cube.diagnostics.get("wall_time_s"),
    }
    return PriceReport(pi=pi, pi_over_f=pi / F if F > 0 else 0.0, metadata=meta)


def price_for(contract: ContractSpec, market: MarketParams, risk: RiskParams,
              grid_spec: GridSpec, beta: float | None = None) -> float:
    """Indifference price of the (optionally re-discounted) contract."""
    if beta is not None:
        contract = replace(contract, beta=beta)
    return solve(contract, market, risk, grid_spec).theta0()


def max_discount(contract: ContractSpec, market: MarketParams, risk: RiskParams,
                 grid_spec: GridSpec, tol_beta: float = 1e-4,
                 pi_at_zero: float | None = None) -> DiscountReport:
    """Largest discount beta* that keeps the contract acceptable.

    beta* is the zero of beta -> price(beta); price must come out
    non-decreasing along the evaluated trace (a larger discount means more
    shares delivered, which is weakly worse for the bank), anything else
    is flagged as a numerical-resolution problem.
    """
    if tol_beta <= 0:
        raise ParameterError(f"tol_beta must be > 0, got {tol_beta}")
    t0 = time.perf_counter()
    trace: list[tuple[float, float]] = []

    def price(beta: float) -> float:
        pi = price_for(contract, market, risk, grid_spec, beta=beta)
        trace.append((beta, pi))
        return pi

    pi0 = pi_at_zero if pi_at_zero is not None else price(0.0)
    if pi_at_zero is not None:
        trace.append((0.0, pi0))
    if pi0 > 0:
        return DiscountReport(beta_star=0.0, bracket=(0.0, 0.0), trace=tuple(trace),
                              warning="price is already positive at beta = 0")
    if pi0 == 0:
        return DiscountReport(beta_star=0.0, bracket=(0.0, 0.0), trace=tuple(trace))

    lo, pi_lo = 0.0, pi0
    hi = 0.01
    capped = False
    while True:
        pi_hi = price(hi)
        if pi_hi > 0:
            break
        lo, pi_lo = hi, pi_hi
        if hi >= BETA_CAP:
            capped = True
            break
        hi = min(2 * hi, BETA_CAP)
    if capped:
        return DiscountReport(beta_star=lo, bracket=(lo, hi), trace=tuple(trace),
                              capped=True)

    while hi - lo > tol_beta:
        mid = 0.5 * (lo + hi)
        pi_mid = price(mid)
        if pi_mid > 0:
            hi = mid
        else:
            lo, pi_lo = mid, pi_mid

    by_beta = sorted(trace)
    for (b0, p0), (b1, p1) in zip(by_beta, by_beta[1:]):
        if p1 < p0 - 1e-6 * max(1.0, abs(p0)):
            raise DiscountSearchError(
                f"price not monotone along the trace: pi({b0})={p0} > pi({b1})={p1}; "
                "refine the grids"
            )
    report = DiscountReport(beta_star=0.5 * (lo + hi), bracket=(lo, hi),
                            trace=tuple(trace))
    return report
