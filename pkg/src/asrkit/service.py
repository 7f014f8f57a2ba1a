"""Read-only policy service over HTTP.

Serves a single immutable cube: GET /meta for the generating parameters,
POST /policy for live recommendations at a (n, S, q, A) state and POST
/preview to apply a hypothetical order and innovation to a state through
the model's one-day transition.  Answers are pure functions of
(cube, request).  States beyond the grids' extrapolation margin come back
as 422 with the extrapolation flag set in the detail.
"""

from __future__ import annotations

import math
from typing import Any

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict

from .model import (ConstraintError, MarketState, ParameterError, execution_cost,
                    step_state, volume_at)
from .policy import PolicyDomainError, evaluate_policy, participation_window
from .solver import PolicyCube

__all__ = ["create_app", "PolicyQuery", "PolicyAnswer", "PreviewRequest", "PreviewAnswer"]


class PolicyQuery(BaseModel):
    model_config = ConfigDict(extra="forbid")
    n: int
    S: float
    q: float
    A: float


class PolicyAnswer(BaseModel):
    order: float
    exercise: bool
    theta: float
    intrinsic: float
    continuation: float | None
    extrapolation_warning: bool


class StateBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    n: int
    S: float
    q: float
    A: float
    X: float = 0.0


class PreviewRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    state: StateBody
    order: float
    eps: float
    eps_prime: float | None = None


class PreviewAnswer(BaseModel):
    state: StateBody
    execution_cost: float


def create_app(cube: PolicyCube) -> FastAPI:
    """Build the service around one solved cube."""
    app = FastAPI(title="asr-policy-service")
    contract, market, risk = cube.contract, cube.market, cube.risk

    @app.get("/meta")
    def meta() -> dict[str, Any]:
        return {
            "format_version": cube.version,
            "impact": cube.impact,
            "n_days": contract.N,
            "exercise_days": sorted(contract.exercise_set),
            "contract": {"F": contract.F, "N": contract.N, "dt": contract.dt,
                         "beta": contract.beta},
            "market": {"S0": market.S0, "sigma": market.sigma,
                       "volume": list(market.volume)
                       if isinstance(market.volume, tuple) else market.volume,
                       "eta": market.eta, "phi": market.phi, "psi": market.psi,
                       "k_perm": market.k_perm},
            "risk": {"gamma": risk.gamma, "rho_lo": risk.rho_lo,
                     "rho_hi": risk.rho_hi, "rho_exec": risk.rho_exec},
            "grid": {"n_q": cube.grid_spec.n_q, "n_A": cube.grid_spec.n_A,
                     "q_max": cube.grid_spec.q_max, "xi": cube.grid_spec.xi,
                     "n_S": cube.grid_spec.n_S},
            "diagnostics": cube.diagnostics,
        }

    @app.post("/policy", response_model=PolicyAnswer)
    def policy(query: PolicyQuery) -> PolicyAnswer:
        if query.n == contract.N:
            # settlement is forced at maturity, there is no decision left
            from .model import intrinsic_value
            try:
                intr = intrinsic_value(query.q, query.S, query.A, contract, market, risk)
            except ParameterError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            return PolicyAnswer(order=0.0, exercise=True, theta=intr, intrinsic=intr,
                                continuation=None, extrapolation_warning=False)
        try:
            decision = evaluate_policy(cube, query.n, query.S, query.q, query.A)
        except PolicyDomainError as exc:
            raise HTTPException(
                status_code=422,
                detail={"error": str(exc), "extrapolation_warning": True}) from None
        except ParameterError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return PolicyAnswer(order=decision.order, exercise=decision.exercise,
                            theta=decision.theta, intrinsic=decision.intrinsic,
                            continuation=decision.continuation,
                            extrapolation_warning=decision.extrapolated)

    @app.post("/preview", response_model=PreviewAnswer)
    def preview(request: PreviewRequest) -> PreviewAnswer:
        st = request.state
        if not 0 <= st.n <= contract.N - 1:
            raise HTTPException(status_code=422,
                                detail=f"preview day must be in 0..{contract.N - 1}")
        if not all(math.isfinite(v) for v in (st.S, st.q, st.A, st.X, request.order,
                                              request.eps)):
            raise HTTPException(status_code=422, detail="state must be finite")
        lo, hi = participation_window(cube, st.n)
        if not lo - 1e-9 * (abs(lo) + 1) <= request.order <= hi + 1e-9 * (abs(hi) + 1):
            raise HTTPException(status_code=422,
                                detail=f"order {request.order} outside [{lo}, {hi}]")
        state = MarketState(n=st.n, S=st.S, A=st.A, q=st.q, X=st.X)
        try:
            nxt = step_state(state, request.order / contract.dt, request.eps,
                             contract, market, risk, eps_prime=request.eps_prime)
        except (ConstraintError, ParameterError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        v = request.order / contract.dt
        V = volume_at(market, st.n + 1)
        return PreviewAnswer(
            state=StateBody(n=nxt.n, S=nxt.S, q=nxt.q, A=nxt.A, X=nxt.X),
            execution_cost=execution_cost(v / V, market) * V * contract.dt)

    return app
