"""Forward replay of a solved policy on price paths.

A replay walks the trading days, asks the policy for an order or an
exercise decision at the realised state, applies the order through the
model's state transition and settles at the first exercise (or at
maturity).  Monte Carlo evaluation replays synthetic paths drawn from the
solver's own five-point innovation law (a Gaussian generator is available
for off-model robustness checks) and reports cost statistics plus the
certainty equivalent of terminal wealth.

Realised cost decomposes into four terms: the partially hedged price risk
accumulated before settlement, the average-vs-spot spread carried by the
start state (zero when starting at day 0), execution costs paid along the
way and the residual-block premium at settlement.  The decomposition is
recomputed from the trajectory (innovations recovered from price
differences) and cross-checked against an exact running-average identity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .grids import candidate_offsets
from .model import (ContractSpec, MarketParams, MarketState, ParameterError,
                    execution_cost, mean_volume, step_state, terminal_premium,
                    volume_at)
from .policy import evaluate_policy
from .solver import EPS_PROBS, EPS_VALUES, PolicyCube, day_costs, ordered_offsets

__all__ = ["PricePath", "SimulationResult", "Decomposition", "MonteCarloSummary",
           "PathError", "simulate_path", "decompose_cost", "monte_carlo",
           "pentanomial_paths", "gaussian_paths", "path_from_csv", "write_trajectory_csv"]

EPS_INT = np.array([-2, -1, 0, 1, 2])


class PathError(ValueError):
    """A supplied path cannot be replayed against the cube."""


@dataclass(frozen=True)
class PricePath:
    """Daily prices S_1..S_len, either supplied or tagged with a generator seed."""

    prices: np.ndarray
    label: str = "supplied"
    seed: int | None = None

    def __post_init__(self) -> None:
        p = np.asarray(self.prices, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise PathError("a path is a non-empty 1-D price series")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise PathError("all path prices must be finite and positive")
        object.__setattr__(self, "prices", p)


@dataclass(frozen=True)
class Decomposition:
    risk_term: float
    spread_term: float
    liquidity_term: float
    post_exercise_premium: float
    discount_transfer: float
    identity_gap: float

    def total(self) -> float:
        """Objective the four terms assemble to (equals terminal wealth)."""
        return (self.risk_term + self.spread_term - self.liquidity_term
                - self.post_exercise_premium + self.discount_transfer)


@dataclass
class SimulationResult:
    """Day-by-day trajectory plus settlement summary.

    Arrays run over recorded days 0..n_star; `order` holds the shares
    bought over the following day (zero on the settlement row).
    """

    day: np.ndarray
    S: np.ndarray
    A: np.ndarray
    q: np.ndarray
    order: np.ndarray
    X: np.ndarray
    exercised: np.ndarray
    n_star: int
    shares_delivered: float
    total_cost: float
    wealth: float
    decomposition: Decomposition | None = None


@dataclass(frozen=True)
class MonteCarloSummary:
    n_paths: int
    seed: int
    generator: str
    mean_cost: float
    std_cost: float
    quantiles: dict[str, float]
    exercise_histogram: dict[int, int]
    mean_wealth: float
    certainty_equivalent: float
    ce_std_error: float


def pentanomial_paths(contract: ContractSpec, market: MarketParams, n_paths: int,
                      seed: int) -> np.ndarray:
    """Price paths under the solver's own innovation measure, (n_paths, N)."""
    rng = np.random.default_rng(seed)
    eps = rng.choice(EPS_INT, size=(n_paths, contract.N),
                     p=EPS_PROBS).astype(np.float64)
    s = market.sigma * math.sqrt(contract.dt)
    return market.S0 + s * np.cumsum(eps, axis=1)


def gaussian_paths(contract: ContractSpec, market: MarketParams, n_paths: int,
                   seed: int) -> np.ndarray:
    """Off-model Gaussian-innovation paths for robustness studies."""
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((n_paths, contract.N))
    s = market.sigma * math.sqrt(contract.dt)
    return market.S0 + s * np.cumsum(eps, axis=1)


def path_from_csv(file: str | Path) -> PricePath:
    """Read a path from CSV with header day,price."""
    rows: list[tuple[int, float]] = []
    with open(file, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != ["day", "price"]:
            raise PathError(f"{file}: expected CSV header 'day,price'")
        for rec in reader:
            rows.append((int(rec["day"]), float(rec["price"])))
    rows.sort()
    if [d for d, _ in rows] != list(range(1, len(rows) + 1)):
        raise PathError(f"{file}: days must be 1..N without gaps")
    return PricePath(prices=np.array([p for _, p in rows]), label=str(file))


def simulate_path(cube: PolicyCube, path: PricePath) -> SimulationResult:
    """Replay the stored policy on one realised price path."""
    contract, market, risk = cube.contract, cube.market, cube.risk
    N = contract.N
    if path.prices.shape[0] < N:
        raise PathError(f"path has {path.prices.shape[0]} days, replay needs {N}")
    s = market.sigma * math.sqrt(contract.dt)
    state = MarketState(n=0, S=market.S0, A=market.S0, q=0.0, X=0.0)
    day, Ss, As, qs, orders, Xs, exs = [], [], [], [], [], [], []
    n_star = N
    for n in range(N):
        decision = evaluate_policy(cube, n, state.S, state.q, state.A)
        if decision.exercise:
            n_star = n
            day.append(n), Ss.append(state.S), As.append(state.A), qs.append(state.q)
            orders.append(0.0), Xs.append(state.X), exs.append(True)
            break
        order = decision.order
        v = order / contract.dt
        s_next = float(path.prices[n])
        if s > 0:
            eps = (s_next - state.S - market.k_perm * v * contract.dt) / s
        else:
            if abs(s_next - state.S) > 1e-9 * state.S:
                raise PathError("sigma = 0 cube cannot replay a moving price path")
            eps = 0.0
        eps_prime = 0.5 * math.sqrt(3.0) * eps if market.k_perm > 0 else None
        day.append(n), Ss.append(state.S), As.append(state.A), qs.append(state.q)
        orders.append(order), Xs.append(state.X), exs.append(False)
        state = step_state(state, v, eps, contract, market, risk, eps_prime=eps_prime)
    else:
        day.append(N), Ss.append(state.S), As.append(state.A), qs.append(state.q)
        orders.append(0.0), Xs.append(state.X), exs.append(True)
    result = SimulationResult(
        day=np.array(day), S=np.array(Ss), A=np.array(As), q=np.array(qs),
        order=np.array(orders), X=np.array(Xs), exercised=np.array(exs, dtype=bool),
        n_star=n_star, shares_delivered=0.0, total_cost=0.0, wealth=0.0)
    _settle(result, cube)
    result.decomposition = decompose_cost(result, cube)
    return result


def _settle(result: SimulationResult, cube: PolicyCube) -> None:
    contract, market, risk = cube.contract, cube.market, cube.risk
    S_star, A_star, q_star, X_star = (result.S[-1], result.A[-1],
                                      result.q[-1], result.X[-1])
    a_eff = (1.0 - contract.beta) * A_star
    shares = contract.F / a_eff
    resid = shares - q_star
    settle_cost = resid * S_star + terminal_premium(resid, contract, market, risk)
    if market.k_perm > 0:
        settle_cost += 0.5 * market.k_perm * resid * resid
    result.shares_delivered = float(shares)
    result.total_cost = float(X_star + settle_cost)
    result.wealth = float(contract.F - result.total_cost)


def decompose_cost(result: SimulationResult, cube: PolicyCube) -> Decomposition:
    """Four-term split of the replayed objective, rebuilt from the path.

    Innovations are recovered from price differences; the exact identity
    A_m - S_m = -(1/m) * sum_j j * (S_{j+1} - S_j) is asserted on the
    trajectory as a consistency check.
    """
    contract, market, risk = cube.contract, cube.market, cube.risk
    n_star = result.n_star
    if n_star < 1:
        raise PathError("settlement index must be >= 1")
    s = market.sigma * math.sqrt(contract.dt)
    dt = contract.dt
    k = market.k_perm
    dS = np.diff(result.S[:n_star + 1])
    v = result.order[:n_star] / dt
    if s > 0:
        eps = (dS - k * v * dt) / s
    else:
        eps = np.zeros(n_star)

    j = np.arange(n_star, dtype=np.float64)
    ident_lhs = result.A[n_star] - result.S[n_star]
    ident_rhs = -np.sum(j * dS) / n_star
    scale = max(abs(ident_lhs), abs(ident_rhs), market.S0)
    gap = abs(ident_lhs - ident_rhs) / scale
    if gap > 1e-8:
        raise PathError(f"running-average identity violated by {gap:.2e} (relative)")

    a_eff = (1.0 - contract.beta) * result.A[n_star]
    shares = contract.F / a_eff
    q_pre = result.q[:n_star]
    hedge = q_pre - j / n_star * shares
    risk_term = float(s * np.sum(hedge * eps))
    spread_term = 0.0  # start state is day 0: (0/n_star)(A0 - S0) * shares
    liq = 0.0
    for jj in range(n_star):
        V = volume_at(market, jj + 1)
        liq += execution_cost(v[jj] / V, market) * V * dt
    if k > 0:
        # permanent-impact cash terms: drift carried by the hedge position,
        # intraday-average rebate, and the even-execution noise (the replay
        # realises eps' at its conditional mean (sqrt3/2)*eps).
        risk_term += float(k * dt * np.sum(hedge * v))
        risk_term += float(np.sum(s * v * dt / math.sqrt(3.0)
                                  * 0.5 * math.sqrt(3.0) * eps))
        liq -= float(0.5 * k * np.sum((v * dt) ** 2))
    resid = shares - result.q[n_star]
    post = terminal_premium(resid, contract, market, risk)
    if k > 0:
        post += 0.5 * k * resid * resid
    transfer = -contract.F * contract.beta / (1.0 - contract.beta)
    return Decomposition(risk_term=risk_term, spread_term=spread_term,
                         liquidity_term=float(liq), post_exercise_premium=float(post),
                         discount_transfer=float(transfer), identity_gap=float(gap))


def monte_carlo(cube: PolicyCube, n_paths: int, seed: int,
                generator: str = "pentanomial") -> MonteCarloSummary:
    """Replay synthetic paths and summarise cost and certainty equivalent.

    Deterministic for a fixed seed.  Base-model cubes run through the
    compiled day loop; permanent-impact cubes replay path by path (their
    prices depend on the strategy, so paths cannot be pre-generated).
    """
    if n_paths < 1:
        raise ParameterError("n_paths must be >= 1")
    contract, market, risk = cube.contract, cube.market, cube.risk
    if cube.impact:
        return _monte_carlo_impact(cube, n_paths, seed, generator)
    N = contract.N
    if generator == "pentanomial":
        prices = pentanomial_paths(contract, market, n_paths, seed)
    elif generator == "gaussian":
        prices = gaussian_paths(contract, market, n_paths, seed)
    else:
        raise ParameterError(f"unknown generator {generator!r}")

    s = market.sigma * math.sqrt(contract.dt)
    alive = np.ones(n_paths, dtype=bool)
    n_star = np.full(n_paths, N, dtype=np.int64)
    S = np.full(n_paths, market.S0)
    A = np.full(n_paths, market.S0)
    q = np.zeros(n_paths)
    X = np.zeros(n_paths)
    rho = risk.rho_exec
    lin = execution_cost(rho, market) / rho
    cub = risk.gamma * market.sigma ** 2 / (6.0 * rho * mean_volume(market, N))
    for n in range(N):
        V = volume_at(market, n + 1)
        d_min, d_max = candidate_offsets(cube.grids.dq, V, contract.dt, risk)
        offs = ordered_offsets(d_min, d_max)
        costs = day_costs(offs, cube.grids.dq, V, contract.dt, market)
        theta_next = np.ascontiguousarray(cube.surfaces[n + 1].theta, dtype=np.float64)
        _kernels.replay_day_base(
            alive, n_star, S, A, q, X, prices[:, n], n,
            1 if n in contract.exercise_set else 0,
            theta_next, cube.m2_day(n + 1), cube.surfaces[n].target_idx,
            market.S0, s, cube.grids.q, cube.grids.A, risk.gamma, EPS_PROBS, EPS_VALUES,
            offs, costs, V, contract.dt, contract.F, contract.beta, lin, cub,
            risk.rho_lo, risk.rho_hi, market.eta, market.phi, market.psi)
        if not alive.any():
            break

    a_eff = (1.0 - contract.beta) * A
    shares = contract.F / a_eff
    resid = shares - q
    cost = X + resid * S + lin * np.abs(resid) + cub * np.abs(resid) ** 3
    return _summarise(cube, cost, n_star, int(seed), generator)


def _monte_carlo_impact(cube: PolicyCube, n_paths: int, seed: int,
                        generator: str) -> MonteCarloSummary:
    contract, market, risk = cube.contract, cube.market, cube.risk
    rng = np.random.default_rng(seed)
    N = contract.N
    s = market.sigma * math.sqrt(contract.dt)
    costs = np.empty(n_paths)
    stars = np.empty(n_paths, dtype=np.int64)
    for p in range(n_paths):
        if generator == "pentanomial":
            eps_seq = rng.choice(EPS_INT, size=N, p=EPS_PROBS).astype(float)
            til_seq = rng.choice(EPS_INT, size=N, p=EPS_PROBS).astype(float)
        elif generator == "gaussian":
            eps_seq = rng.standard_normal(N)
            til_seq = rng.standard_normal(N)
        else:
            raise ParameterError(f"unknown generator {generator!r}")
        state = MarketState(n=0, S=market.S0, A=market.S0)
        n_s = N
        for n in range(N):
            decision = evaluate_policy(cube, n, state.S, state.q, state.A)
            if decision.exercise:
                n_s = n
                break
            ep = 0.5 * math.sqrt(3.0) * eps_seq[n] + 0.5 * til_seq[n]
            state = step_state(state, decision.order / contract.dt, eps_seq[n],
                               contract, market, risk, eps_prime=ep)
        a_eff = (1.0 - contract.beta) * state.A
        resid = contract.F / a_eff - state.q
        settle = resid * state.S + terminal_premium(resid, contract, market, risk) \
            + 0.5 * market.k_perm * resid * resid
        costs[p] = state.X + settle
        stars[p] = n_s
    return _summarise(cube, costs, stars, int(seed), generator)


def _summarise(cube: PolicyCube, cost: np.ndarray, n_star: np.ndarray, seed: int,
               generator: str) -> MonteCarloSummary:
    gamma = cube.risk.gamma
    wealth = cube.contract.F - cost
    n = cost.shape[0]
    if gamma > 0:
        z = -gamma * wealth
        m = z.max()
        y = np.exp(z - m)
        mean_y = y.mean()
        ce = -(m + math.log(mean_y)) / gamma
        se = float(y.std(ddof=1) / math.sqrt(n) / mean_y / gamma) if n > 1 else math.inf
    else:
        ce = float(wealth.mean())
        se = float(wealth.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    qs = np.quantile(cost, [0.05, 0.25, 0.5, 0.75, 0.95])
    hist_days, counts = np.unique(n_star, return_counts=True)
    return MonteCarloSummary(
        n_paths=n, seed=seed, generator=generator,
        mean_cost=float(cost.mean()),
        std_cost=float(cost.std(ddof=1)) if n > 1 else 0.0,
        quantiles={"p05": float(qs[0]), "p25": float(qs[1]), "p50": float(qs[2]),
                   "p75": float(qs[3]), "p95": float(qs[4])},
        exercise_histogram={int(d): int(c) for d, c in zip(hist_days, counts)},
        mean_wealth=float(wealth.mean()),
        certainty_equivalent=float(ce), ce_std_error=se)


def write_trajectory_csv(result: SimulationResult, file: str | Path) -> None:
    """Trajectory export with header day,S,A,q,order,X,exercised."""
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["day", "S", "A", "q", "order", "X", "exercised"])
        for i in range(result.day.shape[0]):
            writer.writerow([int(result.day[i]), repr(float(result.S[i])),
                             repr(float(result.A[i])), repr(float(result.q[i])),
                             repr(float(result.order[i])), repr(float(result.X[i])),
                             int(result.exercised[i])])
