import numpy as np
import pytest

from asrkit.grids import GridSpec
from asrkit.model import ContractSpec, MarketParams, RiskParams
from asrkit.solver import solve

# Reference configuration used across the suite: a liquid large-cap buy-back,
# 63 trading days, early exercise allowed from day 22.
REF_CONTRACT = ContractSpec(F=9e8, N=63, exercise_set=frozenset(range(22, 63)))
REF_MARKET = MarketParams(S0=45.0, sigma=0.6, volume=4e6, eta=0.1, phi=0.75)
REF_RISK = RiskParams(gamma=2.5e-7, rho_lo=-0.25, rho_hi=0.25, rho_exec=0.25)
REF_GRIDS = GridSpec(n_q=201, n_A=21, q_max=25e6, xi=3.0)

# Small instance solved in milliseconds, for plumbing tests.
SMALL_CONTRACT = ContractSpec(F=9e8, N=10, exercise_set=frozenset(range(4, 10)))
SMALL_GRIDS = GridSpec(n_q=101, n_A=11, q_max=25e6, xi=3.0)


@pytest.fixture(scope="session")
def reference_cube():
    return solve(REF_CONTRACT, REF_MARKET, REF_RISK, REF_GRIDS)


@pytest.fixture(scope="session")
def buyonly_cube():
    risk = RiskParams(gamma=2.5e-7, rho_lo=0.0, rho_hi=0.25, rho_exec=0.25)
    return solve(REF_CONTRACT, REF_MARKET, risk, REF_GRIDS)


@pytest.fixture(scope="session")
def small_cube():
    return solve(SMALL_CONTRACT, REF_MARKET, REF_RISK, SMALL_GRIDS)


def random_tiny_instance(rng: np.random.Generator, gamma_mode: str = "mixed",
                         with_discount: bool = False):
    """Randomised tiny instance (N <= 3) for brute-force comparisons."""
    N = int(rng.integers(2, 4))
    S0 = float(rng.uniform(30.0, 60.0))
    F = float(rng.uniform(1e8, 1.2e9))
    sigma = float(rng.uniform(0.2, 1.2))
    volume = float(rng.uniform(1e6, 8e6))
    exercise_pool = list(range(1, N))
    n_ex = int(rng.integers(1, len(exercise_pool) + 1))
    exercise = frozenset(rng.choice(exercise_pool, size=n_ex, replace=False).tolist())
    beta = float(rng.choice([0.0, 0.01])) if with_discount else 0.0
    contract = ContractSpec(F=F, N=N, exercise_set=exercise, beta=beta)
    market = MarketParams(S0=S0, sigma=sigma, volume=volume,
                          eta=float(rng.uniform(0.02, 0.3)),
                          phi=float(rng.uniform(0.4, 1.0)),
                          psi=float(rng.choice([0.0, 0.02])))
    if gamma_mode == "zero":
        gamma = 0.0
    elif gamma_mode == "positive":
        gamma = float(10 ** rng.uniform(-8.0, -6.3))
    else:
        gamma = float(rng.choice([0.0, 10 ** rng.uniform(-8.0, -6.3)]))
    rho_hi = float(rng.uniform(0.1, 0.4))
    rho_lo = float(rng.choice([-rho_hi, 0.0, -0.5 * rho_hi]))
    risk = RiskParams(gamma=gamma, rho_lo=rho_lo, rho_hi=rho_hi,
                      rho_exec=float(rng.uniform(0.1, 0.4)))
    grid = GridSpec(n_q=int(rng.integers(5, 12)), n_A=int(rng.integers(4, 6)),
                    q_max=float(F / S0 * rng.uniform(1.1, 1.4)))
    return contract, market, risk, grid
