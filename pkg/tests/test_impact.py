import math
from fractions import Fraction

import numpy as np
import pytest

from asrkit.grids import GridError, GridSpec, required_n_s
from asrkit.impact import ImpactSolver, joint_innovation_support, solve_with_impact
from asrkit.model import ContractSpec, MarketParams
from asrkit.solver import BellmanSolver
from conftest import REF_RISK, random_tiny_instance
from oracles import grid_oracle_solve_impact, surface_error

CONTRACT = ContractSpec(F=9e8, N=4, exercise_set=frozenset({2, 3}))
MARKET_K = MarketParams(S0=45.0, sigma=0.6, volume=4e6, eta=0.1, phi=0.75, k_perm=2e-7)


def impact_grid(contract, market, n_q=9, n_a=4, q_max=2.3e7):
    base = GridSpec(n_q=n_q, n_A=n_a, q_max=q_max)
    return GridSpec(n_q=n_q, n_A=n_a, q_max=q_max,
                    n_S=required_n_s(contract, market, base))


def test_joint_law_marginal_is_base_law():
    law = joint_innovation_support()
    assert len(law) == 25
    marg: dict[int, Fraction] = {}
    for pt in law:
        marg[pt.eps] = marg.get(pt.eps, Fraction(0)) + pt.prob
    assert marg == {-2: Fraction(1, 12), -1: Fraction(1, 6), 0: Fraction(1, 2),
                    1: Fraction(1, 6), 2: Fraction(1, 12)}


def test_joint_law_moments_exact():
    law = joint_innovation_support()
    assert sum(pt.prob for pt in law) == Fraction(1)
    assert sum(pt.prob * pt.eps for pt in law) == Fraction(0)
    assert sum(pt.prob * pt.eps_tilde for pt in law) == Fraction(0)
    # eps' = (sqrt3/2) eps + (1/2) eps_tilde: rational components are exact,
    # so Cov(eps, eps') = sqrt3/2 * E[eps^2] and V[eps'] = 3/4 + 1/4 exactly
    assert sum(pt.prob * pt.eps * pt.eps for pt in law) == Fraction(1)
    assert sum(pt.prob * pt.eps * pt.eps_tilde for pt in law) == Fraction(0)
    assert sum(pt.prob * pt.eps_tilde * pt.eps_tilde for pt in law) == Fraction(1)
    cov = sum(float(pt.prob) * pt.eps * pt.eps_prime for pt in law)
    assert cov == pytest.approx(math.sqrt(3.0) / 2.0, abs=1e-15)
    var = sum(float(pt.prob) * pt.eps_prime ** 2 for pt in law)
    assert var == pytest.approx(1.0, abs=1e-15)


def test_k_zero_matches_base_solver_small():
    market0 = MarketParams(S0=45.0, sigma=0.6, volume=4e6, eta=0.1, phi=0.75)
    gs = impact_grid(CONTRACT, market0, n_q=41, n_a=9, q_max=25e6)
    cube_i = solve_with_impact(CONTRACT, market0, REF_RISK, gs)
    cube_b = BellmanSolver(CONTRACT, market0, REF_RISK,
                           GridSpec(n_q=41, n_A=9, q_max=25e6)).solve()
    assert cube_i.theta0() == pytest.approx(cube_b.theta0(), rel=1e-10)
    # every lattice point of the final day agrees too
    N = CONTRACT.N
    for z in range(4 * N + 1):
        np.testing.assert_allclose(cube_i.surfaces[N].theta[z],
                                   cube_b.surfaces[N].theta[z], rtol=1e-12)


def test_tiny_instances_match_impact_oracle():
    rng = np.random.default_rng(31)
    for trial in range(4):
        contract, market, risk, grid = random_tiny_instance(
            rng, gamma_mode="zero" if trial == 1 else "positive")
        market = MarketParams(S0=market.S0, sigma=market.sigma, volume=market.volume,
                              eta=market.eta, phi=market.phi, psi=market.psi,
                              k_perm=float(rng.uniform(5e-8, 3e-7)))
        grid = GridSpec(n_q=min(grid.n_q, 7), n_A=grid.n_A, q_max=grid.q_max,
                        n_S=required_n_s(contract, market, grid))
        cube = solve_with_impact(contract, market, risk, grid)
        ref = grid_oracle_solve_impact(contract, market, risk, grid)
        for n in range(contract.N + 1):
            err = surface_error(cube.surfaces[n].theta, ref[n])
            assert err < 1e-9, f"trial {trial} day {n}: rel err {err}"


def test_positive_impact_is_a_cost_for_the_buyer():
    market0 = MarketParams(S0=45.0, sigma=0.6, volume=4e6, eta=0.1, phi=0.75)
    base = BellmanSolver(CONTRACT, market0, REF_RISK,
                         GridSpec(n_q=41, n_A=9, q_max=25e6)).solve()
    cube_k = solve_with_impact(CONTRACT, MARKET_K, REF_RISK,
                               impact_grid(CONTRACT, MARKET_K, n_q=41, n_a=9,
                                           q_max=25e6))
    assert cube_k.theta0() > base.theta0()


def test_zero_order_candidate_has_no_impact_terms():
    # with v = 0 the drift, quadratic and noise terms all vanish, so the
    # no-trade value from the impact recursion equals the base recursion's
    gs = impact_grid(CONTRACT, MARKET_K, n_q=5, n_a=4, q_max=2e6)
    solver = ImpactSolver(CONTRACT, MARKET_K, REF_RISK, gs)
    offs, costs, lam = solver.day_candidates(2)
    at_zero = [t for t, d in enumerate(offs) if d == 0]
    assert at_zero and costs[at_zero[0]] == 0.0 and lam[at_zero[0]] == 0.0


def test_day0_constant_along_a_impact():
    gs = impact_grid(CONTRACT, MARKET_K, n_q=9, n_a=5, q_max=2.3e7)
    cube = solve_with_impact(CONTRACT, MARKET_K, REF_RISK, gs)
    root = cube.surfaces[0].theta[cube.root_row]
    assert np.all(root == root[:, :1])


def test_n_s_too_small_rejected():
    gs = GridSpec(n_q=9, n_A=4, q_max=2.3e7, n_S=8)
    with pytest.raises(GridError, match="n_S"):
        solve_with_impact(CONTRACT, MARKET_K, REF_RISK, gs)
    with pytest.raises(GridError, match="n_S"):
        solve_with_impact(CONTRACT, MARKET_K, REF_RISK,
                          GridSpec(n_q=9, n_A=4, q_max=2.3e7))
