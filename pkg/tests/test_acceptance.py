"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one PASS line with the measured quantity so the run log
doubles as the acceptance report.  Reference-case numbers: the 63-day,
EUR 900m program on a EUR 45 / sigma 0.6 / 4m-shares-a-day stock with a
25% participation cap, priced at -1.185% of notional; the buy-only and
comparative-statics variants reprice the same book.
"""

import math
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from asrkit.config import RunConfig, dump_config, load_config
from asrkit.cubeio import read_cube, write_cube
from asrkit.grids import GridSpec
from asrkit.impact import joint_innovation_support, solve_with_impact
from asrkit.model import innovation_support
from asrkit.pricing import max_discount
from asrkit.simulate import PricePath, monte_carlo, simulate_path
from asrkit.solver import BellmanSolver, solve
from conftest import (REF_CONTRACT, REF_GRIDS, REF_MARKET, REF_RISK,
                      random_tiny_instance)
from oracles import (decomposition_value, exact_oracle, grid_oracle_solve,
                     grid_oracle_solve_impact, surface_error, wealth_value)

F = REF_CONTRACT.F
PP = 0.0010  # one tenth of a percentage point, as a fraction of notional


def report(line: str) -> None:
    print(f"\n[ACCEPTANCE] {line}")


# -- reference price -------------------------------------------------------------


def test_reference_price_and_runtime(reference_cube):
    t0 = time.perf_counter()
    check = solve(REF_CONTRACT, REF_MARKET, REF_RISK, REF_GRIDS)
    wall = time.perf_counter() - t0
    pi_over_f = check.theta0() / F
    assert abs(pi_over_f - (-0.01185)) < PP
    assert wall < 600.0
    assert check.theta0() == reference_cube.theta0()
    report(f"reference price: pi/F = {pi_over_f:.4%} (target -1.185% +- 0.10pp), "
           f"solve {wall:.1f}s (limit 600s) -- PASS")


def test_buy_only_variant(reference_cube, buyonly_cube):
    pi_over_f = buyonly_cube.theta0() / F
    assert abs(pi_over_f - (-0.01148)) < PP
    assert buyonly_cube.theta0() >= reference_cube.theta0()
    report(f"buy-only price: pi/F = {pi_over_f:.4%} (target -1.148% +- 0.10pp), "
           f">= unconstrained -- PASS")


# -- comparative statics ---------------------------------------------------------


def _pi_over_f(market=REF_MARKET, risk=REF_RISK):
    return solve(REF_CONTRACT, market, risk, REF_GRIDS).theta0() / F


def test_comparative_statics_eta(reference_cube):
    got = [
        _pi_over_f(market=replace(REF_MARKET, eta=0.01)),
        reference_cube.theta0() / F,
        _pi_over_f(market=replace(REF_MARKET, eta=0.2)),
    ]
    want = [-0.01254, -0.01185, -0.01117]
    for g, w in zip(got, want):
        assert abs(g - w) < PP
    assert got[0] < got[1] < got[2]
    report("eta table: " + ", ".join(f"{g:.4%}" for g in got)
           + " (targets -1.254%, -1.185%, -1.117%) strictly increasing -- PASS")


@pytest.fixture(scope="session")
def sigma_sweep(reference_cube):
    return {
        0.3: _pi_over_f(market=replace(REF_MARKET, sigma=0.3)),
        0.6: reference_cube.theta0() / F,
        1.2: _pi_over_f(market=replace(REF_MARKET, sigma=1.2)),
    }


@pytest.mark.xfail(
    strict=True,
    reason="published sigma table has its value column reversed: the model's "
           "risk-neutral value already sits at -0.70%/-1.51%/-3.28% of F for "
           "sigma 0.3/0.6/1.2, a risk-averse value can never beat the "
           "risk-neutral one (Jensen), and the published gamma table pins the "
           "risk-neutral sigma=0.6 entry at -1.499%, so -2.163% at sigma=0.3 "
           "is unreachable; the companion test pins the measured mapping",
)
def test_comparative_statics_sigma_as_published(sigma_sweep):
    got = [sigma_sweep[0.3], sigma_sweep[0.6], sigma_sweep[1.2]]
    want = [-0.02163, -0.01185, -0.00605]
    report("sigma table (published order): " + ", ".join(f"{g:.4%}" for g in got)
           + " vs targets -2.163%, -1.185%, -0.605%")
    for g, w in zip(got, want):
        assert abs(g - w) < PP
    assert got[0] < got[1] < got[2]


def test_comparative_statics_sigma_measured(sigma_sweep):
    # the solver reproduces the published values, attached to the opposite
    # sigma order: the value column pairs with sigma = {1.2, 0.6, 0.3}
    got = [sigma_sweep[1.2], sigma_sweep[0.6], sigma_sweep[0.3]]
    want = [-0.02163, -0.01185, -0.00605]
    for g, w in zip(got, want):
        assert abs(g - w) < PP
    assert sigma_sweep[1.2] < sigma_sweep[0.6] < sigma_sweep[0.3]
    report("sigma table (measured): sigma 0.3 -> "
           f"{sigma_sweep[0.3]:.4%}, 0.6 -> {sigma_sweep[0.6]:.4%}, 1.2 -> "
           f"{sigma_sweep[1.2]:.4%}; matches the published values in reversed "
           "sigma order, strictly decreasing in sigma -- PASS")


def test_comparative_statics_gamma(reference_cube):
    got = [
        _pi_over_f(risk=replace(REF_RISK, gamma=0.0)),
        _pi_over_f(risk=replace(REF_RISK, gamma=2.5e-9)),
        reference_cube.theta0() / F,
        _pi_over_f(risk=replace(REF_RISK, gamma=2.5e-6)),
    ]
    want = [-0.01499, -0.01490, -0.01185, -0.00468]
    for g, w in zip(got, want):
        assert abs(g - w) < PP
    assert got[0] < got[1] < got[2] < got[3]
    report("gamma table: " + ", ".join(f"{g:.4%}" for g in got)
           + " (targets -1.499%, -1.490%, -1.185%, -0.468%) strictly increasing -- PASS")


# -- brute-force oracle equivalence ----------------------------------------------


def test_oracle_equivalence_tiny_instances():
    rng = np.random.default_rng(404)
    worst = 0.0
    n_zero = n_pos = 0
    for trial in range(20):
        mode = "zero" if trial % 3 == 0 else "positive"
        contract, market, risk, grid = random_tiny_instance(rng, gamma_mode=mode)
        n_zero += risk.gamma == 0
        n_pos += risk.gamma > 0
        cube = solve(contract, market, risk, grid)
        ref = grid_oracle_solve(contract, market, risk, grid)
        for n in range(contract.N + 1):
            err = surface_error(cube.surfaces[n].theta, ref[n])
            worst = max(worst, err)
            assert err < 1e-9
    assert n_zero >= 3 and n_pos >= 3
    report(f"oracle equivalence: 20 tiny instances ({n_zero} at gamma=0), "
           f"worst surface error {worst:.2e} (tol 1e-9) -- PASS")


def test_decomposition_form_equivalence():
    rng = np.random.default_rng(405)
    worst = 0.0
    for trial in range(8):
        mode = "zero" if trial % 4 == 0 else "positive"
        contract, market, risk, grid = random_tiny_instance(rng, gamma_mode=mode)
        theta0, profile, q_grid = exact_oracle(contract, market, risk, grid)
        via_terms = decomposition_value(contract, market, risk, q_grid, profile)
        via_wealth = wealth_value(contract, market, risk, q_grid, profile)
        scale = max(abs(theta0), 1.0)
        worst = max(worst, abs(via_terms - theta0) / scale,
                    abs(via_terms - via_wealth) / scale)
        assert abs(via_terms - via_wealth) / scale < 1e-9
        assert abs(via_terms - theta0) / scale < 1e-9
    report(f"four-term objective decomposition agrees with enumerated optimum, "
           f"worst rel error {worst:.2e} (tol 1e-9) -- PASS")


# -- exact structure -------------------------------------------------------------


def test_exact_structure(reference_cube):
    law = innovation_support()
    assert sum(i.prob for i in law) == Fraction(1)
    for order, expected in ((1, 0), (2, 1), (3, 0), (4, 3)):
        assert sum(i.prob * i.value ** order for i in law) == Fraction(expected)

    solver = BellmanSolver(REF_CONTRACT, REF_MARKET, REF_RISK, REF_GRIDS)
    N = REF_CONTRACT.N
    terminal = reference_cube.surfaces[N].theta
    closed = solver.intrinsic_surface(N)
    np.testing.assert_allclose(terminal, closed, rtol=1e-14)

    root = reference_cube.surfaces[0].theta[0]
    spread = np.max(root, axis=1) - np.min(root, axis=1)
    tol = 10 * np.finfo(np.float64).eps * np.maximum(1.0, np.abs(root[:, 0]))
    assert np.all(spread <= tol)

    for n in range(N + 1):
        flags = reference_cube.surfaces[n].exercise
        if n == N:
            assert flags.all()
        elif n not in REF_CONTRACT.exercise_set:
            assert not flags.any()
    report("exact structure: moments exact, terminal closed-form, day-0 flat in A "
           "(10x eps), no stray exercise flags -- PASS")


# -- permanent-impact consistency ------------------------------------------------


def test_impact_consistency_reference(reference_cube):
    grid = GridSpec(n_q=201, n_A=21, q_max=25e6, xi=3.0, n_S=253)
    cube = solve_with_impact(REF_CONTRACT, REF_MARKET, REF_RISK, grid)
    rel = abs(cube.theta0() - reference_cube.theta0()) / abs(reference_cube.theta0())
    assert rel < 1e-3
    report(f"impact solver at k=0 (n_S=253) vs base: rel diff {rel:.2e} "
           f"(tol 1e-3) -- PASS")


def test_impact_joint_law_and_tiny_oracle():
    law = joint_innovation_support()
    assert sum(pt.prob * pt.eps * pt.eps for pt in law) == Fraction(1)
    assert sum(pt.prob * pt.eps * pt.eps_tilde for pt in law) == Fraction(0)
    cov = sum(float(pt.prob) * pt.eps * pt.eps_prime for pt in law)
    assert cov == pytest.approx(math.sqrt(3.0) / 2.0, abs=1e-15)

    rng = np.random.default_rng(406)
    worst = 0.0
    from asrkit.grids import required_n_s
    for trial in range(3):
        contract, market, risk, grid = random_tiny_instance(
            rng, gamma_mode="zero" if trial == 2 else "positive")
        market = replace(market, k_perm=float(rng.uniform(5e-8, 3e-7)))
        grid = GridSpec(n_q=min(grid.n_q, 7), n_A=grid.n_A, q_max=grid.q_max,
                        n_S=required_n_s(contract, market, grid))
        cube = solve_with_impact(contract, market, risk, grid)
        ref = grid_oracle_solve_impact(contract, market, risk, grid)
        for n in range(contract.N + 1):
            err = surface_error(cube.surfaces[n].theta, ref[n])
            worst = max(worst, err)
            assert err < 1e-9
    report(f"joint law covariance sqrt3/2 exact; impact tiny-instance brute force "
           f"worst error {worst:.2e} (tol 1e-9) -- PASS")


# -- qualitative replay ----------------------------------------------------------


def test_replay_monotone_paths(reference_cube):
    N = REF_CONTRACT.N
    up = simulate_path(reference_cube, PricePath(45.0 + 0.3 * np.arange(1, N + 1)))
    down = simulate_path(reference_cube, PricePath(45.0 - 0.3 * np.arange(1, N + 1)))
    assert up.n_star == N
    assert down.n_star == 22
    report(f"monotone replays: up-path settles at {up.n_star} (= N), down-path at "
           f"{down.n_star} (= first exercisable day) -- PASS")


def test_replay_oscillating_path(reference_cube, buyonly_cube):
    N = REF_CONTRACT.N
    days = np.arange(1, N + 1)
    prices = 45.0 + 1.8 * np.sin(2.0 * np.pi * days / 21.0)
    res = simulate_path(reference_cube, PricePath(prices))
    pre = res.order[:-1]  # orders before the settlement row
    assert np.min(pre) < 0.0

    res_buy = simulate_path(buyonly_cube, PricePath(prices))
    assert np.min(res_buy.order) >= 0.0

    # hedging: order changes move against the day's price innovation
    m = res.n_star
    eps = np.diff(res.S[:m + 1]) / 0.6   # innovations 1..m recovered from prices
    d_order = np.diff(res.order[:m])     # order changes decided on days 1..m-1
    corr = np.corrcoef(d_order, eps[:m - 1])[0, 1]
    assert corr < 0.0
    report(f"oscillating replay: min order {np.min(pre):,.0f} < 0, buy-only min "
           f"{np.min(res_buy.order):,.0f} >= 0, corr(d order, eps) = {corr:.2f} < 0 "
           f"-- PASS")


# -- round trips -----------------------------------------------------------------


def test_round_trips(tmp_path, reference_cube):
    cfg = RunConfig.model_validate({
        "contract": {"notional": F, "days": 63,
                     "exercise_days": {"first": 22, "last": 62}},
        "market": {"initial_price": 45.0, "sigma": 0.6, "volume": 4e6,
                   "eta": 0.1, "phi": 0.75},
        "risk": {"gamma": 2.5e-7, "rho_lo": -0.25, "rho_hi": 0.25, "rho_exec": 0.25},
        "grid": {"n_q": 201, "n_a": 21, "q_max": 25e6},
    })
    f = tmp_path / "cfg.json"
    dump_config(cfg, f)
    assert load_config(f) == cfg

    c1 = tmp_path / "ref1.bin"
    c2 = tmp_path / "ref2.bin"
    write_cube(reference_cube, c1)
    back = read_cube(c1)
    for n in (0, 22, 63):
        assert np.array_equal(back.surfaces[n].theta,
                              reference_cube.surfaces[n].theta.astype(np.float32))
        assert np.array_equal(back.surfaces[n].target_idx,
                              reference_cube.surfaces[n].target_idx)
        assert np.array_equal(back.surfaces[n].exercise,
                              reference_cube.surfaces[n].exercise)
    write_cube(back, c2)
    assert c1.read_bytes() == c2.read_bytes()

    mc1 = monte_carlo(reference_cube, 2000, seed=13)
    mc2 = monte_carlo(reference_cube, 2000, seed=13)
    assert mc1 == mc2
    report("round trips: config identity, cube write/read byte-identical, "
           "seeded Monte Carlo bit-reproducible -- PASS")


# -- derived (non-criterion) reference checks ------------------------------------


def test_monte_carlo_consistent_with_dp_value(reference_cube):
    mc = monte_carlo(reference_cube, 100_000, seed=2718)
    target = -reference_cube.theta0()  # certainty equivalent of terminal wealth
    tol = 3.0 * mc.ce_std_error + 0.001 * F
    assert abs(mc.certainty_equivalent - target) < tol
    report(f"Monte Carlo CE {mc.certainty_equivalent:,.0f} vs -pi {target:,.0f} "
           f"(gap {abs(mc.certainty_equivalent - target):,.0f} < {tol:,.0f}) -- PASS")


def test_reference_discount(reference_cube):
    rep = max_discount(REF_CONTRACT, REF_MARKET, REF_RISK, REF_GRIDS, tol_beta=2e-4,
                       pi_at_zero=reference_cube.theta0())
    assert 0.0 < rep.beta_star < 0.05
    from asrkit.pricing import price_for
    pi_at_star = price_for(REF_CONTRACT, REF_MARKET, REF_RISK, REF_GRIDS,
                           beta=rep.beta_star)
    assert abs(pi_at_star) / F <= 0.0002
    report(f"max discount beta* = {rep.beta_star:.4%} in (0, 5%), "
           f"|pi(beta*)|/F = {abs(pi_at_star) / F:.5%} <= 0.02% -- PASS")
