"""Command-line entry points: solve, price, discount, simulate, sweep, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import RunConfig, load_config
from .cubeio import read_cube, write_cube
from .impact import solve_with_impact
from .pricing import indifference_price, max_discount
from .simulate import (PricePath, monte_carlo, path_from_csv, pentanomial_paths,
                       simulate_path, write_trajectory_csv)
from .solver import PolicyCube, solve


def _solve_config(config: RunConfig) -> PolicyCube:
    contract, market, risk, grid = config.to_domain()
    if market.k_perm > 0:
        return solve_with_impact(contract, market, risk, grid)
    return solve(contract, market, risk, grid)


@click.group()
def main() -> None:
    """Pricing and optimal execution engine for fixed-notional ASR contracts."""


@main.command("solve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="cube file (overrides out_cube in the config)")
def solve_cmd(config_path: str, out_path: str | None) -> None:
    """Solve the backward recursion and persist the policy cube."""
    config = load_config(config_path)
    cube = _solve_config(config)
    target = out_path or config.out_cube
    if target is None:
        raise click.UsageError("no output file: pass --out or set out_cube in the config")
    write_cube(cube, target)
    report = indifference_price(cube)
    click.echo(report.text())
    click.echo(f"cube: {target}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
def price(config_path: str, as_json: bool) -> None:
    """Solve and print the indifference price report."""
    config = load_config(config_path)
    report = indifference_price(_solve_config(config))
    click.echo(json.dumps(report.json_dict()) if as_json else report.text())


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--tol-beta", type=float, default=1e-4, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def discount(config_path: str, tol_beta: float, as_json: bool) -> None:
    """Locate the maximum settlement discount beta*."""
    config = load_config(config_path)
    contract, market, risk, grid = config.to_domain()
    if market.k_perm > 0:
        raise click.UsageError("discount search runs on the base model (k_perm = 0)")
    report = max_discount(contract, market, risk, grid, tol_beta=tol_beta)
    click.echo(json.dumps(report.json_dict()) if as_json else report.text())


@main.command()
@click.option("--cube", "cube_path", required=True, type=click.Path(exists=True))
@click.option("--path", "path_csv", type=click.Path(exists=True), default=None,
              help="price path CSV with header day,price")
@click.option("--seed", type=int, default=None, help="synthetic path seed")
@click.option("--paths", "n_paths", type=int, default=1,
              help="with --seed: number of Monte Carlo paths")
@click.option("--out-dir", type=click.Path(), default=".", show_default=True)
def simulate(cube_path: str, path_csv: str | None, seed: int | None, n_paths: int,
             out_dir: str) -> None:
    """Replay the stored policy on a supplied or synthetic path."""
    cube = read_cube(cube_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if path_csv is None and seed is None:
        raise click.UsageError("pass --path or --seed")
    if path_csv is not None:
        path = path_from_csv(path_csv)
        result = simulate_path(cube, path)
        _emit_result(result, out / "trajectory.csv", out / "summary.json")
        click.echo(f"n_star: {result.n_star}  total_cost: {result.total_cost:,.2f}")
        return
    if n_paths == 1:
        prices = pentanomial_paths(cube.contract, cube.market, 1, seed)[0]
        result = simulate_path(cube, PricePath(prices, label="pentanomial", seed=seed))
        _emit_result(result, out / "trajectory.csv", out / "summary.json")
        click.echo(f"n_star: {result.n_star}  total_cost: {result.total_cost:,.2f}")
        return
    summary = monte_carlo(cube, n_paths, seed)
    (out / "mc_summary.json").write_text(json.dumps({
        "n_paths": summary.n_paths, "seed": summary.seed, "generator": summary.generator,
        "mean_cost": summary.mean_cost, "std_cost": summary.std_cost,
        "quantiles": summary.quantiles,
        "exercise_histogram": summary.exercise_histogram,
        "mean_wealth": summary.mean_wealth,
        "certainty_equivalent": summary.certainty_equivalent,
        "ce_std_error": summary.ce_std_error}, indent=2, sort_keys=True) + "\n")
    click.echo(f"mean_cost: {summary.mean_cost:,.2f}  "
               f"certainty_equivalent: {summary.certainty_equivalent:,.2f}")


def _emit_result(result, traj_file: Path, summary_file: Path) -> None:
    write_trajectory_csv(result, traj_file)
    d = result.decomposition
    summary_file.write_text(json.dumps({
        "n_star": result.n_star,
        "shares_delivered": result.shares_delivered,
        "total_cost": result.total_cost,
        "wealth": result.wealth,
        "decomposition": {
            "risk_term": d.risk_term,
            "spread_term": d.spread_term,
            "liquidity_term": d.liquidity_term,
            "post_exercise_premium": d.post_exercise_premium,
            "discount_transfer": d.discount_transfer,
        },
    }, indent=2, sort_keys=True) + "\n")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--param", "param", default=None,
              help="parameter name (defaults to the config's sweep section)")
@click.option("--values", "values", default=None,
              help="comma-separated values (defaults to the config's sweep section)")
@click.option("--json", "as_json", is_flag=True)
def sweep(config_path: str, param: str | None, values: str | None, as_json: bool) -> None:
    """Comparative statics: re-solve for each parameter value."""
    config = load_config(config_path)
    if param is None or values is None:
        if config.sweep is None:
            raise click.UsageError("pass --param/--values or add a sweep section")
        param = param or config.sweep.param
        vals = config.sweep.values if values is None else [float(v) for v in values.split(",")]
    else:
        vals = [float(v) for v in values.split(",")]
    rows = []
    for v in vals:
        cfg = config.with_param(param, v)
        report = indifference_price(_solve_config(cfg))
        rows.append({"value": v, "pi": report.pi, "pi_over_f": report.pi_over_f})
        if not as_json:
            click.echo(f"{param}={v:g}  pi={report.pi:,.2f}  pi/F={report.pi_over_f:.4%}")
    if as_json:
        click.echo(json.dumps({"param": param, "rows": rows}))


@main.command()
@click.option("--cube", "cube_path", required=True, type=click.Path(exists=True))
@click.option("--bind", default="127.0.0.1:8000", show_default=True,
              help="host:port to listen on")
def serve(cube_path: str, bind: str) -> None:
    """Serve policy lookups for the desk console (read-only)."""
    import uvicorn

    from .service import create_app

    host, _, port = bind.partition(":")
    if not port:
        raise click.UsageError("--bind must be host:port")
    cube = read_cube(cube_path)
    uvicorn.run(create_app(cube), host=host, port=int(port), log_level="warning")


if __name__ == "__main__":
    sys.exit(main())
