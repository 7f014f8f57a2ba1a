"""Pricing engine and optimal execution policy for fixed-notional ASR contracts."""

from .grids import GridError, GridSpec, QAGrids, build_grids, suggested_q_max
from .impact import ImpactSolver, JointInnovation, joint_innovation_support, solve_with_impact
from .model import (ConstraintError, ContractSpec, Innovation, MarketParams, MarketState,
                    ParameterError, RiskParams, execution_cost, innovation_support,
                    intrinsic_value, step_state, terminal_premium)
from .policy import PolicyDecision, evaluate_policy
from .pricing import DiscountReport, PriceReport, indifference_price, max_discount
from .simulate import (MonteCarloSummary, PricePath, SimulationResult, decompose_cost,
                       monte_carlo, simulate_path)
from .solver import BellmanSolver, PolicyCube, ValueSurface, interpolate_A, solve
from .cubeio import read_cube, write_cube

__version__ = "0.1.0"

__all__ = [
    "ContractSpec", "MarketParams", "RiskParams", "MarketState", "Innovation",
    "ParameterError", "ConstraintError", "GridError", "GridSpec", "QAGrids",
    "execution_cost", "terminal_premium", "intrinsic_value", "innovation_support",
    "step_state", "build_grids", "suggested_q_max", "interpolate_A",
    "BellmanSolver", "PolicyCube", "ValueSurface", "solve",
    "ImpactSolver", "JointInnovation", "joint_innovation_support", "solve_with_impact",
    "PriceReport", "DiscountReport", "indifference_price", "max_discount",
    "PolicyDecision", "evaluate_policy",
    "PricePath", "SimulationResult", "MonteCarloSummary", "simulate_path",
    "decompose_cost", "monte_carlo", "read_cube", "write_cube",
]
