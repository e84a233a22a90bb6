"""Coined discrete-time quantum walks on a line for quantum state engineering."""
from .core import (
    DOWN,
    IDENTITY,
    PLUS,
    UP,
    CoinOperator,
    DomainError,
    EngineeringSolution,
    NoSolutionError,
    NotReachableError,
    NumericalError,
    QWalkError,
    TargetSuperposition,
    WalkerState,
    coin_from_first_column,
    coin_from_params,
)
from .walk import apply_inverse_step, apply_step, project_coin, run_walk, target_fidelity
from .reachability import is_reachable, max_reachable_steps, reachability_residuals
from .backsolve import backsolve, solve_first_coin, solve_last_coin
from .engineering import (
    assemble_full_state,
    engineer_target,
    projection_probability_2step_closed_form,
    solve_d2,
    solve_d_system,
)
from .optimizer import OptimizerOptions, evaluate, optimize_coins

__all__ = [name for name in dir() if not name.startswith("_")]
