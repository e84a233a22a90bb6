"""Recover the coin sequence that generates a reachable walker state.

Working backwards from the last step: the first and last v-vectors of a
reachable state are orthogonal, which fixes the last coin up to a relative
phase between its columns.  Undoing that step leaves a state reachable in one
step fewer, and so on down to the first coin, which is fixed by the chosen
initial coin state.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import (
    IDENTITY,
    TOL_ZERO,
    CoinOperator,
    DomainError,
    NotReachableError,
    WalkerState,
    as_pair,
    coin_from_first_column,
)
from .reachability import REACH_TOL, max_reachable_steps, reachability_residuals, v_vectors
from .walk import inverse_step_amplitudes

_GUARD_TOL = 1e-5


def _last_coin(amps: np.ndarray, alpha: float, tol: float) -> CoinOperator:
    v = v_vectors(amps)
    if len(v) == 0:
        raise DomainError("need at least two sites to solve for a coin")
    scale = max(float(np.sum(np.abs(amps) ** 2)), TOL_ZERO)
    first, last = v[0], v[-1]
    if len(v) > 1:
        overlap = np.vdot(first, last)
        if abs(overlap) > tol * scale:
            raise NotReachableError(
                "first and last v-vectors are not orthogonal",
                residual=float(abs(overlap)),
            )
    small = TOL_ZERO * np.sqrt(scale)
    a, b = np.linalg.norm(first), np.linalg.norm(last)
    if len(v) > 1 and a > small and b > small:
        # closest unitary to C diag(a, b) = [v_1, v_n]; using both columns
        # keeps round-off from growing when either v-vector is small
        u, _, vh = np.linalg.svd(np.column_stack([first * a, last * b]))
        return coin_from_first_column((u @ vh)[:, 0], alpha)
    if a > small:
        return coin_from_first_column(first, alpha)
    if b > small:
        # second column proportional to the last v-vector
        return coin_from_first_column((np.conj(last[1]), -np.conj(last[0])), alpha)
    return IDENTITY


def solve_last_coin(state: WalkerState, alpha: float = 0.0, tol: float = REACH_TOL) -> CoinOperator:
    return _last_coin(state.amps, alpha, tol)


def _first_coin(v: np.ndarray, initial_coin: np.ndarray) -> CoinOperator:
    init = as_pair(initial_coin, "initial coin")
    if np.linalg.norm(init) <= TOL_ZERO:
        raise DomainError("initial coin is zero")
    if np.linalg.norm(v) <= TOL_ZERO:
        raise DomainError("the one-step layer is empty")
    target = coin_from_first_column(v).matrix
    source = coin_from_first_column(init).matrix
    return CoinOperator(target @ source.conj().T)


def solve_first_coin(
    state_after1: WalkerState,
    initial_coin: Sequence[complex],
    start: int | None = None,
) -> CoinOperator:
    """Coin mapping ``initial_coin`` onto ``(u_{start,up}, u_{start+1,down})``.

    ``start`` is the site the walker started on; by default it is inferred
    from where the up amplitude sits.
    """
    s = state_after1
    if s.nsites > 2:
        raise DomainError("a one-step state spans at most two sites", nsites=s.nsites)
    if start is None:
        start = s.origin if abs(s.amps[0, 0]) > TOL_ZERO or s.nsites == 2 else s.origin - 1
    if abs(s.amp(start, 1)) > TOL_ZERO or abs(s.amp(start + 1, 0)) > TOL_ZERO:
        raise NotReachableError("state is not the output of a single step")
    v = np.array([s.amp(start, 0), s.amp(start + 1, 1)])
    init = np.asarray(initial_coin, dtype=complex)
    if abs(np.linalg.norm(v) - np.linalg.norm(init)) > 1e-9 * max(1.0, np.linalg.norm(init)):
        raise DomainError(
            "a coin cannot change the norm", layer_norm=float(np.linalg.norm(v)), coin_norm=float(np.linalg.norm(init))
        )
    return _first_coin(v, init)


def backsolve(
    state: WalkerState,
    initial_coin: Sequence[complex] = (1, 0),
    alphas: Sequence[float] | None = None,
    tol: float = REACH_TOL,
) -> list[CoinOperator]:
    """Coins ``C_1..C_n`` such that ``run_walk(initial_coin, coins,
    origin=state.origin)`` reproduces ``state`` up to a global phase.

    ``alphas[j]`` is the column phase used for coin ``C_{j+2}``.
    """
    n = state.nsites - 1
    if n < 1:
        raise DomainError("state must span at least two sites", nsites=state.nsites)
    alphas = np.zeros(n - 1) if alphas is None else np.asarray(alphas, dtype=float)
    if len(alphas) != n - 1:
        raise DomainError("need one alpha per back-solved step", expected=n - 1, got=len(alphas))
    amps = np.array(state.amps)
    bound = tol * max(state.norm(), TOL_ZERO)
    if abs(amps[0, 1]) > bound or abs(amps[-1, 0]) > bound:
        raise NotReachableError(
            "extremal amplitudes do not vanish",
            step=n,
            first_down=float(abs(amps[0, 1])),
            last_up=float(abs(amps[-1, 0])),
        )
    best = max_reachable_steps(state, tol)
    if best < n:
        # peeling step j needs residual r_{n-j+1}
        raise NotReachableError(
            "state is not reachable in as many steps as it spans",
            step=n - best + 1,
            residual=float(abs(reachability_residuals(state, n)[best + 1])),
        )
    # the state is certified; round-off grows as steps are undone, so the
    # per-step check only guards against gross inconsistency
    guard = max(tol, _GUARD_TOL)
    coins: list[CoinOperator] = []
    for step in range(n, 1, -1):
        try:
            coin = _last_coin(amps, float(alphas[step - 2]), guard)
        except NotReachableError as err:
            err.context["step"] = step
            raise
        amps = inverse_step_amplitudes(amps, coin.matrix)
        coins.append(coin)
    v = np.array([amps[0, 0], amps[1, 1]])
    coins.append(_first_coin(v, np.asarray(initial_coin, dtype=complex)))
    return coins[::-1]


def layer_after_first_step(state: WalkerState, alphas: Sequence[float] | None = None,
                           tol: float = REACH_TOL) -> np.ndarray:
    """The ``(u_{1,up}, u_{2,down})`` pair left after undoing steps ``n..2``."""
    n = state.nsites - 1
    alphas = np.zeros(max(n - 1, 0)) if alphas is None else np.asarray(alphas, dtype=float)
    amps = np.array(state.amps)
    for step in range(n, 1, -1):
        amps = inverse_step_amplitudes(amps, _last_coin(amps, float(alphas[step - 2]), max(tol, _GUARD_TOL)).matrix)
    return np.array([amps[0, 0], amps[1, 1]])
