"""Forward and inverse walk steps and the final coin projection.

Shift convention: a walker with coin up stays put, with coin down it moves
one site to the right.  One step therefore maps site ``i`` onto the pair
``(i, up), (i + 1, down)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    TOL_ZERO,
    CoinOperator,
    NotReachableError,
    WalkerState,
    as_pair,
    check_normalized_pair,
)


def step_amplitudes(amps: np.ndarray, coin: np.ndarray) -> np.ndarray:
    """Raw kernel: coin flip then controlled shift.  No trimming, no rescaling."""
    amps = np.asarray(amps, dtype=complex)
    mixed = amps @ np.asarray(coin).T
    out = np.zeros((amps.shape[0] + 1, 2), dtype=complex)
    out[:-1, 0] = mixed[:, 0]
    out[1:, 1] = mixed[:, 1]
    return out


def inverse_step_amplitudes(amps: np.ndarray, coin: np.ndarray) -> np.ndarray:
    """Raw inverse kernel; drops the two extremal amplitudes that lie outside
    the shift image."""
    amps = np.asarray(amps, dtype=complex)
    v = np.stack([amps[:-1, 0], amps[1:, 1]], axis=1)
    return v @ np.asarray(coin).conj()


def apply_step(state: WalkerState, coin: CoinOperator) -> WalkerState:
    return WalkerState(step_amplitudes(state.amps, coin.matrix), state.origin).trimmed()


def apply_inverse_step(state: WalkerState, coin: CoinOperator, tol: float = TOL_ZERO) -> WalkerState:
    """Undo one step on the lattice of sites ``>= 1``.

    The preimage lives on sites ``origin - 1 .. last - 1``; it exists when
    ``u_{1,down}`` (nothing may come from site 0) and ``u_{last,up}`` vanish.
    """
    amps = np.asarray(state.amps)
    origin = state.origin
    if origin > 1:
        # site origin - 1 is empty, so its down amplitude vanishes
        amps = np.vstack([np.zeros((1, 2), dtype=complex), amps])
        origin -= 1
    if len(amps) < 2:
        raise NotReachableError("a single-site state at site 1 is not the output of a step")
    lead = abs(amps[0, 1]) if origin == 1 else 0.0
    tail = abs(amps[-1, 0])
    scale = max(state.norm(), 1.0)
    if lead > tol * scale or tail > tol * scale:
        raise NotReachableError(
            "extremal amplitudes do not vanish",
            first_down=float(lead),
            last_up=float(tail),
        )
    return WalkerState(inverse_step_amplitudes(amps, coin.matrix), origin).trimmed()


def run_walk_amplitudes(initial_coin: Sequence[complex], coins: Sequence[np.ndarray]) -> np.ndarray:
    amps = as_pair(initial_coin, "initial coin")[None, :]
    for c in coins:
        amps = step_amplitudes(amps, c)
    return amps


def run_walk(
    initial_coin: Sequence[complex],
    coins: Sequence[CoinOperator],
    origin: int = 1,
) -> WalkerState:
    """Walk ``|origin> (x) initial_coin`` through ``coins`` in order."""
    check_normalized_pair(initial_coin, "initial coin")
    amps = run_walk_amplitudes(initial_coin, [c.matrix for c in coins])
    return WalkerState(amps, origin).trimmed()


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    site_amps: np.ndarray
    origin: int
    probability: float

    @property
    def normalized_target(self) -> np.ndarray | None:
        if self.probability <= 0:
            return None
        return self.site_amps / np.sqrt(self.probability)

    def over_sites(self, first: int, last: int) -> np.ndarray:
        out = np.zeros(last - first + 1, dtype=complex)
        lo = max(first, self.origin)
        hi = min(last, self.origin + len(self.site_amps) - 1)
        if lo <= hi:
            out[lo - first : hi - first + 1] = self.site_amps[lo - self.origin : hi - self.origin + 1]
        return out


def project_coin(state: WalkerState, bra: Sequence[complex]) -> ProjectionResult:
    """Project the coin on ``bra``; ``site_amps`` stays unnormalized."""
    a, b = check_normalized_pair(bra, "projection bra")
    site_amps = np.conj(a) * state.amps[:, 0] + np.conj(b) * state.amps[:, 1]
    prob = float(np.sum(np.abs(site_amps) ** 2))
    return ProjectionResult(site_amps, state.origin, prob)


def target_fidelity(result: ProjectionResult, target: np.ndarray, origin: int = 1) -> float:
    """Squared overlap between the normalized projected vector and ``target``
    (whose first entry sits at site ``origin``)."""
    if result.probability <= 0:
        return 0.0
    target = np.asarray(target, dtype=complex)
    last = max(origin + len(target) - 1, result.origin + len(result.site_amps) - 1)
    first = min(origin, result.origin)
    t = np.zeros(last - first + 1, dtype=complex)
    t[origin - first : origin - first + len(target)] = target
    proj = result.over_sites(first, last)
    return float(abs(np.vdot(t, proj)) ** 2 / (result.probability * np.vdot(t, t).real))

