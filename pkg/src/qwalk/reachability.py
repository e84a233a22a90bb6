"""Certificates that a walker state is the output of a given number of steps."""
from __future__ import annotations

import numpy as np

from .core import DomainError, WalkerState

REACH_TOL = 1e-9


def v_vectors(state: WalkerState | np.ndarray) -> np.ndarray:
    """Rows ``v_i = (u_{i,up}, u_{i+1,down})`` for ``i = 1..m`` on an
    ``(m + 1)``-site state; empty for a single site."""
    amps = state.amps if isinstance(state, WalkerState) else np.asarray(state, dtype=complex)
    return np.stack([amps[:-1, 0], amps[1:, 1]], axis=1)


def _residuals(amps: np.ndarray, n: int) -> np.ndarray:
    m = amps.shape[0] - 1
    v = v_vectors(amps)
    out = np.empty(n + 1, dtype=complex)
    out[0] = amps[0, 1]
    out[1] = amps[-1, 0]
    for s in range(1, n):
        # sum_{i=1}^{s} v_i^dagger v_{m-s+i}, zero-based rows
        out[s + 1] = np.sum(np.conj(v[:s]) * v[m - s : m])
    return out


def reachability_residuals(state: WalkerState, n: int) -> np.ndarray:
    """``[u_{1,down}, u_{m+1,up}, r_1, ..., r_{n-1}]``; all vanish iff the
    state is the output of at least ``n`` steps."""
    m = state.nsites - 1
    if n < 1:
        raise DomainError("step count must be at least 1", steps=n)
    if n > m:
        raise DomainError("a state on m+1 sites certifies at most m steps", steps=n, sites=state.nsites)
    return _residuals(state.amps, n)


def max_reachable_steps(state: WalkerState, tol: float = REACH_TOL) -> int:
    """Largest ``n`` whose residuals all lie within ``tol`` (scaled by the
    state norm); 0 when even the endpoint conditions fail."""
    m = state.nsites - 1
    if m < 1:
        return 0
    scale = max(state.norm(), np.finfo(float).tiny)
    full = _residuals(state.amps, m)
    bound = tol * scale
    if abs(full[0]) > bound or abs(full[1]) > bound:
        return 0
    # residual r_s is the (s+1)-th entry; n steps needs r_1..r_{n-1}
    # (r_s has two amplitude factors, so it scales with the squared norm)
    best = 1
    for s in range(1, m):
        if abs(full[s + 1]) > tol * scale**2:
            break
        best = s + 1
    return best


def is_reachable(state: WalkerState, n: int, tol: float = REACH_TOL) -> bool:
    if n > state.nsites - 1:
        return False
    return max_reachable_steps(state, tol) >= n
