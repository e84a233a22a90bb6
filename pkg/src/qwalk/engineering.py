"""From a target superposition over sites to coins that produce it.

A full state projecting onto the target under the ``|+>`` coin projection is
parametrized by one splitting amplitude ``d_i`` per interior site: site ``i``
carries ``u_i - d_i`` on coin up and ``d_i`` on coin down (``d_1 = 0`` and
``d_{n+1} = u_{n+1}``).  Reachability of that state is a square system of
real quadratic equations in the real and imaginary parts of ``d_2..d_n``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import homotopy
from .backsolve import backsolve, layer_after_first_step
from .core import (
    PLUS,
    DomainError,
    EngineeringSolution,
    TargetSuperposition,
    WalkerState,
)
from .walk import project_coin, run_walk, target_fidelity

log = logging.getLogger(__name__)

N_MAX_POLY = 6
SOLVER_TOL = 1e-9
DEDUP_RADIUS = 1e-6
DEGENERATE_GRID = (0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0)


@dataclass(frozen=True, eq=False)
class DSolution:
    d: np.ndarray
    residual_max: float
    probability: float
    family_offset: float | None = None


class SolutionSet(list):
    """A list of solutions that can also carry a diagnostic message."""

    def __init__(self, items=(), diagnostic: str = ""):
        super().__init__(items)
        self.diagnostic = diagnostic


def _as_target(target) -> TargetSuperposition:
    if isinstance(target, TargetSuperposition):
        return target
    return TargetSuperposition.from_amps(target)


# --------------------------------------------------------------------------
# the d-parametrized state


def _raw_full_amps(u: np.ndarray, d: np.ndarray) -> np.ndarray:
    n = len(u) - 1
    amps = np.zeros((n + 1, 2), dtype=complex)
    amps[0, 0] = u[0]
    amps[n, 1] = u[n]
    amps[1:n, 0] = u[1:n] - d
    amps[1:n, 1] = d
    return amps


def assemble_full_state(target, d: Sequence[complex]) -> WalkerState:
    """Normalized full state on sites ``1..n+1`` for splitting amplitudes ``d``.

    The stored range is exactly ``n + 1`` sites even if an edge amplitude is 0.
    """
    t = _as_target(target)
    d = np.asarray(d, dtype=complex).reshape(-1)
    if len(d) != len(t) - 2:
        raise DomainError("need one d per interior site", expected=len(t) - 2, got=len(d))
    amps = _raw_full_amps(t.amps, d)
    return WalkerState(amps / np.linalg.norm(amps), origin=1)


def probability_for_d(target, d: Sequence[complex]) -> float:
    """|+> projection probability of the assembled state."""
    t = _as_target(target)
    raw = _raw_full_amps(t.amps, np.asarray(d, dtype=complex).reshape(-1))
    return float(np.vdot(t.amps, t.amps).real / (2 * np.sum(np.abs(raw) ** 2)))


def d_residuals(target, d: Sequence[complex]) -> np.ndarray:
    """Reachability sums written directly in terms of ``u`` and ``d``."""
    u = np.asarray(target.amps if isinstance(target, TargetSuperposition) else target, dtype=complex)
    n = len(u) - 1
    full_d = np.zeros(n + 2, dtype=complex)  # index = site label, slot 0 unused
    full_d[2 : n + 1] = np.asarray(d, dtype=complex).reshape(-1)
    full_d[n + 1] = u[n]
    uu = np.concatenate([[0], u])
    out = np.zeros(n - 1, dtype=complex)
    for s in range(1, n):
        total = 0j
        for i in range(1, s + 1):
            j = n - s + i
            total += np.conj(uu[i] - full_d[i]) * (uu[j] - full_d[j]) + np.conj(full_d[i + 1]) * full_d[j + 1]
        out[s - 1] = total
    return out


def _formal_residuals(x: np.ndarray, p: np.ndarray, n: int) -> np.ndarray:
    """Real and imaginary parts of the reachability sums as polynomials in
    ``x = (Re d, Im d)`` and ``p = (Re u, Im u)``.

    Conjugation is applied formally (``a + ib -> a - ib`` on the real
    coordinates) so the expression stays polynomial for complex inputs.
    """
    k = n - 1
    u = p[..., : n + 1] + 1j * p[..., n + 1 :]
    ub = p[..., : n + 1] - 1j * p[..., n + 1 :]
    a, b = x[..., :k], x[..., k:]
    shape = np.broadcast_shapes(x.shape[:-1], p.shape[:-1]) + (n + 1,)
    d = np.zeros(shape, dtype=complex)
    db = np.zeros(shape, dtype=complex)
    d[..., 1:n] = a + 1j * b
    db[..., 1:n] = a - 1j * b
    d[..., n] = u[..., n]
    db[..., n] = ub[..., n]
    w, wb = u - d, ub - db
    r, rt = [], []
    for s in range(1, n):
        i = np.arange(s)
        j = n - s + i
        r.append(np.sum(wb[..., i] * w[..., j] + db[..., i + 1] * d[..., j + 1], axis=-1))
        rt.append(np.sum(w[..., i] * wb[..., j] + d[..., i + 1] * db[..., j + 1], axis=-1))
    r, rt = np.stack(r, -1), np.stack(rt, -1)
    return np.concatenate([(r + rt) / 2, (r - rt) / 2j], -1)


def _family(n: int):
    def fn(x, p):
        return _formal_residuals(np.asarray(x, dtype=complex), np.asarray(p, dtype=complex), n)

    return fn


@lru_cache(maxsize=None)
def start_system(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Parameters and the complete solution set of a generic complex instance."""
    p0, sols, _ = homotopy.monodromy_solve(_family(n), 2 * (n - 1), 2 * (n + 1), seed=1000 + n)
    return p0, sols


def _params(u: np.ndarray) -> np.ndarray:
    return np.concatenate([u.real, u.imag]).astype(complex)


def _split(x: np.ndarray, n: int) -> np.ndarray:
    k = n - 1
    return x[:k] + 1j * x[k:]


def _real_coefficients(u: np.ndarray):
    n = len(u) - 1
    H, g, c = homotopy.quadratic_coefficients(_family(n), _params(u), 2 * (n - 1))
    return H.real, g.real, c.real


def _real_newton(coeffs, X: np.ndarray, iters: int = 8) -> np.ndarray:
    H, g, c = coeffs
    X = np.array(X, dtype=float)
    for _ in range(iters):
        F = 0.5 * np.einsum("pj,kjl,pl->pk", X, H, X) + X @ g.T + c
        J = np.einsum("kjl,pl->pkj", H, X) + g
        for i in range(len(X)):
            X[i] -= np.linalg.lstsq(J[i], F[i], rcond=None)[0]
    return X


def _make_solution(target: TargetSuperposition, d: np.ndarray, offset: float | None = None) -> DSolution:
    res = d_residuals(target, d)
    rmax = float(np.abs(res).max()) if len(res) else 0.0
    return DSolution(d, rmax, probability_for_d(target, d), offset)


def _sorted(sols: list[DSolution]) -> list[DSolution]:
    def key(s: DSolution):
        flat = np.concatenate([s.d.real, s.d.imag]) if len(s.d) else np.zeros(0)
        return (-round(s.probability, 10), tuple(np.round(flat, 8)))

    return sorted(sols, key=key)


# --------------------------------------------------------------------------
# two steps


def solve_d2(target, grid: Sequence[float] = DEGENERATE_GRID, tol: float = 1e-12) -> SolutionSet:
    """Closed-form solutions for a three-site target.

    For ``|u1| != |u3|`` the solution is unique.  When ``|u1| = |u3|`` the
    condition is real-linear of rank at most one: either inconsistent (no
    solution) or satisfied along a line of ``d`` values, sampled at ``grid``
    offsets from its maximum-probability point.  ``u1 = -u3`` returns the
    single limiting value ``u2 / 2`` that the generic formula tends to.
    """
    t = _as_target(target)
    if len(t) != 3:
        raise DomainError("solve_d2 needs a three-site target", length=len(t))
    u1, u2, u3 = t.amps
    gap = abs(u1) ** 2 - abs(u3) ** 2
    if abs(gap) > tol:
        d2 = u1 * (np.conj(u1) * u2 + np.conj(u2) * u3) / gap
        return SolutionSet([_make_solution(t, np.array([d2]))])

    if abs(u1 + u3) <= tol and abs(u1) > tol:
        d2 = np.array([u2 / 2])
        sol = _make_solution(t, d2)
        if sol.residual_max <= SOLVER_TOL:
            return SolutionSet([sol], "removable singularity u1 = -u3: limiting value d2 = u2/2")
        return SolutionSet([], "u1 = -u3 with complex u1* u2: no solution")

    # -conj(u1) d + u3 conj(d) = -conj(u1) u2, as a real 2x2 system in (Re d, Im d)
    col_re = u3 - np.conj(u1)
    col_im = -1j * (np.conj(u1) + u3)
    rhs = -np.conj(u1) * u2
    M = np.array([[col_re.real, col_im.real], [col_re.imag, col_im.imag]])
    y = np.array([rhs.real, rhs.imag])
    U, S, Vt = np.linalg.svd(M)
    if S[0] <= tol:
        d2 = np.array([u2 / 2])
        return SolutionSet([_make_solution(t, d2)], "u1 = u3 = 0: any d2 works; returning the best")
    inconsistency = abs(U[:, 1] @ y)
    if inconsistency > 1e-10:
        diag = (
            "degenerate |u1| = |u3| target violates the consistency condition "
            f"(mismatch {inconsistency:.3e}); no solution"
        )
        if np.allclose(t.amps.imag, 0) and abs(u1 - u3) <= tol:
            diag += "; real target with u1 = u3: the projection probability tends to 0"
        return SolutionSet([], diag)
    base = Vt[0] * (U[:, 0] @ y) / S[0]
    kern = Vt[1]
    kdir = kern[0] + 1j * kern[1]
    if kdir.imag < -tol or (abs(kdir.imag) <= tol and kdir.real < 0):
        kdir = -kdir
    d_ls = base[0] + 1j * base[1]
    # move along the line to the point closest to u2/2 (largest probability)
    shift = np.real(np.conj(kdir) * (u2 / 2 - d_ls))
    centre = d_ls + shift * kdir
    sols = [_make_solution(t, np.array([centre + off * kdir]), float(off)) for off in grid]
    return SolutionSet(sols, "degenerate |u1| = |u3|: one-parameter family")


def projection_probability_2step_closed_form(u1: float, u2: float) -> float:
    """|+> projection probability for the real three-site target
    ``(u1, u2, sqrt(1 - u1^2 - u2^2))``."""
    rest = 1 - u1 * u1 - u2 * u2
    if rest < -1e-15:
        raise DomainError("need u1^2 + u2^2 <= 1", u1=u1, u2=u2)
    u3 = math.sqrt(max(rest, 0.0))
    num = (u1 - u3) ** 2
    den = 2 * (1 - u2 * u2) * (1 - 2 * u1 * u3)
    if num <= 1e-300 or abs(den) <= 1e-300:
        return 0.0
    return num / den


# --------------------------------------------------------------------------
# general n


def _homotopy_roots(u: np.ndarray, max_step: float) -> tuple[np.ndarray, dict]:
    n = len(u) - 1
    p0, starts = start_system(n)
    fn = _family(n)
    seg = homotopy.Segment(fn, p0, _params(u), 2 * (n - 1))
    res = homotopy.track(seg, starts, max_step=max_step)
    ends = homotopy.polish(seg, res.endpoints[~res.failed])
    big = np.max(np.abs(ends), axis=1) if len(ends) else np.zeros(0)
    realish = np.max(np.abs(ends.imag), axis=1) < 1e-7 * (1 + big) if len(ends) else np.zeros(0, bool)
    # non-real roots of the real system come in conjugate pairs, so an
    # endpoint without a partner is real even if far out and imprecise
    for i in np.nonzero(~realish)[0]:
        gap = np.max(np.abs(ends - np.conj(ends[i])), axis=1)
        gap[i] = np.inf
        realish[i] = gap.min() > 1e-4 * (1 + big[i])
    candidates = ends[realish].real
    _, merged = homotopy.unique_rows(ends)
    info = {"paths": len(starts), "failed": int(res.failed.sum()), "merged": merged}
    return candidates, info


def _newton_roots(u: np.ndarray, restarts: int, seed: int) -> np.ndarray:
    n = len(u) - 1
    N = 2 * (n - 1)
    coeffs = _real_coefficients(u)
    H, g, c = coeffs
    rng = np.random.default_rng(seed)
    X = rng.normal(scale=np.linalg.norm(u), size=(restarts, N))

    def resid(Y):
        return 0.5 * np.einsum("pj,kjl,pl->pk", Y, H, Y) + Y @ g.T + c

    with np.errstate(all="ignore"):
        for _ in range(80):
            F = resid(X)
            J = np.einsum("kjl,pl->pkj", H, X) + g
            try:
                step = np.linalg.solve(J, F[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = np.stack([np.linalg.lstsq(J[i], F[i], rcond=None)[0] for i in range(len(X))])
            norm0 = np.linalg.norm(F, axis=1)
            lam = np.ones(len(X))
            for _ in range(6):
                trial = np.linalg.norm(resid(X - lam[:, None] * step), axis=1)
                worse = ~(trial < norm0)
                if not worse.any():
                    break
                lam[worse] /= 2
            X = X - lam[:, None] * step
            X[~np.all(np.isfinite(X), axis=1)] = 0.0
    F = resid(X)
    ok = np.max(np.abs(F), axis=1) < 1e-8
    return X[ok]


def solve_d_system(
    target,
    method: str = "homotopy",
    seed: int = 0,
    restarts: int | None = None,
) -> SolutionSet:
    """All real solutions ``d`` found for the target, best probability first.

    ``method="homotopy"`` tracks the complete complex solution set of a
    generic instance to the target; ``method="newton"`` runs damped Newton
    from ``restarts`` random points (default ``200 n``).  Counts from the
    latter are "found", not certified.
    """
    t = _as_target(target)
    u = t.amps
    n = len(u) - 1
    if n < 1:
        raise DomainError("target needs at least two sites")
    if n > N_MAX_POLY:
        raise DomainError(
            f"d-system solving is limited to {N_MAX_POLY} steps; use the fidelity optimizer",
            steps=n,
        )
    if n == 1:
        return SolutionSet([_make_solution(t, np.zeros(0, dtype=complex))])
    coeffs = _real_coefficients(u)
    if n == 2:
        H, g, c = coeffs
        if abs(np.linalg.det(g)) < 1e-12:
            return solve_d2(t)
        x = np.linalg.solve(g, -c)
        return SolutionSet([_make_solution(t, _split(x, n))])

    if method == "homotopy":
        candidates = np.zeros((0, 2 * (n - 1)))
        for max_step in (0.1, 0.02):
            candidates, info = _homotopy_roots(u, max_step)
            if info["failed"] == 0 and info["merged"] == 0:
                break
            log.debug("retracking with smaller steps: %s", info)
    elif method == "newton":
        candidates = _newton_roots(u, restarts or 200 * n, seed)
    else:
        raise DomainError(f"unknown method {method!r}")

    if len(candidates):
        candidates = _real_newton(coeffs, candidates)
    roots, _ = homotopy.unique_rows(candidates, DEDUP_RADIUS) if len(candidates) else (candidates, 0)
    sols = [_make_solution(t, _split(x, n)) for x in roots]
    # residuals are quadratic in d, so round-off grows with |d|^2
    sols = [s for s in sols if s.residual_max < SOLVER_TOL * max(1.0, float(np.abs(s.d).max())) ** 2]
    diagnostic = "" if sols else "no real solution found; the target may be unreachable"
    return SolutionSet(_sorted(sols), diagnostic)


# --------------------------------------------------------------------------
# full pipeline


def solution_from_d(
    target,
    d: Sequence[complex],
    initial_coin: Sequence[complex] | None = (1, 0),
    alphas: Sequence[float] | None = None,
    family_offset: float | None = None,
) -> EngineeringSolution:
    """Back-solve the coins for one ``d`` and verify by forward simulation."""
    t = _as_target(target)
    d = np.asarray(d, dtype=complex).reshape(-1)
    state = assemble_full_state(t, d)
    if initial_coin is None:
        # start in the pre-image of the first layer, so the first coin is trivial
        layer = layer_after_first_step(state, alphas)
        init = layer / np.linalg.norm(layer)
    else:
        init = np.asarray(initial_coin, dtype=complex)
        init = init / np.linalg.norm(init)
    coins = backsolve(state, init, alphas)
    walked = run_walk(init, coins, origin=state.origin)
    proj = project_coin(walked, PLUS)
    fid = target_fidelity(proj, t.amps, origin=1)
    info = {} if family_offset is None else {"familyOffset": family_offset}
    return EngineeringSolution(
        target=t,
        coins=coins,
        initial_coin=init,
        projection=np.array(PLUS, dtype=complex),
        probability=proj.probability,
        fidelity=fid,
        full_state=walked,
        d=d,
        info=info,
    )


def engineer_target(
    target,
    initial_coin: Sequence[complex] | None = (1, 0),
    alphas: Sequence[float] | None = None,
    max_solutions: int | None = None,
    method: str = "homotopy",
    seed: int = 0,
) -> SolutionSet:
    """Every solution of the d-system turned into a verified coin sequence.

    ``initial_coin=None`` starts the walker in the normalized pre-image of the
    first back-solved layer instead of a fixed coin state.
    """
    t = _as_target(target)
    found = solve_d_system(t, method=method, seed=seed)
    out = SolutionSet(diagnostic=found.diagnostic)
    for ds in found[:max_solutions]:
        sol = solution_from_d(t, ds.d, initial_coin, alphas, ds.family_offset)
        if sol.fidelity < 1 - 1e-9:
            log.warning("dropping d=%s: forward fidelity %.3e", ds.d, sol.fidelity)
            continue
        out.append(sol)
    return out
