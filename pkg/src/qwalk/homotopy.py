"""Parameter homotopy for square systems of real quadratic equations.

The systems handled here have the form

    F_k(x; p) = 1/2 x^T H_k x + g_k(p) . x + c_k(p),

with ``H`` independent of the parameters ``p``, ``g`` affine in ``p`` and ``c``
quadratic in ``p``.  Both ``x`` and ``p`` are complexified.  Along a straight
parameter segment ``p(t) = p0 + t (p1 - p0)`` the coefficients are then exact
low-degree polynomials in ``t``, recovered from three evaluations.

Solving a real instance proceeds in two stages:

1. once per system family, a random complex instance ``p0`` is solved
   completely by monodromy (track the known solutions around random
   triangular loops in parameter space until no new ones appear);
2. each real instance ``p1`` is reached by tracking those solutions along
   ``p0 -> p1``; endpoints with vanishing imaginary part are the real roots.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

ResidualFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def quadratic_coefficients(fn: ResidualFn, p: np.ndarray, nvars: int):
    """Exact ``(H, g, c)`` of ``x -> fn(x, p)`` from finite evaluations."""
    eye = np.eye(nvars)
    c = fn(np.zeros(nvars), p)
    fp = fn(eye, p)
    fm = fn(-eye, p)
    g = ((fp - fm) / 2).T
    diag = fp + fm - 2 * c
    H = np.zeros((len(c), nvars, nvars), dtype=complex)
    j, l = np.triu_indices(nvars, 1)
    pairs = fn(eye[j] + eye[l], p) if len(j) else np.zeros((0, len(c)))
    off = pairs - c - g[:, j].T - g[:, l].T - diag[j] / 2 - diag[l] / 2
    H[:, j, l] = off.T
    H[:, l, j] = off.T
    H[:, np.arange(nvars), np.arange(nvars)] = diag.T
    return H, g, c


class Segment:
    """The straight parameter path ``p0 -> p1`` for one system family."""

    def __init__(self, fn: ResidualFn, p0: np.ndarray, p1: np.ndarray, nvars: int):
        p0 = np.asarray(p0, dtype=complex)
        p1 = np.asarray(p1, dtype=complex)
        H, g0, c0 = quadratic_coefficients(fn, p0, nvars)
        _, g1, c1 = quadratic_coefficients(fn, p1, nvars)
        _, _, cm = quadratic_coefficients(fn, (p0 + p1) / 2, nvars)
        self.H = H
        self.g0, self.gd = g0, g1 - g0
        curv = 2 * (c1 + c0 - 2 * cm)
        self.c0, self.c1, self.c2 = c0, c1 - c0 - curv, curv

    def F(self, X: np.ndarray, t: np.ndarray) -> np.ndarray:
        tc = t[:, None]
        quad = 0.5 * np.einsum("pj,kjl,pl->pk", X, self.H, X)
        return quad + X @ self.g0.T + tc * (X @ self.gd.T) + self.c0 + tc * self.c1 + tc**2 * self.c2

    def J(self, X: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.einsum("kjl,pl->pkj", self.H, X) + self.g0 + t[:, None, None] * self.gd

    def dFdt(self, X: np.ndarray, t: np.ndarray) -> np.ndarray:
        return X @ self.gd.T + self.c1 + 2 * t[:, None] * self.c2


def _solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.full(b.shape, np.nan, dtype=complex)
        for i in range(len(A)):
            try:
                out[i] = np.linalg.solve(A[i], b[i])
            except np.linalg.LinAlgError:
                pass
        return out


@dataclass
class TrackResult:
    endpoints: np.ndarray
    failed: np.ndarray
    iterations: int


def track(
    seg: Segment,
    starts: np.ndarray,
    max_step: float = 0.1,
    corrector_tol: float = 1e-8,
    blowup: float = 1e8,
    min_step: float = 1e-12,
) -> TrackResult:
    """Track every start point from ``t = 0`` to ``t = 1``.

    RK4 predictor on ``dx/dt = -J^{-1} dF/dt`` and a three-iteration Newton
    corrector; step sizes adapt per path.  Paths whose norm exceeds
    ``blowup`` or whose step collapses below ``min_step`` are marked failed.
    """
    X = np.array(starts, dtype=complex)
    P = len(X)
    t = np.zeros(P)
    h = np.full(P, max_step / 4)
    active = np.ones(P, bool)
    failed = np.zeros(P, bool)

    def velocity(Y, tt):
        return -_solve(seg.J(Y, tt), seg.dFdt(Y, tt))

    it = 0
    with np.errstate(all="ignore"):
        while active.any():
            it += 1
            idx = np.nonzero(active)[0]
            Xi, ti = X[idx], t[idx]
            hi = np.minimum(h[idx], 1 - ti)
            hc = hi[:, None]
            k1 = velocity(Xi, ti)
            k2 = velocity(Xi + hc / 2 * k1, ti + hi / 2)
            k3 = velocity(Xi + hc / 2 * k2, ti + hi / 2)
            k4 = velocity(Xi + hc * k3, ti + hi)
            Xp = Xi + hc / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            tn = np.where(hi >= 1 - ti, 1.0, ti + hi)
            ok = np.all(np.isfinite(Xp), axis=1)
            Xp[~ok] = Xi[~ok]
            prev = np.full(len(idx), np.inf)
            for _ in range(3):
                delta = _solve(seg.J(Xp, tn), seg.F(Xp, tn))
                size = np.linalg.norm(delta, axis=1) / (1 + np.linalg.norm(Xp, axis=1))
                good = np.isfinite(size)
                Xp[good] -= delta[good]
                ok &= good & ((size < 0.25 * prev) | (size < 1e-3 * corrector_tol))
                prev = np.where(good, size, np.inf)
            ok &= prev < corrector_tol
            acc, rej = idx[ok], idx[~ok]
            X[acc] = Xp[ok]
            t[acc] = tn[ok]
            h[acc] = np.minimum(h[acc] * 2, max_step)
            h[rej] /= 2
            done = t >= 1
            big = np.linalg.norm(X, axis=1) > blowup
            small = h < min_step
            failed |= (big | small) & active & ~done
            active &= ~done & ~big & ~small
    return TrackResult(X, failed, it)


def polish(seg: Segment, X: np.ndarray, t: float = 1.0, iters: int = 4) -> np.ndarray:
    tt = np.full(len(X), t)
    with np.errstate(all="ignore"):
        for _ in range(iters):
            delta = _solve(seg.J(X, tt), seg.F(X, tt))
            good = np.all(np.isfinite(delta), axis=1)
            X = X.copy()
            X[good] -= delta[good]
    return X


def unique_rows(X: np.ndarray, radius: float = 1e-6) -> tuple[np.ndarray, int]:
    """Deduplicate rows within a relative radius; also return how many rows
    were merged."""
    kept: list[np.ndarray] = []
    merged = 0
    for x in X:
        scale = 1 + np.linalg.norm(x)
        if any(np.linalg.norm(x - y) < radius * scale for y in kept):
            merged += 1
        else:
            kept.append(x)
    width = X.shape[1] if X.ndim == 2 else 0
    return (np.array(kept) if kept else np.zeros((0, width), dtype=X.dtype)), merged


def _random_complex(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.normal(size=size) + 1j * rng.normal(size=size)


def seed_instance(fn: ResidualFn, nvars: int, nparams: int, rng: np.random.Generator):
    """A random complex point ``x0`` and parameters ``p0`` with ``F(x0; p0) = 0``.

    Newton on the (underdetermined) parameters with ``x0`` held fixed.
    """
    x0 = _random_complex(rng, nvars)
    p = _random_complex(rng, nparams)
    eye = np.eye(nparams)
    for _ in range(60):
        val = fn(x0, p)
        if np.linalg.norm(val) < 1e-14:
            break
        step = 1e-6
        jac = np.stack([(fn(x0, p + step * e) - fn(x0, p - step * e)) / (2 * step) for e in eye], axis=1)
        p = p - np.linalg.lstsq(jac, val, rcond=None)[0]
    return x0, p


def monodromy_solve(
    fn: ResidualFn,
    nvars: int,
    nparams: int,
    seed: int = 0,
    quiet_loops: int = 10,
    max_loops: int = 400,
):
    """All isolated complex solutions of one random instance of the family.

    Stops once ``quiet_loops`` consecutive loops produce nothing new.
    """
    rng = np.random.default_rng(seed)
    x0, p0 = seed_instance(fn, nvars, nparams, rng)
    sols = x0[None, :]
    quiet = loops = 0
    home = Segment(fn, p0, p0, nvars)
    while quiet < quiet_loops and loops < max_loops:
        loops += 1
        pa, pb = _random_complex(rng, nparams), _random_complex(rng, nparams)
        X = sols
        for q0, q1 in ((p0, pa), (pa, pb), (pb, p0)):
            res = track(Segment(fn, q0, q1, nvars), X)
            X = res.endpoints[~res.failed]
        X = polish(home, X)
        combined, _ = unique_rows(np.concatenate([sols, X]))
        if len(combined) > len(sols):
            sols, quiet = combined, 0
        else:
            quiet += 1
    return p0, sols, loops
