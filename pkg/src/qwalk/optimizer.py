"""Direct maximization of the output fidelity over coin angles.

The parameter vector holds ``(theta, xi, zeta)`` for every coin, followed by
two angles ``(beta, phi)`` for the projection bra and/or the initial coin
when those are optimized too; a pair of angles encodes
``(cos beta, e^{i phi} sin beta)``.  Gradients come from an adjoint pass
through the walk.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .core import (
    PLUS,
    CoinOperator,
    DomainError,
    EngineeringSolution,
    TargetSuperposition,
    su2_matrix,
)
from .walk import project_coin, run_walk, target_fidelity


@dataclass
class OptimizerOptions:
    max_iterations: int | None = None  # default 2000 * steps
    restarts: int = 8
    optimize_projection: bool = False
    optimize_initial_coin: bool = False
    seed: int = 0
    prob_weight: float = 0.0
    method: str = "L-BFGS-B"
    initial_coin: tuple = (1, 0)
    projection: tuple = PLUS
    initial_params: list = field(default_factory=list)
    workers: int = 1  # restarts run in a process pool when > 1

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")
        if self.restarts < 1:
            raise DomainError("restarts must be at least 1")


def pair_from_angles(beta: float, phi: float) -> np.ndarray:
    return np.array([math.cos(beta), complex(math.cos(phi), math.sin(phi)) * math.sin(beta)])


def angles_from_pair(pair: Sequence[complex]) -> tuple[float, float]:
    a, b = np.asarray(pair, dtype=complex)
    norm = math.hypot(abs(a), abs(b))
    a, b = a / norm, b / norm
    if abs(a) > 0:
        b = b * abs(a) / a  # drop the global phase
    return math.atan2(abs(b), abs(a)), float(np.angle(b)) if abs(b) > 0 else 0.0


def _coin_derivs(theta, xi, zeta):
    c, s = math.cos(theta), math.sin(theta)
    ex, ez = complex(math.cos(xi), math.sin(xi)), complex(math.cos(zeta), math.sin(zeta))
    mat = np.array([[ex * c, ez * s], [-s / ez, c / ex]])
    d_theta = np.array([[-ex * s, ez * c], [-c / ez, -s / ex]])
    d_xi = np.array([[1j * ex * c, 0], [0, -1j * c / ex]])
    d_zeta = np.array([[0, 1j * ez * s], [1j * s / ez, 0]])
    return mat, (d_theta, d_xi, d_zeta)


class FidelityObjective:
    """Fidelity (plus ``prob_weight * p``) and its gradient."""

    def __init__(self, target, n_steps: int, opts: OptimizerOptions):
        t = target.amps if isinstance(target, TargetSuperposition) else np.asarray(target, dtype=complex)
        if len(t) > n_steps + 1:
            raise DomainError("need at least len(target) - 1 steps", steps=n_steps, length=len(t))
        self.target = np.zeros(n_steps + 1, dtype=complex)
        self.target[: len(t)] = t / np.linalg.norm(t)
        self.n = n_steps
        self.opts = opts
        self.fixed_init = np.asarray(opts.initial_coin, dtype=complex)
        self.fixed_init = self.fixed_init / np.linalg.norm(self.fixed_init)
        self.fixed_bra = np.asarray(opts.projection, dtype=complex)
        self.fixed_bra = self.fixed_bra / np.linalg.norm(self.fixed_bra)

    @property
    def size(self) -> int:
        return 3 * self.n + 2 * self.opts.optimize_projection + 2 * self.opts.optimize_initial_coin

    def unpack(self, x: np.ndarray):
        coins = x[: 3 * self.n].reshape(self.n, 3)
        k = 3 * self.n
        bra, init = self.fixed_bra, self.fixed_init
        if self.opts.optimize_projection:
            bra = pair_from_angles(x[k], x[k + 1])
            k += 2
        if self.opts.optimize_initial_coin:
            init = pair_from_angles(x[k], x[k + 1])
        return coins, bra, init

    def evaluate(self, x: np.ndarray) -> tuple[float, float]:
        value = self.value_and_grad(x, need_grad=False)
        return value[1], value[2]

    def value_and_grad(self, x: np.ndarray, need_grad: bool = True):
        coins, bra, init = self.unpack(np.asarray(x, dtype=float))
        mats, derivs, states = [], [], [init[None, :]]
        for theta, xi, zeta in coins:
            m, dm = _coin_derivs(theta, xi, zeta)
            mats.append(m)
            derivs.append(dm)
            psi = states[-1]
            mixed = psi @ m.T
            nxt = np.zeros((len(psi) + 1, 2), dtype=complex)
            nxt[:-1, 0] = mixed[:, 0]
            nxt[1:, 1] = mixed[:, 1]
            states.append(nxt)
        final = states[-1]
        phi = final @ np.conj(bra)
        prob = float(np.vdot(phi, phi).real)
        ov = np.vdot(self.target, phi)
        fid = float(abs(ov) ** 2 / prob) if prob > 0 else 0.0
        lam = self.opts.prob_weight
        value = fid + lam * prob
        if not need_grad:
            return value, fid, prob
        grad = np.zeros(self.size)
        if prob <= 0:
            return value, fid, prob, grad
        g_phi = ov * self.target / prob - abs(ov) ** 2 * phi / prob**2 + lam * phi
        g_psi = g_phi[:, None] * bra[None, :]
        k = 3 * self.n
        extra = []
        if self.opts.optimize_projection:
            g_bra = np.conj(g_phi) @ final
            beta, ph = x[k], x[k + 1]
            dbeta = np.array([-math.sin(beta), np.exp(1j * ph) * math.cos(beta)])
            dphi = np.array([0, 1j * np.exp(1j * ph) * math.sin(beta)])
            extra += [2 * np.real(np.vdot(g_bra, dbeta)), 2 * np.real(np.vdot(g_bra, dphi))]
        for step in range(self.n - 1, -1, -1):
            psi = states[step]
            g_mixed = np.empty((len(psi), 2), dtype=complex)
            g_mixed[:, 0] = g_psi[:-1, 0]
            g_mixed[:, 1] = g_psi[1:, 1]
            g_coin = g_mixed.T @ np.conj(psi)
            for j, dm in enumerate(derivs[step]):
                grad[3 * step + j] = 2 * np.real(np.vdot(g_coin, dm))
            g_psi = g_mixed @ np.conj(mats[step])
        if self.opts.optimize_initial_coin:
            beta, ph = x[-2], x[-1]
            dbeta = np.array([-math.sin(beta), np.exp(1j * ph) * math.cos(beta)])
            dphi = np.array([0, 1j * np.exp(1j * ph) * math.sin(beta)])
            extra += [2 * np.real(np.vdot(g_psi[0], dbeta)), 2 * np.real(np.vdot(g_psi[0], dphi))]
        grad[k:] = extra
        return value, fid, prob, grad

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        coins = np.column_stack(
            [
                rng.uniform(0, math.pi / 2, self.n),
                rng.uniform(0, 2 * math.pi, self.n),
                rng.uniform(0, 2 * math.pi, self.n),
            ]
        ).reshape(-1)
        extra = []
        for _ in range(self.opts.optimize_projection + self.opts.optimize_initial_coin):
            extra += [rng.uniform(0, math.pi / 2), rng.uniform(0, 2 * math.pi)]
        return np.concatenate([coins, extra])


def evaluate(
    coin_params: Sequence[Sequence[float]],
    initial_coin: Sequence[complex],
    projection_bra: Sequence[complex],
    target,
) -> tuple[float, float]:
    """Fidelity and projection probability for explicit coin angles."""
    params = np.asarray(coin_params, dtype=float).reshape(-1, 3)
    n = len(params)
    t = target.amps if isinstance(target, TargetSuperposition) else np.asarray(target, dtype=complex)
    if n != len(t) - 1:
        raise DomainError("need one coin per step of the target", coins=n, length=len(t))
    opts = OptimizerOptions(initial_coin=tuple(initial_coin), projection=tuple(projection_bra))
    return FidelityObjective(t, n, opts).evaluate(params.reshape(-1))


def _run_restart(obj: FidelityObjective, x0: np.ndarray, max_iter: int, method: str):
    trace: list[float] = []

    def fun(x):
        value, fid, _, grad = obj.value_and_grad(x)
        return -value, -grad

    def record(xk, *args):
        trace.append(obj.evaluate(xk)[0])

    if method.lower() == "nelder-mead":
        res = optimize.minimize(
            lambda x: -obj.value_and_grad(x, need_grad=False)[0],
            x0,
            method="Nelder-Mead",
            callback=record,
            options={"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-14, "adaptive": True},
        )
    else:
        res = optimize.minimize(
            fun,
            x0,
            jac=True,
            method=method,
            callback=record,
            options={"maxiter": max_iter, "gtol": 1e-12, "ftol": 1e-15},
        )
    return res, np.maximum.accumulate(trace) if trace else np.zeros(0)


def _restart_job(job):
    obj, x0, max_iter, method = job
    res, trace = _run_restart(obj, x0, max_iter, method)
    return obj.evaluate(res.x)[0], res, trace


def optimize_coins(target, n_steps: int, options: OptimizerOptions | None = None) -> EngineeringSolution:
    """Best-fidelity coin angles over ``options.restarts`` seeded restarts."""
    opts = options or OptimizerOptions()
    t = target if isinstance(target, TargetSuperposition) else TargetSuperposition.from_amps(target)
    obj = FidelityObjective(t, n_steps, opts)
    max_iter = opts.max_iterations or 2000 * n_steps
    rng = np.random.default_rng(opts.seed)
    starts = [np.asarray(p, dtype=float) for p in opts.initial_params]
    starts += [obj.random_start(rng) for _ in range(opts.restarts)]
    jobs = [(obj, x0, max_iter, opts.method) for x0 in starts]
    if opts.workers > 1:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            results = list(pool.map(_restart_job, jobs))
    else:
        results = [_restart_job(job) for job in jobs]
    # ties broken by the lower restart index, so the pool size never matters
    index = max(range(len(results)), key=lambda i: (results[i][0], -i))
    fid, res, trace = results[index]
    coins_p, bra, init = obj.unpack(res.x)
    coins = [CoinOperator(su2_matrix(*row)) for row in coins_p]
    walked = run_walk(init, coins)
    proj = project_coin(walked, bra)
    return EngineeringSolution(
        target=t,
        coins=coins,
        initial_coin=init,
        projection=bra,
        probability=proj.probability,
        fidelity=target_fidelity(proj, t.amps, origin=1),
        full_state=walked,
        d=None,
        info={
            "iterations": int(res.nit),
            "converged": bool(res.success),
            "restart": int(index),
            "trace": [float(v) for v in trace],
            "params": [float(v) for v in res.x],
        },
    )
