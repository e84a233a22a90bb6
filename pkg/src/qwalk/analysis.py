"""Haar sampling, probability histograms and coin-parameter stability sweeps."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .core import CoinOperator, DomainError, EngineeringSolution, TargetSuperposition, su2_matrix
from .engineering import N_MAX_POLY, solve_d_system
from .optimizer import OptimizerOptions, optimize_coins
from .walk import project_coin, run_walk, target_fidelity

ANGLES = ("theta", "xi", "zeta")
FIDELITY_THRESHOLDS = (0, 2, 5, 10, 12)
DEFAULT_EPS_GRID = tuple(np.linspace(-0.3, 0.3, 61))

# Five-step target with six low-lying real branches, at p = 0.00137738,
# 0.00196137, 0.00360411, 0.00379377, 0.142292 and 0.398078 (plus two more
# near 0.414 and 0.450).  Each component lies within 5e-4 of the 3-decimal
# rounding (0.053, -0.078+0.603i, -0.524+0.189i, -0.302+0.363i,
# 0.182+0.099i, 0.042-0.224i), up to a global phase.
SIX_BRANCH_TARGET = (
    complex(0.0525406663, 0.0000000000),
    complex(-0.0772619439, 0.6028300777),
    complex(-0.5237554866, 0.1898199795),
    complex(-0.3018905348, 0.3627710367),
    complex(0.1820821170, 0.0986567911),
    complex(0.0416193263, -0.2239521946),
)


# --------------------------------------------------------------------------
# sampling


def sample_rng(seed: int, index: int = 0) -> np.random.Generator:
    """PCG64 stream for sample ``index`` of a run seeded with ``seed``.

    Streams are split by ``SeedSequence(seed, spawn_key=(index,))`` so a
    sample does not depend on how many were drawn before it.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def haar_random_target(dim: int, seed: int, index: int = 0) -> TargetSuperposition:
    if dim < 2:
        raise DomainError("a target needs at least two sites", dim=dim)
    rng = sample_rng(seed, index)
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return TargetSuperposition.from_amps(z / np.linalg.norm(z))


# --------------------------------------------------------------------------
# histograms


@dataclass
class HistogramResult:
    mode: str
    steps: int
    seed: int
    records: list[dict]
    edges: np.ndarray
    counts: dict[str, np.ndarray]  # column name -> counts per bin
    meta: dict = field(default_factory=dict)

    def raw_csv(self) -> str:
        buf = io.StringIO()
        keys = list(self.records[0]) if self.records else ["index"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(keys)
        for rec in self.records:
            writer.writerow([_fmt(rec[k]) for k in keys])
        return buf.getvalue()

    def binned_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = list(self.counts)
        writer.writerow(["bin_lo", "bin_hi"] + names)
        for b in range(len(self.edges) - 1):
            writer.writerow([_fmt(self.edges[b]), _fmt(self.edges[b + 1])] + [int(self.counts[n][b]) for n in names])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.12g}"
    return str(v)


def _dsystem_sample(args) -> dict:
    steps, seed, index = args
    target = haar_random_target(steps + 1, seed, index)
    sols = solve_d_system(target)
    probs = [s.probability for s in sols]
    return {
        "index": index,
        "solutions": len(probs),
        "min_p": min(probs) if probs else float("nan"),
        "max_p": max(probs) if probs else float("nan"),
    }


def _optimizer_sample(args) -> dict:
    steps, seed, index, opts = args
    target = haar_random_target(steps + 1, seed, index)
    sol = optimize_coins(target, steps, replace(opts, seed=int(sample_rng(seed, index).integers(2**31))))
    return {"index": index, "p": sol.probability, "F": sol.fidelity, "iterations": sol.info["iterations"]}


def probability_histogram(
    steps: int,
    samples: int,
    mode: str = "d-system",
    bins: int = 50,
    seed: int = 0,
    prange: tuple[float, float] = (0.0, 1.0),
    optimizer_options: OptimizerOptions | None = None,
    thresholds: Sequence[int] = FIDELITY_THRESHOLDS,
    workers: int = 1,
) -> HistogramResult:
    """Projection probabilities of ``samples`` Haar targets over ``steps + 1`` sites.

    ``d-system`` mode records the smallest and largest probability over all
    solutions; ``optimizer`` mode records the optimizer's ``(p, F)`` and bins
    the probabilities of the samples with ``F >= 1 - 10^-t`` for every
    threshold ``t`` (``t = 0`` keeps everything).
    """
    if samples < 0:
        raise DomainError("sample count must be non-negative", samples=samples)
    if mode == "d-system":
        if not 2 <= steps <= N_MAX_POLY:
            raise DomainError(f"d-system mode supports 2..{N_MAX_POLY} steps", steps=steps)
        jobs = [(steps, seed, i) for i in range(samples)]
        worker = _dsystem_sample
    elif mode == "optimizer":
        if steps < 1:
            raise DomainError("need at least one step", steps=steps)
        opts = optimizer_options or OptimizerOptions()
        jobs = [(steps, seed, i, opts) for i in range(samples)]
        worker = _optimizer_sample
    else:
        raise DomainError(f"unknown histogram mode {mode!r}")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(worker, jobs))
    else:
        records = [worker(j) for j in jobs]

    edges = np.linspace(prange[0], prange[1], bins + 1)
    counts: dict[str, np.ndarray] = {}
    if mode == "d-system":
        for key in ("min_p", "max_p"):
            vals = np.array([r[key] for r in records if not math.isnan(r[key])])
            counts[key] = np.histogram(vals, edges)[0]
    else:
        for t in thresholds:
            keep = np.array([r["p"] for r in records if r["F"] >= 1 - 10.0 ** (-t)])
            counts[f"p_t{t}"] = np.histogram(keep, edges)[0]
    meta = {"bins": bins, "range": list(prange), "samples": samples}
    return HistogramResult(mode, steps, seed, records, edges, counts, meta)


def retained_fraction(result: HistogramResult, t: float, min_p: float = 0.0) -> float:
    """Share of optimizer samples with ``F >= 1 - 10^-t`` and ``p > min_p``."""
    if not result.records:
        return 0.0
    good = [r for r in result.records if r["F"] >= 1 - 10.0 ** (-t) and r["p"] > min_p]
    return len(good) / len(result.records)


# --------------------------------------------------------------------------
# stability sweeps


@dataclass
class SweepRow:
    step: int
    angle: str
    eps: float
    fidelity: float
    probability: float


def _selection(n: int, selector) -> list[tuple[int, str]]:
    if selector is None:
        return [(s, a) for s in range(1, n + 1) for a in ANGLES]
    if isinstance(selector, str):
        step_s, angle = selector.split(":")
        selector = (int(step_s), angle)
    items = [selector] if isinstance(selector[0], (int, np.integer)) else list(selector)
    for step, angle in items:
        if not 1 <= step <= n or angle not in ANGLES:
            raise DomainError("parameter selector out of range", step=step, angle=angle, steps=n)
    return [(int(s), a) for s, a in items]


def perturbed_coins(coins: Sequence[CoinOperator], step: int, angle: str, eps: float, mode: str) -> list[CoinOperator]:
    """Copy of ``coins`` with one angle of coin ``step`` (1-based) shifted.

    ``absolute`` adds ``eps``; ``relative`` multiplies by ``1 + eps``.  The
    coin's global phase is kept.
    """
    out = list(coins)
    coin = coins[step - 1]
    params = list(coin.params)
    k = ANGLES.index(angle)
    if mode == "absolute":
        params[k] += eps
    elif mode == "relative":
        params[k] *= 1 + eps
    else:
        raise DomainError(f"unknown sweep mode {mode!r}")
    out[step - 1] = CoinOperator(np.sqrt(coin.det) * su2_matrix(*params))
    return out


def _fidelity_and_p(solution: EngineeringSolution, coins: Sequence[CoinOperator]) -> tuple[float, float]:
    proj = project_coin(run_walk(solution.initial_coin, coins), solution.projection)
    return target_fidelity(proj, solution.target.amps, origin=1), proj.probability


def perturb_sweep(
    solution: EngineeringSolution,
    selector=None,
    eps_grid: Iterable[float] = DEFAULT_EPS_GRID,
    mode: str = "absolute",
) -> list[SweepRow]:
    """Fidelity and probability while one coin angle at a time is varied.

    ``selector`` is ``(step, angle)``, a list of those, ``"step:angle"``, or
    ``None`` for every angle of every coin.
    """
    rows = []
    grid = [float(e) for e in eps_grid]
    for step, angle in _selection(solution.steps, selector):
        for eps in grid:
            coins = perturbed_coins(solution.coins, step, angle, eps, mode)
            fid, p = _fidelity_and_p(solution, coins)
            rows.append(SweepRow(step, angle, eps, fid, p))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "angle", "eps", "fidelity", "probability"])
    for r in rows:
        writer.writerow([r.step, r.angle, _fmt(r.eps), _fmt(r.fidelity), _fmt(r.probability)])
    return buf.getvalue()


def scaling_sweep(solution: EngineeringSolution, step: int, angle: str, factors: Iterable[float]) -> list[SweepRow]:
    """Replace one angle by ``factor * angle``; rows report ``eps = factor``."""
    rows = perturb_sweep(solution, (step, angle), [f - 1 for f in factors], mode="relative")
    for r in rows:
        r.eps += 1
    return rows


def fidelity_drop(solution: EngineeringSolution, eps: float = 0.1, mode: str = "absolute", selector=None) -> float:
    """Mean loss of fidelity when each selected angle is moved by ``+-eps``."""
    rows = perturb_sweep(solution, selector, (-eps, eps), mode)
    return float(np.mean([solution.fidelity - r.fidelity for r in rows]))
