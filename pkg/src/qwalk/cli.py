"""Command-line entry point: ``qwalk <subcommand> ...``.

Structured results go to ``--out`` (or stdout) as JSON or CSV; a short human
summary goes to stderr.  Failures print ``{"code", "message", "context"}``
to stdout and exit with 1 (bad input), 2 (not reachable / no solution) or
3 (numerical failure).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import analysis, engineering, optics
from .backsolve import backsolve
from .core import (
    PLUS,
    CoinOperator,
    DomainError,
    EngineeringSolution,
    NoSolutionError,
    NotReachableError,
    NumericalError,
    QWalkError,
    TargetSuperposition,
    WalkerState,
    complex_list,
    parse_complex_list,
)
from .optimizer import OptimizerOptions, optimize_coins
from .reachability import REACH_TOL, max_reachable_steps, reachability_residuals
from .walk import project_coin, run_walk

BALANCED4 = (1, 1, 1, 1)
BALANCED6 = (1, 1, 1, 1, 1, 1)
SIXSITES_MINUS = (1, 1, 1, 1, 1, -1)
REPRODUCE_CASES = ("balanced4", "balanced6", "sixsites-minus", "hist2", "hist15")


class UsageError(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QWALK_THREADS", "1")))
    except ValueError:
        raise DomainError("QWALK_THREADS must be an integer", value=os.environ["QWALK_THREADS"])


# --------------------------------------------------------------------------
# input / output helpers


def _load_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DomainError("file not found", path=path)
    except json.JSONDecodeError as err:
        raise DomainError("invalid JSON", path=path, detail=str(err))


def parse_complex_csv(text: str) -> np.ndarray:
    try:
        return np.array([complex(tok.strip().replace("i", "j")) for tok in text.split(",") if tok.strip()])
    except ValueError:
        raise DomainError("cannot parse complex list", value=text)


def _target(args) -> TargetSuperposition:
    if getattr(args, "amps", None):
        return TargetSuperposition.from_amps(parse_complex_csv(args.amps))
    if not getattr(args, "target", None):
        raise DomainError("give --target FILE or --amps LIST")
    return TargetSuperposition.from_json(_load_json(args.target))


def _pair(text: str | None, default) -> np.ndarray:
    if text is None:
        return np.asarray(default, dtype=complex)
    pair = parse_complex_csv(text)
    if len(pair) != 2 or np.linalg.norm(pair) == 0:
        raise DomainError("expected two complex numbers, not both zero", value=text)
    return pair / np.linalg.norm(pair)


def _dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _solutions_json(sols: Sequence[EngineeringSolution], diagnostic: str = "") -> dict:
    return {
        "count": len(sols),
        "diagnostic": diagnostic,
        "solutions": [s.to_json() for s in sols],
    }


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    blob = _load_json(args.coins)
    raw = blob["coins"] if isinstance(blob, dict) else blob
    init = parse_complex_list(blob["initialCoin"]) if isinstance(blob, dict) and "initialCoin" in blob else None
    init = _pair(args.initial_coin, (1, 0)) if init is None else init
    coins = [CoinOperator.from_json(c) for c in raw]
    state = run_walk(init, coins)
    _emit(_dumps(state.to_json()), args.out)
    _say(f"{len(coins)} steps, {state.nsites} sites")
    return 0


def cmd_project(args) -> int:
    state = WalkerState.from_json(_load_json(args.state))
    res = project_coin(state, _pair(args.bra, PLUS))
    target = res.normalized_target
    out = {
        "origin": res.origin,
        "probability": res.probability,
        "amps": None if target is None else complex_list(target),
    }
    _emit(_dumps(out), args.out)
    _say(f"projection probability {res.probability:.6g}")
    return 0


def cmd_check(args) -> int:
    state = WalkerState.from_json(_load_json(args.state))
    n = args.steps or state.nsites - 1
    res = reachability_residuals(state, n)
    best = max_reachable_steps(state, args.tol)
    out = {
        "steps": n,
        "residuals": complex_list(res),
        "maxResidual": float(np.abs(res).max()),
        "maxReachableSteps": best,
        "reachable": best >= n,
    }
    _emit(_dumps(out), args.out)
    _say(f"reachable in {n} steps: {best >= n} (max {best})")
    return 0


def cmd_backsolve(args) -> int:
    state = WalkerState.from_json(_load_json(args.state))
    alphas = [float(a) for a in args.alphas.split(",")] if args.alphas else None
    init = _pair(args.initial_coin, (1, 0))
    coins = backsolve(state, init, alphas, tol=args.tol)
    walked = run_walk(init, coins, origin=state.origin)
    out = {
        "initialCoin": complex_list(init),
        "coins": [c.to_json() for c in coins],
        "fidelity": walked.fidelity(state),
    }
    _emit(_dumps(out), args.out)
    _say(f"{len(coins)} coins, reconstruction fidelity {out['fidelity']:.12f}")
    return 0


def cmd_engineer(args) -> int:
    target = _target(args)
    if target.steps > engineering.N_MAX_POLY:
        raise DomainError(
            f"targets beyond {engineering.N_MAX_POLY} steps are handled by 'qwalk optimize'",
            steps=target.steps,
        )
    init = None if args.preimage_start else _pair(args.initial_coin, (1, 0))
    sols = engineering.engineer_target(
        target, init, max_solutions=args.max_solutions, method=args.method, seed=args.seed
    )
    if not sols:
        raise NoSolutionError(sols.diagnostic or "no solution found", steps=target.steps)
    _emit(_dumps(_solutions_json(sols, sols.diagnostic)), args.out)
    _say(f"{len(sols)} solutions; probabilities " + ", ".join(f"{s.probability:.6g}" for s in sols))
    return 0


def cmd_optimize(args) -> int:
    target = _target(args)
    opts = OptimizerOptions(
        max_iterations=args.max_iterations,
        restarts=args.restarts,
        optimize_projection=args.optimize_projection,
        optimize_initial_coin=args.optimize_initial_coin,
        seed=args.seed,
        prob_weight=args.prob_weight,
        method=args.method,
        workers=_threads(),
    )
    sol = optimize_coins(target, args.steps or target.steps, opts)
    _emit(_dumps(sol.to_json()), args.out)
    _say(f"fidelity {sol.fidelity:.12f}, probability {sol.probability:.6g}")
    return 0


def _histogram(steps, samples, mode, bins, seed, out, binned_out, opts=None) -> analysis.HistogramResult:
    res = analysis.probability_histogram(
        steps, samples, mode, bins=bins, seed=seed, optimizer_options=opts, workers=_threads()
    )
    _emit(res.raw_csv(), out)
    if binned_out:
        _emit(res.binned_csv(), binned_out)
    return res


def cmd_histogram(args) -> int:
    opts = OptimizerOptions(restarts=args.restarts) if args.mode == "optimizer" else None
    res = _histogram(args.steps, args.samples, args.mode, args.bins, args.seed, args.out, args.binned_out, opts)
    if args.mode == "optimizer":
        _say(f"{len(res.records)} samples; F > 0.99 and p > 0.02: {analysis.retained_fraction(res, 2, 0.02):.2%}")
    else:
        _say(f"{len(res.records)} samples")
    return 0


def _grid(text: str) -> np.ndarray:
    try:
        lo, hi, k = text.split(",")
        return np.linspace(float(lo), float(hi), int(k))
    except ValueError:
        raise DomainError("grid must be 'lo,hi,count'", value=text)


def cmd_sweep(args) -> int:
    sol = EngineeringSolution.from_json(_load_json(args.solution))
    selector = None if args.param == "all" else args.param
    rows = analysis.perturb_sweep(sol, selector, _grid(args.grid), args.mode)
    _emit(analysis.sweep_csv(rows), args.out)
    _say(f"{len(rows)} sweep points")
    return 0


def cmd_compile(args) -> int:
    sol = EngineeringSolution.from_json(_load_json(args.solution))
    plan = optics.compile_experiment(sol)
    _emit(_dumps(plan.to_json()), args.out)
    _say(f"{plan.steps} units, simulated probability {optics.simulate_plan(plan).probability:.6g}")
    return 0


def cmd_reproduce(args) -> int:
    out_dir = Path(args.out_dir)
    case = args.case
    if case in ("balanced4", "balanced6", "sixsites-minus"):
        amps = {"balanced4": BALANCED4, "balanced6": BALANCED6, "sixsites-minus": SIXSITES_MINUS}[case]
        sols = engineering.engineer_target(TargetSuperposition.from_amps(amps))
        path = out_dir / case / "solutions.json"
        _emit(_dumps(_solutions_json(sols, sols.diagnostic)), str(path))
        _say(f"{case}: {len(sols)} solutions, max p {max(s.probability for s in sols):.6g} -> {path}")
    elif case == "hist2":
        base = out_dir / case
        _histogram(2, 2000, "d-system", 50, args.seed, str(base / "samples.csv"), str(base / "histogram.csv"))
        _say(f"hist2 -> {base}")
    elif case == "hist15":
        base = out_dir / case
        res = _histogram(
            15, 100, "optimizer", 50, args.seed, str(base / "samples.csv"), str(base / "histogram.csv"),
            OptimizerOptions(),
        )
        _say(f"hist15: F > 0.99 and p > 0.02 in {analysis.retained_fraction(res, 2, 0.02):.2%} -> {base}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=REACH_TOL)
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="qwalk", description="Coined quantum walks for state engineering.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="run a walk from coin angles")
    p.add_argument("--coins", required=True, help="JSON: list of {theta, xi, zeta} or {initialCoin, coins}")
    p.add_argument("--initial-coin", help="two complex numbers, e.g. '1,0'")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("project", parents=[common], help="project a walker state on a coin state")
    p.add_argument("--state", required=True)
    p.add_argument("--bra", help="two complex numbers (default |+>)")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("check", parents=[common], help="reachability residuals of a state")
    p.add_argument("--state", required=True)
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("backsolve", parents=[common], help="coins generating a reachable state")
    p.add_argument("--state", required=True)
    p.add_argument("--initial-coin")
    p.add_argument("--alphas", help="comma-separated column phases for coins 2..n")
    p.set_defaults(func=cmd_backsolve)

    def add_target(p):
        p.add_argument("--target", help="JSON target file")
        p.add_argument("--amps", help="comma-separated complex amplitudes, e.g. '1,1j,-1'")

    p = sub.add_parser("engineer", parents=[common], help="all d-system solutions for a target")
    add_target(p)
    p.add_argument("--max-solutions", type=int)
    p.add_argument("--initial-coin")
    p.add_argument("--preimage-start", action="store_true", help="start in the pre-image of the first layer")
    p.add_argument("--method", choices=("homotopy", "newton"), default="homotopy")
    p.set_defaults(func=cmd_engineer)

    p = sub.add_parser("optimize", parents=[common], help="maximize fidelity over coin angles")
    add_target(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--optimize-projection", action="store_true")
    p.add_argument("--optimize-initial-coin", action="store_true")
    p.add_argument("--prob-weight", type=float, default=0.0)
    p.add_argument("--method", default="L-BFGS-B", choices=("L-BFGS-B", "Nelder-Mead"))
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("histogram", parents=[common], help="probability histogram over Haar targets")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--mode", choices=("d-system", "optimizer"), default="d-system")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--binned-out", help="also write binned counts here")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("sweep", parents=[common], help="fidelity under one-parameter perturbations")
    p.add_argument("--solution", required=True)
    p.add_argument("--param", default="all", help="'step:angle' (angle in theta, xi, zeta) or 'all'")
    p.add_argument("--grid", default="-0.3,0.3,61", help="lo,hi,count")
    p.add_argument("--mode", choices=("absolute", "relative"), default="absolute")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compile", parents=[common], help="wave-plate and q-plate plan for a solution")
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("reproduce", parents=[common], help="regenerate a reference artifact")
    p.add_argument("--case", required=True, choices=REPRODUCE_CASES)
    p.add_argument("--out-dir", default="artifacts")
    p.set_defaults(func=cmd_reproduce)
    return parser


def _error(err: QWalkError) -> int:
    name = {1: "validation", 2: "no-solution", 3: "numerical"}[err.exit_code]
    if isinstance(err, NotReachableError):
        name = "not-reachable"
    payload = {"code": name, "message": str(err), "context": _plain(err.context)}
    sys.stdout.write(_dumps(payload))
    _say(f"error: {err}")
    return err.exit_code


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
        return args.func(args)
    except QWalkError as err:
        return _error(err)
    except (KeyError, TypeError, ValueError) as err:
        return _error(DomainError(f"malformed input: {err}"))
    except (ArithmeticError, np.linalg.LinAlgError) as err:
        return _error(NumericalError(str(err)))


if __name__ == "__main__":
    sys.exit(main())
