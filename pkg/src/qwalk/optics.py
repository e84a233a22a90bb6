"""Lowering of engineered coin sequences to a wave-plate and q-plate train.

Conventions (every formula below goes through these):

* Jones vectors are written in the circular basis ``(L, R)`` with
  ``L = (1, i)/sqrt(2)`` and ``R = (1, -i)/sqrt(2)`` in the linear ``(H, V)``
  basis.  Coin up is ``L``, coin down is ``R``.
* A retarder with fast axis at angle ``a`` from ``H`` and retardance ``g`` is
  ``Rot(-a) diag(e^{-ig/2}, e^{ig/2}) Rot(a)`` in the linear basis, with
  ``Rot(a) = [[cos a, sin a], [-sin a, cos a]]``.  Quarter-wave plates have
  ``g = pi/2``, half-wave plates ``g = pi``.
* A q-plate maps ``|m, L> -> |m + 2q, R>`` and ``|m, R> -> |m - 2q, L>``.

A q-plate moves both polarizations, so a unit cannot leave ``L`` in place
the way a walk step leaves coin up in place.  Each unit therefore applies
``X C`` (the coin followed by a polarization swap ``X``) before its q-plate,
and after ``k`` units walker site ``i`` sits at ``m = 2(i - 1) - k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .core import (
    CoinOperator,
    DomainError,
    EngineeringSolution,
    NumericalError,
    WalkerState,
    complex_list,
    parse_complex_list,
)

QWP_RETARDANCE = math.pi / 2
HWP_RETARDANCE = math.pi
# columns are L and R written in the (H, V) basis
CIRCULAR_BASIS = np.array([[1, 1], [1j, -1j]]) / math.sqrt(2)
POL_SWAP = np.array([[0, 1], [1, 0]], dtype=complex)
DECOMPOSITION_TOL = 1e-8
ANGLE_DIGITS = 10


def _rot(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, s], [-s, c]])


def retarder_linear(angle: float, retardance: float) -> np.ndarray:
    phases = np.diag([np.exp(-0.5j * retardance), np.exp(0.5j * retardance)])
    return _rot(-angle) @ phases @ _rot(angle)


def to_circular(linear: np.ndarray) -> np.ndarray:
    return CIRCULAR_BASIS.conj().T @ linear @ CIRCULAR_BASIS


def retarder(angle: float, retardance: float) -> np.ndarray:
    """Retarder Jones matrix in the ``(L, R)`` basis."""
    return to_circular(retarder_linear(angle, retardance))


@dataclass(frozen=True)
class JonesElement:
    kind: str  # "QWP" or "HWP"
    angle: float

    def __post_init__(self):
        if self.kind not in ("QWP", "HWP"):
            raise DomainError(f"unknown wave plate {self.kind!r}")

    @property
    def matrix(self) -> np.ndarray:
        return retarder(self.angle, QWP_RETARDANCE if self.kind == "QWP" else HWP_RETARDANCE)


def waveplates_to_jones(qwp1: float, hwp: float, qwp2: float) -> np.ndarray:
    """``QWP(qwp2) HWP(hwp) QWP(qwp1)``; light meets ``qwp1`` first."""
    return JonesElement("QWP", qwp2).matrix @ JonesElement("HWP", hwp).matrix @ JonesElement("QWP", qwp1).matrix


def _batch_jones(angles: np.ndarray) -> np.ndarray:
    """Vectorized ``waveplates_to_jones`` over rows ``(qwp1, hwp, qwp2)``."""

    def lin(a, g):
        c, s = np.cos(a), np.sin(a)
        e0, e1 = np.exp(-0.5j * g), np.exp(0.5j * g)
        m = np.empty((len(a), 2, 2), dtype=complex)
        m[:, 0, 0] = c * c * e0 + s * s * e1
        m[:, 1, 1] = s * s * e0 + c * c * e1
        m[:, 0, 1] = m[:, 1, 0] = c * s * (e0 - e1)
        return m

    q1, h, q2 = angles.T
    total = lin(q2, QWP_RETARDANCE) @ lin(h, HWP_RETARDANCE) @ lin(q1, QWP_RETARDANCE)
    return CIRCULAR_BASIS.conj().T @ total @ CIRCULAR_BASIS


def _phase_fit(jones: np.ndarray, target: np.ndarray):
    """Best ``e^{i phase}`` with ``jones ~ e^{i phase} target``, and the residual."""
    overlap = np.einsum("...ij,ij->...", jones, target.conj())
    phase = np.angle(overlap)
    diff = jones - np.exp(1j * phase)[..., None, None] * target
    return phase, np.abs(diff).max(axis=(-2, -1))


_GRID = np.stack(np.meshgrid(*[np.linspace(0, math.pi, 6, endpoint=False)] * 3, indexing="ij"), -1).reshape(-1, 3)


def _lm_residual(x: np.ndarray, target: np.ndarray) -> np.ndarray:
    diff = _batch_jones(x[:, :3]) - np.exp(1j * x[:, 3])[:, None, None] * target
    return np.concatenate([diff.real.reshape(len(x), 4), diff.imag.reshape(len(x), 4)], axis=1)


def _refine(x: np.ndarray, target: np.ndarray, iters: int = 60) -> np.ndarray:
    """Batched Levenberg-Marquardt with central-difference Jacobians."""
    step = 1e-7
    eye = np.eye(4)
    mu = np.full(len(x), 1e-3)
    r = _lm_residual(x, target)
    cost = np.sum(r * r, axis=1)
    for _ in range(iters):
        shifts = np.concatenate([x[:, None, :] + step * eye, x[:, None, :] - step * eye], axis=1)
        rs = _lm_residual(shifts.reshape(-1, 4), target).reshape(len(x), 8, 8)
        jac = ((rs[:, :4] - rs[:, 4:]) / (2 * step)).transpose(0, 2, 1)
        jtj = np.einsum("kij,kil->kjl", jac, jac)
        grad = np.einsum("kij,ki->kj", jac, r)
        delta = -np.linalg.solve(jtj + mu[:, None, None] * eye, grad[..., None])[..., 0]
        trial = x + delta
        r_new = _lm_residual(trial, target)
        cost_new = np.sum(r_new * r_new, axis=1)
        better = cost_new < cost
        x = np.where(better[:, None], trial, x)
        r = np.where(better[:, None], r_new, r)
        cost = np.where(better, cost_new, cost)
        mu = np.where(better, mu / 3, mu * 4)
        if cost.min() < 1e-30:
            break
    return x[np.argmin(cost)]


def decompose_unitary(target: np.ndarray, tol: float = DECOMPOSITION_TOL) -> tuple[float, float, float, float]:
    """Angles ``(qwp1, hwp, qwp2)`` and ``phase`` with
    ``waveplates_to_jones(qwp1, hwp, qwp2) = e^{i phase} target``.

    Seeded by a fixed angle grid, then refined; deterministic.
    """
    target = np.asarray(target, dtype=complex)
    phase, res = _phase_fit(_batch_jones(_GRID), target)
    order = np.argsort(res, kind="stable")[:16]
    x = _refine(np.column_stack([_GRID[order], phase[order]]), target)
    angles = tuple(float(a) % math.pi for a in x[:3])
    # reducing modulo pi can flip the sign of the product; refit the phase
    phase, err = _phase_fit(waveplates_to_jones(*angles), target)
    if err > tol:
        raise NumericalError("wave-plate decomposition did not converge", residual=float(err))
    return (*angles, float(phase))


def coin_to_waveplates(coin: CoinOperator | np.ndarray) -> tuple[float, float, float, float]:
    """Wave-plate angles and global phase reproducing ``coin`` on ``(L, R)``."""
    m = coin.matrix if isinstance(coin, CoinOperator) else np.asarray(coin, dtype=complex)
    return decompose_unitary(m)


def qplate_action(m: int, pol: str, q: float = 0.5) -> tuple[int, str]:
    if abs(2 * q - round(2 * q)) > 1e-12:
        raise DomainError("q-plate charge must be a half-integer", q=q)
    shift = int(round(2 * q))
    if pol == "L":
        return m + shift, "R"
    if pol == "R":
        return m - shift, "L"
    raise DomainError(f"polarization must be 'L' or 'R', got {pol!r}")


def qplate_matrix(q: float, m_min: int, m_max: int) -> np.ndarray:
    """The q-plate as a matrix on ``|m, pol>`` for ``m_min <= m <= m_max``;
    index ``2 (m - m_min) + pol`` with ``L = 0``, ``R = 1``.  Moves that leave
    the window are dropped."""
    size = m_max - m_min + 1
    out = np.zeros((2 * size, 2 * size))
    for m in range(m_min, m_max + 1):
        for p, name in enumerate("LR"):
            m2, pol2 = qplate_action(m, name, q)
            if m_min <= m2 <= m_max:
                out[2 * (m2 - m_min) + "LR".index(pol2), 2 * (m - m_min) + p] = 1
    return out


# --------------------------------------------------------------------------
# plans


@dataclass
class OpticalUnit:
    qwp1: float
    hwp: float
    qwp2: float
    phase: float  # wave plates give e^{i phase} (X C)
    q: float = 0.5

    @property
    def elements(self) -> list[JonesElement]:
        return [JonesElement("QWP", self.qwp1), JonesElement("HWP", self.hwp), JonesElement("QWP", self.qwp2)]

    @property
    def jones(self) -> np.ndarray:
        return waveplates_to_jones(self.qwp1, self.hwp, self.qwp2)


@dataclass
class ProjectionStage:
    """Optional QWP then HWP in front of a polarizing beam splitter whose
    transmitted port (``H``) is detected."""

    hwp: float
    qwp: float | None = None

    @property
    def jones(self) -> np.ndarray:
        m = JonesElement("HWP", self.hwp).matrix
        if self.qwp is not None:
            m = m @ JonesElement("QWP", self.qwp).matrix
        return m

    @property
    def bra(self) -> np.ndarray:
        """Row vector on ``(L, R)`` of the detected amplitude."""
        h_row = np.array([1, 0]) @ CIRCULAR_BASIS  # <H| in circular components
        return h_row @ self.jones


@dataclass
class ExperimentPlan:
    initial_polarization: np.ndarray
    units: list[OpticalUnit]
    projection: ProjectionStage
    meta: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.units)

    @property
    def global_phase(self) -> float:
        return float(sum(u.phase for u in self.units))

    def element_counts(self) -> dict[str, int]:
        return {
            "wavePlates": 3 * len(self.units),
            "qPlates": len(self.units),
            "projectionHWP": 1,
            "projectionQWP": int(self.projection.qwp is not None),
        }

    def to_json(self) -> dict:
        def ang(a):
            return round(float(a) % math.pi, ANGLE_DIGITS)

        return {
            "initialPolarization": complex_list(self.initial_polarization),
            "units": [
                {"qwp1": ang(u.qwp1), "hwp": ang(u.hwp), "qwp2": ang(u.qwp2), "q": u.q, "phase": float(u.phase)}
                for u in self.units
            ],
            "projection": {
                "hwp": ang(self.projection.hwp),
                "qwp": None if self.projection.qwp is None else ang(self.projection.qwp),
            },
            "elementCounts": self.element_counts(),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentPlan":
        units = [OpticalUnit(u["qwp1"], u["hwp"], u["qwp2"], u.get("phase", 0.0), u.get("q", 0.5)) for u in obj["units"]]
        proj = obj["projection"]
        return cls(
            parse_complex_list(obj["initialPolarization"]),
            units,
            ProjectionStage(proj["hwp"], proj.get("qwp")),
            dict(obj.get("meta", {})),
        )


def _projection_stage(bra: np.ndarray, tol: float = 1e-12) -> ProjectionStage:
    """Stage whose detected amplitude is ``<bra|psi>`` up to a phase.

    A QWP aligned with the major axis of the polarization ellipse makes it
    linear, at some angle ``chi``; a HWP at ``chi / 2`` then turns it onto
    ``H``.  Linear bras skip the QWP.
    """
    bra = np.asarray(bra, dtype=complex)
    bra = bra / np.linalg.norm(bra)
    want = np.conj(bra)
    vec = CIRCULAR_BASIS @ bra  # the polarization in (H, V)

    def linear_angle(w):
        return 0.5 * math.atan2(2 * np.real(np.conj(w[0]) * w[1]), abs(w[0]) ** 2 - abs(w[1]) ** 2)

    def mismatch(stage):
        return 1 - abs(np.vdot(want, stage.bra)) ** 2

    if abs(abs(bra[0]) - abs(bra[1])) < tol:
        stage = ProjectionStage(hwp=(linear_angle(vec) / 2) % math.pi)
        if mismatch(stage) <= tol:
            return stage
    candidates = []
    axis = linear_angle(vec)
    for q in (axis, axis + math.pi / 2):
        w = retarder_linear(q, QWP_RETARDANCE) @ vec
        candidates.append(ProjectionStage(hwp=(linear_angle(w) / 2) % math.pi, qwp=q % math.pi))
    best = min(candidates, key=mismatch)
    if mismatch(best) > tol:
        raise NumericalError("no wave-plate setting realizes the projection", residual=float(mismatch(best)))
    return best


def compile_experiment(solution: EngineeringSolution) -> ExperimentPlan:
    units = []
    for coin in solution.coins:
        q1, h, q2, phase = decompose_unitary(POL_SWAP @ coin.matrix)
        units.append(OpticalUnit(q1, h, q2, phase))
    init = np.asarray(solution.initial_coin, dtype=complex)
    return ExperimentPlan(
        initial_polarization=init / np.linalg.norm(init),
        units=units,
        projection=_projection_stage(solution.projection),
        meta={"steps": solution.steps},
    )


@dataclass
class OpticalOutput:
    m_min: int
    amps: np.ndarray  # (n_m, 2) amplitudes on |m, L>, |m, R>
    detected: np.ndarray  # amplitude per m behind the projection stage

    @property
    def probability(self) -> float:
        return float(np.sum(np.abs(self.detected) ** 2))


def simulate_plan(plan: ExperimentPlan) -> OpticalOutput:
    """Propagate the photon through the train in the OAM-polarization basis."""
    n = plan.steps
    m_min = -n
    amps = np.zeros((2 * n + 1, 2), dtype=complex)
    amps[-m_min] = plan.initial_polarization
    for unit in plan.units:
        amps = amps @ unit.jones.T
        shifted = np.zeros_like(amps)
        # |m, L> -> |m + 2q, R>, |m, R> -> |m - 2q, L>
        s = int(round(2 * unit.q))
        if s:
            shifted[s:, 1] = amps[:-s, 0]
            shifted[:-s, 0] = amps[s:, 1]
        else:
            shifted[:, 1], shifted[:, 0] = amps[:, 0], amps[:, 1]
        amps = shifted
    detected = amps @ plan.projection.bra
    return OpticalOutput(m_min, amps, detected)


def optical_to_walker(output: OpticalOutput, steps: int, phase: float = 0.0) -> WalkerState:
    """Read the walker state off the OAM ladder (``m = 2(i - 1) - steps``),
    removing a known global phase."""
    sites = np.zeros((steps + 1, 2), dtype=complex)
    for i in range(1, steps + 2):
        sites[i - 1] = output.amps[2 * (i - 1) - steps - output.m_min]
    return WalkerState(sites * np.exp(-1j * phase), origin=1)


def plan_walker_state(plan: ExperimentPlan) -> WalkerState:
    return optical_to_walker(simulate_plan(plan), plan.steps, plan.global_phase)
