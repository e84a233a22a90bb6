"""Shared value types for coined walks on a line.

Sites are stored densely in an ``(nsites, 2)`` complex array whose row ``k``
holds the amplitudes ``(u_up, u_down)`` of site ``origin + k``.  Site labels
are 1-based everywhere the user sees them.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

TOL_NORM = 1e-10
TOL_UNITARY = 1e-10
TOL_ZERO = 1e-12

UP, DOWN = 0, 1
PLUS = (1 / math.sqrt(2), 1 / math.sqrt(2))


class QWalkError(Exception):
    """Base class; ``context`` carries machine-readable details."""

    exit_code = 3

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.context = context


class DomainError(QWalkError, ValueError):
    exit_code = 1


class NotReachableError(QWalkError):
    exit_code = 2


class NoSolutionError(QWalkError):
    exit_code = 2


class NumericalError(QWalkError):
    exit_code = 3


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def as_pair(value: Sequence[complex], name: str = "pair") -> np.ndarray:
    arr = np.asarray(value, dtype=complex).reshape(-1)
    if arr.shape != (2,):
        raise DomainError(f"{name} must have two complex entries", got=len(arr))
    return arr


def normalized_pair(value: Sequence[complex], name: str = "pair") -> np.ndarray:
    arr = as_pair(value, name)
    norm = np.linalg.norm(arr)
    if norm <= TOL_ZERO:
        raise DomainError(f"{name} is zero")
    return arr / norm


def check_normalized_pair(value: Sequence[complex], name: str = "pair") -> np.ndarray:
    arr = as_pair(value, name)
    norm = np.linalg.norm(arr)
    if norm <= TOL_ZERO:
        raise DomainError(f"{name} is zero")
    if abs(norm**2 - 1) > TOL_NORM:
        raise DomainError(f"{name} is not normalized", norm=float(norm))
    return arr


# --------------------------------------------------------------------------
# walker states


@dataclass(frozen=True, eq=False)
class WalkerState:
    amps: np.ndarray
    origin: int = 1

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.ndim != 2 or amps.shape[1] != 2 or amps.shape[0] < 1:
            raise DomainError("amplitude table must have shape (nsites, 2)", shape=amps.shape)
        object.__setattr__(self, "amps", _frozen(amps))
        object.__setattr__(self, "origin", int(self.origin))

    @classmethod
    def localized(cls, coin: Sequence[complex], site: int = 1) -> "WalkerState":
        return cls(as_pair(coin, "coin")[None, :], origin=site)

    @classmethod
    def from_dict(cls, sites: dict[tuple[int, int], complex]) -> "WalkerState":
        """Build from ``{(site, spin): amplitude}`` with spin 0 = up, 1 = down."""
        lo = min(k[0] for k in sites)
        hi = max(k[0] for k in sites)
        amps = np.zeros((hi - lo + 1, 2), dtype=complex)
        for (site, spin), val in sites.items():
            amps[site - lo, spin] = val
        return cls(amps, origin=lo)

    @property
    def nsites(self) -> int:
        return self.amps.shape[0]

    @property
    def last(self) -> int:
        return self.origin + self.nsites - 1

    @property
    def sites(self) -> range:
        return range(self.origin, self.last + 1)

    def amp(self, site: int, spin: int) -> complex:
        k = site - self.origin
        if 0 <= k < self.nsites:
            return complex(self.amps[k, spin])
        return 0j

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "WalkerState":
        norm = self.norm()
        if norm <= TOL_ZERO:
            raise DomainError("cannot normalize a zero state")
        return WalkerState(self.amps / norm, self.origin)

    def trimmed(self, tol: float = TOL_ZERO) -> "WalkerState":
        occupied = np.nonzero(np.abs(self.amps).max(axis=1) > tol)[0]
        if len(occupied) == 0:
            return WalkerState(np.zeros((1, 2)), self.origin)
        lo, hi = occupied[0], occupied[-1]
        return WalkerState(self.amps[lo : hi + 1], self.origin + int(lo))

    def padded(self, first: int, last: int) -> np.ndarray:
        """Amplitude table over sites ``first..last`` (zeros outside storage)."""
        if first > self.origin or last < self.last:
            raise DomainError("padding window does not contain the stored range")
        out = np.zeros((last - first + 1, 2), dtype=complex)
        k = self.origin - first
        out[k : k + self.nsites] = self.amps
        return out

    def inner(self, other: "WalkerState") -> complex:
        """<self|other> with sites aligned by label."""
        lo = min(self.origin, other.origin)
        hi = max(self.last, other.last)
        return complex(np.vdot(self.padded(lo, hi), other.padded(lo, hi)))

    def fidelity(self, other: "WalkerState") -> float:
        num = abs(self.inner(other)) ** 2
        den = self.norm() ** 2 * other.norm() ** 2
        return float(num / den) if den > 0 else 0.0

    def to_json(self) -> dict:
        amps = canonical_phase(self.amps)
        return {
            "origin": self.origin,
            "amps": [_row(row) for row in amps],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WalkerState":
        rows = np.asarray(obj["amps"], dtype=float).reshape(-1, 4)
        amps = rows[:, [0, 2]] + 1j * rows[:, [1, 3]]
        return cls(amps, origin=int(obj.get("origin", 1)))


def _row(row: np.ndarray) -> list[float]:
    return [float(row[0].real), float(row[0].imag), float(row[1].real), float(row[1].imag)]


def canonical_phase(amps: np.ndarray, tol: float = TOL_ZERO) -> np.ndarray:
    """Rotate the global phase so the first nonzero amplitude is real positive."""
    flat = np.asarray(amps).reshape(-1)
    nz = np.nonzero(np.abs(flat) > tol)[0]
    if len(nz) == 0:
        return np.asarray(amps)
    z = flat[nz[0]]
    return np.asarray(amps) * (abs(z) / z)


# --------------------------------------------------------------------------
# coins


def su2_matrix(theta: float, xi: float, zeta: float) -> np.ndarray:
    """The three-angle special-unitary coin, with no range check on ``theta``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [cmath.exp(1j * xi) * c, cmath.exp(1j * zeta) * s],
            [-cmath.exp(-1j * zeta) * s, cmath.exp(-1j * xi) * c],
        ]
    )


def unitarity_residual(m: np.ndarray) -> float:
    return float(np.abs(m.conj().T @ m - np.eye(2)).max())


@dataclass(frozen=True, eq=False)
class CoinOperator:
    """A 2x2 unitary coin.

    The full matrix is kept (global phase included) so that the explicit
    constructions below are reproduced exactly; ``params`` returns the
    ``(theta, xi, zeta)`` angles of its special-unitary part.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise DomainError("coin matrix must be 2x2", shape=m.shape)
        res = unitarity_residual(m)
        if res > TOL_UNITARY:
            raise DomainError("coin matrix is not unitary", residual=res)
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def params(self) -> tuple[float, float, float]:
        return su2_params(self.matrix)

    @property
    def theta(self) -> float:
        return self.params[0]

    @property
    def xi(self) -> float:
        return self.params[1]

    @property
    def zeta(self) -> float:
        return self.params[2]

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    def special(self) -> "CoinOperator":
        return CoinOperator(su2_matrix(*self.params))

    def equal_up_to_phase(self, other: "CoinOperator", tol: float = 1e-10) -> bool:
        return phase_distance(self.matrix, other.matrix) < tol

    def to_json(self) -> dict:
        theta, xi, zeta = self.params
        return {"theta": theta, "xi": xi, "zeta": zeta}

    @classmethod
    def from_json(cls, obj: dict) -> "CoinOperator":
        return cls(su2_matrix(float(obj["theta"]), float(obj["xi"]), float(obj["zeta"])))


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """max-entry distance between ``a`` and the best phase-rotated ``b``."""
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.abs(a - phase * b).max())


def su2_params(m: np.ndarray) -> tuple[float, float, float]:
    m = np.asarray(m, dtype=complex)
    det = np.linalg.det(m)
    su = m / np.sqrt(det)
    c11, c12, c21 = su[0, 0], su[0, 1], su[1, 0]
    theta = math.atan2(abs(c21), abs(c11))
    xi = cmath.phase(c11) if abs(c11) > TOL_ZERO else 0.0
    zeta = cmath.phase(c12) if abs(c12) > TOL_ZERO else 0.0
    return theta, xi, zeta


def coin_from_params(theta: float, xi: float, zeta: float) -> CoinOperator:
    if not (-TOL_ZERO <= theta <= math.pi / 2 + TOL_ZERO):
        raise DomainError("theta must lie in [0, pi/2]", theta=theta)
    return CoinOperator(su2_matrix(theta, xi, zeta))


def coin_from_first_column(col: Sequence[complex], alpha: float = 0.0) -> CoinOperator:
    """Coin whose first column is ``col`` (normalized) and whose second column
    is the orthogonal complement rotated by ``exp(i alpha)``."""
    c = as_pair(col, "column")
    norm = np.linalg.norm(c)
    if norm <= TOL_ZERO:
        raise DomainError("column is zero")
    c = c / norm
    phase = cmath.exp(1j * alpha)
    m = np.array([[c[0], -phase * c[1].conjugate()], [c[1], phase * c[0].conjugate()]])
    return CoinOperator(m)


IDENTITY = CoinOperator(np.eye(2))


# --------------------------------------------------------------------------
# targets and solutions


@dataclass(frozen=True, eq=False)
class TargetSuperposition:
    amps: np.ndarray

    def __post_init__(self):
        a = np.array(self.amps, dtype=complex).reshape(-1)
        if len(a) < 2:
            raise DomainError("target needs at least two sites", length=len(a))
        norm = np.linalg.norm(a)
        if abs(norm**2 - 1) > TOL_NORM:
            raise DomainError("target is not normalized", norm=float(norm))
        object.__setattr__(self, "amps", _frozen(a))

    @classmethod
    def from_amps(cls, amps: Sequence[complex]) -> "TargetSuperposition":
        a = np.asarray(amps, dtype=complex).reshape(-1)
        norm = np.linalg.norm(a)
        if norm <= TOL_ZERO:
            raise DomainError("target is zero")
        return cls(a / norm)

    @property
    def steps(self) -> int:
        return len(self.amps) - 1

    def __len__(self) -> int:
        return len(self.amps)

    def to_json(self) -> dict:
        return {"amps": complex_list(canonical_phase(self.amps))}

    @classmethod
    def from_json(cls, obj: Any) -> "TargetSuperposition":
        raw = obj["amps"] if isinstance(obj, dict) else obj
        return cls.from_amps(parse_complex_list(raw))


@dataclass(frozen=True, eq=False)
class EngineeringSolution:
    target: TargetSuperposition
    coins: list[CoinOperator]
    initial_coin: np.ndarray
    projection: np.ndarray
    probability: float
    fidelity: float
    full_state: WalkerState
    d: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.coins)

    def to_json(self) -> dict:
        return {
            "target": complex_list(self.target.amps),
            "d": None if self.d is None else complex_list(self.d),
            "coins": [c.to_json() for c in self.coins],
            "initialCoin": complex_list(self.initial_coin),
            "projection": complex_list(self.projection),
            "probability": float(self.probability),
            "fidelity": float(self.fidelity),
            "fullState": self.full_state.to_json(),
            "info": {k: v for k, v in self.info.items() if _jsonable(v)},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EngineeringSolution":
        d = obj.get("d")
        return cls(
            target=TargetSuperposition.from_amps(parse_complex_list(obj["target"])),
            coins=[CoinOperator.from_json(c) for c in obj["coins"]],
            initial_coin=parse_complex_list(obj["initialCoin"]),
            projection=parse_complex_list(obj.get("projection", [[PLUS[0], 0], [PLUS[1], 0]])),
            probability=float(obj["probability"]),
            fidelity=float(obj["fidelity"]),
            full_state=WalkerState.from_json(obj["fullState"]),
            d=None if d is None else parse_complex_list(d),
            info=dict(obj.get("info", {})),
        )


def _jsonable(v: Any) -> bool:
    return isinstance(v, (bool, int, float, str, list, type(None)))


def complex_list(values: Sequence[complex]) -> list[list[float]]:
    return [[float(np.real(z)), float(np.imag(z))] for z in np.asarray(values).reshape(-1)]


def parse_complex_list(raw: Any) -> np.ndarray:
    out = []
    for item in raw:
        if isinstance(item, (list, tuple)):
            re, im = (list(item) + [0.0])[:2]
            out.append(complex(float(re), float(im)))
        else:
            out.append(complex(item))
    return np.asarray(out, dtype=complex)
