"""
Named probe states: cat states, the one-spin-flipped cat mixture, product and
thermal baselines, and the thermal-to-cat conversion by magnetization
projection.

Spin labels follow ``linalg_core``: |0> is up, and a bit string with k ones
has M_z eigenvalue N - 2k.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .linalg_core import DEFAULT_TOL, hamming_distance_matrix, popcount, projector


class StateKind(str, Enum):
    GHZ = "ghz"
    STAIRCASE = "staircase"
    RHO_EX = "rho_ex"
    PRODUCT_PLUS = "product_plus"
    PRODUCT_POLARIZED = "product_polarized"
    THERMAL_X = "thermal_x"
    MZ_PROJECTED_THERMAL = "mz_projected_thermal"
    MIXTURE = "mixture"


class InvalidSectorError(ValueError):
    pass


def ghz(n: int) -> np.ndarray:
    """(|0...0> + |1...1>)/sqrt(2)."""
    if n < 1:
        raise ValueError("N must be >= 1")
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = psi[-1] = 1 / math.sqrt(2)
    return psi


def staircase(n: int) -> np.ndarray:
    """Equal superposition of the N+1 domain walls |up^k down^(N-k)>, k = 0..N."""
    if n < 1:
        raise ValueError("N must be >= 1")
    psi = np.zeros(2**n, dtype=complex)
    for k in range(n + 1):
        # k leading up spins (zeros) followed by N-k down spins (ones)
        psi[2 ** (n - k) - 1] = 1.0
    return psi / math.sqrt(n + 1)


def flipped_cat_states(n: int) -> np.ndarray:
    """Columns are the N cat states with spin ``lam`` flipped relative to the rest."""
    if n < 3:
        raise ValueError("rho_ex needs N >= 3")
    full = 2**n - 1
    out = np.zeros((2**n, n), dtype=complex)
    for lam in range(n):
        up_at_lam = full ^ (1 << (n - 1 - lam))
        out[up_at_lam, lam] = out[full ^ up_at_lam, lam] = 1 / math.sqrt(2)
    return out


def rho_ex(n: int) -> np.ndarray:
    """Uniform mixture of the one-spin-flipped cat states."""
    psis = flipped_cat_states(n)
    return psis @ psis.conj().T / n


def product_plus(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("N must be >= 1")
    return np.full(2**n, 2 ** (-n / 2), dtype=complex)


def product_polarized(n: int, direction: str | tuple[float, float] = "z") -> np.ndarray:
    """Product of identical single-spin pure states.

    ``direction`` is an axis label ``"+x"``, ``"-z"``, ... (bare axis means +)
    or a Bloch-sphere pair ``(theta, phi)``.
    """
    if isinstance(direction, str):
        sign = -1.0 if direction.startswith("-") else 1.0
        axis = direction.lstrip("+-")
        theta, phi = {"z": (0.0, 0.0), "x": (math.pi / 2, 0.0), "y": (math.pi / 2, math.pi / 2)}[axis]
        if sign < 0:
            theta, phi = math.pi - theta, phi + math.pi
    else:
        theta, phi = direction
    single = np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])
    psi = np.ones(1, dtype=complex)
    for _ in range(n):
        psi = np.kron(psi, single)
    return psi


def polarization_to_b(polarization: float) -> float:
    return math.atanh(polarization)


def b_from_physical(thermal_energy: float, zeeman_splitting: float) -> float:
    """Dimensionless Zeeman weight b = g mu_B B / (2 k_B T).

    Both energies in the same units, e.g. 208 MHz and 280 MHz give b ~ 0.673.
    """
    return zeeman_splitting / (2 * thermal_energy)


def thermal_x(n: int, b: float) -> np.ndarray:
    """Product Gibbs state of exp(b sigma_x) / (2 cosh b) on every site.

    Written out entrywise, rho[x, y] = tanh(b)**hamming(x, y) / 2**N.
    """
    tau = math.tanh(b)
    d = hamming_distance_matrix(n)
    return (tau ** d.astype(float) / 2**n).astype(complex)


def sector_indices(n: int, m: int) -> np.ndarray:
    """Computational basis labels with M_z eigenvalue ``m``."""
    if abs(m) > n or (n - m) % 2:
        raise InvalidSectorError(f"M={m} is not a magnetization sector of {n} spins")
    ones = (n - m) // 2
    idx = np.arange(2**n, dtype=np.int64)
    return idx[popcount(idx) == ones]


def hamming_projector(n: int, m: int) -> np.ndarray:
    """Projector onto the M_z = m subspace (rank C(N, (N-m)/2))."""
    eta = np.zeros((2**n, 2**n), dtype=complex)
    s = sector_indices(n, m)
    eta[s, s] = 1.0
    return eta


def mz_projected_thermal(n: int, b: float, m: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Normalized eta_M rho_th eta_M for the transverse thermal state ``thermal_x(n, b)``."""
    s = sector_indices(n, m)
    weight = len(s) / 2**n
    if weight <= tol:
        raise InvalidSectorError(f"sector M={m} has negligible thermal weight {weight:.3e}")
    tau = math.tanh(b)
    block = tau ** hamming_distance_matrix_subset(s).astype(float)
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[np.ix_(s, s)] = block / len(s)
    return rho


def hamming_distance_matrix_subset(labels: np.ndarray) -> np.ndarray:
    return popcount(labels[:, None] ^ labels[None, :])


def default_sector(n: int) -> int:
    """Sector nearest M=0 with the parity of N."""
    return n % 2


def maximally_mixed(n: int) -> np.ndarray:
    return np.eye(2**n, dtype=complex) / 2**n


def mixture(w: float, cat: np.ndarray, sep: np.ndarray) -> np.ndarray:
    """w * cat + (1 - w) * sep."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"mixture weight {w} outside [0, 1]")
    if cat.shape != sep.shape:
        raise ValueError("mixture components have different dimensions")
    return w * cat + (1 - w) * sep


@dataclass(frozen=True)
class StateSpec:
    """Serializable recipe for a probe state.

    ``params`` keys by kind: ``b`` and ``M`` for the thermal states, ``direction``
    for PRODUCT_POLARIZED, and ``w`` plus optional nested ``cat``/``sep`` specs
    (defaults: GHZ and the maximally mixed state) for MIXTURE.
    """

    kind: StateKind
    n: int
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StateKind(self.kind))
        if self.n < 1:
            raise ValueError("N must be >= 1")
        if self.kind is StateKind.MZ_PROJECTED_THERMAL:
            sector_indices(self.n, self.sector)

    @property
    def sector(self) -> int:
        return int(self.params.get("M", default_sector(self.n)))

    @property
    def is_pure(self) -> bool:
        return self.kind in (
            StateKind.GHZ,
            StateKind.STAIRCASE,
            StateKind.PRODUCT_PLUS,
            StateKind.PRODUCT_POLARIZED,
        )

    def pure(self) -> np.ndarray:
        if self.kind is StateKind.GHZ:
            return ghz(self.n)
        if self.kind is StateKind.STAIRCASE:
            return staircase(self.n)
        if self.kind is StateKind.PRODUCT_PLUS:
            return product_plus(self.n)
        if self.kind is StateKind.PRODUCT_POLARIZED:
            direction = self.params.get("direction", "z")
            if isinstance(direction, list):
                direction = tuple(direction)
            return product_polarized(self.n, direction)
        raise ValueError(f"{self.kind.value} is not a pure state")

    def density(self) -> np.ndarray:
        if self.is_pure:
            return projector(self.pure())
        if self.kind is StateKind.RHO_EX:
            return rho_ex(self.n)
        if self.kind is StateKind.THERMAL_X:
            return thermal_x(self.n, float(self.params.get("b", 0.0)))
        if self.kind is StateKind.MZ_PROJECTED_THERMAL:
            return mz_projected_thermal(self.n, float(self.params.get("b", 0.0)), self.sector)
        if self.kind is StateKind.MIXTURE:
            cat = self._component("cat", {"kind": "ghz"})
            sep = self._component("sep", {"kind": "thermal_x", "params": {"b": 0.0}})
            return mixture(float(self.params.get("w", 1.0)), cat, sep)
        raise ValueError(f"unhandled state kind {self.kind}")

    def _component(self, key: str, default: dict) -> np.ndarray:
        sub = dict(self.params.get(key, default))
        sub["n"] = self.n
        return StateSpec.from_dict(sub).density()

    def with_n(self, n: int) -> "StateSpec":
        return StateSpec(self.kind, n, dict(self.params))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "n": self.n, "params": dict(self.params)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StateSpec":
        return cls(StateKind(data["kind"]), int(data["n"]), dict(data.get("params", {})))

    @classmethod
    def from_json(cls, text: str) -> "StateSpec":
        return cls.from_dict(json.loads(text))


def sector_projector_check(rho: np.ndarray, n: int, m: int, tol: float = DEFAULT_TOL) -> bool:
    """True when eta_M rho eta_M == rho, i.e. rho has no weight outside sector ``m``."""
    outside = np.ones(2**n, dtype=bool)
    outside[sector_indices(n, m)] = False
    leak = max(np.max(np.abs(rho[outside, :]), initial=0.0), np.max(np.abs(rho[:, outside]), initial=0.0))
    return float(leak) <= tol
