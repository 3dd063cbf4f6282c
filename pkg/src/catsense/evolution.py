"""
Exact Ramsey-stage dynamics: phase rotation under omega * A and independent
Gaussian dephasing through the same site operators.

The two maps commute, so everything is done in the interaction picture and no
time stepping is involved. With a(l)**2 = 1 the noisy part reduces to the
channel eps_l(rho) = p rho + (1 - p) a(l) rho a(l), with p = (1 + c) / 2 and
per-site coherence factor c(t) = exp(-2 lambda**2 t**2). In the A-eigenbasis
the whole map is elementwise:

    rho[x, y] -> rho[x, y] * exp(-i omega t (A_x - A_y)) * c**d(x, y)

where d counts the sites on which x and y differ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg_core import AdditiveObservable, apply_local, conjugate_local, hamming_distance_matrix, nested_commutator


@dataclass(frozen=True)
class NoiseModel:
    """Classical Gaussian noise of amplitude ``lam`` and correlation time ``tau_c``.

    With ``regime_check`` on, every evaluation asserts t <= tau_c / 10 so the
    Zeno-regime coherence factor is trustworthy.
    """

    lam: float
    tau_c: float = math.inf
    regime_check: bool = False

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError("noise amplitude must be non-negative")
        if not self.tau_c > 0:
            raise ValueError("correlation time must be positive")

    def check(self, t: float) -> None:
        if self.regime_check and t > self.tau_c / 10:
            raise ValueError(f"t={t} outside the Zeno regime (tau_c={self.tau_c})")

    @property
    def t2(self) -> float:
        return lambda_to_t2(self.lam)

    @classmethod
    def from_t2(cls, t2: float, **kwargs) -> "NoiseModel":
        return cls(t2_to_lambda(t2), **kwargs)


@dataclass(frozen=True)
class EvolutionConfig:
    omega: float
    t: float
    noise: NoiseModel | None = None

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError("interaction time must be non-negative")

    @property
    def lam(self) -> float:
        return 0.0 if self.noise is None else self.noise.lam


def lambda_to_t2(lam: float) -> float:
    """T2 = 1 / (sqrt(2) lambda), so that c(t) = exp(-(t / T2)**2)."""
    return math.inf if lam == 0 else 1.0 / (math.sqrt(2.0) * lam)


def t2_to_lambda(t2: float) -> float:
    return 0.0 if math.isinf(t2) else 1.0 / (math.sqrt(2.0) * t2)


def coherence_factor(lam: float, t: float) -> float:
    """Per-site coherence factor c(t) = exp(-2 lambda^2 t^2)."""
    return math.exp(-2.0 * lam**2 * t**2)


def _as_obs(obs: AdditiveObservable | np.ndarray) -> AdditiveObservable:
    if isinstance(obs, AdditiveObservable):
        return obs
    raise TypeError("expected an AdditiveObservable")


def phase_evolve(rho: np.ndarray, obs: AdditiveObservable, omega: float, t: float) -> np.ndarray:
    """exp(-i omega A t) rho exp(i omega A t)."""
    obs = _as_obs(obs)
    theta = omega * t
    if theta == 0:
        return np.array(rho, dtype=complex)
    if obs.is_diagonal:
        phase = np.exp(-1j * theta * obs.eigenvalues)
        return phase[:, None] * rho * phase.conj()[None, :]
    # a(l)^2 = 1 gives exp(-i theta a) = cos(theta) - i sin(theta) a per site
    units = [math.cos(theta) * np.eye(2) - 1j * math.sin(theta) * a for a in obs.site_ops]
    return conjugate_local(rho, units)


def dephase(rho: np.ndarray, obs: AdditiveObservable, lam: float, t: float) -> np.ndarray:
    """Apply eps_N(...eps_1(rho)) one site at a time."""
    obs = _as_obs(obs)
    c = coherence_factor(lam, t)
    if c == 1.0:
        return np.array(rho, dtype=complex)
    p = (1 + c) / 2
    out = np.array(rho, dtype=complex)
    n = obs.n_sites
    for site, a in enumerate(obs.site_ops):
        ops = [None] * n
        ops[site] = a
        flipped = apply_local(apply_local(out, ops).conj().T, ops).conj().T
        out = p * out + (1 - p) * flipped
    return out


def dephase_elementwise(rho: np.ndarray, obs: AdditiveObservable, lam: float, t: float) -> np.ndarray:
    """Same channel via the Hamming-distance form in the A-eigenbasis."""
    obs = _as_obs(obs)
    c = coherence_factor(lam, t)
    d = hamming_distance_matrix(obs.n_sites, int(obs.flip_mask))
    damped = obs.to_eigenbasis(rho) * c ** d.astype(float)
    return obs.from_eigenbasis(damped)


def evolve_full(rho0: np.ndarray, obs: AdditiveObservable, omega: float, lam: float, t: float) -> np.ndarray:
    """Dephase, then rotate. The maps commute, so the order is immaterial."""
    return phase_evolve(dephase(rho0, obs, lam, t), obs, omega, t)


def evolve(rho0: np.ndarray, obs: AdditiveObservable, config: EvolutionConfig) -> np.ndarray:
    """``evolve_full`` driven by an EvolutionConfig; enforces the noise model's regime check."""
    if config.noise is not None:
        config.noise.check(config.t)
    return evolve_full(rho0, obs, config.omega, config.lam, config.t)


def coherent_branch_weight(n: int, lam: float, t: float) -> float:
    """Weight ((1 + c) / 2)**N of the branch in which no site flipped."""
    return ((1 + coherence_factor(lam, t)) / 2) ** n


def bch_phase_series(
    eta: np.ndarray, obs_dense: np.ndarray, omega: float, t: float, k_max: int, norm_a: float | None = None
) -> tuple[np.ndarray, float]:
    """Truncated sum_k (i omega t)^k / k! [A, eta]_k for exp(i omega A t) eta exp(-i omega A t).

    Returns the partial sum and the size 2^k |A|^k |omega t|^k / k! of the
    first omitted term (k = k_max + 1), the scale of the truncation error for
    |2 omega t A| < 1.
    """
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    z = 1j * omega * t
    term = np.array(eta, dtype=complex)
    total = term.copy()
    coeff = 1.0 + 0j
    nested = term
    for k in range(1, k_max + 1):
        nested = nested_commutator(obs_dense, nested, 1)
        coeff *= z / k
        total = total + coeff * nested
    if norm_a is None:
        norm_a = float(np.max(np.abs(np.linalg.eigvalsh(obs_dense))))
    k = k_max + 1
    remainder = (2 * norm_a * abs(omega * t)) ** k / math.factorial(k)
    return total, remainder
