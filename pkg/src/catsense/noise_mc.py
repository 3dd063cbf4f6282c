"""
Monte Carlo oracle for classical Gaussian dephasing.

Each site sees an independent stationary Ornstein-Uhlenbeck signal f(t) with
unit variance and autocorrelation exp(-|t - t'| / tau_c), coupled through
lam * f(t) * a(l). The accumulated phase Phi = int_0^t f is Gaussian, so the
exact single-site coherence is E[exp(-2 i lam Phi)] = exp(-2 lam^2 chi(t))
with chi(t) = 2 [tau_c t - tau_c^2 (1 - exp(-t / tau_c))].

Random numbers: numpy's Philox4x64 counter-based generator, keyed by the
64-bit seed, with the trajectory index in the top counter word. Trajectory k
is therefore the same path regardless of batch size, worker count or order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg_core import AdditiveObservable, conjugate_local

MAX_SITES = 6
# cap on complex entries held at once when averaging conditional states
MEMORY_BUDGET = 2**26


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class OUTrajectory:
    dt: float
    values: np.ndarray = field(repr=False)
    seed: int

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.values))


@dataclass(frozen=True)
class MCEstimate:
    mean: complex | float | np.ndarray
    stderr: float | np.ndarray
    n_traj: int

    def z_score(self, exact) -> float | np.ndarray:
        """(mean - exact) / stderr; entries with zero stderr score 0 when equal, inf otherwise."""
        diff = np.abs(np.asarray(self.mean) - np.asarray(exact))
        err = np.asarray(self.stderr, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(err > 0, diff / np.where(err > 0, err, 1.0), np.where(diff <= 1e-12, 0.0, np.inf))
        return float(z) if z.ndim == 0 else z


def trajectory_generator(seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for trajectory ``index``."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, index]))


def _ou_from_normals(xi: np.ndarray, alpha: float) -> np.ndarray:
    """Exact AR(1) recursion along the last axis; xi[..., 0] seeds the stationary start."""
    out = np.empty_like(xi)
    out[..., 0] = xi[..., 0]
    kick = math.sqrt(1 - alpha**2)
    for k in range(1, xi.shape[-1]):
        out[..., k] = alpha * out[..., k - 1] + kick * xi[..., k]
    return out


def _check_grid(tau_c: float, dt: float) -> None:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not tau_c > 0:
        raise ValueError("tau_c must be positive")


def ou_sample(tau_c: float, dt: float, n_steps: int, seed: int, index: int = 0) -> OUTrajectory:
    """One stationary OU path f(0), f(dt), ..., f(n_steps dt)."""
    _check_grid(tau_c, dt)
    xi = trajectory_generator(seed, index).standard_normal(n_steps + 1)
    return OUTrajectory(dt, _ou_from_normals(xi, math.exp(-dt / tau_c)), seed)


def ou_batch(tau_c: float, dt: float, n_steps: int, seed: int, indices: np.ndarray, n_sites: int = 1) -> np.ndarray:
    """Paths for many trajectories, shape (len(indices), n_sites, n_steps + 1).

    Row i is fully determined by (seed, indices[i]); sites of one trajectory
    take consecutive draws from that trajectory's stream.
    """
    _check_grid(tau_c, dt)
    xi = np.stack(
        [trajectory_generator(seed, int(k)).standard_normal((n_sites, n_steps + 1)) for k in indices]
    )
    return _ou_from_normals(xi, math.exp(-dt / tau_c))


def phase_integral(paths: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoidal integral of each path over its full grid (last axis)."""
    return dt * (paths.sum(axis=-1) - 0.5 * (paths[..., 0] + paths[..., -1]))


def chi(t: float, tau_c: float) -> float:
    """Variance of int_0^t f: 2 [tau_c t - tau_c^2 (1 - exp(-t / tau_c))]."""
    if math.isinf(tau_c):
        return t * t
    x = t / tau_c
    # expm1 form keeps full precision for t << tau_c
    return 2 * tau_c**2 * (x + math.expm1(-x))


def exact_coherence(lam: float, t: float, tau_c: float) -> float:
    return math.exp(-2 * lam**2 * chi(t, tau_c))


def default_dt(t: float, tau_c: float) -> float:
    """Largest step with dt <= tau_c / 100 and dt <= t / 50."""
    return min(tau_c / 100, t / 50)


def _grid(t: float, dt: float | None, tau_c: float) -> tuple[int, float]:
    if not t > 0:
        raise ValueError("t must be positive")
    dt = default_dt(t, tau_c) if dt is None else dt
    n_steps = max(1, round(t / dt))
    return n_steps, t / n_steps


def _mean_and_stderr(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.full(np.shape(mean), np.inf)
    # complex samples: std of real and imaginary parts combined in quadrature
    std = np.sqrt(samples.real.var(axis=0, ddof=1) + samples.imag.var(axis=0, ddof=1))
    return mean, std / math.sqrt(n)


def coherence_mc(
    lam: float,
    tau_c: float,
    t: float,
    dt: float | None = None,
    n_traj: int = 10_000,
    seed: int = 0,
) -> MCEstimate:
    """Estimate E[exp(-2 i lam Phi)] for one site.

    ``dt`` is adjusted so that t is an integer number of steps.
    """
    if lam == 0:
        return MCEstimate(1.0 + 0j, 0.0, n_traj)
    n_steps, dt = _grid(t, dt, tau_c)
    paths = ou_batch(tau_c, dt, n_steps, seed, np.arange(n_traj))[:, 0]
    samples = np.exp(-2j * lam * phase_integral(paths, dt))
    mean, err = _mean_and_stderr(samples)
    return MCEstimate(complex(mean), float(err), n_traj)


def mc_dephase(
    rho0: np.ndarray,
    obs: AdditiveObservable,
    lam: float,
    tau_c: float,
    t: float,
    dt: float | None = None,
    n_traj: int = 10_000,
    seed: int = 0,
    batch: int = 512,
) -> MCEstimate:
    """Trajectory average of prod_l exp(-i lam Phi_l a(l)) rho0 (...)^dagger.

    Returns the averaged density matrix with elementwise standard errors.
    Trajectories are summed in index order; ``batch`` changes only rounding.
    """
    n = obs.n_sites
    if n > MAX_SITES:
        raise BudgetExceeded(f"Monte Carlo dephasing is limited to {MAX_SITES} sites")
    if rho0.shape != (obs.dim, obs.dim):
        raise ValueError("state dimension does not match the observable")
    if lam == 0:
        return MCEstimate(np.array(rho0, dtype=complex), np.zeros(rho0.shape), n_traj)
    batch = max(1, min(batch, MEMORY_BUDGET // obs.dim**2))
    n_steps, dt = _grid(t, dt, tau_c)

    # in the A-eigenbasis each unitary is diagonal: phase exp(-i lam sum_l Phi_l s_l(x))
    rho_e = obs.to_eigenbasis(np.asarray(rho0, dtype=complex))
    signs = 1 - 2 * ((np.arange(obs.dim)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)
    basis = None if obs.is_diagonal else obs.vectors_from_eigenbasis(np.eye(obs.dim, dtype=complex))
    total = np.zeros_like(rho_e)
    total_sq = np.zeros(rho_e.shape)
    for start in range(0, n_traj, batch):
        idx = np.arange(start, min(start + batch, n_traj))
        phi = phase_integral(ou_batch(tau_c, dt, n_steps, seed, idx, n), dt)
        phase = np.exp(-1j * lam * phi @ signs.T)
        states = phase[:, :, None] * rho_e[None] * phase.conj()[:, None, :]
        if basis is not None:
            states = basis @ states @ basis.conj().T
        total += states.sum(axis=0)
        total_sq += (states.real**2 + states.imag**2).sum(axis=0)
    mean = total / n_traj
    var = np.maximum(total_sq / n_traj - np.abs(mean) ** 2, 0.0) * n_traj / max(n_traj - 1, 1)
    return MCEstimate(mean, np.sqrt(var / n_traj), n_traj)


def conditional_state(rho0: np.ndarray, obs: AdditiveObservable, lam: float, phases: np.ndarray) -> np.ndarray:
    """State after one noise realization with integrated phases ``phases`` (one per site)."""
    units = [math.cos(lam * p) * np.eye(2) - 1j * math.sin(lam * p) * a for p, a in zip(phases, obs.site_ops)]
    return conjugate_local(np.asarray(rho0, dtype=complex), units)


def zeno_deviation(lam: float, tau_c: float, t: float, estimate: MCEstimate) -> float:
    """|E[coh] - exp(-2 lam^2 t^2)| / (1 - exp(-2 lam^2 t^2))."""
    zeno = math.exp(-2 * lam**2 * t**2)
    return abs(complex(estimate.mean) - zeno) / (1 - zeno)


__all__ = [
    "BudgetExceeded",
    "MCEstimate",
    "OUTrajectory",
    "chi",
    "coherence_mc",
    "conditional_state",
    "default_dt",
    "exact_coherence",
    "mc_dephase",
    "ou_batch",
    "ou_sample",
    "phase_integral",
    "trajectory_generator",
    "zeno_deviation",
]
