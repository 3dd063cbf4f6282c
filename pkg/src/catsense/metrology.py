"""
Ramsey sensitivity: readout probability, its omega-derivative, the
uncertainty estimate, analytic bounds, GHZ closed forms, interaction-time
optimization and log-log scaling fits.

Conventions: H0 = omega * A with site eigenvalues +-1, so a GHZ probe
accumulates the relative phase 2 N omega t. The GHZ reference formulas below
are written for H = (omega/2) sum sigma_z (phase N omega t);
``to_half_spin_convention`` converts between the two.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, Union

import numpy as np

from .evolution import coherence_factor, evolve_full, lambda_to_t2
from .linalg_core import AdditiveObservable, DEFAULT_TOL, check_pure_state, hamming_distance_matrix
from .macroscopicity import gap_matrix, loglog_fit, norm_of, optimal_eta
from .states import StateSpec, hamming_projector, sector_indices

GOLDEN = (math.sqrt(5) - 1) / 2
DEFAULT_P2 = 0.1
# below this P(1 - P) the ratio sqrt(P(1-P)) / |dP/domega| is round-off dominated
VARIANCE_FLOOR = 1e-10


class NumericalFailure(RuntimeError):
    """Objective or probability left its valid range."""


class DegenerateWorkingPoint(ValueError):
    """dP/domega vanishes, so the uncertainty is undefined."""


# ---------------------------------------------------------------------------
# dense-path quantities


def _trace_product(x_eig: np.ndarray, y_eig: np.ndarray) -> complex:
    """Tr(x y) from eigenbasis matrices without a matrix product."""
    return complex(np.sum(x_eig.T * y_eig))


def _probability_from(rho_t: np.ndarray, eta: np.ndarray, tol: float) -> float:
    p = _trace_product(eta, rho_t)
    if abs(p.imag) > tol * 10 or not -tol <= p.real <= 1 + tol:
        raise NumericalFailure(f"readout probability {p} outside [0, 1]")
    return float(min(1.0, max(0.0, p.real)))


def ramsey_probability(
    rho0: np.ndarray,
    obs: AdditiveObservable,
    eta: np.ndarray,
    omega: float,
    lam: float,
    t: float,
    tol: float = 1e-9,
) -> float:
    """P = Tr(eta rho(t)) from a full density-matrix evolution."""
    return _probability_from(evolve_full(rho0, obs, omega, lam, t), eta, tol)


def dpdw_analytic(
    rho0: np.ndarray,
    obs: AdditiveObservable,
    eta: np.ndarray,
    omega: float,
    lam: float,
    t: float,
    tol: float = 1e-9,
) -> float:
    """dP/domega = i t Tr(rho(t) [A, eta]).

    Exact because the dephasing channel commutes with the phase rotation.
    """
    rho_t = obs.to_eigenbasis(evolve_full(rho0, obs, omega, lam, t))
    comm = gap_matrix(obs) * obs.to_eigenbasis(eta)
    value = 1j * t * _trace_product(rho_t, comm)
    if abs(value.imag) > tol * max(1.0, abs(value.real)):
        raise NumericalFailure(f"dP/domega has imaginary part {value.imag:.3e}")
    return float(value.real)


def uncertainty(p: float, dpdw: float, t: float, total_time: float) -> float:
    """delta omega = sqrt(P (1 - P)) / |dP/domega| / sqrt(T / t)."""
    if dpdw == 0:
        raise DegenerateWorkingPoint("dP/domega = 0: uncertainty undefined")
    return math.sqrt(max(p * (1 - p), 0.0)) / abs(dpdw) / math.sqrt(total_time / t)


def richardson_derivative(f: Callable[[float], float], x: float, h: float, levels: int = 3) -> float:
    """Central differences at h, h/2, ... combined by Richardson extrapolation."""
    table = []
    for i in range(levels):
        step = h / 2**i
        row = [(f(x + step) - f(x - step)) / (2 * step)]
        for j in range(1, i + 1):
            row.append(row[j - 1] + (row[j - 1] - table[i - 1][j - 1]) / (4**j - 1))
        table.append(row)
    return table[-1][-1]


# ---------------------------------------------------------------------------
# compressed Ramsey kernel


class RamseySignal:
    """Exact Ramsey readout for a fixed (rho0, A, eta).

    The evolved probability is a short trigonometric sum

        P(omega, lam, t) = Re sum_{Delta, d} K[Delta, d] exp(-i omega t Delta) c(t)**d

    where K collects eta[y, x] * rho0[x, y] (A-eigenbasis) over pairs with
    eigenvalue gap Delta and d differing sites. Building K costs one pass over
    the density matrix; every later evaluation is O(N^2).
    """

    def __init__(self, rho0: np.ndarray, obs: AdditiveObservable, eta: np.ndarray):
        self.obs = obs
        self.n = obs.n_sites
        self.norm_a = norm_of(obs)
        eig = np.rint(obs.eigenvalues).astype(np.int64)
        if not np.allclose(eig, obs.eigenvalues):
            raise ValueError("site eigenvalues must be +-1")
        offset = int(eig.max() - eig.min())
        gap = eig[:, None] - eig[None, :] + offset
        dist = hamming_distance_matrix(self.n, int(obs.flip_mask)).astype(np.int64)
        weights = obs.to_eigenbasis(eta).T * obs.to_eigenbasis(rho0)
        n_gap = 2 * offset + 1
        flat = (gap * (self.n + 1) + dist).ravel()
        size = n_gap * (self.n + 1)
        kernel = np.bincount(flat, weights.real.ravel(), minlength=size) + 1j * np.bincount(
            flat, weights.imag.ravel(), minlength=size
        )
        kernel = kernel.reshape(n_gap, self.n + 1)
        keep = np.abs(kernel) > 0
        gi, di = np.nonzero(keep)
        self.gaps = (gi - offset).astype(float)
        self.dists = di.astype(float)
        self.coeffs = kernel[keep]

    @property
    def trace_first_commutator(self) -> complex:
        """Tr(rho0 [A, eta])."""
        return complex(-np.sum(self.gaps * self.coeffs))

    @property
    def trace_double_commutator(self) -> float:
        """Tr(rho0 [A, [A, eta]])."""
        return float(np.sum(self.gaps**2 * self.coeffs).real)

    def _terms(self, omega: float, lam: float, t: float) -> np.ndarray:
        c = coherence_factor(lam, t)
        damp = c**self.dists if c > 0 else (self.dists == 0).astype(float)
        return self.coeffs * np.exp(-1j * omega * t * self.gaps) * damp

    def probability(self, omega: float, lam: float, t: float) -> float:
        return float(min(1.0, max(0.0, np.sum(self._terms(omega, lam, t)).real)))

    def dpdw(self, omega: float, lam: float, t: float) -> float:
        return float(np.sum(-1j * t * self.gaps * self._terms(omega, lam, t)).real)

    def delta_sqrt_t(self, omega: float, lam: float, t: float) -> float:
        """delta omega * sqrt(T) (independent of T)."""
        terms = self._terms(omega, lam, t)
        p = min(1.0, max(0.0, float(np.sum(terms).real)))
        slope = float(np.sum(-1j * t * self.gaps * terms).real)
        if slope == 0 or p * (1 - p) < VARIANCE_FLOOR:
            return math.inf
        return math.sqrt(p * (1 - p)) * math.sqrt(t) / abs(slope)

    def report(self, omega: float, lam: float, t: float, total_time: float = 1.0) -> "SensitivityReport":
        p = self.probability(omega, lam, t)
        slope = self.dpdw(omega, lam, t)
        delta = uncertainty(p, slope, t, total_time) * math.sqrt(total_time) if slope else math.inf
        lower = lower_bound_from_traces(
            self.trace_double_commutator, self.trace_first_commutator, self.norm_a, omega, t
        )
        upper = upper_bound_from_traces(
            self.trace_double_commutator, self.trace_first_commutator, self.norm_a, self.n, omega, lam, t
        )
        return SensitivityReport(
            P=p,
            dP_domega=slope,
            delta_omega_sqrtT=delta,
            bound_lower_dPdw=lower,
            bound_upper_delta=upper,
            omega=omega,
            t_int=t,
            lam=lam,
        )


# ---------------------------------------------------------------------------
# analytic bounds


def _series_remainder(norm_a: float, omega: float, t: float) -> float:
    x = 2 * abs(omega) * t * norm_a
    return math.expm1(x) - x


def lower_bound_from_traces(double_tr: float, first_tr: complex, norm_a: float, omega: float, t: float) -> float:
    u = abs(omega * t**2 * double_tr)
    v = abs(1j * t * first_tr)
    return abs(u - v) - 2 * t * norm_a * _series_remainder(norm_a, omega, t)


def upper_bound_from_traces(
    double_tr: float,
    first_tr: complex,
    norm_a: float,
    n: int,
    omega: float,
    lam: float,
    t: float,
    u_override: float | None = None,
) -> float | None:
    """Dephased uncertainty bound; ``None`` when the bracket is not positive."""
    if u_override is None:
        u = abs(abs(omega * t * double_tr) / n - abs(first_tr) / n)
        u -= 2 * (norm_a / n) * _series_remainder(norm_a, omega, t)
    else:
        u = u_override
    weight = ((1 + coherence_factor(lam, t)) / 2) ** n
    bracket = u * weight - 2 * math.exp(2 * abs(omega) * t * norm_a) * (norm_a / n) * (1 - weight)
    if not bracket > 0:
        return None
    return 1.0 / (n * math.sqrt(t) * bracket)


def _traces(rho0: np.ndarray, obs: AdditiveObservable, eta: np.ndarray) -> tuple[float, complex]:
    rho_e = obs.to_eigenbasis(rho0)
    eta_e = obs.to_eigenbasis(eta)
    gap = gap_matrix(obs)
    first = _trace_product(rho_e, gap * eta_e)
    double = _trace_product(rho_e, gap**2 * eta_e)
    return float(double.real), first


def dpdw_lower_bound(rho0: np.ndarray, obs: AdditiveObservable, eta: np.ndarray, omega: float, t: float) -> float:
    """Noiseless lower bound on |dP/domega|; negative values mean the bound is vacuous."""
    double, first = _traces(rho0, obs, eta)
    return lower_bound_from_traces(double, first, norm_of(obs), omega, t)


def delta_upper_bound_dephasing(
    rho0: np.ndarray,
    obs: AdditiveObservable,
    eta: np.ndarray,
    omega: float,
    lam: float,
    t: float,
    u_mode: str = "numeric",
    p1: float | None = None,
) -> float | None:
    """Upper bound on delta omega * sqrt(T) under dephasing.

    ``u_mode="numeric"`` evaluates the leading coefficient from the traces of
    the single and double commutators; ``u_mode="p1"`` substitutes
    p1 * p2**2 with p2 = omega t N and an empirically calibrated ``p1``.
    """
    double, first = _traces(rho0, obs, eta)
    n = obs.n_sites
    if u_mode == "numeric":
        override = None
    elif u_mode == "p1":
        if p1 is None:
            raise ValueError("u_mode='p1' needs a calibrated p1")
        override = p1 * (omega * t * n) ** 2
    else:
        raise ValueError(f"unknown u_mode {u_mode!r}")
    return upper_bound_from_traces(double, first, norm_of(obs), n, omega, lam, t, override)


def estimate_p1(samples: Sequence[tuple[float, float, float, int]]) -> float:
    """Smallest observed |dP/domega| / (p2^2 t N) over (dPdw, p2, t, N) samples."""
    ratios = [abs(s) / (p2**2 * t * n) for s, p2, t, n in samples]
    if not ratios:
        raise ValueError("no samples to calibrate p1")
    return float(min(ratios))


# ---------------------------------------------------------------------------
# GHZ reference formulas (half-spin convention, phase N omega t)


# largest argument math.exp accepts without overflow
_EXP_MAX = 709.0


def ghz_closed_form(n: int, t: float, t2: float, total_time: float) -> float:
    """delta omega = exp(N t^2 / T2^2) / (N sqrt(T t))."""
    decay = 0.0 if math.isinf(t2) else n * t**2 / t2**2
    if decay > _EXP_MAX:
        return math.inf
    return math.exp(decay) / (n * math.sqrt(total_time * t))


def ghz_optimum(n: int, t2: float) -> tuple[float, float]:
    """(t*, min delta omega sqrt(T)) = (T2 / (2 sqrt N), sqrt(2) e^(1/4) / (N^(3/4) sqrt(T2)))."""
    if not (n > 0 and t2 > 0) or math.isinf(t2):
        raise ValueError("GHZ optimum needs positive N and finite T2")
    return t2 / (2 * math.sqrt(n)), math.sqrt(2) * math.exp(0.25) / (n**0.75 * math.sqrt(t2))


def to_half_spin_convention(delta_omega: float) -> float:
    """Map an uncertainty in omega (H = omega A) onto omega' with H = (omega'/2) A.

    omega' = 2 omega, so the uncertainty doubles.
    """
    return 2.0 * delta_omega


def ghz_probability(n: int, omega: float, lam: float, t: float) -> float:
    """(1 + exp(-2 N lam^2 t^2) cos(2 N omega t)) / 2 for the GHZ projector readout."""
    return 0.5 * (1 + coherence_factor(lam, t) ** n * math.cos(2 * n * omega * t))


def ghz_dpdw(n: int, omega: float, lam: float, t: float) -> float:
    return -n * t * coherence_factor(lam, t) ** n * math.sin(2 * n * omega * t)


def to_field_units(delta_omega_sqrt_t: float, gyromagnetic: float) -> float:
    """Convert (rad/s)/sqrt(Hz) to field units given d omega / d B."""
    return delta_omega_sqrt_t / gyromagnetic


# ---------------------------------------------------------------------------
# optimization


def golden_section(f: Callable[[float], float], a: float, b: float, rtol: float = 1e-10, max_iter: int = 500) -> float:
    """Minimize a unimodal ``f`` on [a, b]; returns the abscissa."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rtol * (abs(a) + abs(b)) / 2:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (a + b) / 2


@dataclass
class SensitivityReport:
    P: float
    dP_domega: float
    delta_omega_sqrtT: float
    bound_lower_dPdw: float | None = None
    bound_upper_delta: float | None = None
    t_opt: float | None = None
    omega: float | None = None
    t_int: float | None = None
    lam: float | None = None
    interior_minimum: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimizationResult:
    t_opt: float
    value: float
    interior: bool
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def minimize_over_log_grid(
    objective: Callable[[float], float],
    t_range: tuple[float, float],
    points: int = 60,
    rtol: float = 1e-6,
) -> OptimizationResult:
    """Log-grid scan, then golden-section refinement around the best grid point.

    A minimum on the grid edge is reported as such (``interior=False``) and
    not refined.
    """
    lo, hi = t_range
    if not 0 < lo < hi:
        raise ValueError("t_range must satisfy 0 < t_min < t_max")
    grid = np.geomspace(lo, hi, points)
    values = np.array([objective(t) for t in grid])
    if not np.all(np.isfinite(values)):
        bad = grid[~np.isfinite(values)]
        raise NumericalFailure(f"objective not finite at t = {bad[:3]}")
    i = int(np.argmin(values))
    if i in (0, points - 1):
        return OptimizationResult(float(grid[i]), float(values[i]), False, grid, values)
    log_f = lambda s: objective(math.exp(s))  # noqa: E731
    s_opt = golden_section(log_f, math.log(grid[i - 1]), math.log(grid[i + 1]), rtol=rtol * 1e-3)
    t_opt = math.exp(s_opt)
    value = objective(t_opt)
    if value > values[i]:
        t_opt, value = float(grid[i]), float(values[i])
    return OptimizationResult(t_opt, float(value), True, grid, values)


def fixed_p2_rule(p2: float, n: int) -> Callable[[float], float]:
    """omega(t) = p2 / (t N)."""
    return lambda t: p2 / (t * n)


def optimize_t(
    signal: RamseySignal,
    omega_rule: Callable[[float], float],
    lam: float,
    t_range: tuple[float, float],
    total_time: float = 1.0,
    points: int = 60,
) -> tuple[float, SensitivityReport]:
    """Minimize delta omega sqrt(T) over the interaction time."""
    result = minimize_over_log_grid(lambda t: signal.delta_sqrt_t(omega_rule(t), lam, t), t_range, points)
    report = signal.report(omega_rule(result.t_opt), lam, result.t_opt, total_time)
    report.t_opt = result.t_opt
    report.interior_minimum = result.interior
    return result.t_opt, report


def optimize_working_point(
    signal: RamseySignal,
    lam: float,
    t_range: tuple[float, float],
    p2_values: Sequence[float] = (DEFAULT_P2,),
    total_time: float = 1.0,
    points: int = 60,
) -> tuple[float, float, SensitivityReport]:
    """Best (p2, t) over a list of phase budgets, each optimized in t."""
    best = None
    for p2 in p2_values:
        t_opt, report = optimize_t(signal, fixed_p2_rule(p2, signal.n), lam, t_range, total_time, points)
        if best is None or report.delta_omega_sqrtT < best[2].delta_omega_sqrtT:
            best = (p2, t_opt, report)
    assert best is not None
    return best


def best_phase_omega(signal: RamseySignal, lam: float, t: float, points: int | None = None) -> float:
    """omega minimizing delta omega sqrt(T) at fixed t.

    P is pi-periodic in the accumulated phase omega t, so the phase is scanned
    over (0, pi) and the best grid cell refined by golden section. The grid
    resolves the fastest fringe, of period pi / (2 N).
    """
    points = points or 16 * signal.n + 48
    thetas = np.linspace(0.0, math.pi, points + 1)[1:-1]
    f = lambda theta: signal.delta_sqrt_t(theta / t, lam, t)  # noqa: E731
    values = np.array([f(x) for x in thetas])
    if not np.any(np.isfinite(values)):
        raise DegenerateWorkingPoint(f"no phase gives a finite uncertainty at t={t}")
    i = int(np.argmin(values))
    theta = golden_section(f, thetas[max(i - 1, 0)], thetas[min(i + 1, len(thetas) - 1)], rtol=1e-9)
    if f(theta) > values[i]:
        theta = thetas[i]
    return float(theta / t)


def phase_scan_rule(signal: RamseySignal, lam: float) -> Callable[[float], float]:
    """omega(t) from ``best_phase_omega``, for use with ``optimize_t``."""
    return lambda t: best_phase_omega(signal, lam, t)


def default_t_range(lam: float, n: int) -> tuple[float, float]:
    """Bracket around T2 / sqrt(N); for lam = 0 a fixed decade-wide window."""
    if lam == 0:
        return 1e-2, 1.0
    centre = lambda_to_t2(lam) / math.sqrt(n)
    return centre / 100, centre * 10


@dataclass
class ScalingFit:
    n_values: list[int]
    delta_values: list[float]
    slope: float
    stderr: float
    r_squared: float
    intercept: float = 0.0
    t_opt: list[float] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def fit_scaling(ns: Sequence[int], deltas: Sequence[float], t_opt: Sequence[float] | None = None) -> ScalingFit:
    if len(ns) < 4:
        raise ValueError("scaling fit needs at least four system sizes")
    slope, intercept, r2, se = loglog_fit(ns, deltas)
    return ScalingFit(list(ns), list(deltas), slope, se, r2, intercept, list(t_opt) if t_opt is not None else None)


EtaRule = Union[str, Callable[[np.ndarray, AdditiveObservable], np.ndarray]]


def majority_projector(n: int, axis: str = "y") -> np.ndarray:
    """Projector onto the positive eigenspace of the total spin along ``axis``."""
    obs = AdditiveObservable.pauli(axis, n)
    mask = (obs.eigenvalues > 0).astype(complex)
    return obs.from_eigenbasis(np.diag(mask))


def support_projector(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    vals, vecs = np.linalg.eigh(rho)
    keep = vecs[:, vals > tol * max(1.0, float(vals.max()))]
    return keep @ keep.conj().T


def readout_projector(rho: np.ndarray, obs: AdditiveObservable, rule: EtaRule) -> np.ndarray:
    """Readout eta for a state.

    Rules: ``"optimal"`` (positive eigenspace of [A, [A, rho]]), ``"self"``
    (support projector of rho), ``"sector"`` (the M_z sector holding rho),
    ``"majority"`` or ``"majority:<axis>"`` (positive total spin along axis,
    default y), or a callable ``(rho, obs) -> eta``.
    """
    if callable(rule):
        return rule(rho, obs)
    n = obs.n_sites
    if rule == "optimal":
        return optimal_eta(rho, obs)
    if rule == "self":
        return support_projector(rho)
    if rule == "sector":
        populated = np.flatnonzero(np.abs(np.diagonal(rho)) > 1e-12)
        for m in range(n, -n - 1, -2):
            if np.isin(populated, sector_indices(n, m)).all():
                return hamming_projector(n, m)
        raise ValueError("state is not confined to a single M_z sector")
    if rule.startswith("majority"):
        axis = rule.partition(":")[2] or "y"
        return majority_projector(n, axis)
    raise ValueError(f"unknown readout rule {rule!r}")


Family = Union[StateSpec, Callable[[int], np.ndarray]]


def _family_state(family: Family, n: int) -> np.ndarray:
    return family.with_n(n).density() if isinstance(family, StateSpec) else family(n)


def _family_obs(obs: str | Callable[[int], AdditiveObservable], n: int) -> AdditiveObservable:
    return AdditiveObservable.pauli(obs, n) if isinstance(obs, str) else obs(n)


def optimize_size(
    family: Family,
    obs: str | Callable[[int], AdditiveObservable],
    eta_rule: EtaRule,
    lam: float,
    n: int,
    fixed_t: float | None = None,
    p2: float | None = None,
    t_range: tuple[float, float] | None = None,
    total_time: float = 1.0,
    points: int = 60,
) -> SensitivityReport:
    """Best delta omega sqrt(T) for one system size.

    The working point is scanned over the accumulated phase unless ``p2`` is
    given. The interaction time is optimized unless ``fixed_t`` is given; a
    noiseless objective has no interior minimum, so lam = 0 needs ``fixed_t``.
    """
    rho = _family_state(family, n)
    a = _family_obs(obs, n)
    signal = RamseySignal(rho, a, readout_projector(rho, a, eta_rule))
    rule = phase_scan_rule(signal, lam) if p2 is None else fixed_p2_rule(p2, n)
    if fixed_t is not None:
        report = signal.report(rule(fixed_t), lam, fixed_t, total_time)
        report.t_opt = fixed_t
        return report
    if lam == 0:
        raise ValueError("noiseless optimization has no interior minimum; pass fixed_t")
    _, report = optimize_t(signal, rule, lam, t_range or default_t_range(lam, n), total_time, points)
    return report


def scaling_study(
    family: Family,
    obs: str | Callable[[int], AdditiveObservable],
    eta_rule: EtaRule,
    lam: float,
    ns: Sequence[int],
    fixed_t: float | None = None,
    p2: float | None = None,
    workers: int = 1,
    **kwargs,
) -> tuple[ScalingFit, list[SensitivityReport]]:
    """Per-N optimized delta omega sqrt(T) and its log-log slope.

    Sizes are evaluated independently (in a thread pool when ``workers > 1``)
    and assembled in the order of ``ns``.
    """
    ns = sorted(int(n) for n in ns)
    if len(ns) < 4:
        raise ValueError("scaling fit needs at least four system sizes")
    job = lambda n: optimize_size(family, obs, eta_rule, lam, n, fixed_t, p2, **kwargs)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(job, ns))
    else:
        reports = [job(n) for n in ns]
    deltas = [r.delta_omega_sqrtT for r in reports]
    return fit_scaling(ns, deltas, [r.t_opt for r in reports]), reports


def ghz_closed_form_scaling(
    ns: Sequence[int], t2: float, fixed_t: float | None = None, t_range_decades: float = 1.0
) -> ScalingFit:
    """Slope of the GHZ closed form, numerically minimized in t (or at ``fixed_t``)."""
    deltas, t_opts = [], []
    for n in ns:
        if fixed_t is not None:
            t_opts.append(fixed_t)
            deltas.append(ghz_closed_form(n, fixed_t, t2, 1.0))
            continue
        if math.isinf(t2):
            raise ValueError("infinite T2 has no optimum; pass fixed_t")
        centre = t2 / math.sqrt(n)
        span = 10**t_range_decades
        result = minimize_over_log_grid(lambda t: ghz_closed_form(n, t, t2, 1.0), (centre / span, centre * span))
        t_opts.append(result.t_opt)
        deltas.append(result.value)
    return fit_scaling(list(ns), deltas, t_opts)


def qfi_pure(psi: np.ndarray, obs_dense_or_obs, t: float) -> float:
    """4 t^2 Var_psi(A) for phase imprinting exp(-i omega A t)."""
    psi = check_pure_state(psi, tol=1e-8)
    if isinstance(obs_dense_or_obs, AdditiveObservable):
        psi_e = obs_dense_or_obs.to_eigenbasis(psi)
        probs = np.abs(psi_e) ** 2
        e = obs_dense_or_obs.eigenvalues
        mean = float(probs @ e)
        var = float(probs @ e**2) - mean**2
    else:
        a = np.asarray(obs_dense_or_obs)
        a_psi = a @ psi
        mean = float(np.vdot(psi, a_psi).real)
        var = float(np.vdot(a_psi, a_psi).real) - mean**2
    return 4 * t**2 * max(var, 0.0)


__all__ = [
    "best_phase_omega",
    "default_t_range",
    "ghz_closed_form_scaling",
    "majority_projector",
    "optimize_size",
    "phase_scan_rule",
    "readout_projector",
    "scaling_study",
    "support_projector",
    "DEFAULT_P2",
    "DegenerateWorkingPoint",
    "NumericalFailure",
    "OptimizationResult",
    "RamseySignal",
    "ScalingFit",
    "SensitivityReport",
    "DEFAULT_TOL",
    "delta_upper_bound_dephasing",
    "dpdw_analytic",
    "dpdw_lower_bound",
    "estimate_p1",
    "fit_scaling",
    "fixed_p2_rule",
    "ghz_closed_form",
    "ghz_dpdw",
    "ghz_optimum",
    "ghz_probability",
    "golden_section",
    "minimize_over_log_grid",
    "optimize_t",
    "optimize_working_point",
    "qfi_pure",
    "ramsey_probability",
    "richardson_derivative",
    "to_field_units",
    "to_half_spin_convention",
    "uncertainty",
]
