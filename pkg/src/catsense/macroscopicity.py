"""
Index-q diagnostics.

Everything is evaluated in the product eigenbasis of the additive observable
A, where the double commutator is elementwise:
``[A, [A, X]][x, y] = (A_x - A_y)**2 * X[x, y]``. Rows of ``[A, [A, rho]]``
that vanish identically carry zero eigenvalues, so the eigenproblem is solved
only on the support of the double commutator. For low-rank states the range
of D lies in span(V, Lambda V, Lambda^2 V) with V spanning the range of rho,
which shrinks the eigenproblem to at most three times the rank. All
reductions are exact up to rounding; the low-rank one is verified before use.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import linalg, stats

from .linalg_core import AdditiveObservable, DEFAULT_TOL, eigh, op_norm
from .states import StateSpec

_SUPPORT_CUT = 1e-14
_RANK_CUT = 1e-12
# below this block size the dense solve is already cheap
_LOW_RANK_MIN_DIM = 256


@dataclass(eq=False)
class CommutatorSpectrum:
    """Eigendecomposition of D = [A, [A, rho]].

    ``block_values``/``block_vectors`` solve D restricted to ``support`` (labels
    of the A-eigenbasis); every label outside the support is an eigenvector
    with eigenvalue zero. When ``frame`` is set, its orthonormal columns
    (support coordinates) span the range of D and ``block_vectors`` are
    expressed in that frame; the rest of the support is a zero eigenspace.
    """

    obs: AdditiveObservable
    support: np.ndarray
    block_values: np.ndarray
    block_vectors: np.ndarray
    frame: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.obs.dim

    @property
    def eigenvalues(self) -> np.ndarray:
        zeros = np.zeros(self.dim - len(self.block_values))
        return np.sort(np.concatenate([self.block_values, zeros]))

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.block_values), initial=0.0))

    @property
    def cutoff(self) -> float:
        return self.dim * np.finfo(float).eps * self.norm

    def positive_mask(self, cutoff: float | None = None) -> np.ndarray:
        cut = self.cutoff if cutoff is None else cutoff
        return self.block_values > cut

    def positive_eigensum(self, cutoff: float | None = None) -> float:
        return float(np.sum(self.block_values[self.positive_mask(cutoff)]))

    def positive_vectors(self, cutoff: float | None = None, eigenbasis: bool = False) -> np.ndarray:
        """Eigenvectors with positive eigenvalue as columns, full-space coordinates."""
        block = self.block_vectors[:, self.positive_mask(cutoff)]
        if self.frame is not None:
            block = self.frame @ block
        out = np.zeros((self.dim, block.shape[1]), dtype=complex)
        out[self.support] = block
        return out if eigenbasis else self.obs.vectors_from_eigenbasis(out)

    def eigenvectors(self) -> np.ndarray:
        """All eigenvectors as columns (computational basis), ordered like ``eigenvalues``."""
        outside = np.setdiff1d(np.arange(self.dim), self.support)
        block_vals, block_vecs = self.block_values, self.block_vectors
        if self.frame is not None:
            rest = linalg.null_space(self.frame.conj().T)
            block_vecs = np.hstack([self.frame @ block_vecs, rest])
            block_vals = np.concatenate([block_vals, np.zeros(rest.shape[1])])
        vals = np.concatenate([block_vals, np.zeros(len(outside))])
        cols = np.zeros((self.dim, self.dim), dtype=complex)
        cols[np.ix_(self.support, np.arange(len(self.support)))] = block_vecs
        cols[outside, len(self.support) + np.arange(len(outside))] = 1.0
        order = np.argsort(vals, kind="stable")
        return self.obs.vectors_from_eigenbasis(cols[:, order])


def _check_dims(rho: np.ndarray, obs: AdditiveObservable) -> None:
    if rho.shape != (obs.dim, obs.dim):
        raise ValueError(f"state of shape {rho.shape} does not match {obs.n_sites} sites")


def gap_matrix(obs: AdditiveObservable) -> np.ndarray:
    """Delta[x, y] = A_x - A_y in the A-eigenbasis."""
    e = obs.eigenvalues
    return e[:, None] - e[None, :]


def double_commutator_eigenbasis(rho: np.ndarray, obs: AdditiveObservable) -> np.ndarray:
    """[A, [A, rho]] expressed in the A-eigenbasis."""
    _check_dims(rho, obs)
    return gap_matrix(obs) ** 2 * obs.to_eigenbasis(rho)


def double_commutator_spectrum(rho: np.ndarray, obs: AdditiveObservable) -> CommutatorSpectrum:
    d = double_commutator_eigenbasis(rho, obs)
    scale = float(np.max(np.abs(d), initial=0.0))
    if scale == 0.0:
        empty = np.zeros(0, dtype=np.int64)
        return CommutatorSpectrum(obs, empty, np.zeros(0), np.zeros((0, 0)))
    support = np.flatnonzero(np.max(np.abs(d), axis=1) > _SUPPORT_CUT * scale)
    block = d[np.ix_(support, support)]
    frame = _low_rank_frame(obs.to_eigenbasis(rho), obs.eigenvalues, support)
    if frame is not None:
        vals, vecs = eigh(frame.conj().T @ block @ frame, tol=1e-9)
        return CommutatorSpectrum(obs, support, vals, vecs, frame)
    vals, vecs = eigh(block, tol=1e-9)
    return CommutatorSpectrum(obs, support, vals, vecs)


def _range_basis(rho: np.ndarray, max_rank: int) -> np.ndarray | None:
    """Orthonormal basis of range(rho) by a seeded random sketch, or None if rank > max_rank."""
    dim = rho.shape[0]
    scale = float(np.max(np.abs(rho)))
    rng = np.random.default_rng(0)
    k = min(8, max_rank + 1)
    while True:
        sketch = rho @ (rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k)))
        u, s, _ = np.linalg.svd(sketch, full_matrices=False)
        keep = s > _RANK_CUT * s[0] if s.size and s[0] > 0 else np.zeros(0, dtype=bool)
        rank = int(keep.sum())
        if rank < k:
            basis = u[:, keep]
            residual = rho - basis @ (basis.conj().T @ rho)
            if float(np.max(np.abs(residual), initial=0.0)) <= _RANK_CUT * scale:
                return basis
        if rank > max_rank or k > max_rank:
            return None
        k = min(4 * k, max_rank + 1)


def _low_rank_frame(rho_eig: np.ndarray, spectrum: np.ndarray, support: np.ndarray) -> np.ndarray | None:
    """Orthonormal columns (support coordinates) spanning range(D), when that is much smaller than the support."""
    if len(support) < _LOW_RANK_MIN_DIM:
        return None
    basis = _range_basis(rho_eig, len(support) // 12)
    if basis is None:
        return None
    lam = spectrum[:, None]
    krylov = np.hstack([basis, lam * basis, lam**2 * basis])[support]
    u, s, _ = np.linalg.svd(krylov, full_matrices=False)
    return u[:, s > _RANK_CUT * s[0]]


def optimal_eta(rho: np.ndarray, obs: AdditiveObservable, spectrum: CommutatorSpectrum | None = None) -> np.ndarray:
    """Projector onto the positive eigenspace of [A, [A, rho]] (computational basis)."""
    spectrum = spectrum or double_commutator_spectrum(rho, obs)
    v = spectrum.positive_vectors()
    return v @ v.conj().T


def cat_value(rho: np.ndarray, obs: AdditiveObservable, eta: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """Tr(rho [A, [A, eta]])."""
    _check_dims(rho, obs)
    inner = gap_matrix(obs) ** 2 * obs.to_eigenbasis(eta)
    value = np.sum(obs.to_eigenbasis(rho).T * inner)
    scale = max(1.0, abs(value.real))
    if abs(value.imag) > tol * scale * obs.dim:
        raise ValueError(f"cat value has imaginary part {value.imag:.3e}; inputs not Hermitian?")
    return float(value.real)


@dataclass
class CatDiagnostic:
    state_spec: dict | None
    observable_label: str
    positive_eigensum: float
    cat_value: float
    eta_rank: int
    n_sites: int

    def to_dict(self) -> dict:
        return asdict(self)


def diagnose(rho: np.ndarray, obs: AdditiveObservable, spec: StateSpec | None = None) -> CatDiagnostic:
    spectrum = double_commutator_spectrum(rho, obs)
    eta = optimal_eta(rho, obs, spectrum)
    return CatDiagnostic(
        state_spec=spec.to_dict() if spec is not None else None,
        observable_label=obs.label,
        positive_eigensum=spectrum.positive_eigensum(),
        cat_value=cat_value(rho, obs, eta),
        eta_rank=int(spectrum.positive_mask().sum()),
        n_sites=obs.n_sites,
    )


@dataclass
class QFit:
    n_values: list[int]
    values: list[float]
    slope: float
    intercept: float
    r_squared: float
    stderr: float

    def to_dict(self) -> dict:
        return asdict(self)


def loglog_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float, float]:
    """Least-squares line through (log x, log y): slope, intercept, r^2, slope stderr."""
    res = stats.linregress(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)))
    return float(res.slope), float(res.intercept), float(res.rvalue**2), float(res.stderr)


def q_fit(
    family: StateSpec | Callable[[int], np.ndarray],
    obs_label: str | Callable[[int], AdditiveObservable],
    ns: Iterable[int],
) -> QFit:
    """Fit q from max(N, positive eigensum) over a family of states.

    ``family`` is a StateSpec (rebuilt at each N) or a callable N -> rho;
    ``obs_label`` is a Pauli label ('mz', 'mx', 'my') or a callable N -> A.
    """
    ns = sorted(int(n) for n in ns)
    if len(ns) < 3:
        raise ValueError("q fit needs at least three system sizes")
    values = []
    for n in ns:
        rho = family.with_n(n).density() if isinstance(family, StateSpec) else family(n)
        obs = AdditiveObservable.pauli(obs_label, n) if isinstance(obs_label, str) else obs_label(n)
        values.append(max(float(n), double_commutator_spectrum(rho, obs).positive_eigensum()))
    slope, intercept, r2, se = loglog_fit(ns, values)
    return QFit(ns, values, slope, intercept, r2, se)


def norm_of(obs: AdditiveObservable) -> float:
    """Operator norm of A, read off the eigenbasis."""
    return float(np.max(np.abs(obs.eigenvalues)))


__all__ = [
    "CommutatorSpectrum",
    "CatDiagnostic",
    "QFit",
    "cat_value",
    "diagnose",
    "double_commutator_spectrum",
    "loglog_fit",
    "norm_of",
    "op_norm",
    "optimal_eta",
    "q_fit",
]
