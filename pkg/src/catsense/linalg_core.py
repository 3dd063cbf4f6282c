"""
Dense complex linear algebra for N-qubit operators.

Basis convention: qubit 0 is the most significant bit of the computational
index, |0> is spin up with sigma_z|0> = +|0>, so the M_z eigenvalue of a bit
string is N - 2 * popcount.

Operators are plain ``numpy.ndarray`` objects. The ``check_*`` helpers
validate the invariants of density matrices, pure states and projectors and
hand the array back, so they can be used inline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-10

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


class InvalidOperatorError(ValueError):
    """An operator violates a structural invariant (shape, Hermiticity, ...)."""


def n_qubits(dim: int) -> int:
    """Number of qubits for a Hilbert space of dimension ``dim``."""
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise InvalidOperatorError(f"dimension {dim} is not a power of two")
    return n


def _square(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise InvalidOperatorError(f"expected a square matrix, got shape {x.shape}")
    n_qubits(x.shape[0])
    return x


def hermiticity_error(x: np.ndarray) -> float:
    return float(np.max(np.abs(x - x.conj().T))) if x.size else 0.0


def is_hermitian(x: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return hermiticity_error(x) <= tol


def check_density_matrix(rho: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, PSD (within ``tol * dim``).

    Returns the input as a complex array.
    """
    rho = _square(np.asarray(rho, dtype=complex))
    herm = hermiticity_error(rho)
    if herm > tol:
        raise InvalidOperatorError(f"density matrix not Hermitian (error {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise InvalidOperatorError(f"density matrix trace {tr} != 1")
    lowest = float(np.linalg.eigvalsh(rho)[0])
    if lowest < -tol * rho.shape[0]:
        raise InvalidOperatorError(f"density matrix not PSD (min eigenvalue {lowest:.3e})")
    return rho


def check_pure_state(psi: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise InvalidOperatorError("pure state must be a vector")
    n_qubits(psi.shape[0])
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > tol:
        raise InvalidOperatorError(f"state norm {norm} != 1")
    return psi


def check_projector(eta: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    eta = _square(np.asarray(eta, dtype=complex))
    if hermiticity_error(eta) > tol:
        raise InvalidOperatorError("projector not Hermitian")
    idem = float(np.max(np.abs(eta @ eta - eta))) if eta.size else 0.0
    if idem > tol:
        raise InvalidOperatorError(f"projector not idempotent (error {idem:.3e})")
    return eta


def projector(psi: np.ndarray) -> np.ndarray:
    """|psi><psi| for a vector, or the orthogonal projector onto the column span."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim == 1:
        return np.outer(psi, psi.conj())
    return psi @ psi.conj().T


def kron_embed(site_op: np.ndarray, site: int, n: int) -> np.ndarray:
    """Embed a single-qubit operator at ``site`` of an ``n``-qubit register."""
    site_op = np.asarray(site_op, dtype=complex)
    if site_op.shape != (2, 2):
        raise InvalidOperatorError("site operator must be 2x2")
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} qubits")
    left = np.eye(2**site, dtype=complex)
    right = np.eye(2 ** (n - site - 1), dtype=complex)
    return np.kron(np.kron(left, site_op), right)


def apply_local(mat: np.ndarray, site_ops: Sequence[np.ndarray | None]) -> np.ndarray:
    """Compute ``(u_0 (x) u_1 (x) ... ) @ mat`` without building the Kronecker product.

    ``mat`` may be a vector or a matrix with 2**n rows; ``None`` entries are
    treated as the identity.
    """
    mat = np.asarray(mat)
    n = len(site_ops)
    vector = mat.ndim == 1
    t = mat.reshape((2,) * n + (-1,))
    for site, u in enumerate(site_ops):
        if u is None:
            continue
        t = np.moveaxis(np.tensordot(u, t, axes=([1], [site])), 0, site)
    out = t.reshape(2**n, -1)
    return out[:, 0] if vector else out


def conjugate_local(mat: np.ndarray, site_ops: Sequence[np.ndarray | None]) -> np.ndarray:
    """``U mat U^dagger`` for ``U`` a tensor product of single-site operators."""
    left = apply_local(mat, site_ops)
    return apply_local(left.conj().T, site_ops).conj().T


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x, y = np.asarray(x), np.asarray(y)
    if x.shape != y.shape:
        raise InvalidOperatorError(f"dimension mismatch {x.shape} vs {y.shape}")
    return x @ y - y @ x


def nested_commutator(x: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """k-fold nested commutator [x, [x, ... [x, y]]]; k=0 returns y."""
    if k < 0:
        raise ValueError("nesting depth must be non-negative")
    out = np.asarray(y)
    for _ in range(k):
        out = commutator(x, out)
    return out


def eigh(h: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition with ascending eigenvalues.

    Real symmetric inputs are routed through the real solver, which is several
    times faster for large dimensions.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidOperatorError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if hermiticity_error(h) > tol * scale:
        raise InvalidOperatorError("eigh requires a Hermitian matrix")
    if np.iscomplexobj(h) and float(np.max(np.abs(h.imag), initial=0.0)) <= tol * scale:
        h = h.real
    h = (h + h.conj().T) / 2
    return np.linalg.eigh(h)


def op_norm(x: np.ndarray) -> float:
    """Largest singular value."""
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    if is_hermitian(x):
        return float(np.max(np.abs(np.linalg.eigvalsh(x))))
    return float(np.linalg.norm(x, 2))


@dataclass(frozen=True, eq=False)
class AdditiveObservable:
    """A = sum_l a(l), each a(l) a Hermitian involution on qubit l.

    Per-site eigendata is cached: ``site_eigvals[l]`` holds the eigenvalues of
    a(l) in the order (+1, -1) where possible, ``site_eigvecs[l]`` the matching
    eigenvectors as columns. Diagonal site operators keep the computational
    basis, so for M_z the eigenbasis rotation is the identity.
    """

    site_ops: tuple[np.ndarray, ...]
    label: str = "custom"
    tol: float = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self) -> None:
        ops = tuple(np.asarray(a, dtype=complex) for a in self.site_ops)
        if not ops:
            raise InvalidOperatorError("an additive observable needs at least one site")
        for l, a in enumerate(ops):
            if a.shape != (2, 2):
                raise InvalidOperatorError(f"site {l}: operator must be 2x2")
            if not is_hermitian(a, self.tol):
                raise InvalidOperatorError(f"site {l}: operator not Hermitian")
            if np.max(np.abs(a @ a - IDENTITY2)) > self.tol:
                raise InvalidOperatorError(f"site {l}: a(l)^2 != identity")
        object.__setattr__(self, "site_ops", ops)

    @classmethod
    def uniform(cls, op: np.ndarray, n: int, label: str = "custom") -> "AdditiveObservable":
        return cls(tuple(np.asarray(op, dtype=complex) for _ in range(n)), label)

    @classmethod
    def pauli(cls, axis: str, n: int) -> "AdditiveObservable":
        axis = axis.lower().removeprefix("m")
        if axis not in PAULI:
            raise ValueError(f"unknown Pauli axis {axis!r}")
        return cls.uniform(PAULI[axis], n, f"m{axis}")

    @property
    def n_sites(self) -> int:
        return len(self.site_ops)

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    @cached_property
    def is_diagonal(self) -> bool:
        return all(abs(a[0, 1]) <= self.tol for a in self.site_ops)

    @cached_property
    def _site_eigen(self) -> tuple[np.ndarray, np.ndarray]:
        vals = np.empty((self.n_sites, 2))
        vecs = np.empty((self.n_sites, 2, 2), dtype=complex)
        for l, a in enumerate(self.site_ops):
            if abs(a[0, 1]) <= self.tol:
                vals[l] = a.diagonal().real
                vecs[l] = IDENTITY2
            else:
                w, v = np.linalg.eigh(a)
                vals[l] = w[::-1]
                vecs[l] = v[:, ::-1]
        return vals, vecs

    @property
    def site_eigvals(self) -> np.ndarray:
        return self._site_eigen[0]

    @property
    def site_eigvecs(self) -> np.ndarray:
        return self._site_eigen[1]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalue of every eigenbasis product state, indexed like the computational basis."""
        out = np.zeros(1)
        for vals in self.site_eigvals:
            out = (out[:, None] + vals[None, :]).ravel()
        return out

    @cached_property
    def flip_mask(self) -> np.ndarray:
        """Bit mask of sites whose operator is not proportional to the identity."""
        mask = 0
        for l, vals in enumerate(self.site_eigvals):
            if abs(vals[0] - vals[1]) > self.tol:
                mask |= 1 << (self.n_sites - 1 - l)
        return np.int64(mask)

    def to_eigenbasis(self, mat: np.ndarray) -> np.ndarray:
        """Express a vector or operator in the product eigenbasis of A."""
        if self.is_diagonal:
            return np.asarray(mat, dtype=complex)
        adj = [v.conj().T for v in self.site_eigvecs]
        if np.ndim(mat) == 1:
            return apply_local(mat, adj)
        return conjugate_local(mat, adj)

    def from_eigenbasis(self, mat: np.ndarray) -> np.ndarray:
        if self.is_diagonal:
            return np.asarray(mat, dtype=complex)
        vecs = list(self.site_eigvecs)
        if np.ndim(mat) == 1:
            return apply_local(mat, vecs)
        return conjugate_local(mat, vecs)

    def vectors_from_eigenbasis(self, cols: np.ndarray) -> np.ndarray:
        """Map column vectors given in the A-eigenbasis to the computational basis."""
        if self.is_diagonal:
            return np.asarray(cols, dtype=complex)
        return apply_local(cols, list(self.site_eigvecs))

    def site_operator(self, site: int) -> np.ndarray:
        return kron_embed(self.site_ops[site], site, self.n_sites)


def total_observable(obs: AdditiveObservable) -> tuple[np.ndarray, np.ndarray | None]:
    """Dense matrix of A and, when every a(l) is diagonal, its diagonal vector."""
    dense = sum(obs.site_operator(l) for l in range(obs.n_sites))
    diag = obs.eigenvalues.copy() if obs.is_diagonal else None
    return dense, diag


def hamming_distance_matrix(n: int, mask: int | None = None) -> np.ndarray:
    """d[x, y] = popcount((x ^ y) & mask) as int8, for all 2**n basis labels."""
    idx = np.arange(2**n, dtype=np.int64)
    xor = idx[:, None] ^ idx[None, :]
    if mask is not None:
        xor &= mask
    return popcount(xor).astype(np.int8)


def popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(x)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count
