"""Hilbert-space mechanics on a :class:`~spinbell.lattice.Lattice`.

Tensor ordering convention: ascending site id, site 0 is the leftmost
Kronecker factor, so the digit of site ``s`` in a basis index has weight
``d ** (n - 1 - s)``.
"""
from __future__ import annotations

import dataclasses
import functools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (ConvergenceFailure, DimensionCapExceeded, InvalidRegion,
                     InvalidState, NormViolation, OverlappingSupports,
                     RangeViolation, SiteCountMismatch)
from .lattice import DENSE_CAP, Lattice, Region, as_region, validate_disjoint

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
STATE_TOL = 1e-10
NORM_TOL = 1e-10
DEGENERACY_TOL = 1e-8
# above this dimension ground states / pure evolution default to Krylov
DENSE_SOLVER_MAX = 2**10

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _is_hermitian(m, tol=HERMITIAN_TOL):
    return np.allclose(m, m.conj().T, rtol=0, atol=tol * max(1.0, np.abs(m).max(initial=0)))


def _infer_local_dim(matrix_dim, n_sites):
    d = int(round(matrix_dim ** (1.0 / n_sites)))
    if d**n_sites != matrix_dim:
        raise InvalidRegion(f"matrix dimension {matrix_dim} does not fit {n_sites} sites")
    return d


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """Hermitian matrix acting on ``support`` (identity elsewhere)."""

    support: Region
    matrix: np.ndarray = field(repr=False)
    norm_bound_checked: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "support", as_region(self.support))
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        _infer_local_dim(m.shape[0], self.support.size)
        if not _is_hermitian(m):
            raise ValueError(f"operator {self.name or ''} on {self.support} is not Hermitian")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def local_dim(self) -> int:
        return _infer_local_dim(self.matrix.shape[0], self.support.size)

    @cached_property
    def norm(self) -> float:
        return float(np.abs(np.linalg.eigvalsh(self.matrix)).max())

    def checked(self) -> "LocalOperator":
        """Return this operator flagged as a valid measurement (norm <= 1)."""
        if self.norm > 1 + NORM_TOL:
            raise NormViolation(f"operator {self.name} on {self.support} has norm {self.norm:.6g} > 1")
        return dataclasses.replace(self, norm_bound_checked=True)

    def scaled(self, s: float) -> "LocalOperator":
        return LocalOperator(self.support, s * self.matrix, name=f"{s:g}*{self.name}")


def pauli(label: str, site) -> LocalOperator:
    """Single-site Pauli (``'x'``, ``'y'``, ``'z'`` or ``'i'``) on ``site``."""
    return LocalOperator(Region([int(site)]), PAULI[label.lower()], True, f"s{label.lower()}{site}")


def identity_operator(support, local_dim=2) -> LocalOperator:
    support = as_region(support)
    return LocalOperator(support, np.eye(local_dim**support.size), True, "id")


def _basis_digits(n_sites, local_dim):
    D = local_dim**n_sites
    idx = np.arange(D)
    weights = local_dim ** np.arange(n_sites - 1, -1, -1)
    return (idx[:, None] // weights[None, :]) % local_dim, weights


def embed_sparse(matrix, sites: Sequence[int], n_sites: int, local_dim: int = 2) -> sp.csr_matrix:
    """``matrix`` on ``sites`` tensored with identity elsewhere, as CSR."""
    matrix = np.asarray(matrix)
    sites = list(sites)
    k = len(sites)
    if sorted(sites) != sites or len(set(sites)) != k:
        raise InvalidRegion("sites must be strictly increasing")
    if sites and (sites[0] < 0 or sites[-1] >= n_sites):
        raise InvalidRegion(f"sites {sites} outside 0..{n_sites - 1}")
    digits, weights = _basis_digits(n_sites, local_dim)
    D = local_dim**n_sites
    dk = local_dim**k
    local_w = local_dim ** np.arange(k - 1, -1, -1)
    local_in = digits[:, sites] @ local_w  # (D,)
    base = np.arange(D) - digits[:, sites] @ weights[sites]
    local_digits, _ = _basis_digits(k, local_dim)
    out_offset = local_digits @ weights[sites]  # (dk,)
    rows = (base[:, None] + out_offset[None, :]).ravel()
    cols = np.repeat(np.arange(D), dk)
    data = matrix[np.arange(dk)[None, :], local_in[:, None]].ravel()
    keep = data != 0
    return sp.csr_matrix((data[keep], (rows[keep], cols[keep])), shape=(D, D))


def embed(op: LocalOperator, lattice: Lattice) -> np.ndarray:
    """Dense full-space matrix of ``op``."""
    region = lattice.check_region(op.support)
    if op.local_dim != lattice.local_dim:
        raise InvalidRegion("operator local dimension does not match lattice")
    return embed_sparse(op.matrix, region.sites, lattice.n_sites, lattice.local_dim).toarray()


def _operator_on(ops: Sequence[LocalOperator], region: Region, local_dim: int) -> np.ndarray:
    """Product of disjoint-support ``ops`` as a matrix on ``region``."""
    pos = {s: i for i, s in enumerate(region.sites)}
    out = None
    for op in ops:
        m = embed_sparse(op.matrix, [pos[s] for s in op.support.sites], region.size, local_dim)
        out = m if out is None else out @ m
    return out.toarray()


# ---------------------------------------------------------------------------
# Hamiltonians


@dataclass(frozen=True)
class Term:
    support: Region
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "support", as_region(self.support))
        m = np.asarray(self.matrix, dtype=complex)
        if not _is_hermitian(m):
            raise ValueError(f"interaction term on {self.support} is not Hermitian")
        object.__setattr__(self, "matrix", m)


@dataclass
class HamiltonianSpec:
    terms: list[Term]
    max_range: float = 2.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def interaction_range(self, lattice: Lattice) -> float:
        return max((lattice.diameter(t.support) for t in self.terms), default=0.0)


class Hamiltonian:
    """Assembled many-body Hamiltonian with a write-once spectrum cache."""

    def __init__(self, lattice: Lattice, matrix, spec: HamiltonianSpec | None = None):
        self.lattice = lattice
        self.spec = spec
        self.sparse = sp.csr_matrix(matrix)
        self.sparse.sum_duplicates()

    @property
    def dim(self):
        return self.sparse.shape[0]

    @cached_property
    def dense(self) -> np.ndarray:
        return self.sparse.toarray()

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Full eigendecomposition ``(energies, vectors)``; computed once."""
        if self.dim > DENSE_CAP:
            raise DimensionCapExceeded(f"dense eigendecomposition of dimension {self.dim}")
        m = self.dense
        if np.abs(m.imag).max(initial=0) == 0:
            m = m.real
        return np.linalg.eigh(m)


def as_hamiltonian(H, lattice: Lattice | None = None) -> Hamiltonian:
    if isinstance(H, Hamiltonian):
        return H
    m = sp.csr_matrix(H) if not sp.issparse(H) else H
    if lattice is None:
        D = m.shape[0]
        n = int(round(np.log2(D))) if D > 1 else 1
        from .lattice import build_lattice
        lattice = build_lattice(max(n, 1)) if 2**n == D else None
    return Hamiltonian(lattice, m)


def build_hamiltonian(lattice: Lattice, spec: HamiltonianSpec) -> Hamiltonian:
    """Sum of embedded interaction terms."""
    if lattice.dim > 2**20:
        raise DimensionCapExceeded(f"Hilbert space dimension {lattice.dim}")
    R = spec.interaction_range(lattice)
    if R > spec.max_range:
        raise RangeViolation(f"interaction range {R} exceeds configured max {spec.max_range}")
    D = lattice.dim
    H = sp.csr_matrix((D, D), dtype=complex)
    for term in spec.terms:
        region = lattice.check_region(term.support)
        if term.matrix.shape != (lattice.local_dim**region.size,) * 2:
            raise ValueError(f"term on {region} has shape {term.matrix.shape}")
        H = H + embed_sparse(term.matrix, region.sites, lattice.n_sites, lattice.local_dim)
    return Hamiltonian(lattice, H, spec)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class ManyBodyState:
    """Pure vector or density matrix on the full lattice Hilbert space."""

    data: np.ndarray = field(repr=False)
    n_sites: int
    local_dim: int = 2
    provenance: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        D = self.local_dim**self.n_sites
        if data.shape not in ((D,), (D, D)):
            raise InvalidState(f"state shape {data.shape} does not match dimension {D}")
        if data.ndim == 1:
            if abs(np.linalg.norm(data) - 1) > STATE_TOL:
                raise InvalidState("pure state is not normalised")
        else:
            if not np.allclose(data, data.conj().T, rtol=0, atol=STATE_TOL):
                raise InvalidState("density matrix is not Hermitian")
            if abs(np.trace(data).real - 1) > STATE_TOL:
                raise InvalidState("density matrix does not have unit trace")
            if D <= DENSE_SOLVER_MAX and np.linalg.eigvalsh(data).min() < -STATE_TOL:
                raise InvalidState("density matrix is not positive semidefinite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def kind(self) -> str:
        return "pure" if self.data.ndim == 1 else "mixed"

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def density_matrix(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)


@dataclass(frozen=True)
class GroundStateResult:
    energy: float
    gap: float
    state: ManyBodyState
    degenerate: bool
    distinct_gap: float


def ground_state(H, method: str = "auto", degeneracy_tol: float = DEGENERACY_TOL,
                 n_eigs: int = 6) -> GroundStateResult:
    """Lowest eigenpair and gap ``E1 - E0`` (``E1`` counted with multiplicity).

    ``distinct_gap`` is the distance to the next eigenvalue that differs from
    ``E0`` by more than ``degeneracy_tol`` (0 if the solver saw none).
    """
    H = as_hamiltonian(H)
    D = H.dim
    if method == "auto":
        method = "dense" if D <= DENSE_SOLVER_MAX else "krylov"
    if method == "dense" or D <= n_eigs + 1:
        evals, evecs = H.spectrum
    elif method == "krylov":
        try:
            evals, evecs = spla.eigsh(H.sparse, k=min(n_eigs, D - 2), which="SA", tol=0,
                                      v0=np.ones(D) / np.sqrt(D))
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceFailure(str(exc)) from exc
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
    else:
        raise ValueError(f"unknown method {method!r}")
    e0 = float(evals[0])
    gap = float(evals[1] - e0) if len(evals) > 1 else 0.0
    higher = evals[evals - e0 > degeneracy_tol]
    distinct = float(higher[0] - e0) if len(higher) else 0.0
    psi = np.asarray(evecs[:, 0], dtype=complex)
    psi /= np.linalg.norm(psi)
    # fix global phase for reproducibility
    k = int(np.argmax(np.abs(psi)))
    psi *= np.abs(psi[k]) / psi[k]
    n, d = _lattice_shape(H, D)
    state = ManyBodyState(psi, n, d, "ground", {"energy": e0})
    return GroundStateResult(e0, max(gap, 0.0), state, gap < degeneracy_tol, distinct)


def _lattice_shape(H: Hamiltonian, D):
    if H.lattice is not None:
        return H.lattice.n_sites, H.lattice.local_dim
    n = int(round(np.log2(D)))
    return n, 2


def thermal_state(H, beta: float) -> ManyBodyState:
    """Gibbs state ``exp(-beta H) / Tr exp(-beta H)``."""
    H = as_hamiltonian(H)
    if not (np.isfinite(beta) and beta >= 0):
        raise ValueError("beta must be finite and >= 0")
    if H.dim > DENSE_CAP:
        raise DimensionCapExceeded(f"thermal state of dimension {H.dim}")
    evals, evecs = H.spectrum
    w = np.exp(-beta * (evals - evals[0]))
    w /= w.sum()
    rho = (evecs * w) @ evecs.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    n, d = _lattice_shape(H, H.dim)
    return ManyBodyState(rho, n, d, "thermal", {"beta": float(beta)})


def product_state(local_states: Sequence, n_sites: int | None = None) -> ManyBodyState:
    """Tensor product of per-site kets (1-d) or density matrices (2-d)."""
    local = [np.asarray(s, dtype=complex) for s in local_states]
    if not local:
        raise SiteCountMismatch("need at least one local state")
    if n_sites is not None and len(local) != n_sites:
        raise SiteCountMismatch(f"got {len(local)} local states for {n_sites} sites")
    d = local[0].shape[0]
    if any(s.shape[0] != d for s in local):
        raise SiteCountMismatch("local states have different dimensions")
    if all(s.ndim == 1 for s in local):
        data = functools.reduce(np.kron, local)
    else:
        mats = [np.outer(s, s.conj()) if s.ndim == 1 else s for s in local]
        data = functools.reduce(np.kron, mats)
    return ManyBodyState(data, len(local), d, "product")


def evolve_state(H, state: ManyBodyState, t: float, method: str = "auto") -> ManyBodyState:
    """Schroedinger-picture evolution ``exp(-iHt) rho exp(iHt)``."""
    H = as_hamiltonian(H)
    params = {**state.params, "t": float(t), "initial": state.provenance}
    if t == 0:
        return dataclasses.replace(state, provenance="quench", params=params)
    if method == "auto":
        method = "krylov" if state.kind == "pure" and H.dim > DENSE_SOLVER_MAX else "eigh"
    if method == "krylov":
        if state.kind != "pure":
            raise ValueError("Krylov evolution only supports pure states")
        psi = spla.expm_multiply(-1j * t * H.sparse, np.array(state.data))
        psi /= np.linalg.norm(psi)
        return dataclasses.replace(state, data=psi, provenance="quench", params=params)
    if H.dim > DENSE_CAP:
        raise DimensionCapExceeded(f"dense evolution of dimension {H.dim}")
    evals, evecs = H.spectrum
    phase = np.exp(-1j * evals * t)
    if state.kind == "pure":
        out = evecs @ (phase * (evecs.conj().T @ state.data))
        out /= np.linalg.norm(out)
    else:
        U = (evecs * phase) @ evecs.conj().T
        out = U @ state.data @ U.conj().T
        out = 0.5 * (out + out.conj().T)
    return dataclasses.replace(state, data=out, provenance="quench", params=params)


def reduce(state: ManyBodyState, keep) -> np.ndarray:
    """Partial trace onto the sites of ``keep`` (kept in ascending order)."""
    keep = as_region(keep)
    n, d = state.n_sites, state.local_dim
    if keep.sites[-1] >= n:
        raise InvalidRegion(f"{keep} outside 0..{n - 1}")
    ks = list(keep.sites)
    rest = [s for s in range(n) if s not in keep]
    dk, dr = d ** len(ks), d ** len(rest)
    if state.kind == "pure":
        psi = state.data.reshape((d,) * n).transpose(ks + rest).reshape(dk, dr)
        rho = psi @ psi.conj().T
    else:
        t = state.data.reshape((d,) * (2 * n))
        perm = ks + rest + [n + s for s in ks] + [n + s for s in rest]
        rho = np.einsum("ajbj->ab", t.transpose(perm).reshape(dk, dr, dk, dr))
    return 0.5 * (rho + rho.conj().T)


def expect(state: ManyBodyState, operators: Sequence[LocalOperator]) -> float:
    """``Tr(rho O_1 ... O_n)`` for operators on pairwise disjoint supports."""
    if isinstance(operators, LocalOperator):
        operators = [operators]
    operators = list(operators)
    if not validate_disjoint([op.support for op in operators]):
        raise OverlappingSupports("operator supports overlap")
    union = functools.reduce(Region.union, (op.support for op in operators))
    rho = reduce(state, union)
    val = np.trace(rho @ _operator_on(operators, union, state.local_dim))
    return float(val.real)
