"""Frequently used states and seeded random-state generators."""
from __future__ import annotations

import numpy as np

from .quantum import PAULI, ManyBodyState, product_state

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)


def bell_state(which: str = "phi+") -> ManyBodyState:
    s = 1 / np.sqrt(2)
    vecs = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    return ManyBodyState(np.array(vecs[which], dtype=complex), 2, 2, "custom")


def singlet() -> ManyBodyState:
    return bell_state("psi-")


def ghz(n: int) -> ManyBodyState:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    return ManyBodyState(psi, n, 2, "custom")


def all_up(n: int) -> ManyBodyState:
    return product_state([UP] * n)


def werner(p: float) -> ManyBodyState:
    """p |psi-><psi-| + (1 - p) I/4."""
    rho = p * singlet().density_matrix() + (1 - p) * np.eye(4) / 4
    return ManyBodyState(rho, 2, 2, "custom")


def random_pure(n: int, rng, local_dim: int = 2) -> ManyBodyState:
    D = local_dim**n
    psi = rng.normal(size=D) + 1j * rng.normal(size=D)
    return ManyBodyState(psi / np.linalg.norm(psi), n, local_dim, "custom")


def random_density(dim: int, rng, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_product(n: int, rng, local_dim: int = 2) -> ManyBodyState:
    """Product of independent random full-rank local density matrices."""
    return product_state([random_density(local_dim, rng) for _ in range(n)])


def random_bell_diagonal(rng) -> ManyBodyState:
    """Mixture of the four Bell states with Dirichlet weights."""
    w = rng.dirichlet(np.ones(4))
    rho = sum(wi * bell_state(k).density_matrix()
              for wi, k in zip(w, ["phi+", "phi-", "psi+", "psi-"]))
    return ManyBodyState(rho, 2, 2, "custom")


def correlation_matrix(rho2: np.ndarray) -> np.ndarray:
    """T_ab = Tr(rho sigma_a x sigma_b) for a, b in x, y, z."""
    labels = "xyz"
    return np.array([[np.trace(rho2 @ np.kron(PAULI[a], PAULI[b])).real for b in labels]
                     for a in labels])
