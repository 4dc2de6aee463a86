"""Named spin-1/2 models on nearest-neighbour bonds."""
from __future__ import annotations

import numpy as np

from .lattice import Lattice, Region
from .quantum import PAULI, HamiltonianSpec, Term, build_hamiltonian

X, Y, Z = PAULI["x"], PAULI["y"], PAULI["z"]


def _require_qubits(lattice):
    if lattice.local_dim != 2:
        raise ValueError("named models are defined for local_dim = 2")


def tfim(lattice: Lattice, J: float = 1.0, g: float = 1.0) -> HamiltonianSpec:
    """H = -J sum_<ij> Z_i Z_j - g sum_i X_i."""
    _require_qubits(lattice)
    terms = [Term(Region(b), -J * np.kron(Z, Z)) for b in lattice.neighbor_pairs()]
    terms += [Term(Region([i]), -g * X) for i in lattice.sites]
    return HamiltonianSpec(terms, name="tfim", params={"J": J, "g": g})


def xxz(lattice: Lattice, J: float = 1.0, Delta: float = 1.0, h: float = 0.0) -> HamiltonianSpec:
    """H = J sum_<ij> (X X + Y Y + Delta Z Z) - h sum_i Z_i."""
    _require_qubits(lattice)
    bond = J * (np.kron(X, X) + np.kron(Y, Y) + Delta * np.kron(Z, Z))
    terms = [Term(Region(b), bond) for b in lattice.neighbor_pairs()]
    if h:
        terms += [Term(Region([i]), -h * Z) for i in lattice.sites]
    return HamiltonianSpec(terms, name="xxz", params={"J": J, "Delta": Delta, "h": h})


def heisenberg(lattice: Lattice, J: float = 1.0, h: float = 0.0) -> HamiltonianSpec:
    spec = xxz(lattice, J=J, Delta=1.0, h=h)
    spec.name, spec.params = "heisenberg", {"J": J, "h": h}
    return spec


MODELS = {"tfim": tfim, "xxz": xxz, "heisenberg": heisenberg}


def model_hamiltonian(lattice: Lattice, name: str, **params):
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return build_hamiltonian(lattice, factory(lattice, **params))
