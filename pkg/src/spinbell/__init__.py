"""Spin-lattice simulation and Bell-locality certification toolkit."""
from .lattice import Lattice, Region, build_lattice, region_distance, validate_disjoint
from .quantum import (GroundStateResult, Hamiltonian, HamiltonianSpec, LocalOperator,
                      ManyBodyState, Term, build_hamiltonian, embed, evolve_state, expect,
                      ground_state, pauli, product_state, reduce, thermal_state)

__version__ = "0.1.0"
