"""Evaluation of Bell functionals on many-body states."""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InvalidState, OverlappingSupports, ShapeMismatch
from ..lattice import Region, as_region, validate_disjoint
from ..quantum import LocalOperator, ManyBodyState, embed_sparse, expect, reduce
from ..states import correlation_matrix
from .inequality import BellInequality


@dataclass(frozen=True)
class MeasurementAssignment:
    """Per party: a region and its list of norm-bounded measurement operators."""

    regions: tuple[Region, ...]
    operators: tuple[tuple[LocalOperator, ...], ...]

    def __init__(self, regions, operators):
        regions = tuple(as_region(r) for r in regions)
        operators = tuple(tuple(op.checked() for op in ops) for ops in operators)
        if len(regions) != len(operators):
            raise ShapeMismatch("one operator list per region required")
        if not validate_disjoint(regions):
            raise OverlappingSupports("party regions overlap")
        for reg, ops in zip(regions, operators):
            for op in ops:
                if not set(op.support.sites) <= set(reg.sites):
                    raise OverlappingSupports(f"operator on {op.support} leaves its region {reg}")
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "operators", operators)

    def check_against(self, ineq: BellInequality):
        if len(self.regions) != ineq.n_parties:
            raise ShapeMismatch(f"{len(self.regions)} parties assigned, inequality has {ineq.n_parties}")
        counts = tuple(len(ops) for ops in self.operators)
        if counts != ineq.settings:
            raise ShapeMismatch(f"setting counts {counts} differ from {ineq.settings}")

    def matrices(self, local_dim: int = 2) -> list[list[np.ndarray]]:
        """Operators lifted to full matrices on their party's region."""
        out = []
        for reg, ops in zip(self.regions, self.operators):
            pos = {s: n for n, s in enumerate(reg.sites)}
            out.append([embed_sparse(op.matrix, [pos[s] for s in op.support.sites],
                                     reg.size, local_dim).toarray() for op in ops])
        return out


class PartyNetwork:
    """Reduced state on the union of party regions, one tensor leg per party.

    ``rho[a_1..a_N, b_1..b_N]`` with ket legs ``a_i`` and bra legs ``b_i``.
    """

    def __init__(self, state: ManyBodyState, regions: Sequence):
        regions = [as_region(r) for r in regions]
        if not validate_disjoint(regions):
            raise OverlappingSupports("party regions overlap")
        self.regions = regions
        self.local_dim = d = state.local_dim
        union = functools.reduce(Region.union, regions)
        rho = reduce(state, union)
        order = [union.sites.index(s) for reg in regions for s in reg.sites]
        k = union.size
        self.dims = [d**reg.size for reg in regions]
        self.rho = (rho.reshape((d,) * (2 * k))
                    .transpose(order + [k + o for o in order])
                    .reshape(self.dims + self.dims))
        self.n = len(regions)

    def _operands(self, mats: dict[int, np.ndarray], skip=None):
        n = self.n
        ket = list(range(n))
        bra = [n + i if (i in mats or i == skip) else i for i in range(n)]
        args = [self.rho, ket + bra]
        for i, m in mats.items():
            args += [m, [n + i, i]]
        return args

    def correlator(self, mats: dict[int, np.ndarray]) -> float:
        """Tr(rho prod_i E_i); parties absent from ``mats`` are traced out."""
        val = np.einsum(*self._operands(mats), [])
        return float(np.real(val))

    def operand(self, party: int, mats: dict[int, np.ndarray]) -> np.ndarray:
        """Effective operand K with Tr(E K) = Tr(rho E (x) others)."""
        args = self._operands({i: m for i, m in mats.items() if i != party}, skip=party)
        return np.einsum(*args, [party, self.n + party])


def _term_value(net: PartyNetwork, mats, parties, ks) -> float:
    return net.correlator({i: mats[i][k] for i, k in zip(parties, ks)})


def general_value(state: ManyBodyState, ineq: BellInequality,
                  meas: MeasurementAssignment) -> float:
    """Sum of coefficient-weighted correlators over all terms."""
    meas.check_against(ineq)
    net = PartyNetwork(state, meas.regions)
    mats = meas.matrices(state.local_dim)
    return float(sum(c * _term_value(net, mats, p, ks) for p, ks, c in ineq.terms()))


def bell2_value(state: ManyBodyState, ineq: BellInequality,
                meas: MeasurementAssignment) -> float:
    if not ineq.is_two_body:
        raise ShapeMismatch("bell2_value needs a one- and two-body inequality")
    return general_value(state, ineq, meas)


def chsh_value(state: ManyBodyState, A0: LocalOperator, A1: LocalOperator,
               B0: LocalOperator, B1: LocalOperator) -> float:
    """<A0B0> + <A0B1> + <A1B0> - <A1B1>."""
    for op in (A0, A1, B0, B1):
        op.checked()
    for a in (A0, A1):
        for b in (B0, B1):
            if not a.support.isdisjoint(b.support):
                raise OverlappingSupports(f"{a.support} overlaps {b.support}")
    return (expect(state, [A0, B0]) + expect(state, [A0, B1])
            + expect(state, [A1, B0]) - expect(state, [A1, B1]))


def horodecki_spin_sup(rho) -> float:
    """2 sqrt(t1 + t2) from the two largest eigenvalues of T^T T.

    This is the CHSH maximum over traceless +-1 spin observables only; the
    supremum over all norm-bounded operators is ``max(2, .)`` when the
    single-qubit marginals vanish.
    """
    rho = rho.density_matrix() if isinstance(rho, ManyBodyState) else np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidState(f"expected a two-qubit density matrix, got shape {rho.shape}")
    if (not np.allclose(rho, rho.conj().T, atol=1e-10) or abs(np.trace(rho).real - 1) > 1e-10
            or np.linalg.eigvalsh(rho).min() < -1e-10):
        raise InvalidState("not a valid density matrix")
    T = correlation_matrix(rho)
    ev = np.sort(np.linalg.eigvalsh(T.T @ T))[::-1]
    return float(2 * np.sqrt(max(ev[0] + ev[1], 0.0)))


def delta_margin(state: ManyBodyState, A0: LocalOperator, A1: LocalOperator) -> float:
    """2 - 2 max(|<A0>|, |<A1>|): slack of the uncorrelated CHSH part."""
    return 2.0 - 2.0 * max(abs(expect(state, [A0])), abs(expect(state, [A1])))
