"""Locality bounds built from clustering constants, and certificates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from ..clustering import ClusteringFit, PropagationFit
from ..errors import FormulaMismatch, ZeroDecay, ZeroMargin
from ..lattice import Lattice, as_region, min_pairwise_distance, region_distance
from ..quantum import ManyBodyState
from .inequality import BellInequality, gamma_constant
from .seesaw import chsh_sup_seesaw, general_sup_seesaw

SATISFIED_TOL = 1e-9

FORMULAS = ("lemma1", "thm3_quench", "lemma2_twobody", "thm6_quench_twobody", "thm7_general")
QUENCH_FORMULAS = ("thm3_quench", "thm6_quench_twobody")


def lemma1_epsilon(size_x: int, C: float, lam: float, r: float) -> float:
    """4 |X| C exp(-lam r)."""
    return 4.0 * size_x * C * math.exp(-lam * r)


def r_star(size_x: int, C: float, lam: float, delta: float) -> float:
    """Distance beyond which the CHSH excess is below the margin ``delta``."""
    if delta <= 0:
        raise ZeroMargin(f"margin delta = {delta} must be positive")
    if lam <= 0:
        raise ZeroDecay(f"decay rate lam = {lam} must be positive")
    return max(0.0, math.log(4.0 * size_x * C / delta) / lam)


def quench_epsilon(size_x: int, size_y: int, C: float, lam: float, v: float, t: float,
                   r: float) -> float:
    """4 |X||Y| C (exp(lam v t) - 1) exp(-lam r)."""
    return 4.0 * size_x * size_y * C * math.expm1(lam * v * t) * math.exp(-lam * r)


def lemma2_bound(ineq: BellInequality, lattice: Lattice, regions: Sequence, C: float,
                 lam: float, quench: tuple[float, float] | None = None) -> float:
    """Local bound plus the two-body clustering correction.

    Static: ``C sum min(|Xi|,|Xj|) |beta| exp(-lam r_ij)``.  With
    ``quench=(v, t)`` the size factor is ``|Xi||Xj|`` and the whole sum is
    multiplied by ``exp(lam v t) - 1``.
    """
    regions = [as_region(r) for r in regions]
    total = 0.0
    for (i, j, _k, _l), b in ineq.beta.items():
        r = region_distance(lattice, regions[i], regions[j])
        if quench is None:
            size = min(regions[i].size, regions[j].size)
        else:
            size = regions[i].size * regions[j].size
        total += size * abs(b) * math.exp(-lam * r)
    factor = C if quench is None else C * math.expm1(lam * quench[0] * quench[1])
    return ineq.local_bound + factor * total


def general_bound(delta_c: float, C: float, lam: float, max_region_size: int, gamma: float,
                  r_min: float) -> float:
    """delta_c + C |X| Gamma exp(-lam r_min), |X| the largest region."""
    return delta_c + C * max_region_size * gamma * math.exp(-lam * r_min)


@dataclass
class LocalityCertificate:
    value: float
    bound: float
    formula: str
    inputs: dict = field(default_factory=dict)
    fit: ClusteringFit | PropagationFit | None = None

    @property
    def satisfied(self) -> bool:
        return self.value <= self.bound + SATISFIED_TOL

    @property
    def margin(self) -> float:
        return self.bound - self.value

    def to_dict(self) -> dict:
        return {"formula": self.formula, "value": self.value, "bound": self.bound,
                "margin": self.margin, "satisfied": self.satisfied, "inputs": self.inputs,
                "fit": self.fit.to_dict() if self.fit is not None else None}


def select_formula(ineq: BellInequality, fit) -> str:
    quench = isinstance(fit, PropagationFit)
    if ineq.is_chsh():
        return "thm3_quench" if quench else "lemma1"
    if ineq.is_two_body:
        return "thm6_quench_twobody" if quench else "lemma2_twobody"
    if quench:
        raise FormulaMismatch("no quench bound exists for general (many-body) inequalities")
    return "thm7_general"


def certify(state: ManyBodyState, ineq: BellInequality, regions: Sequence, lattice: Lattice,
            fit: ClusteringFit | PropagationFit, formula: str = "auto", seed: int = 0,
            restarts: int = 20, tol: float = 1e-9, max_iter: int = 500) -> LocalityCertificate:
    """Measure the optimised functional and compare it with the chosen bound."""
    regions = [lattice.check_region(r) for r in regions]
    if formula == "auto":
        formula = select_formula(ineq, fit)
    if formula not in FORMULAS:
        raise FormulaMismatch(f"unknown formula {formula!r}")
    quench = formula in QUENCH_FORMULAS
    if quench != isinstance(fit, PropagationFit):
        raise FormulaMismatch(f"formula {formula} does not match a {type(fit).__name__}")
    if quench and state.provenance != "quench":
        raise FormulaMismatch(f"quench formula requested for a {state.provenance} state")
    if formula in ("lemma1", "thm3_quench") and not ineq.is_chsh():
        raise FormulaMismatch(f"{formula} only applies to CHSH")
    if formula in ("lemma2_twobody", "thm6_quench_twobody") and not ineq.is_two_body:
        raise FormulaMismatch(f"{formula} needs a one- and two-body inequality")
    if len(regions) != ineq.n_parties:
        raise FormulaMismatch(f"{len(regions)} regions for {ineq.n_parties} parties")

    opts = dict(restarts=restarts, tol=tol, max_iter=max_iter, seed=seed)
    inputs = {"C": fit.C, "lam": fit.lam, "sizes": [r.size for r in regions],
              "delta_c": ineq.local_bound, "regions": [list(r.sites) for r in regions]}
    t = float(state.params.get("t", 0.0))
    if quench:
        inputs.update(v=fit.v, t=t)

    if formula in ("lemma1", "thm3_quench"):
        X, Y = regions
        r = region_distance(lattice, X, Y)
        value = chsh_sup_seesaw(state, X, Y, **opts).value
        if formula == "lemma1":
            eps = lemma1_epsilon(min(X.size, Y.size), fit.C, fit.lam, r)
        else:
            eps = quench_epsilon(X.size, Y.size, fit.C, fit.lam, fit.v, t, r)
        inputs.update(distances=[r], epsilon=eps)
        return LocalityCertificate(value, ineq.local_bound + eps, formula, inputs, fit)

    value = general_sup_seesaw(state, ineq, regions, **opts).value
    if formula in ("lemma2_twobody", "thm6_quench_twobody"):
        bound = lemma2_bound(ineq, lattice, regions, fit.C, fit.lam,
                             quench=(fit.v, t) if quench else None)
        inputs["distances"] = [region_distance(lattice, regions[i], regions[j])
                               for i in range(len(regions)) for j in range(i + 1, len(regions))]
        return LocalityCertificate(value, bound, formula, inputs, fit)

    gamma = gamma_constant(ineq)
    r_min = min_pairwise_distance(lattice, regions)
    size = max(r.size for r in regions)
    inputs.update(gamma=gamma, r_min=r_min, max_size=size)
    bound = general_bound(ineq.local_bound, fit.C, fit.lam, size, gamma, r_min)
    return LocalityCertificate(value, bound, formula, inputs, fit)
