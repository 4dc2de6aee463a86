"""Connected correlators and exponential-envelope fits.

Fits are certificates: after the log-space regression the prefactor ``C`` is
raised until every sample lies under the envelope, so downstream bounds can
use ``(C, lam)`` as a valid upper envelope on the sampled grid.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (AllSamplesFloored, InsufficientSamples, NonProductStart,
                     NormViolation, OverlappingSupports)
from .lattice import Lattice, Region, as_region, region_distance, validate_disjoint
from .quantum import NORM_TOL, PAULI, LocalOperator, ManyBodyState, expect, reduce

FLOOR = 1e-12
# relative head-room added to an inflated C so dominance holds in floating point
_INFLATE = 1 + 1e-12


@dataclass(frozen=True)
class CorrelationSample:
    r: float
    t: float
    value: float
    size_x: int = 1
    size_y: int = 1
    op_a: str = ""
    op_b: str = ""

    @property
    def min_size(self) -> int:
        return min(self.size_x, self.size_y)


def connected_correlator(state: ManyBodyState, A: LocalOperator, B: LocalOperator) -> float:
    """<AB> - <A><B>."""
    if not A.support.isdisjoint(B.support):
        raise OverlappingSupports(f"{A.support} and {B.support} overlap")
    return expect(state, [A, B]) - expect(state, [A]) * expect(state, [B])


def _check_ops(ops):
    ops = list(ops)
    if len(ops) < 2:
        raise ValueError("need at least two operators")
    if not validate_disjoint([op.support for op in ops]):
        raise OverlappingSupports("operator supports overlap")
    for op in ops:
        if op.norm > 1 + NORM_TOL:
            raise NormViolation(f"{op.name or op.support} has norm {op.norm:.6g}")
    return ops


def multibody_gap(state: ManyBodyState, ops: Sequence[LocalOperator]) -> float:
    """|<E1...En> - <E1>...<En>|."""
    ops = _check_ops(ops)
    prod = math.prod(expect(state, [op]) for op in ops)
    return abs(expect(state, ops) - prod)


def telescoping_terms(state: ManyBodyState, ops: Sequence[LocalOperator]) -> list[float]:
    """|<E1...Ek> - <E1...E_{k-1}><Ek>| for k = 2..n."""
    ops = _check_ops(ops)
    singles = [expect(state, [op]) for op in ops]
    prefix = [singles[0]] + [expect(state, ops[:k]) for k in range(2, len(ops) + 1)]
    return [abs(prefix[k - 1] - prefix[k - 2] * singles[k - 1]) for k in range(2, len(ops) + 1)]


def telescoping_bound(state: ManyBodyState, ops: Sequence[LocalOperator]) -> float:
    return float(sum(telescoping_terms(state, ops)))


# ---------------------------------------------------------------------------
# sampling


def pauli_strings(region: Region, basis: Sequence[str] = ("x", "y", "z")):
    """All products of basis Paulis over the sites of ``region`` (norm 1)."""
    for labels in itertools.product(basis, repeat=region.size):
        m = PAULI[labels[0]]
        for lab in labels[1:]:
            m = np.kron(m, PAULI[lab])
        yield "".join(labels), m


def correlation_samples(state: ManyBodyState, lattice: Lattice, pairs: Iterable,
                        basis: Sequence[str] = ("x", "y", "z"), t: float = 0.0
                        ) -> list[CorrelationSample]:
    """Connected correlators of basis Pauli strings for every region pair.

    Each pair is reduced once to its joint density matrix.
    """
    out = []
    for X, Y in pairs:
        X, Y = as_region(X), as_region(Y)
        if not X.isdisjoint(Y):
            raise OverlappingSupports(f"{X} and {Y} overlap")
        r = region_distance(lattice, X, Y)
        union = X.union(Y)
        rho = reduce(state, union)
        d = state.local_dim
        # reorder union axes so X's sites come first
        order = [union.sites.index(s) for s in X.sites + Y.sites]
        k = union.size
        rho = (rho.reshape((d,) * (2 * k))
               .transpose(order + [k + o for o in order])
               .reshape(d**k, d**k))
        dx, dy = d**X.size, d**Y.size
        r4 = rho.reshape(dx, dy, dx, dy)
        rho_x = np.einsum("ajbj->ab", r4)
        rho_y = np.einsum("iaib->ab", r4)
        ops_x = list(pauli_strings(X, basis))
        ops_y = list(pauli_strings(Y, basis))
        mean_x = {n: np.trace(rho_x @ m).real for n, m in ops_x}
        mean_y = {n: np.trace(rho_y @ m).real for n, m in ops_y}
        for (na, ma), (nb, mb) in itertools.product(ops_x, ops_y):
            joint = np.einsum("abcd,ca,db->", r4, ma, mb).real
            out.append(CorrelationSample(
                r, t, float(joint - mean_x[na] * mean_y[nb]), X.size, Y.size,
                f"{na}@{list(X.sites)}", f"{nb}@{list(Y.sites)}"))
    return out


def singleton_pairs(lattice: Lattice, min_distance: float = 0.0) -> list[tuple[Region, Region]]:
    return [(Region([i]), Region([j])) for i, j in itertools.combinations(lattice.sites, 2)
            if lattice.distance(i, j) >= min_distance]


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class ClusteringFit:
    C: float
    lam: float
    residual: float
    n_samples: int
    n_floored: int
    C_regression: float = float("nan")
    floor: float = FLOOR

    def envelope(self, r, size=1):
        return size * self.C * np.exp(-self.lam * np.asarray(r, dtype=float))

    def dominates(self, samples: Iterable[CorrelationSample]) -> bool:
        return all(abs(s.value) <= self.envelope(s.r, s.min_size) for s in samples)

    def to_dict(self) -> dict:
        return {"kind": "clustering", **asdict(self)}


@dataclass(frozen=True)
class PropagationFit:
    C: float
    lam: float
    v: float
    residual: float
    n_samples: int
    n_floored: int
    hyperparameters: dict = field(default_factory=dict)

    def envelope(self, t, r, size=1):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        return size * self.C * np.expm1(self.lam * self.v * t) * np.exp(-self.lam * r)

    def dominates(self, samples: Iterable[CorrelationSample]) -> bool:
        return all(abs(s.value) <= self.envelope(s.t, s.r, s.size_x * s.size_y)
                   for s in samples)

    def to_dict(self) -> dict:
        return {"kind": "propagation", **asdict(self)}


def fit_clustering(samples: Sequence[CorrelationSample], floor: float = FLOOR) -> ClusteringFit:
    """Fit ``|value| <= min(|X|,|Y|) C exp(-lam r)`` and inflate C to dominate."""
    samples = list(samples)
    if not samples:
        raise InsufficientSamples("no samples")
    r = np.array([s.r for s in samples], dtype=float)
    size = np.array([s.min_size for s in samples], dtype=float)
    val = np.abs([s.value for s in samples])
    above = val > floor
    if not above.any():
        raise AllSamplesFloored(f"all {len(samples)} samples are below the floor {floor:g}")
    if above.sum() < 2 or len(np.unique(r[above])) < 2:
        raise InsufficientSamples("need samples above the floor at >= 2 distinct distances")
    x, y = r[above], np.log(val[above] / size[above])
    slope, intercept = np.polyfit(x, y, 1)
    lam = -slope
    if lam < 0:
        lam, intercept = 0.0, float(y.mean())
    resid = float(np.sqrt(np.mean((y - (intercept - lam * x)) ** 2)))
    C_reg = float(np.exp(intercept))
    need = float(np.max(val / (size * np.exp(-lam * r))))
    C = max(C_reg, need * _INFLATE) if need > C_reg else C_reg
    return ClusteringFit(C, float(lam), resid, int(above.sum()), int((~above).sum()), C_reg, floor)


def fit_propagation(samples: Sequence[CorrelationSample], floor: float = FLOOR,
                    lam_range=(0.05, 5.0), v_range=(0.05, 10.0), n_grid: int = 40,
                    rounds: int = 3, max_sweeps: int = 500, tol: float = 1e-13
                    ) -> PropagationFit:
    """Fit ``|value| <= |X||Y| C (exp(lam v t) - 1) exp(-lam r)``.

    A log-spaced ``n_grid x n_grid`` scan over (lam, v) is zoomed ``rounds``
    times around its best cell, then polished by coordinate descent in
    (lam, w = lam v): for fixed w the optimal (log C, lam) is an ordinary
    least-squares line, and for fixed lam the w-step is a bounded Brent
    search.  Finally C is inflated so every t > 0 sample is dominated.
    """
    samples = list(samples)
    hyper = {"floor": floor, "lam_range": list(lam_range), "v_range": list(v_range),
             "n_grid": n_grid, "rounds": rounds, "max_sweeps": max_sweeps}
    t = np.array([s.t for s in samples], dtype=float)
    r = np.array([s.r for s in samples], dtype=float)
    size = np.array([s.size_x * s.size_y for s in samples], dtype=float)
    val = np.abs([s.value for s in samples])
    start = t == 0
    if np.any(val[start] > floor):
        raise NonProductStart(f"t = 0 correlations up to {val[start].max():.3g} exceed floor {floor:g}")
    live = ~start
    above = live & (val > floor)
    if not above.any():
        raise AllSamplesFloored("no t > 0 sample is above the floor")
    if len(np.unique(t[above])) < 2 or len(np.unique(r[above])) < 2:
        raise InsufficientSamples("need samples above the floor at >= 2 times and >= 2 distances")
    tt, rr = t[above], r[above]
    y = np.log(val[above] / size[above])

    def profile(lam, w):
        g = y - np.log(np.expm1(w * tt)) + lam * rr
        logC = g.mean()
        return float(np.sum((g - logC) ** 2)), logC

    def grid_search(lams, vs):
        best = (np.inf, None, None)
        for lam in lams:
            for v in vs:
                res, _ = profile(lam, lam * v)
                if res < best[0]:
                    best = (res, lam, v)
        return best

    lams = np.geomspace(*lam_range, n_grid)
    vs = np.geomspace(*v_range, n_grid)
    res, lam, v = grid_search(lams, vs)
    span_l = np.log(lams[1] / lams[0])
    span_v = np.log(vs[1] / vs[0])
    for _ in range(rounds):
        lams = lam * np.exp(np.linspace(-span_l, span_l, n_grid))
        vs = v * np.exp(np.linspace(-span_v, span_v, n_grid))
        res, lam, v = grid_search(lams, vs)
        span_l *= 2.0 / n_grid
        span_v *= 2.0 / n_grid

    w = lam * v
    for _ in range(max_sweeps):
        prev = (lam, w)
        # lam step: OLS of (y - log(expm1(w t))) on r
        z = y - np.log(np.expm1(w * tt))
        if np.ptp(rr) > 0:
            slope = np.polyfit(rr, z, 1)[0]
            lam = max(-slope, 1e-9)
        logw = np.log(w)
        step = minimize_scalar(lambda lw: profile(lam, np.exp(lw))[0],
                               bounds=(logw - 2.0, logw + 2.0), method="bounded",
                               options={"xatol": 1e-14})
        w = float(np.exp(step.x))
        if abs(lam - prev[0]) <= tol * max(1, lam) and abs(w - prev[1]) <= tol * max(1, w):
            break
    res, logC = profile(lam, w)
    v = w / lam
    C_reg = float(np.exp(logC))
    env = size[live] * np.expm1(w * t[live]) * np.exp(-lam * r[live])
    need = float(np.max(val[live] / env))
    C = max(C_reg, need * _INFLATE) if need > C_reg else C_reg
    hyper["C_regression"] = C_reg
    return PropagationFit(C, float(lam), float(v), float(np.sqrt(res / above.sum())),
                          int(above.sum()), int((live & ~above).sum()), hyper)


# ---------------------------------------------------------------------------
# serialisation

SAMPLE_COLUMNS = ["r", "t", "size_x", "size_y", "op_a", "op_b", "value"]


def fmt(x) -> str:
    """17 significant digits, so numeric output round-trips exactly."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_samples_csv(path, samples: Iterable[CorrelationSample]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for s in samples:
            w.writerow([fmt(getattr(s, c)) for c in SAMPLE_COLUMNS])


def read_samples_csv(path) -> list[CorrelationSample]:
    with open(path, newline="") as fh:
        return [CorrelationSample(float(row["r"]), float(row["t"]), float(row["value"]),
                                  int(row["size_x"]), int(row["size_y"]), row["op_a"], row["op_b"])
                for row in csv.DictReader(fh)]
