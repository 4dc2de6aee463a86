"""Seesaw (alternating) maximisation of Bell functionals.

With all other parties fixed, the functional is linear in one party's
operators, ``sum_k Tr(E_k K_k)``, and over Hermitian ``E`` with norm at most
one this is maximised by the eigen-sign operator of ``K_k``.  Each half-step
is therefore an exact block maximisation and the objective never decreases.

Plain alternation converges only linearly, and very slowly when the optimum
sits in a nearly flat direction.  Every sweep therefore also tries an
extrapolated start ``sign(E + mu (E - E_prev))`` followed by a full sweep,
and keeps it only if it beats the plain sweep; ``mu`` doubles on success and
resets to 1 on failure.  Accepted values never fall below the plain sweep, so
monotonicity is preserved.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoConvergenceWarning, OverlappingSupports, SpinBellError
from ..lattice import as_region
from ..quantum import LocalOperator, ManyBodyState, embed_sparse
from .functionals import MeasurementAssignment, PartyNetwork
from .inequality import BellInequality

logger = logging.getLogger(__name__)

SIGN_TIE = 1e-12
RESTARTS = 20
TOL = 1e-9
MAX_ITER = 500


class MonotonicityError(SpinBellError):
    """A seesaw half-step decreased the objective (numerical breakdown)."""


def sign_operator(K: np.ndarray) -> np.ndarray:
    """Hermitian sign of ``K`` (stacked over leading axes); ties map to +1."""
    K = 0.5 * (K + np.conj(np.swapaxes(K, -1, -2)))
    w, V = np.linalg.eigh(K)
    s = np.where(w < -SIGN_TIE, -1.0, 1.0)
    return (V * s[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def random_sign_operators(rng, dim: int, count: int) -> np.ndarray:
    """Sign operators of random GUE matrices, shape (count, dim, dim)."""
    g = rng.normal(size=(count, dim, dim)) + 1j * rng.normal(size=(count, dim, dim))
    return sign_operator(g + np.conj(np.swapaxes(g, -1, -2)))


def _check_step(new, old, where):
    if np.any(new < old - 1e-12 * np.maximum(1.0, np.abs(old))):
        raise MonotonicityError(f"objective decreased during {where}: {old} -> {new}")


@dataclass
class SeesawResult:
    value: float
    operators: list[list[LocalOperator]]
    converged: bool
    iterations: int
    history: list[float] = field(default_factory=list)
    restart_values: list[float] = field(default_factory=list)

    # CHSH conveniences
    @property
    def A(self):
        return self.operators[0]

    @property
    def B(self):
        return self.operators[1]

    def assignment(self) -> MeasurementAssignment:
        regions = [ops[0].support for ops in self.operators]
        return MeasurementAssignment(regions, self.operators)


def _pair_tensor(state: ManyBodyState, X, Y):
    X, Y = as_region(X), as_region(Y)
    if not X.isdisjoint(Y):
        raise OverlappingSupports(f"{X} and {Y} overlap")
    net = PartyNetwork(state, [X, Y])
    return X, Y, net.rho, net.dims


def chsh_sup_seesaw(state: ManyBodyState, X, Y, restarts: int = RESTARTS, tol: float = TOL,
                    max_iter: int = MAX_ITER, seed: int = 0) -> SeesawResult:
    """Best CHSH value over norm-bounded operators on X and Y.

    Restarts run as one batch; restart ``i`` draws its initial Bob operators
    from ``default_rng([seed, i])``.  The all-identity assignment (value 2)
    is always a candidate.
    """
    X, Y, r4, (dx, dy) = _pair_tensor(state, X, Y)
    B = np.stack([random_sign_operators(np.random.default_rng([seed, i]), dy, 2)
                  for i in range(restarts)])  # (R, 2, dy, dy)

    def a_step(B):
        K = np.stack([np.einsum("abcd,rdb->rac", r4, B[:, 0] + B[:, 1]),
                      np.einsum("abcd,rdb->rac", r4, B[:, 0] - B[:, 1])], axis=1)
        A = sign_operator(K)
        return A, np.einsum("rsab,rsba->r", A, K).real

    def b_step(A):
        K = np.stack([np.einsum("abcd,rca->rbd", r4, A[:, 0] + A[:, 1]),
                      np.einsum("abcd,rca->rbd", r4, A[:, 0] - A[:, 1])], axis=1)
        Bn = sign_operator(K)
        return Bn, np.einsum("rsab,rsba->r", Bn, K).real

    value = np.full(restarts, -np.inf)
    done = np.zeros(restarts, dtype=bool)
    mu = np.ones(restarts)
    B_prev = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        A, va = a_step(B)
        _check_step(va, value, "Alice update")
        B_new, vb = b_step(A)
        _check_step(vb, va, "Bob update")
        if B_prev is not None:
            A_x, _ = a_step(sign_operator(B + mu[:, None, None, None] * (B - B_prev)))
            B_x, vx = b_step(A_x)
            ok = vx > vb
            mu = np.where(ok, 2 * mu, 1.0)
            A = np.where(ok[:, None, None, None], A_x, A)
            B_new = np.where(ok[:, None, None, None], B_x, B_new)
            vb = np.where(ok, vx, vb)
        B_prev, B = B, B_new
        done = vb - value <= tol
        value = vb
        history.append(float(value.max()))
        if done.all():
            break
    best = int(np.argmax(value))
    converged = bool(done[best])
    if not done.all():
        warnings.warn(f"CHSH seesaw: {int((~done).sum())} restarts unconverged after {max_iter} sweeps",
                      NoConvergenceWarning, stacklevel=2)
    A_best, B_best, v_best = A[best], B[best], float(value[best])
    if v_best < 2.0:
        A_best = np.stack([np.eye(dx)] * 2)
        B_best = np.stack([np.eye(dy)] * 2)
        v_best = 2.0
    ops = [[LocalOperator(X, A_best[k], True, f"A{k}") for k in range(2)],
           [LocalOperator(Y, B_best[k], True, f"B{k}") for k in range(2)]]
    return SeesawResult(v_best, ops, converged, it, history, [float(v) for v in value])


def chsh_sup_fixed_alice(state: ManyBodyState, A0: LocalOperator, A1: LocalOperator, Y
                         ) -> tuple[float, LocalOperator, LocalOperator]:
    """Exact CHSH maximum over Bob's operators on Y with Alice's fixed.

    Returns the value and Bob's optimal pair.
    """
    Y = as_region(Y)
    X = A0.support.union(A1.support)
    _, Y, r4, (dx, dy) = _pair_tensor(state, X, Y)
    pos = {s: n for n, s in enumerate(X.sites)}
    a = [embed_sparse(op.checked().matrix, [pos[s] for s in op.support.sites], X.size,
                      state.local_dim).toarray() for op in (A0, A1)]
    K0 = np.einsum("abcd,ca->bd", r4, a[0] + a[1])
    K1 = np.einsum("abcd,ca->bd", r4, a[0] - a[1])
    B0, B1 = sign_operator(K0), sign_operator(K1)
    value = float(np.trace(B0 @ K0).real + np.trace(B1 @ K1).real)
    return value, LocalOperator(Y, B0, True, "B0"), LocalOperator(Y, B1, True, "B1")


def general_sup_seesaw(state: ManyBodyState, ineq: BellInequality, regions,
                       restarts: int = RESTARTS, tol: float = TOL, max_iter: int = MAX_ITER,
                       seed: int = 0) -> SeesawResult:
    """Cyclic seesaw over parties for an arbitrary correlator-form functional."""
    regions = [as_region(r) for r in regions]
    if len(regions) != ineq.n_parties:
        raise ValueError(f"{len(regions)} regions for {ineq.n_parties} parties")
    net = PartyNetwork(state, regions)
    terms = ineq.terms()
    by_party = {i: [t for t in terms if i in t[0]] for i in range(ineq.n_parties)}

    def operands(i, mats):
        Ks = [np.zeros((net.dims[i],) * 2, dtype=complex) for _ in range(ineq.settings[i])]
        for parties, ks, c in by_party[i]:
            others = {j: mats[j][k] for j, k in zip(parties, ks) if j != i}
            Ks[ks[parties.index(i)]] += c * net.operand(i, others)
        return Ks

    def objective(mats):
        return sum(c * net.correlator({j: mats[j][k] for j, k in zip(p, ks)}) for p, ks, c in terms)

    def sweep(mats, value):
        mats = [list(m) for m in mats]
        for i in range(ineq.n_parties):
            mats[i] = [sign_operator(K) for K in operands(i, mats)]
            new = objective(mats)
            _check_step(np.array([new]), np.array([value]), f"party {i} update")
            value = new
        return mats, value

    best = None
    for rep in range(restarts):
        rng = np.random.default_rng([seed, rep])
        mats = [list(random_sign_operators(rng, net.dims[i], ineq.settings[i]))
                for i in range(ineq.n_parties)]
        value = objective(mats)
        history = [value]
        converged = False
        prev, mu = None, 1.0
        it = 0
        for it in range(1, max_iter + 1):
            start = value
            plain, value = sweep(mats, value)
            if prev is not None:
                trial = [[sign_operator(m + mu * (m - p)) for m, p in zip(ms, ps)]
                         for ms, ps in zip(mats, prev)]
                trial, v_trial = sweep(trial, -np.inf)
                if v_trial > value:
                    plain, value, mu = trial, v_trial, 2 * mu
                else:
                    mu = 1.0
            prev, mats = mats, plain
            history.append(value)
            if value - start <= tol:
                converged = True
                break
        if best is None or value > best[0]:
            best = (value, [list(m) for m in mats], converged, it, history)
        logger.debug("restart %d: value %.12f after %d sweeps", rep, value, it)
    value, mats, converged, it, history = best
    if not converged:
        warnings.warn("general seesaw: best restart did not converge", NoConvergenceWarning,
                      stacklevel=2)
    ops = [[LocalOperator(regions[i], mats[i][k], True, f"E{k}^({i})")
            for k in range(ineq.settings[i])] for i in range(ineq.n_parties)]
    return SeesawResult(float(value), ops, converged, it, history)


def bell2_sup_seesaw(state: ManyBodyState, ineq: BellInequality, regions, **kwargs) -> SeesawResult:
    if not ineq.is_two_body:
        raise ValueError("bell2_sup_seesaw needs a one- and two-body inequality")
    return general_sup_seesaw(state, ineq, regions, **kwargs)
