"""Bell inequalities in correlator form, their file format and local bounds.

Two-body sums over party pairs are over *ordered* pairs: ``beta[(i, j, k, l)]``
and ``beta[(j, i, l, k)]`` are separate coefficients that both multiply
``<E_k^(i) E_l^(j)>``.  Authors of unordered-sum inequalities must fold their
coefficients onto a single ordering.

File format (YAML)::

    name: CHSH
    parties: 2
    settings: [2, 2]
    delta_c: 2            # optional, recomputed and cross-checked
    alpha: [[party, setting, coeff], ...]
    beta:  [[i, j, k, l, coeff], ...]
    gamma: [{parties: [0, 1, 2], settings: [0, 1, 1], coeff: -1.0}, ...]

All indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import yaml

from ..errors import ShapeMismatch, TooManyStrategies

MAX_STRATEGY_BITS = 20
DELTA_TOL = 1e-9

Term = tuple[tuple[int, ...], tuple[int, ...], float]


@dataclass
class BellInequality:
    n_parties: int
    settings: tuple[int, ...]
    alpha: dict = field(default_factory=dict)
    beta: dict = field(default_factory=dict)
    gamma: dict = field(default_factory=dict)
    delta_c: float | None = None
    name: str = ""

    def __post_init__(self):
        self.settings = tuple(int(m) for m in self.settings)
        if len(self.settings) != self.n_parties:
            raise ShapeMismatch(f"{len(self.settings)} setting counts for {self.n_parties} parties")
        for (i, k) in self.alpha:
            self._check(i, k)
        for (i, j, k, l) in self.beta:
            if i == j:
                raise ShapeMismatch(f"beta term ({i}, {j}) needs two distinct parties")
            self._check(i, k)
            self._check(j, l)
        for parties, ks in self.gamma:
            if len(parties) != len(ks) or not parties:
                raise ShapeMismatch(f"gamma term {parties}/{ks} is malformed")
            if len(set(parties)) != len(parties):
                raise ShapeMismatch(f"gamma term parties {parties} are not distinct")
            for i, k in zip(parties, ks):
                self._check(i, k)
        if self.delta_c is not None:
            self.delta_c = float(self.delta_c)

    def _check(self, i, k):
        if not (0 <= i < self.n_parties and 0 <= k < self.settings[i]):
            raise ShapeMismatch(f"party/setting ({i}, {k}) out of range for settings {self.settings}")

    @property
    def is_two_body(self) -> bool:
        return not self.gamma

    def terms(self) -> list[Term]:
        """All terms as (parties, settings, coefficient); alpha, beta, gamma."""
        out = [((i,), (k,), float(c)) for (i, k), c in self.alpha.items()]
        out += [((i, j), (k, l), float(c)) for (i, j, k, l), c in self.beta.items()]
        out += [(tuple(p), tuple(s), float(c)) for (p, s), c in self.gamma.items()]
        return [t for t in out if t[2] != 0]

    def to_gamma_form(self) -> "BellInequality":
        gamma = {}
        for parties, ks, c in self.terms():
            gamma[(parties, ks)] = gamma.get((parties, ks), 0.0) + c
        return BellInequality(self.n_parties, self.settings, gamma=gamma,
                              delta_c=self.delta_c, name=self.name)

    @property
    def local_bound(self) -> float:
        if self.delta_c is None:
            self.delta_c = local_bound_bruteforce(self)
        return self.delta_c

    def is_chsh(self) -> bool:
        """True for the standard two-party CHSH coefficients (any storage)."""
        if self.n_parties != 2 or self.settings != (2, 2):
            return False
        coeffs = {}
        for parties, ks, c in self.terms():
            if len(parties) != 2:
                return False
            key = ks if parties == (0, 1) else ks[::-1]
            coeffs[key] = coeffs.get(key, 0.0) + c
        return coeffs == {(0, 0): 1.0, (0, 1): 1.0, (1, 0): 1.0, (1, 1): -1.0}

    def to_dict(self) -> dict:
        d = {"name": self.name, "parties": self.n_parties, "settings": list(self.settings)}
        if self.delta_c is not None:
            d["delta_c"] = self.delta_c
        if self.alpha:
            d["alpha"] = [[i, k, c] for (i, k), c in self.alpha.items()]
        if self.beta:
            d["beta"] = [[i, j, k, l, c] for (i, j, k, l), c in self.beta.items()]
        if self.gamma:
            d["gamma"] = [{"parties": list(p), "settings": list(s), "coeff": c}
                          for (p, s), c in self.gamma.items()]
        return d


def chsh(form: str = "two_body") -> BellInequality:
    """CHSH: <A0B0> + <A0B1> + <A1B0> - <A1B1> <= 2."""
    coeffs = {(0, 0): 1.0, (0, 1): 1.0, (1, 0): 1.0, (1, 1): -1.0}
    if form == "two_body":
        return BellInequality(2, (2, 2), beta={(0, 1, k, l): c for (k, l), c in coeffs.items()},
                              delta_c=2.0, name="CHSH")
    return BellInequality(2, (2, 2), gamma={((0, 1), kl): c for kl, c in coeffs.items()},
                          delta_c=2.0, name="CHSH")


def mermin3() -> BellInequality:
    """<ZZX> + <ZXZ> + <XZZ> - <XXX> pattern, setting 0 = Z, 1 = X."""
    gamma = {((0, 1, 2), (0, 0, 1)): 1.0, ((0, 1, 2), (0, 1, 0)): 1.0,
             ((0, 1, 2), (1, 0, 0)): 1.0, ((0, 1, 2), (1, 1, 1)): -1.0}
    return BellInequality(3, (2, 2, 2), gamma=gamma, name="Mermin3")


# ---------------------------------------------------------------------------
# local bound


def _strategy_columns(n_bits: int) -> np.ndarray:
    idx = np.arange(2**n_bits, dtype=np.int64)
    shifts = np.arange(n_bits - 1, -1, -1, dtype=np.int64)
    return (1 - 2 * ((idx[:, None] >> shifts[None, :]) & 1)).astype(np.int8)


def best_deterministic_strategy(ineq: BellInequality) -> tuple[float, list[list[int]]]:
    """Maximise the functional over all deterministic +-1 outcome assignments."""
    n_bits = sum(ineq.settings)
    if n_bits > MAX_STRATEGY_BITS:
        raise TooManyStrategies(f"2^{n_bits} strategies exceed the 2^{MAX_STRATEGY_BITS} limit")
    offsets = np.concatenate([[0], np.cumsum(ineq.settings)[:-1]]).astype(int)
    cols = _strategy_columns(n_bits)
    score = np.zeros(len(cols))
    for parties, ks, c in ineq.terms():
        prod = np.ones(len(cols), dtype=np.int8)
        for i, k in zip(parties, ks):
            prod = prod * cols[:, offsets[i] + k]
        score += c * prod
    best = int(np.argmax(score))
    row = cols[best]
    assignment = [[int(row[offsets[i] + k]) for k in range(m)] for i, m in enumerate(ineq.settings)]
    return float(score[best]), assignment


def local_bound_bruteforce(ineq: BellInequality) -> float:
    return best_deterministic_strategy(ineq)[0]


def gamma_constant(ineq: BellInequality) -> float:
    """Sum over terms of (body count - 1) * |coefficient|."""
    return float(sum((len(p) - 1) * abs(c) for p, _, c in ineq.terms()))


# ---------------------------------------------------------------------------
# file IO


def _rows(data, key, width) -> Iterable[list]:
    for n, row in enumerate(data.get(key) or []):
        if len(row) != width:
            raise ShapeMismatch(f"{key}[{n}] should have {width} entries, got {row!r}")
        yield row


def inequality_from_dict(data: dict) -> BellInequality:
    try:
        n = int(data["parties"])
        settings = [int(m) for m in data["settings"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeMismatch(f"inequality needs integer 'parties' and 'settings': {exc}") from None
    alpha, beta, gamma = {}, {}, {}
    for i, k, c in _rows(data, "alpha", 3):
        alpha[(int(i), int(k))] = alpha.get((int(i), int(k)), 0.0) + float(c)
    for i, j, k, l, c in _rows(data, "beta", 5):
        key = (int(i), int(j), int(k), int(l))
        beta[key] = beta.get(key, 0.0) + float(c)
    for n_term, term in enumerate(data.get("gamma") or []):
        try:
            key = (tuple(int(p) for p in term["parties"]), tuple(int(s) for s in term["settings"]))
            gamma[key] = gamma.get(key, 0.0) + float(term["coeff"])
        except (KeyError, TypeError) as exc:
            raise ShapeMismatch(f"gamma[{n_term}] malformed: {exc}") from None
    declared = data.get("delta_c")
    ineq = BellInequality(n, tuple(settings), alpha, beta, gamma, None, str(data.get("name", "")))
    if sum(settings) <= MAX_STRATEGY_BITS:
        computed = local_bound_bruteforce(ineq)
        if declared is not None and abs(float(declared) - computed) > DELTA_TOL:
            raise ShapeMismatch(f"declared delta_c {declared} differs from enumerated {computed}")
        ineq.delta_c = computed
    elif declared is not None:
        ineq.delta_c = float(declared)
    return ineq


def load_inequality(path) -> BellInequality:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ShapeMismatch(f"{path}: expected a mapping at top level")
    return inequality_from_dict(data)


def save_inequality(ineq: BellInequality, path):
    with open(path, "w") as fh:
        yaml.safe_dump(ineq.to_dict(), fh, sort_keys=False)
