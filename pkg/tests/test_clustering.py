import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinbell.clustering import (CorrelationSample, connected_correlator, correlation_samples,
                                 fit_clustering, fit_propagation, fmt, multibody_gap,
                                 read_samples_csv, singleton_pairs, telescoping_bound,
                                 telescoping_terms, write_samples_csv)
from spinbell.errors import (AllSamplesFloored, InsufficientSamples, NonProductStart,
                             NormViolation, OverlappingSupports)
from spinbell.lattice import build_lattice
from spinbell.models import model_hamiltonian
from spinbell.quantum import (LocalOperator, embed, evolve_state, ground_state, pauli,
                              product_state)
from spinbell.states import UP, ghz, random_density, random_product, random_pure, singlet


def dense_expect(state, ops, n):
    lat = build_lattice(n)
    M = np.eye(2**n, dtype=complex)
    for op in ops:
        M = M @ embed(op, lat)
    return np.trace(state.density_matrix() @ M).real


def random_op(rng, sites):
    d = 2 ** len(sites)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = g + g.conj().T
    return LocalOperator(sites, h / np.abs(np.linalg.eigvalsh(h)).max())


# -- correlators ------------------------------------------------------------

def test_connected_correlator_product_is_zero(rng):
    rho = random_product(4, rng)
    A, B = random_op(rng, [0, 1]), random_op(rng, [3])
    assert abs(connected_correlator(rho, A, B)) < 1e-10


def test_connected_correlator_singlet():
    assert connected_correlator(singlet(), pauli("z", 0), pauli("z", 1)) == pytest.approx(-1)


def test_connected_correlator_ghz():
    assert connected_correlator(ghz(3), pauli("z", 0), pauli("z", 2)) == pytest.approx(1)


def test_connected_correlator_overlap():
    with pytest.raises(OverlappingSupports):
        connected_correlator(singlet(), pauli("z", 0), pauli("x", 0))


@given(st.integers(0, 2**32 - 1))
def test_connected_correlator_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    psi = random_pure(4, rng)
    A, B = random_op(rng, [0]), random_op(rng, [2, 3])
    ab, ba = connected_correlator(psi, A, B), connected_correlator(psi, B, A)
    assert ab == pytest.approx(ba, abs=1e-10)
    assert abs(ab) <= 2 + 1e-12


def test_multibody_gap_two_body_matches_connected(rng):
    psi = random_pure(4, rng)
    A, B = random_op(rng, [0]), random_op(rng, [2])
    c = abs(connected_correlator(psi, A, B))
    assert multibody_gap(psi, [A, B]) == pytest.approx(c, abs=1e-14)
    assert telescoping_bound(psi, [A, B]) == pytest.approx(c, abs=1e-14)


def test_multibody_gap_product_is_zero(rng):
    rho = random_product(5, rng)
    ops = [random_op(rng, [0]), random_op(rng, [2, 3]), random_op(rng, [4])]
    assert multibody_gap(rho, ops) < 1e-12
    assert telescoping_bound(rho, ops) < 1e-12


@pytest.mark.parametrize("labels", ["zzz", "xxx", "zzx", "xyy"])
def test_multibody_gap_ghz_matches_dense_oracle(labels):
    ops = [pauli(lab, i) for i, lab in enumerate(labels)]
    state = ghz(3)
    prod = math.prod(dense_expect(state, [op], 3) for op in ops)
    oracle = abs(dense_expect(state, ops, 3) - prod)
    assert multibody_gap(state, ops) == pytest.approx(oracle, abs=1e-12)


def test_multibody_gap_validation(rng):
    with pytest.raises(ValueError):
        multibody_gap(ghz(3), [pauli("z", 0)])
    with pytest.raises(NormViolation):
        multibody_gap(ghz(3), [pauli("z", 0), LocalOperator([1], 2 * np.eye(2))])


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_telescoping_dominates_gap(seed, n):
    rng = np.random.default_rng(seed)
    psi = random_pure(6, rng)
    sites = rng.permutation(6)[:n]
    ops = [random_op(rng, [int(s)]) for s in sites]
    terms = telescoping_terms(psi, ops)
    gap = multibody_gap(psi, ops)
    assert gap <= sum(terms) + 1e-12
    assert gap <= (n - 1) * max(terms) + 1e-12


# -- sampling ---------------------------------------------------------------

def test_correlation_samples_match_direct(rng):
    lat = build_lattice(5)
    psi = random_pure(5, rng)
    samples = correlation_samples(psi, lat, [([0], [3]), ([1, 2], [4])], basis=("x", "z"))
    assert len(samples) == 4 + 8
    s = samples[1]  # x on 0, z on 3
    assert s.op_a.startswith("x@") and s.op_b.startswith("z@")
    assert s.value == pytest.approx(connected_correlator(psi, pauli("x", 0), pauli("z", 3)),
                                    abs=1e-12)
    s = samples[4]  # xx on (1, 2), x on 4
    A = LocalOperator([1, 2], np.kron(pauli("x", 0).matrix, pauli("x", 0).matrix))
    assert s.r == 2 and s.size_x == 2 and s.size_y == 1
    assert s.value == pytest.approx(connected_correlator(psi, A, pauli("x", 4)), abs=1e-12)


def test_singleton_pairs():
    pairs = singleton_pairs(build_lattice(5), min_distance=3)
    assert [(x.sites[0], y.sites[0]) for x, y in pairs] == [(0, 3), (0, 4), (1, 4)]


# -- clustering fit ---------------------------------------------------------

def test_fit_exact_exponential():
    samples = [CorrelationSample(r, 0.0, 0.8 * math.exp(-0.5 * r)) for r in range(1, 7)]
    fit = fit_clustering(samples)
    assert fit.C == pytest.approx(0.8, rel=1e-12)
    assert fit.lam == pytest.approx(0.5, rel=1e-12)
    assert fit.residual < 1e-12
    assert fit.dominates(samples)


def test_fit_constant_samples():
    samples = [CorrelationSample(r, 0.0, 0.3) for r in range(1, 6)]
    fit = fit_clustering(samples)
    assert fit.lam == pytest.approx(0, abs=1e-12) and fit.C == pytest.approx(0.3, rel=1e-11)


def test_fit_growing_samples_clamps_lambda():
    samples = [CorrelationSample(r, 0.0, 0.1 * math.exp(0.2 * r)) for r in range(1, 6)]
    fit = fit_clustering(samples)
    assert fit.lam == 0 and fit.dominates(samples)


def test_fit_errors():
    with pytest.raises(AllSamplesFloored):
        fit_clustering([CorrelationSample(1, 0, 0.0), CorrelationSample(2, 0, 1e-15)])
    with pytest.raises(InsufficientSamples):
        fit_clustering([CorrelationSample(1, 0, 0.1), CorrelationSample(1, 0, 0.2)])
    with pytest.raises(InsufficientSamples):
        fit_clustering([])


def test_fit_size_normalisation():
    samples = [CorrelationSample(r, 0.0, 2 * 0.5 * math.exp(-r), 2, 3) for r in range(1, 5)]
    fit = fit_clustering(samples)
    assert fit.C == pytest.approx(0.5, rel=1e-12) and fit.lam == pytest.approx(1, rel=1e-12)


@given(st.lists(st.tuples(st.integers(0, 10), st.floats(-1, 1), st.integers(1, 3)),
                min_size=2, max_size=30))
def test_fit_always_dominates(rows):
    samples = [CorrelationSample(r, 0.0, v, s, s + 1) for r, v, s in rows]
    try:
        fit = fit_clustering(samples)
    except InsufficientSamples:
        return
    assert fit.C > 0 and fit.lam >= 0
    assert fit.dominates(samples)


def test_fit_tfim_ground_state_zz():
    lat = build_lattice(12)
    psi = ground_state(model_hamiltonian(lat, "tfim", J=1.0, g=2.0)).state
    samples = correlation_samples(psi, lat, singleton_pairs(lat), basis=("z",))
    fit = fit_clustering(samples)
    assert fit.lam > 0
    assert fit.dominates(samples)


# -- propagation fit --------------------------------------------------------

def light_cone_samples(C, lam, v, times, rs):
    return [CorrelationSample(r, t, C * math.expm1(lam * v * t) * math.exp(-lam * r))
            for t in times for r in rs]


def test_propagation_recovers_constants():
    samples = light_cone_samples(1.0, 1.0, 2.0, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0], range(1, 9))
    fit = fit_propagation(samples)
    assert fit.C == pytest.approx(1, abs=1e-6)
    assert fit.lam == pytest.approx(1, abs=1e-6)
    assert fit.v == pytest.approx(2, abs=1e-6)
    assert fit.dominates(samples)
    # the t = 0 samples are excluded from the fit and meet a zero envelope
    assert fit.n_samples == 5 * 8
    assert float(fit.envelope(0.0, 3)) == 0


def test_propagation_rejects_correlated_start():
    samples = light_cone_samples(1.0, 1.0, 2.0, [0.2, 0.4], [1, 2, 3])
    samples.append(CorrelationSample(1, 0.0, 1e-3))
    with pytest.raises(NonProductStart):
        fit_propagation(samples)


def test_propagation_needs_two_times():
    with pytest.raises(InsufficientSamples):
        fit_propagation(light_cone_samples(1.0, 1.0, 2.0, [0.5], [1, 2, 3]))


@given(st.floats(0.2, 3), st.floats(0.2, 2), st.floats(0.3, 4), st.integers(0, 2**32 - 1))
def test_propagation_dominates_noisy_data(C, lam, v, seed):
    rng = np.random.default_rng(seed)
    samples = [CorrelationSample(s.r, s.t, s.value * rng.uniform(0.3, 1.5))
               for s in light_cone_samples(C, lam, v, [0.0, 0.25, 0.5, 0.75], range(1, 6))]
    fit = fit_propagation(samples, n_grid=12, rounds=1)
    assert fit.dominates(samples)


def test_propagation_tfim_quench():
    lat = build_lattice(10)
    H = model_hamiltonian(lat, "tfim", J=1.0, g=1.0)
    psi0 = product_state([UP] * 10)
    pairs = [p for p in singleton_pairs(lat, 1) if lat.distance(p[0].sites[0], p[1].sites[0]) <= 8]
    samples = []
    for t in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        samples += correlation_samples(evolve_state(H, psi0, t), lat, pairs, t=t)
    fit = fit_propagation(samples)
    assert fit.C > 0 and fit.lam > 0 and fit.v > 0
    assert fit.dominates(samples)


# -- serialisation ----------------------------------------------------------

def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0**-60, 123456789.123456789, -0.0):
        assert float(fmt(x)) == x
    assert fmt(True) == "true" and fmt(3) == "3"


def test_samples_csv_round_trip(tmp_path, rng):
    lat = build_lattice(4)
    samples = correlation_samples(random_pure(4, rng), lat, singleton_pairs(lat), t=0.25)
    write_samples_csv(tmp_path / "s.csv", samples)
    assert read_samples_csv(tmp_path / "s.csv") == samples
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "r,t,size_x,size_y,op_a,op_b,value"


def test_random_density_helper(rng):
    rho = random_density(4, rng)
    assert np.allclose(rho, rho.conj().T) and np.trace(rho).real == pytest.approx(1)
