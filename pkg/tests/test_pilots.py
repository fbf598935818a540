import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockisd.channel import generate_cir, vehicular_a
from blockisd.exceptions import ConfigurationError, DimensionError
from blockisd.pilots import (
    ColumnOrder,
    PilotPlan,
    SensingMatrix,
    block_permutation,
    build_sensing_matrix,
    g_to_h,
    h_to_g,
    make_pilot_plan,
    measure,
    p_to_theta,
    theta_to_p,
)


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_exhaustive_pilot_selection(rng):
    plan = make_pilot_plan(4, 4, 2, rng)
    assert plan.omega.tolist() == [0, 1, 2, 3]


def test_full_sized_plan(rng):
    plan = make_pilot_plan(4096, 640, 32, rng)
    assert plan.n_pilots == 640
    assert np.unique(plan.omega).size == 640
    assert plan.omega.max() <= 4095 and plan.omega.min() >= 0
    assert np.all(np.diff(plan.omega) > 0)
    np.testing.assert_allclose(np.abs(plan.symbols), 1.0)
    assert plan.symbols.shape == (32, 640)


def test_plan_deterministic():
    a = make_pilot_plan(512, 96, 8, np.random.default_rng(1))
    b = make_pilot_plan(512, 96, 8, np.random.default_rng(1))
    np.testing.assert_array_equal(a.omega, b.omega)
    np.testing.assert_array_equal(a.symbols, b.symbols)


def test_too_many_pilots(rng):
    with pytest.raises(ConfigurationError):
        make_pilot_plan(8, 9, 1, rng)


def test_first_dft_column_is_ones():
    plan = PilotPlan(np.arange(4), np.ones((1, 4), dtype=complex), 4)
    P = build_sensing_matrix(plan, 1)
    np.testing.assert_array_equal(P.entries, np.ones((4, 1)))


def test_two_by_two_dft_rows():
    plan = PilotPlan(np.array([0, 1]), np.ones((1, 2), dtype=complex), 4)
    P = build_sensing_matrix(plan, 2).entries
    expected = np.array([[1, 1], [1, np.exp(-1j * np.pi / 2)]])
    np.testing.assert_allclose(P, expected, atol=1e-15)


def test_sensing_matrix_blocks(rng):
    plan = make_pilot_plan(64, 10, 3, rng)
    P = build_sensing_matrix(plan, 5)
    assert P.shape == (10, 15)
    assert P.column_order is ColumnOrder.ANTENNA_MAJOR
    m = plan.omega[:, None]
    k = np.arange(5)[None, :]
    F = np.exp(-2j * np.pi * m * k / 64)
    for i in range(3):
        np.testing.assert_allclose(P.entries[:, i * 5:(i + 1) * 5], plan.symbols[i][:, None] * F, atol=1e-12)


def test_h_to_g_example():
    # L=2, N_T=3: h = [h1(1), h1(2), h2(1), h2(2), h3(1), h3(2)]
    h = np.array(["a1", "a2", "b1", "b2", "c1", "c2"])
    assert h_to_g(h, 3, 2).tolist() == ["a1", "b1", "c1", "a2", "b2", "c2"]


@pytest.mark.parametrize("NT, L", [(1, 7), (5, 1)])
def test_identity_cases(NT, L, rng):
    h = _crandn(rng, NT * L)
    np.testing.assert_array_equal(h_to_g(h, NT, L), h)


def test_bad_length():
    with pytest.raises(DimensionError):
        h_to_g(np.zeros(7), 2, 4)


def test_permutation_matches_formula():
    NT, L = 3, 4
    perm = block_permutation(NT, L)
    for l, i in itertools.product(range(L), range(NT)):
        assert perm[l * NT + i] == i * L + l


@pytest.mark.parametrize("L", range(1, 9))
@pytest.mark.parametrize("NT", range(1, 9))
def test_round_trips_exhaustive(NT, L, rng):
    h = _crandn(rng, NT * L)
    np.testing.assert_array_equal(g_to_h(h_to_g(h, NT, L), NT, L), h)
    np.testing.assert_array_equal(h_to_g(g_to_h(h, NT, L), NT, L), h)
    P = SensingMatrix(_crandn(rng, 3, NT * L), ColumnOrder.ANTENNA_MAJOR, NT, L)
    theta = p_to_theta(P)
    np.testing.assert_array_equal(theta_to_p(theta).entries, P.entries)
    y_p = P.entries @ h
    y_t = theta.entries @ h_to_g(h, NT, L)
    assert np.linalg.norm(y_p - y_t) <= 1e-12 * np.linalg.norm(y_p)


def test_theta_identity_when_trivial(rng):
    P = SensingMatrix(_crandn(rng, 4, 6), ColumnOrder.ANTENNA_MAJOR, 1, 6)
    np.testing.assert_array_equal(p_to_theta(P).entries, P.entries)


def test_double_permutation_with_swapped_roles(rng):
    NT, L = 3, 4
    P = SensingMatrix(_crandn(rng, 5, 12), ColumnOrder.ANTENNA_MAJOR, NT, L)
    theta = p_to_theta(P)
    swapped = SensingMatrix(theta.entries, ColumnOrder.ANTENNA_MAJOR, L, NT)
    np.testing.assert_array_equal(p_to_theta(swapped).entries, P.entries)


def test_model_equivalence_random(rng):
    plan = make_pilot_plan(64, 12, 3, rng)
    P = build_sensing_matrix(plan, 4)
    theta = p_to_theta(P)
    h = _crandn(rng, 12)
    assert np.linalg.norm(P.entries @ h - theta.entries @ h_to_g(h, 3, 4)) <= 1e-12 * np.linalg.norm(P.entries @ h)


@settings(max_examples=50, deadline=None)
@given(NT=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_block_sparsity_of_common_support(NT, seed):
    rng = np.random.default_rng(seed)
    cir = generate_cir(vehicular_a(12.5e6, 32), NT, rng)
    blocks = h_to_g(cir.coeffs, NT, 32).reshape(32, NT)
    nz = blocks != 0
    assert np.all(nz.all(axis=1) | (~nz).all(axis=1))


def test_noiseless_measurement(rng):
    theta = _crandn(rng, 6, 10)
    g = _crandn(rng, 10)
    m = measure(theta, g, np.inf, rng)
    np.testing.assert_array_equal(m.y, theta @ g)
    assert m.noise_variance == 0.0


def test_zero_signal_is_noiseless(rng):
    m = measure(_crandn(rng, 6, 10), np.zeros(10), 10.0, rng)
    np.testing.assert_array_equal(m.y, 0)
    assert m.noise_variance == 0.0


def test_noise_variance_formula(rng):
    theta = _crandn(rng, 8, 10)
    g = _crandn(rng, 10)
    m = measure(theta, g, 13.0, rng)
    assert m.noise_variance == pytest.approx(np.linalg.norm(theta @ g) ** 2 / (8 * 10 ** 1.3))


@pytest.mark.parametrize("snr_db", [0.0, 10.0, 25.0])
def test_empirical_snr(snr_db, rng):
    plan = make_pilot_plan(128, 16, 2, rng)
    theta = p_to_theta(build_sensing_matrix(plan, 8))
    sig = noise = 0.0
    for _ in range(10_000):
        g = _crandn(rng, 16)
        m = measure(theta, g, snr_db, rng)
        clean = theta.entries @ g
        sig += np.linalg.norm(clean) ** 2
        noise += np.linalg.norm(m.y - clean) ** 2
    assert abs(10 * np.log10(sig / noise) - snr_db) < 0.2
