import inspect
from dataclasses import fields

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockisd import isd as isd_mod
from blockisd.channel import random_block_sparse_cir
from blockisd.isd import (
    IsdParams,
    TerminationReason,
    block_isd_recover,
    block_vote,
    detect_support,
    first_significant_jump,
    isd_recover,
    jump_threshold,
)
from blockisd.pilots import (
    ColumnOrder,
    Measurement,
    SensingMatrix,
    build_sensing_matrix,
    h_to_g,
    make_pilot_plan,
    measure,
    p_to_theta,
)
from blockisd.solver import SolverResult


def _problem(rng, NT=8, L=16, N=256, p=48, n_taps=3, snr_db=np.inf):
    cir = random_block_sparse_cir(NT, L, n_taps, rng)
    theta = p_to_theta(build_sensing_matrix(make_pilot_plan(N, p, NT, rng), L))
    g = h_to_g(cir.coeffs, NT, L)
    return theta, g, measure(theta, g, snr_db, rng), cir


def test_jump_threshold_zero():
    assert jump_threshold(np.zeros(5), 2, 4) == 0.0


def test_jump_threshold_value():
    v = np.array([0.1, -1.1, 0.5j])
    assert jump_threshold(v, 2, 4) == pytest.approx(0.1375)


def test_jump_threshold_homogeneous(rng):
    v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    assert jump_threshold(3.5 * v, 4, 4) == pytest.approx(3.5 * jump_threshold(v, 4, 4))


def test_first_jump_example():
    # one-based i=3 in the worked example; zero-based index 2
    assert first_significant_jump([0.01, 0.02, 0.03, 1.0, 1.1], 0.1375) == 2


def test_no_jump_on_ramp():
    assert first_significant_jump(np.linspace(0, 1, 50), 0.1) is None


def test_first_of_equal_jumps():
    assert first_significant_jump([0.0, 1.0, 1.0, 2.0], 0.5) == 0


def test_detect_support_full_and_empty(rng):
    g = rng.standard_normal(10) + 1j
    assert detect_support(g, 0.0).tolist() == list(range(10))
    assert detect_support(g, np.abs(g).max()).size == 0


def test_detect_support_uses_original_positions():
    # magnitudes 0.01,0.02,0.03,1.0,1.1 sit at one-based positions 5,2,4,1,3
    g = np.array([1.0, 0.02, 1.1, 0.03, 0.01])
    assert detect_support(g, 0.03).tolist() == [0, 2]


def test_block_vote_example():
    # one-based {1,2,3,6} with N_T=4, L=2
    assert block_vote([0, 1, 2, 5], 4, 2).tolist() == [0, 1, 2, 3]


def test_block_vote_empty():
    assert block_vote([], 4, 2).size == 0


def test_block_vote_half_is_not_enough():
    assert block_vote([4, 6], 4, 2).size == 0
    assert block_vote([4, 5, 6], 4, 2).tolist() == [4, 5, 6, 7]


@settings(max_examples=100, deadline=None)
@given(NT=st.integers(1, 9), L=st.integers(1, 9), data=st.data())
def test_block_vote_returns_whole_blocks(NT, L, data):
    n = NT * L
    support = data.draw(st.sets(st.integers(0, n - 1)))
    out = block_vote(sorted(support), NT, L)
    blocks = set(out.tolist())
    for b in set(i // NT for i in blocks):
        assert set(range(b * NT, (b + 1) * NT)) <= blocks
        assert 2 * len(support & set(range(b * NT, (b + 1) * NT))) > NT


@settings(max_examples=100, deadline=None)
@given(mags=st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=40, unique=True), tau=st.floats(0, 5))
def test_threshold_keeps_top_entries(mags, tau):
    g = np.array(mags)
    v = np.sort(g)
    i = first_significant_jump(v, tau)
    if i is None:
        return
    kept = detect_support(g, v[i])
    top = np.argsort(g)[i + 1:]
    assert sorted(kept.tolist()) == sorted(top.tolist())


def test_noiseless_exact_recovery(rng):
    for _ in range(5):
        theta, g, meas, cir = _problem(rng)
        out = block_isd_recover(theta, meas)
        expected = (cir.tap_support[:, None] * 8 + np.arange(8)).ravel()
        assert out.final_support.tolist() == expected.tolist()
        assert np.linalg.norm(out.g_hat - g) / np.linalg.norm(g) < 1e-6
        assert out.termination_reason is TerminationReason.SUPPORT_STABLE


def test_isd_noiseless_exact_recovery(rng):
    theta, g, meas, _ = _problem(rng, n_taps=2)
    out = isd_recover(theta, meas)
    assert np.linalg.norm(out.g_hat - g) / np.linalg.norm(g) < 1e-6


def test_zero_measurement(rng):
    theta, _, _, _ = _problem(rng)
    out = block_isd_recover(theta, Measurement(np.zeros(48, complex), 0.0))
    np.testing.assert_array_equal(out.g_hat, 0)
    assert out.final_support.size == 0
    assert out.iterations_used == 1
    assert out.termination_reason is TerminationReason.NO_JUMP_FOUND


def test_deterministic(rng):
    theta, _, meas, _ = _problem(rng, snr_db=12.0)
    a = block_isd_recover(theta, meas)
    b = block_isd_recover(theta, meas)
    np.testing.assert_array_equal(a.g_hat, b.g_hat)
    assert a.final_support.tolist() == b.final_support.tolist()
    assert a.termination_reason == b.termination_reason


def test_single_antenna_isd_equals_block_isd(rng):
    for snr in (np.inf, 15.0):
        theta, _, meas, _ = _problem(rng, NT=1, L=64, N=256, p=32, n_taps=4, snr_db=snr)
        a = isd_recover(theta, meas)
        b = block_isd_recover(theta, meas)
        np.testing.assert_array_equal(a.g_hat, b.g_hat)
        assert a.final_support.tolist() == b.final_support.tolist()


def test_noisy_block_support_is_block_aligned(rng):
    for _ in range(5):
        theta, _, meas, _ = _problem(rng, snr_db=8.0)
        out = block_isd_recover(theta, meas)
        s = set(out.final_support.tolist())
        for b in set(i // 8 for i in s):
            assert set(range(8 * b, 8 * b + 8)) <= s


def test_iteration_cap(rng):
    theta, _, meas, _ = _problem(rng, snr_db=10.0)
    out = isd_recover(theta, meas, IsdParams(iteration_cap=1))
    assert out.iterations_used == 1
    assert out.termination_reason in (
        TerminationReason.ITERATION_CAP, TerminationReason.SUPPORT_STABLE,
        TerminationReason.NO_JUMP_FOUND,
    )


def test_support_cap_guard():
    # p >= N_T L leaves no room in the loop guard; one BP solve is returned
    theta = SensingMatrix(np.eye(4, dtype=complex), ColumnOrder.BLOCK, 2, 2)
    out = block_isd_recover(theta, Measurement(np.array([1, 0, 0, 2], dtype=complex), 0.0))
    assert out.termination_reason is TerminationReason.SUPPORT_CAP
    np.testing.assert_allclose(out.g_hat, [1, 0, 0, 2], atol=1e-9)


def test_requires_block_order(rng):
    theta, _, meas, _ = _problem(rng)
    P = SensingMatrix(theta.entries, ColumnOrder.ANTENNA_MAJOR, 8, 16)
    with pytest.raises(ValueError):
        block_isd_recover(P, meas)


def test_support_recomputed_from_scratch(monkeypatch):
    # scripted subproblem solutions: blocks {0,1}, then {1} only, then {1} again
    NT, L = 2, 4
    scripted = [
        np.array([5, 5, 4, 4, 0, 0, 0, 0], dtype=complex),
        np.array([0, 0, 4, 4, 0, 0, 0, 0], dtype=complex),
        np.array([0, 0, 4, 4, 0, 0, 0, 0], dtype=complex),
    ]
    calls = []

    class FakeSolver:
        def __init__(self, theta, params=None):
            pass

        def solve(self, y, free, delta=0.0, x0=None):
            calls.append(np.flatnonzero(~free).tolist())
            g = scripted[len(calls) - 1]
            return SolverResult(g, 0.0, 0.0, 1, True)

    monkeypatch.setattr(isd_mod, "BpdnSolver", FakeSolver)
    theta = SensingMatrix(np.ones((1, NT * L), dtype=complex), ColumnOrder.BLOCK, NT, L)
    out = block_isd_recover(theta, Measurement(np.ones(1, complex), 0.0))
    assert calls == [[], [0, 1, 2, 3], [2, 3]]
    assert out.final_support.tolist() == [2, 3]
    assert out.termination_reason is TerminationReason.SUPPORT_STABLE
    assert [h.support.tolist() for h in out.history] == [[0, 1, 2, 3], [2, 3], [2, 3]]


def test_no_sparsity_level_in_interface():
    forbidden = {"k", "sparsity", "sparsity_level", "n_nonzero", "n_taps", "n_blocks", "K"}
    for fn in (block_isd_recover, isd_recover):
        assert set(inspect.signature(fn).parameters) == {"theta", "measurement", "params"}
    assert not forbidden & {f.name for f in fields(IsdParams)}
