import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crcsma.chain import (
    MacParams,
    SpectrumParams,
    build_chain,
    channel_subchain_matrix,
    channel_subchain_row,
    closed_class_count,
    marginals,
    perceived_busy_prob,
    power_iteration,
    solve_fixed_point,
    stationary_distribution,
)
from crcsma.errors import FixedPointError, NonErgodicError, ValidationError
from crcsma.metrics import transmission_prob, transmission_prob_factored

from oracles import binomial_pmf, dense_chain, dense_stationary


def spectrum_for_q(c, q):
    # alpha = 1 makes q equal to p_d
    return SpectrumParams(c=c, alpha=1.0, p_d=q, p_f=q)


# --- parameter types ------------------------------------------------------

@pytest.mark.parametrize("kwargs", [{"n": 0}, {"m": -1}, {"w": 0}, {"n": 2.5}, {"n": True}])
def test_mac_params_validation(kwargs):
    with pytest.raises(ValidationError):
        MacParams(**{"n": 2, "m": 3, "w": 32, **kwargs})


@pytest.mark.parametrize("kwargs", [{"c": 0}, {"alpha": 1.1}, {"p_d": -0.1}, {"p_f": math.nan}])
def test_spectrum_params_validation(kwargs):
    with pytest.raises(ValidationError):
        SpectrumParams(**{"c": 1, "alpha": 0.5, "p_d": 0.9, "p_f": 0.01, **kwargs})


def test_windows_double_per_stage():
    mac = MacParams(n=2, m=3, w=32)
    assert [mac.window(i) for i in range(4)] == [32, 64, 128, 256]
    assert mac.mac_states == 32 + 64 + 128 + 256


# --- perceived-busy probability and the channel sub-chain -----------------

@pytest.mark.parametrize("alpha,p_d,p_f,expected", [
    (1.0, 1.0, 0.3, 1.0),
    (0.0, 0.7, 0.0, 0.0),
    (0.5, 0.9, 0.0161, 0.45805),
])
def test_perceived_busy_prob(alpha, p_d, p_f, expected):
    q = perceived_busy_prob(SpectrumParams(c=1, alpha=alpha, p_d=p_d, p_f=p_f))
    assert q == pytest.approx(expected, abs=1e-12)


def test_subchain_row_example():
    row = channel_subchain_row(1, spectrum_for_q(3, 0.5))
    assert row[2] == pytest.approx(1 / 3)
    assert row[0] == pytest.approx(1 / 6)
    assert row[1] == pytest.approx(1 / 2)


def test_subchain_stationary_example():
    pi = dense_stationary(channel_subchain_matrix(spectrum_for_q(3, 0.5)))
    assert pi == pytest.approx([1 / 8, 3 / 8, 3 / 8, 1 / 8], abs=1e-12)


def test_subchain_boundaries():
    sp = spectrum_for_q(4, 0.3)
    assert set(channel_subchain_row(0, sp)) == {0, 1}
    assert set(channel_subchain_row(4, sp)) == {3, 4}
    for bad in (-1, 5):
        with pytest.raises(IndexError):
            channel_subchain_row(bad, sp)


@given(st.integers(1, 8), st.floats(0.01, 0.99))
def test_subchain_stationary_law_is_binomial(c, q):
    r = channel_subchain_matrix(spectrum_for_q(c, q))
    assert np.allclose(r.sum(axis=1), 1.0, atol=1e-12)
    pi = binomial_pmf(c, q)
    assert np.max(np.abs(pi @ r - pi)) < 1e-12


# --- transition matrix ----------------------------------------------------

@pytest.mark.parametrize("m", [0, 1, 3, 5])
@pytest.mark.parametrize("w", [1, 2, 32, 64])
@pytest.mark.parametrize("c", [1, 3, 6])
@pytest.mark.parametrize("q", [0.0, 0.25, 0.5, 1.0])
def test_rows_are_stochastic(m, w, c, q):
    mat = build_chain(MacParams(n=2, m=m, w=w), spectrum_for_q(c, q), 0.3).transitions
    assert mat.data.min() >= 0.0
    assert np.max(np.abs(np.asarray(mat.sum(axis=1)).ravel() - 1.0)) <= 1e-12


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_rows_are_stochastic_at_extreme_p(p):
    mat = build_chain(MacParams(n=2, m=3, w=32), spectrum_for_q(3, 0.458), p).transitions
    assert np.max(np.abs(np.asarray(mat.sum(axis=1)).ravel() - 1.0)) <= 1e-12


def test_degenerate_single_state_mac_by_hand():
    # (0,0,0): transmit, redraw k=0, channel 0 -> 1 w.p. q
    # (0,0,1): freeze, channel 1 -> 0 w.p. 1-q
    q = 0.3
    chain = build_chain(MacParams(n=3, m=0, w=1), spectrum_for_q(1, q), 0.4)
    expected = np.array([[1 - q, q], [1 - q, q]])
    assert np.allclose(chain.transitions.toarray(), expected, atol=1e-15)
    assert chain.attempt_mask.tolist() == [True, False]


@pytest.mark.parametrize("m,w,c,q,p", [
    (0, 2, 1, 0.4, 0.2), (1, 2, 2, 0.3, 0.5), (2, 2, 1, 0.458, 0.3),
    (1, 4, 3, 0.7, 0.9), (2, 1, 2, 0.1, 1.0), (3, 2, 1, 0.0, 0.3),
])
def test_matrix_matches_loop_oracle(m, w, c, q, p):
    chain = build_chain(MacParams(n=2, m=m, w=w), spectrum_for_q(c, q), p)
    states, oracle = dense_chain(m, w, c, q, p)
    assert chain.states == states
    assert np.max(np.abs(chain.transitions.toarray() - oracle)) <= 1e-15


def test_index_layout():
    chain = build_chain(MacParams(n=2, m=2, w=4), spectrum_for_q(2, 0.5), 0.1)
    for j, state in enumerate(chain.states):
        assert chain.index(*state) == j
    with pytest.raises(IndexError):
        chain.index(0, 4, 0)


# --- stationary solve -----------------------------------------------------

@pytest.mark.parametrize("mat,expected", [
    ([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5]),
    ([[0.8, 0.2], [0.3, 0.7]], [0.6, 0.4]),
])
def test_two_state_examples(mat, expected):
    pi = stationary_distribution(np.array(mat)).pi
    assert pi == pytest.approx(expected, abs=1e-14)


def test_reducible_chain_is_rejected():
    with pytest.raises(NonErgodicError):
        stationary_distribution(np.eye(3))
    assert closed_class_count(np.eye(3)) == 3


def test_non_stochastic_matrix_is_rejected():
    with pytest.raises(ValidationError):
        stationary_distribution(np.array([[0.5, 0.4], [0.5, 0.5]]))


def test_transient_states_are_allowed():
    # state 0 drains into the closed pair {1, 2}
    mat = np.array([[0.5, 0.5, 0.0], [0.0, 0.2, 0.8], [0.0, 0.6, 0.4]])
    pi = stationary_distribution(mat).pi
    assert pi == pytest.approx([0.0, 6 / 14, 8 / 14], abs=1e-14)


@pytest.mark.parametrize("c", [1, 2, 3])
def test_full_chain_normalisation_and_channel_marginal(c):
    sp = SpectrumParams(c=c, alpha=0.5, p_d=0.9, p_f=0.0161)
    chain = build_chain(MacParams(n=10, m=3, w=32), sp, 0.2)
    st_ = stationary_distribution(chain)
    assert abs(st_.pi.sum() - 1.0) <= 1e-12
    assert st_.residual <= 1e-10
    _, chan = marginals(st_, chain)
    assert np.max(np.abs(chan - binomial_pmf(c, perceived_busy_prob(sp)))) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(m=st.integers(0, 3), w=st.integers(1, 4), c=st.integers(1, 3),
       q=st.floats(0.0, 0.95), p=st.floats(0.0, 1.0))
def test_sparse_solver_matches_dense_eigen_oracle(m, w, c, q, p):
    states, oracle = dense_chain(m, w, c, q, p)
    if len(states) > 64:
        return
    chain = build_chain(MacParams(n=2, m=m, w=w), spectrum_for_q(c, q), p)
    pi = stationary_distribution(chain).pi
    assert np.max(np.abs(pi - dense_stationary(oracle))) <= 1e-10


@pytest.mark.parametrize("m,w,c,q", [(1, 2, 1, 0.3), (2, 4, 2, 0.6), (3, 8, 3, 0.458)])
def test_power_iteration_from_random_starts(m, w, c, q):
    chain = build_chain(MacParams(n=5, m=m, w=w), spectrum_for_q(c, q), 0.25)
    rng = np.random.default_rng(11)
    results = []
    for _ in range(5):
        start = rng.random(chain.total_states)
        results.append(power_iteration(chain, start=start / start.sum()).pi)
    for a in results:
        for b in results:
            assert np.max(np.abs(a - b)) <= 1e-8
    assert np.max(np.abs(results[0] - stationary_distribution(chain).pi)) <= 1e-8


def test_zero_collision_probability_empties_higher_stages():
    chain = build_chain(MacParams(n=5, m=3, w=8), spectrum_for_q(2, 0.4), 0.0)
    pi = stationary_distribution(chain).pi
    stage, _, _ = chain.state_arrays
    assert pi[stage >= 1].sum() <= 1e-14


# --- fixed point ----------------------------------------------------------

def test_single_station_never_collides():
    res = solve_fixed_point(MacParams(n=1, m=3, w=32),
                            SpectrumParams(c=1, alpha=0.5, p_d=0.9, p_f=0.0161))
    assert res.p_c == 0.0
    assert 0.0 < res.tau < 1.0


def test_always_busy_channel_blocks_transmission():
    res = solve_fixed_point(MacParams(n=5, m=3, w=32),
                            SpectrumParams(c=1, alpha=1.0, p_d=1.0, p_f=0.0))
    assert res.tau == 0.0 and res.p_c == 0.0 and res.p_c_oneshot == 0.0


def test_degenerate_chain_transmits_every_slot():
    res = solve_fixed_point(MacParams(n=1, m=0, w=1), spectrum_for_q(1, 0.0))
    assert res.tau == pytest.approx(1.0, abs=1e-12)


def test_operating_point_is_interior_and_self_consistent():
    res = solve_fixed_point(MacParams(n=10, m=3, w=32),
                            SpectrumParams(c=1, alpha=0.5, p_d=0.9, p_f=0.0161))
    assert 0.0 < res.p_c < 1.0
    assert res.p_c == pytest.approx(res.p_c_oneshot, abs=1e-8)
    assert res.p_c == pytest.approx(1 - (1 - res.tau) ** 9, abs=1e-8)
    st_, tau, p_c, iterations = res
    assert tau == res.tau and iterations >= 1 and st_.residual <= 1e-10


def test_fixed_point_budget_exhaustion():
    with pytest.raises(FixedPointError) as info:
        solve_fixed_point(MacParams(n=10, m=3, w=32),
                          SpectrumParams(c=1, alpha=0.5, p_d=0.9, p_f=0.0161), max_iter=2)
    assert len(info.value.last_iterates) == 2


@pytest.mark.parametrize("c", [1, 2, 4])
def test_tau_nonincreasing_in_window(c):
    sp = SpectrumParams(c=c, alpha=0.5, p_d=0.9, p_f=0.0161)
    taus = [solve_fixed_point(MacParams(n=5, m=2, w=w), sp).tau for w in (4, 8, 16, 32)]
    assert all(b <= a + 1e-12 for a, b in zip(taus, taus[1:]))


@pytest.mark.parametrize("c", [1, 3])
def test_tau_nonincreasing_in_busy_probability(c):
    taus = [solve_fixed_point(MacParams(n=5, m=2, w=8), spectrum_for_q(c, q)).tau
            for q in (0.0, 0.2, 0.4, 0.6, 0.8, 0.95)]
    assert all(b <= a + 1e-12 for a, b in zip(taus, taus[1:]))


@pytest.mark.parametrize("c", [1, 2, 3, 6])
@pytest.mark.parametrize("p", [0.0, 0.3, 0.9])
def test_joint_and_factored_attempt_rates_agree(c, p):
    chain = build_chain(MacParams(n=4, m=3, w=16),
                        SpectrumParams(c=c, alpha=0.5, p_d=0.9, p_f=0.0161), p)
    pi = stationary_distribution(chain)
    mac, chan = marginals(pi, chain)
    assert transmission_prob(pi, chain) == pytest.approx(
        transmission_prob_factored(mac, chan), abs=1e-9)
