import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crcsma import _simcore_py
from crcsma.chain import MacParams, SpectrumParams
from crcsma.errors import ContractError, UndefinedEstimateError, ValidationError
from crcsma.metrics import Metrics, evaluate
from crcsma.simulator import (
    BACKEND,
    SimConfig,
    SimStats,
    binomial_se,
    compare,
    estimate_pc,
    estimate_throughput,
    simulate,
)

OPERATING = SpectrumParams(c=1, alpha=0.5, p_d=0.9, p_f=0.0161)
needs_ext = pytest.mark.skipif(BACKEND != "cython", reason="compiled kernel not built")


def config(n=5, m=3, w=32, spectrum=OPERATING, slots=200_000, seed=1, **kw):
    return SimConfig(MacParams(n=n, m=m, w=w), spectrum, slots=slots, seed=seed, **kw)


def stats_with(attempts, collisions, measured=100, successes=None):
    cfg = config(slots=measured + 1, warmup_slots=1)
    succ = attempts - collisions if successes is None else successes
    return SimStats(cfg, attempts, succ, collisions, 0, 0, measured, (attempts,) + (0,) * 4)


# --- random stream --------------------------------------------------------

def test_splitmix_reference_vector():
    # published first output of splitmix64 seeded with 1234567
    assert _simcore_py._splitmix64(1234567)[1] == 6457827717110365317


def test_xoshiro_reference_vector():
    # published xoshiro256** outputs from the state (1, 2, 3, 4)
    rng = _simcore_py._Xoshiro256(0)
    rng.s0, rng.s1, rng.s2, rng.s3 = 1, 2, 3, 4
    assert [rng.next() for _ in range(4)] == [11520, 0, 1509978240, 1215971899390074240]


@given(st.integers(0, 2 ** 64 - 1))
@settings(max_examples=25)
def test_uniform_draws_stay_below_one(seed):
    rng = _simcore_py._Xoshiro256(seed)
    for _ in range(50):
        u = rng.uniform()
        assert 0.0 <= u < 1.0
        assert 0 <= rng.below(7) < 7


# --- configuration --------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"slots": 0}, {"slots": 10, "warmup_slots": 10}, {"seed": -1}, {"seed": 2 ** 64},
    {"warmup_slots": -1},
])
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        config(**kwargs)


def test_default_warmup():
    assert config(slots=1_000_000).warmup_slots == 10_000
    assert config(slots=5_000).warmup_slots == 500


# --- slot kernel ----------------------------------------------------------

@pytest.mark.parametrize("shared", [True, False])
def test_counts_are_consistent(shared):
    cfg = config(n=6, spectrum=SpectrumParams(2, 0.4, 0.8, 0.05), shared_pu=shared)
    s = simulate(cfg)
    assert s.measured_slots == cfg.slots - cfg.warmup_slots
    assert s.successes + s.collisions == s.attempts
    assert sum(s.per_station_attempts) == s.attempts
    assert len(s.per_station_attempts) == 6
    assert s.idle_slots + s.busy_blocked_slots <= s.measured_slots
    assert min(s.attempts, s.successes, s.collisions, s.idle_slots, s.pu_overlaps) >= 0


def test_deterministic_given_seed():
    assert simulate(config(seed=99)) == simulate(config(seed=99))


@needs_ext
@pytest.mark.parametrize("shared", [True, False])
@pytest.mark.parametrize("n,m,w,spectrum", [
    (5, 3, 32, OPERATING),
    (3, 1, 4, SpectrumParams(3, 0.3, 0.7, 0.2)),
    (8, 5, 16, SpectrumParams(6, 0.8, 0.5, 0.01)),
])
def test_backends_are_bit_identical(shared, n, m, w, spectrum):
    cfg = config(n=n, m=m, w=w, spectrum=spectrum, slots=20_000, seed=2024, shared_pu=shared)
    compiled = simulate(cfg, backend="cython")
    pure = simulate(cfg, backend="python")
    assert compiled.backend == "cython" and pure.backend == "python"
    assert compiled == pure


def test_unknown_backend():
    with pytest.raises(ValidationError):
        simulate(config(slots=100), backend="fortran")


def test_single_station_never_collides():
    s = simulate(config(n=1, slots=100_000))
    assert s.collisions == 0 and s.attempts > 0


def test_single_station_throughput_matches_attempt_rate():
    s = simulate(config(n=1, slots=1_000_000))
    tau = evaluate(MacParams(n=1, m=3, w=32), OPERATING).tau
    assert abs(estimate_throughput(s) - tau) <= 0.01


def test_blocked_channel_prevents_attempts():
    s = simulate(config(spectrum=SpectrumParams(1, 1.0, 1.0, 0.0), slots=50_000))
    assert s.attempts == 0
    assert s.busy_blocked_slots == s.measured_slots


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_pu_occupancy_converges_to_activity(alpha):
    s = simulate(config(spectrum=SpectrumParams(3, alpha, 0.9, 0.01), slots=1_000_000))
    assert abs(s.pu_occupancy - alpha) <= 0.01


def test_seed_sensitivity_within_three_standard_errors():
    a = simulate(config(slots=1_000_000, seed=1))
    b = simulate(config(slots=1_000_000, seed=2))
    pa, pb = estimate_pc(a), estimate_pc(b)
    se = math.hypot(binomial_se(pa, a.attempts), binomial_se(pb, b.attempts))
    assert a != b
    assert abs(pa - pb) <= 3 * se


# --- estimators -----------------------------------------------------------

def test_estimator_arithmetic():
    assert estimate_pc(stats_with(100, 38)) == pytest.approx(0.38)
    assert estimate_pc(stats_with(100, 0)) == 0.0
    assert estimate_pc(stats_with(100, 100)) == 1.0
    assert estimate_throughput(stats_with(0, 0)) == 0.0
    assert estimate_throughput(stats_with(100, 0, measured=100)) == 1.0
    big = stats_with(400_000, 12_580, measured=1_000_000)
    assert estimate_throughput(big) == pytest.approx(0.38742)


def test_estimators_undefined_without_data():
    with pytest.raises(UndefinedEstimateError):
        estimate_pc(stats_with(0, 0))


# --- comparison -----------------------------------------------------------

def metrics_like(tau, p_c, throughput, n=5):
    return Metrics(tau=tau, p_c=p_c, p_tr=throughput, p_fr=0.0, p_coll_slot=0.0,
                   throughput=throughput, n=n, mac=MacParams(n=n, m=3, w=32),
                   spectrum=OPERATING)


def test_compare_identical_values_pass():
    s = stats_with(100, 38, measured=200)
    report = compare(metrics_like(s.attempt_rate, 0.38, 0.31), s, tolerance=0.02)
    assert report.passed
    assert all(e.delta == pytest.approx(0.0, abs=1e-15) for e in report.entries)
    assert report["p_c"].std_error == pytest.approx(math.sqrt(0.38 * 0.62 / 100))


def test_compare_names_the_failing_metric():
    s = stats_with(100, 38, measured=200)
    report = compare(metrics_like(s.attempt_rate, 0.43, 0.31), s, tolerance=0.02)
    assert not report.passed and report.failed == ("p_c",)
    assert report["p_c"].delta == pytest.approx(0.05)


def test_compare_rejects_mismatched_configurations():
    s = stats_with(10, 1)
    other = Metrics(0.1, 0.1, 0.1, 0.1, 0.8, 0.1, n=5, mac=MacParams(n=5, m=3, w=64),
                    spectrum=OPERATING)
    with pytest.raises(ContractError):
        compare(other, s, 0.02)
    with pytest.raises(ContractError):
        compare(Metrics(0.1, 0.1, 0.1, 0.1, 0.8, 0.1, n=4), s, 0.02)


def test_compare_without_attempts():
    s = stats_with(0, 0)
    assert compare(metrics_like(0.0, 0.0, 0.0), s, 0.02).passed
    report = compare(metrics_like(0.1, 0.2, 0.0), s, 0.02, metrics=("p_c",))
    assert not report.passed and math.isnan(report["p_c"].empirical)


# --- agreement with the analytic chain -----------------------------------

@pytest.mark.parametrize("n", range(2, 11))
def test_collision_probability_matches_chain(n):
    mac = MacParams(n=n, m=3, w=32)
    analytic = evaluate(mac, OPERATING)
    stats = simulate(SimConfig(mac, OPERATING, slots=1_000_000, seed=20121001 + n))
    assert compare(analytic, stats, 0.02, metrics=("p_c",)).passed, (
        f"analytic {analytic.p_c:.4f} vs simulated {estimate_pc(stats):.4f}")


@pytest.mark.parametrize("n", [2, 6, 10])
def test_independent_pu_views_match_chain(n):
    # every station draws its own PU occupancy, which is what the chain assumes
    mac = MacParams(n=n, m=3, w=32)
    analytic = evaluate(mac, OPERATING)
    stats = simulate(SimConfig(mac, OPERATING, slots=1_000_000, seed=7, shared_pu=False))
    assert compare(analytic, stats, 0.02, metrics=("p_c",)).passed


def test_fallback_selected_at_import():
    import os
    import subprocess
    import sys

    env = {**os.environ, "CRCSMA_PURE_PYTHON": "1"}
    proc = subprocess.run([sys.executable, "-c", "import crcsma; print(crcsma.BACKEND)"],
                          capture_output=True, text=True, env=env, check=True)
    assert proc.stdout.strip() == "python"
