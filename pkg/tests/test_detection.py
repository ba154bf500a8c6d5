import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biphoton.detection import (ChannelError, ChannelModel, CoincidenceHistogram,
                                analyze_histogram, duty_cycle_average, expected_counts,
                                params_hash, poisson_band_fraction, rates_from_counts,
                                synthesize_histogram)
from biphoton.observables import bin_average
from biphoton.params import DetectionParams

from helpers import wp

REC = 2**18
DT = 6.4e-9


def fig2a_binned():
    w = wp("fig2a")
    starts, r_c = bin_average(w.tau_s, w.r_c, DT)
    return starts, r_c, w


def test_pure_channel_is_biphotons_only():
    det = DetectionParams(eta_s=0.02, eta_as=0.01)
    ch = ChannelModel(det, r_s=4.8e5, r_b=2.3e5)
    assert ch.purity == 1.0
    r_c = np.array([0.0, 1e5, 3e6])
    np.testing.assert_allclose(expected_counts(r_c, ch), REC * r_c * 0.01 * DT, rtol=1e-15)


def test_leakage_only():
    det = DetectionParams(eta_s=0.02, eta_as=0.01, noise_rate_as=500.0)
    ch = ChannelModel(det, r_s=4.8e5, r_b=2.3e5)
    assert expected_counts([0.0], ch)[0] == pytest.approx(REC * 500.0 * DT, rel=1e-15)


def test_background_level_by_hand():
    det = DetectionParams(eta_s=0.02, eta_as=0.01, noise_rate_s=1000.0, noise_rate_as=200.0)
    r_s, r_as = 4.787e5, 2.298e5
    ch = ChannelModel(det, r_s, r_as)
    # p_s = 0.02 * 4.787e5 / (0.02 * 4.787e5 + 1000) = 9574 / 10574
    p_s = 9574.0 / 10574.0
    assert ch.purity == pytest.approx(p_s, rel=1e-12)
    by_hand = REC * p_s * (r_as * 0.01 + 200.0) * DT + REC * (1 - p_s) * (200.0 + r_as * 0.01) * DT
    assert expected_counts([r_as], ch)[0] == pytest.approx(by_hand, rel=1e-12)
    # about 4.2 counts per 6.4 ns bin at the background
    assert by_hand == pytest.approx(4.19, abs=0.01)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1e6), st.floats(1, 1e7))
def test_purity_is_a_fraction(eta_s, noise, r_s_scale, r_s):
    det = DetectionParams(eta_s=eta_s, noise_rate_s=noise * r_s_scale)
    p = ChannelModel(det, r_s, 1.0).purity
    assert 0.0 <= p <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e7), min_size=1, max_size=50),
       st.floats(1e-3, 1), st.floats(0, 1e4), st.floats(0, 1e4), st.floats(1e3, 1e7))
def test_analyze_inverts_expected_counts(r_c, eta_as, n_s, n_as, r_b):
    det = DetectionParams(eta_s=0.02, eta_as=eta_as, noise_rate_s=n_s, noise_rate_as=n_as)
    ch = ChannelModel(det, r_s=4.8e5, r_b=r_b)
    r_c = np.array(r_c)
    back = rates_from_counts(expected_counts(r_c, ch), ch)
    np.testing.assert_allclose(back.r_c_exp, r_c, rtol=1e-9, atol=1e-9 * (1 + ch.r_env))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(-3, 3))
def test_expected_counts_is_affine(x, y, t):
    ch = ChannelModel(DetectionParams(noise_rate_s=300.0, noise_rate_as=40.0), 4.8e5, 2.3e5)
    f = lambda r: expected_counts([r], ch)[0]
    assert f(x + t * (y - x)) == pytest.approx(f(x) + t * (f(y) - f(x)), rel=1e-9, abs=1e-9)


def test_zero_expectation_gives_empty_histogram():
    h = synthesize_histogram(np.zeros(20), seed=4)
    assert np.all(h.counts == 0)


def test_synthesis_is_deterministic():
    mean = np.linspace(0, 30, 50)
    a = synthesize_histogram(mean, seed=11)
    b = synthesize_histogram(mean, seed=11)
    c = synthesize_histogram(mean, seed=12)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)


def test_synthesis_mean():
    mean = np.array([0.5, 4.0, 25.0, 300.0])
    draws = np.array([synthesize_histogram(mean, seed=s).counts for s in range(1000)])
    # per bin within 3 sigma / sqrt(1000)
    assert np.all(np.abs(draws.mean(axis=0) - mean) <= 3 * np.sqrt(mean) / np.sqrt(1000))


def test_zero_histogram_recovers_minus_r_env():
    det = DetectionParams(noise_rate_s=500.0, noise_rate_as=80.0)
    ch = ChannelModel(det, 4.8e5, 2.3e5)
    h = CoincidenceHistogram(np.arange(10) * DT, np.zeros(10, dtype=int), REC, DT)
    res = analyze_histogram(h, ch)
    np.testing.assert_allclose(res.r_c_exp, -ch.r_env, rtol=1e-15)


def test_measured_r_env_overrides_the_model():
    det = DetectionParams(noise_rate_s=500.0, noise_rate_as=80.0)
    ch = ChannelModel(det, 4.8e5, 2.3e5)
    h = CoincidenceHistogram(np.arange(3) * DT, np.array([3, 4, 5]), REC, DT)
    a = analyze_histogram(h, ch)
    b = analyze_histogram(h, ch, r_env=ch.r_env)
    c = analyze_histogram(h, ch, r_env=0.0)
    np.testing.assert_array_equal(a.r_c_exp, b.r_c_exp)
    np.testing.assert_allclose(c.r_c_exp - a.r_c_exp, ch.r_env, rtol=1e-12)


def test_round_trip_over_seeds():
    starts, r_c, w = fig2a_binned()
    det = DetectionParams(noise_rate_s=300.0, noise_rate_as=50.0)
    ch = ChannelModel(det, w.r_s, w.r_b)
    mean = expected_counts(r_c, ch)
    worst = 1.0
    for seed in range(100):
        h = synthesize_histogram(mean, seed, starts, REC, DT)
        res = analyze_histogram(h, ch)
        worst = min(worst, poisson_band_fraction(res, r_c, ch.normalization, k=4))
    assert worst >= 0.99


def test_recovered_background_is_r_as():
    starts, r_c, w = fig2a_binned()
    ch = ChannelModel(DetectionParams(), w.r_s, w.r_b)
    mean = expected_counts(r_c, ch)
    tail = starts > 1.5e-6
    est = [analyze_histogram(synthesize_histogram(mean, s, starts), ch).r_c_exp[tail].mean()
           for s in range(20)]
    sigma = np.sqrt(mean[tail].mean() / tail.sum() / 20) / ch.normalization
    assert abs(np.mean(est) - w.r_as) < 4 * sigma


@pytest.mark.parametrize("det", [DetectionParams(eta_as=0.0), DetectionParams(eta_s=0.0)])
def test_non_invertible_channel(det):
    ch = ChannelModel(det, 4.8e5, 2.3e5)
    h = CoincidenceHistogram(np.arange(3) * DT, np.array([1, 2, 3]), REC, DT)
    with pytest.raises(ChannelError):
        analyze_histogram(h, ch)


def test_histogram_file_round_trip(tmp_path):
    h = synthesize_histogram(np.linspace(0, 9, 40), seed=5, params_hash=params_hash({"a": 1}))
    path = tmp_path / "h.csv"
    h.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[:3] == [f"# receptions,{REC}", f"# delta_tau_s,{DT!r}", "# seed,5"]
    assert lines[4] == "bin_start_s,counts"
    back = CoincidenceHistogram.read_csv(path)
    np.testing.assert_array_equal(back.counts, h.counts)
    np.testing.assert_array_equal(back.bin_start_s, h.bin_start_s)
    assert (back.receptions, back.delta_tau_s, back.seed, back.params_hash) == \
        (h.receptions, h.delta_tau_s, 5, h.params_hash)
    np.testing.assert_allclose(np.diff(back.bin_edges_s), DT)


def test_histogram_rejects_bad_counts():
    with pytest.raises(ValueError):
        CoincidenceHistogram(np.arange(3) * DT, np.array([1, -1, 0]), REC, DT)
    with pytest.raises(ValueError):
        CoincidenceHistogram(np.array([0, DT, 3 * DT]), np.array([1, 1, 0]), REC, DT)


def test_params_hash_is_stable():
    assert params_hash({"b": 2.0, "a": 1.0}) == params_hash({"a": 1.0, "b": 2.0})
    assert params_hash({"a": 1}) != params_hash({"a": 2})


def test_duty_cycle():
    assert duty_cycle_average(2.5e5) == pytest.approx(1000.0)
    with pytest.raises(ValueError):
        duty_cycle_average(1.0, on_s=3.0, period_s=1.0)
