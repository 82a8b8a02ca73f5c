import numpy as np
import pytest

from kljnsync.errors import ConfigError, DegenerateInputError
from kljnsync.noise import (
    NoiseSpec,
    NoiseTrace,
    Unit,
    autocorrelation_standard_error,
    averaged_periodogram,
    empirical_autocorrelation,
    generate_bandlimited_gaussian,
    generate_with_guard,
    theoretical_autocorrelation,
)

B = 1.0e4
S0 = 1.0e-6


def test_zero_duration_gives_empty_trace():
    tr = generate_bandlimited_gaussian(NoiseSpec(B, S0, seed=0), 0.0, 2e5)
    assert len(tr) == 0


def test_sample_count_is_floor_of_duration_times_rate():
    tr = generate_bandlimited_gaussian(NoiseSpec(B, S0, seed=0), 0.0100049, 1e5)
    assert len(tr) == 1000


def test_invalid_spec_rejected():
    with pytest.raises(ConfigError):
        generate_bandlimited_gaussian(NoiseSpec(B, S0), 1.0, 1.9 * B)
    with pytest.raises(ConfigError):
        generate_bandlimited_gaussian(NoiseSpec(B, S0), -1.0, 20 * B)
    with pytest.raises(ConfigError):
        NoiseSpec(-1.0, S0)
    with pytest.raises(ConfigError):
        NoiseSpec(B, -1e-9)


def test_determinism_bit_identical():
    spec = NoiseSpec(B, S0, seed=42)
    a = generate_bandlimited_gaussian(spec, 0.5, 2e5)
    b = generate_bandlimited_gaussian(spec, 0.5, 2e5)
    assert np.array_equal(a.samples, b.samples)


def test_variance_matches_flat_spectrum_power():
    # Total power of a flat one-sided density S0 over [0, B] is S0*B.
    spec = NoiseSpec(B, S0, seed=1)
    tr = generate_bandlimited_gaussian(spec, 10.0, 1e5)
    target = S0 * B
    assert abs(tr.mean_square() - target) / target < 0.03


def test_distinct_seeds_uncorrelated():
    a = generate_bandlimited_gaussian(NoiseSpec(B, S0, seed=1), 10.0, 1e5)
    b = generate_bandlimited_gaussian(NoiseSpec(B, S0, seed=2), 10.0, 1e5)
    r = np.dot(a.samples, b.samples) / np.sqrt(
        np.dot(a.samples, a.samples) * np.dot(b.samples, b.samples)
    )
    # A record of length T holds about 2*B*T independent values.
    n_eff = 2.0 * B * 10.0
    assert abs(r) < 4.0 / np.sqrt(n_eff)


def test_autocorrelation_of_constant_trace():
    tr = NoiseTrace(np.full(500, 3.0), 1e3)
    ac = empirical_autocorrelation(tr, 10)
    assert np.allclose(ac[:, 1], 9.0, rtol=1e-10)


def test_autocorrelation_lag0_is_mean_square():
    tr = generate_bandlimited_gaussian(NoiseSpec(B, S0, seed=5), 0.1, 2e5)
    ac = empirical_autocorrelation(tr, 3)
    assert ac[0, 0] == 0.0
    assert np.isclose(ac[0, 1], tr.mean_square(), rtol=1e-10)


def test_autocorrelation_guards():
    with pytest.raises(DegenerateInputError):
        empirical_autocorrelation(NoiseTrace(np.zeros(0), 1e3), 0)
    tr = NoiseTrace(np.ones(4), 1e3)
    with pytest.raises(ConfigError):
        empirical_autocorrelation(tr, 4)


def test_autocorrelation_time_reversal_symmetry():
    tr = generate_bandlimited_gaussian(NoiseSpec(B, S0, seed=9), 0.05, 2e5)
    rev = NoiseTrace(tr.samples[::-1].copy(), tr.sample_rate)
    a = empirical_autocorrelation(tr, 40)
    b = empirical_autocorrelation(rev, 40)
    assert np.allclose(a[:, 1], b[:, 1], rtol=1e-9)


def test_empirical_matches_sinc_at_reference_lags():
    # fs = 20B puts the lags 1/(4B), 1/(2B), 1/B at 5, 10, 20 samples.
    fs = 20 * B
    tr = generate_bandlimited_gaussian(NoiseSpec(B, S0, seed=7), 4.0, fs)
    ac = empirical_autocorrelation(tr, 20)
    se = autocorrelation_standard_error(NoiseSpec(B, S0), len(tr), fs)
    for m in (0, 5, 10, 20):
        theory = theoretical_autocorrelation(B, S0, ac[m, 0])
        assert abs(ac[m, 1] - theory) < 5.0 * se


def test_first_sinc_zero_at_half_inverse_bandwidth():
    fs = 20 * B
    tr = generate_bandlimited_gaussian(NoiseSpec(B, S0, seed=11), 10.0, fs)
    ac = empirical_autocorrelation(tr, 10)
    n_eff = len(tr) * B / fs
    tol = 4.0 * (S0 * B) / np.sqrt(n_eff)
    assert abs(ac[10, 1]) < tol  # lag 10 samples = 1/(2B)


def test_theoretical_autocorrelation_values():
    assert theoretical_autocorrelation(B, S0, 0.0) == B * S0
    for k in (1, 2, 3, 7):
        assert theoretical_autocorrelation(B, 1.0, k / (2 * B)) == 0.0
    got = theoretical_autocorrelation(B, 1.0, 25e-6)
    assert np.isclose(got, 2e4 / np.pi, rtol=1e-12)
    with pytest.raises(ConfigError):
        theoretical_autocorrelation(0.0, 1.0, 0.0)


def test_theoretical_autocorrelation_array_input():
    taus = np.array([0.0, 25e-6, 50e-6])
    vals = theoretical_autocorrelation(B, 1.0, taus)
    assert vals.shape == (3,)
    assert vals[0] == B and vals[2] == 0.0


def test_spectral_flatness():
    tr = generate_bandlimited_gaussian(NoiseSpec(B, S0, seed=3), 10.0, 2e5)
    freqs, psd = averaged_periodogram(tr, 200)
    band = (freqs >= 0.1 * B) & (freqs <= 0.9 * B)
    assert abs(np.mean(psd[band]) - S0) / S0 < 0.10
    stop = freqs > 1.2 * B
    assert np.mean(psd[stop]) < 1e-3 * S0


def test_zero_density_gives_zero_trace():
    tr = generate_bandlimited_gaussian(NoiseSpec(B, 0.0, seed=0), 0.01, 2e5)
    assert np.all(tr.samples == 0.0)


def test_guard_generation_trims_to_requested_length():
    spec = NoiseSpec(B, S0, seed=4)
    tr = generate_with_guard(spec, 0.01, 2e5)
    assert len(tr) == 2000
    # the guarded trace is the interior of the padded one; 1/B = 20 samples
    padded = generate_bandlimited_gaussian(spec, 0.01 + 2.0 / B, 2e5)
    assert np.array_equal(tr.samples, padded.samples[20:2020])


def test_trace_invariants():
    with pytest.raises(ConfigError):
        NoiseTrace(np.array([1.0, np.inf]), 1e3)
    with pytest.raises(ConfigError):
        NoiseTrace(np.zeros(3), 0.0)
    tr = NoiseTrace(np.zeros(10), 100.0, Unit.AMPERE)
    assert tr.duration == 0.1 and tr.unit is Unit.AMPERE
