"""Bandlimited Gaussian noise synthesis and second-order statistics.

The wire channel carries Gaussian noise that is white up to a sharp
high-frequency cutoff B. Everything downstream (mean-square levels, the
alignment search, the resolution argument for clock synchronization) rests
on the autocorrelation of that process,

    R(tau) = B * S0 * sin(2*pi*B*tau) / (2*pi*B*tau),

which is flat-topped near tau = 0 and has its first zero at tau = 1/(2B).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError


class Unit(enum.Enum):
    VOLT = "volt"
    AMPERE = "ampere"


def derive_seed(master: int, *path: int) -> int:
    """Derive an independent 64-bit child seed from a master seed.

    Every random draw in the simulator takes its seed from some
    (master, path) pair, so distinct purposes get decorrelated streams and
    the whole run stays reproducible from one integer.
    """
    seq = np.random.SeedSequence(master, spawn_key=tuple(path))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class NoiseTrace:
    """A uniformly sampled real-valued signal.

    samples are volts or amperes per the unit tag; sample_rate is in Hz.
    An empty trace is permitted only as a degenerate value.
    """

    samples: np.ndarray
    sample_rate: float
    unit: Unit = Unit.VOLT

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", arr)
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate: must be > 0")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ConfigError("samples: all values must be finite")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def mean_square(self) -> float:
        if len(self) == 0:
            raise DegenerateInputError("mean square of an empty trace")
        return float(np.mean(self.samples**2))


@dataclass(frozen=True)
class NoiseSpec:
    """Target spectrum for synthesis: one-sided density S0 over [0, B]."""

    bandwidth_B: float
    spectral_density_S0: float
    seed: int = 0

    def __post_init__(self):
        problems = []
        if self.bandwidth_B <= 0:
            problems.append("bandwidth_B: must be > 0")
        if self.spectral_density_S0 < 0:
            problems.append("spectral_density_S0: must be >= 0")
        if problems:
            raise ConfigError(problems)

    def variance(self) -> float:
        """Total power of the ideal rectangular spectrum, S0 * B."""
        return self.spectral_density_S0 * self.bandwidth_B


def generate_bandlimited_gaussian(
    spec: NoiseSpec, duration: float, sample_rate: float, unit: Unit = Unit.VOLT
) -> NoiseTrace:
    """Synthesize Gaussian noise with a flat one-sided spectrum over [0, B].

    White Gaussian samples are brick-wall filtered in the frequency domain
    (FFT of the whole record, bins above B zeroed, inverse FFT) and rescaled
    so the expected variance is exactly S0 * B. The hard spectral edge is
    deliberate: smoother filters would move the zeros of the sinc
    autocorrelation that the synchronization analysis relies on.

    Deterministic for fixed (seed, spec, duration, sample_rate); the stream
    is PCG64 seeded with spec.seed.

    Parameters
    ----------
    spec : NoiseSpec
    duration : float
        Record length in seconds; the trace has floor(duration*sample_rate)
        samples.
    sample_rate : float
        Must satisfy sample_rate >= 2 * spec.bandwidth_B.
    unit : Unit
        Tag carried by the returned trace.

    Returns
    -------
    NoiseTrace
    """
    problems = []
    if duration < 0:
        problems.append("duration: must be >= 0")
    if sample_rate < 2.0 * spec.bandwidth_B:
        problems.append(
            f"sample_rate: {sample_rate} Hz is below Nyquist "
            f"2B = {2.0 * spec.bandwidth_B} Hz"
        )
    if problems:
        raise ConfigError(problems)

    n = int(np.floor(duration * sample_rate))
    if n == 0:
        return NoiseTrace(np.zeros(0), sample_rate, unit)
    if spec.spectral_density_S0 == 0.0:
        return NoiseTrace(np.zeros(n), sample_rate, unit)

    rng = np.random.default_rng(spec.seed)
    white = rng.standard_normal(n)

    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    keep = freqs <= spec.bandwidth_B
    spectrum[~keep] = 0.0

    # Parseval weights: DC and (for even n) the Nyquist bin count once,
    # interior bins twice. expected_power is E[sum(y^2)] for unit-variance
    # white input after masking; scaling by it makes E[var] = S0*B exact.
    weights = np.full(freqs.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    expected_power = float(np.sum(weights[keep]))

    y = np.fft.irfft(spectrum, n=n)
    y *= np.sqrt(spec.variance() * n / expected_power)
    return NoiseTrace(y, sample_rate, unit)


def generate_with_guard(
    spec: NoiseSpec, duration: float, sample_rate: float, unit: Unit = Unit.VOLT
) -> NoiseTrace:
    """Like generate_bandlimited_gaussian, padded by 1/B at each end and
    trimmed back, so the circular wraparound of the FFT filter never touches
    the samples handed to the protocols."""
    guard = 1.0 / spec.bandwidth_B
    full = generate_bandlimited_gaussian(spec, duration + 2.0 * guard, sample_rate, unit)
    cut = int(round(guard * sample_rate))
    n = int(np.floor(duration * sample_rate))
    return NoiseTrace(full.samples[cut : cut + n].copy(), sample_rate, unit)


def empirical_autocorrelation(trace: NoiseTrace, max_lag: int) -> np.ndarray:
    """Biased autocorrelation estimate of a trace.

    Returns an array of shape (max_lag + 1, 2) whose rows are
    (lag in seconds, value in squared trace units), with

        value[m] = (1/N) * sum_n x[n] * x[(n + m) mod N].

    The 1/N normalization with circular indexing keeps the estimate positive
    semidefinite and symmetric under time reversal, makes lag 0 equal the
    trace mean square, and is exact (no edge bias) for the circularly
    bandlimited traces the generator produces. For m much smaller than N it
    agrees with the linear biased estimator to O(m/N).
    """
    n = len(trace)
    if n == 0:
        raise DegenerateInputError("autocorrelation of an empty trace")
    if max_lag >= n:
        raise ConfigError(f"max_lag: {max_lag} must be < trace length {n}")
    x = trace.samples
    spectrum = np.fft.rfft(x)
    values = np.fft.irfft(np.abs(spectrum) ** 2, n=n)[: max_lag + 1] / n
    lags = np.arange(max_lag + 1) / trace.sample_rate
    return np.column_stack([lags, values])


def theoretical_autocorrelation(B: float, S0: float, tau) -> np.ndarray | float:
    """R(tau) = B * S0 * sin(2*pi*B*tau) / (2*pi*B*tau), with R(0) = B * S0.

    Accepts scalar or array tau.
    """
    if B <= 0:
        raise ConfigError("B: must be > 0")
    # np.sinc(x) = sin(pi x)/(pi x), so sinc(2*B*tau) is the wanted kernel.
    x = 2.0 * B * np.asarray(tau, dtype=np.float64)
    out = B * S0 * np.sinc(x)
    # The kernel's zeros sit at nonzero integer x, but sin(pi*k) evaluates to
    # ~1e-16 and input rounding can leave x a ulp off the integer; pin them.
    nearest = np.round(x)
    at_zero = (nearest != 0.0) & (np.abs(x - nearest) <= 4.0 * np.finfo(float).eps * np.abs(nearest))
    out = np.where(at_zero, 0.0, out)
    if np.isscalar(tau):
        return float(out)
    return out


def autocorrelation_standard_error(spec: NoiseSpec, n_samples: int, sample_rate: float) -> float:
    """Sampling std of the lag-0 autocorrelation estimate.

    For the rectangular spectrum the estimator variance at lag 0 is
    (S0*B)^2 / (B*T) with T the record length; at other lags it is at most
    that, so this value is a safe one-size band for all small lags.
    """
    effective = n_samples * spec.bandwidth_B / sample_rate
    return spec.variance() / np.sqrt(effective)


def averaged_periodogram(trace: NoiseTrace, n_segments: int) -> tuple[np.ndarray, np.ndarray]:
    """One-sided PSD estimate by averaging rectangular-window periodograms
    of n_segments non-overlapping segments. Returns (frequencies, psd)."""
    n = len(trace)
    if n == 0:
        raise DegenerateInputError("periodogram of an empty trace")
    seg_len = n // n_segments
    if seg_len < 2:
        raise ConfigError("n_segments: leaves segments shorter than 2 samples")
    fs = trace.sample_rate
    acc = np.zeros(seg_len // 2 + 1)
    for i in range(n_segments):
        seg = trace.samples[i * seg_len : (i + 1) * seg_len]
        spectrum = np.fft.rfft(seg)
        psd = (np.abs(spectrum) ** 2) / (fs * seg_len)
        psd[1:] *= 2.0  # fold negative frequencies; DC (and Nyquist) once
        if seg_len % 2 == 0:
            psd[-1] /= 2.0
        acc += psd
    freqs = np.fft.rfftfreq(seg_len, d=1.0 / fs)
    return freqs, acc / n_segments
