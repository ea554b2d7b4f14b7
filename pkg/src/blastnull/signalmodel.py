"""Waveform generation and the frequency-domain multipath signal model.

Everything downstream works on unnormalized N-point DFT vectors of one
transmitted pulse.  A propagation path with delay ``tau`` seconds acts on
the transmit spectrum as the elementwise phasor ``exp(-2j*pi*fs*n*tau/N)``,
which represents fractional-sample delays exactly (circularly over the
frame) with no time-domain resampling.  Delay-steered copies of the
transmit spectrum stacked as columns form a steering matrix, one column
per path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConditioningError, ParameterError, TruncationError

# Delays closer than this are indistinguishable and make steering
# matrices exactly singular, so they are rejected at construction.
DELAY_TIE_RESOLUTION = 1e-9


@dataclass(frozen=True)
class Waveform:
    """Complex analytic pulse with its design parameters.

    The passband frequencies are retained in the phase law, so the
    samples are a complex exponential sweeping the physical band.
    """

    samples: np.ndarray
    sample_rate: float
    duration: float
    center_frequency: float
    bandwidth: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ParameterError("waveform samples must be a 1-D array")
        expected = int(round(self.duration * self.sample_rate))
        if len(samples) != expected:
            raise ParameterError(
                f"waveform has {len(samples)} samples, expected "
                f"round(duration * fs) = {expected}"
            )
        if not self.bandwidth < self.sample_rate:
            raise ParameterError("bandwidth must be below the sample rate")


@dataclass(frozen=True)
class Spectrum:
    """Unnormalized N-point DFT of one pulse, with its sample rate."""

    bins: np.ndarray
    fft_size: int
    sample_rate: float

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.complex128)
        object.__setattr__(self, "bins", bins)
        if self.fft_size < 1:
            raise ParameterError("fft_size must be >= 1")
        if bins.ndim != 1 or len(bins) != self.fft_size:
            raise ParameterError("bins must be a 1-D array of length fft_size")
        if not self.sample_rate > 0:
            raise ParameterError("sample_rate must be positive")


@dataclass(frozen=True)
class SteeringMatrix:
    """N x M matrix whose column i is the transmit spectrum delayed by delays[i]."""

    columns: np.ndarray
    delays: np.ndarray

    def __post_init__(self):
        columns = np.asarray(self.columns, dtype=np.complex128)
        delays = np.asarray(self.delays, dtype=np.float64)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "delays", delays)
        if columns.ndim != 2:
            raise ParameterError("columns must be a 2-D array")
        if delays.ndim != 1 or len(delays) != columns.shape[1]:
            raise ParameterError("one delay per column is required")
        if len(delays) < 1:
            raise ParameterError("at least one path is required")
        if not np.all(np.isfinite(delays)) or np.any(delays < 0):
            raise ParameterError("delays must be finite and >= 0")

    @property
    def n_paths(self) -> int:
        return self.columns.shape[1]

    @property
    def fft_size(self) -> int:
        return self.columns.shape[0]


@dataclass(frozen=True)
class PathSet:
    """Ordered (complex amplitude, delay) pairs for one propagation group.

    Paths are stored sorted by delay; ties below DELAY_TIE_RESOLUTION are
    rejected because they produce singular steering geometry downstream.
    """

    amplitudes: np.ndarray
    delays: np.ndarray

    def __post_init__(self):
        amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=np.complex128))
        delays = np.atleast_1d(np.asarray(self.delays, dtype=np.float64))
        if len(amplitudes) != len(delays):
            raise ParameterError("amplitudes and delays must have equal length")
        if len(delays) == 0:
            raise ParameterError("a path set needs at least one path")
        if not np.all(np.isfinite(delays)) or np.any(delays < 0):
            raise ParameterError("delays must be finite and >= 0")
        order = np.argsort(delays, kind="stable")
        delays = delays[order]
        amplitudes = amplitudes[order]
        if len(delays) > 1 and np.min(np.diff(delays)) < DELAY_TIE_RESOLUTION:
            raise ParameterError(
                f"path delays closer than {DELAY_TIE_RESOLUTION} s are not resolvable"
            )
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "delays", delays)

    def __len__(self) -> int:
        return len(self.delays)

    def scaled(self, factor: complex) -> "PathSet":
        """Return a copy with every amplitude multiplied by ``factor``."""
        return PathSet(self.amplitudes * factor, self.delays.copy())


def generate_lfm(
    duration: float, center_frequency: float, bandwidth: float, fs: float
) -> Waveform:
    """Generate a unit-amplitude linear FM chirp.

    The instantaneous frequency sweeps linearly from
    ``center_frequency - bandwidth/2`` to ``center_frequency + bandwidth/2``
    over ``duration`` seconds.

    Parameters
    ----------
    duration : float
        Pulse length in seconds.
    center_frequency : float
        Sweep center in Hz.
    bandwidth : float
        Swept band in Hz.
    fs : float
        Sample rate in Hz.

    Returns
    -------
    Waveform
        Complex chirp with unit peak amplitude.
    """
    if duration <= 0 or bandwidth <= 0 or fs <= 0:
        raise ParameterError("duration, bandwidth and fs must be positive")
    if not fs > 2 * (center_frequency + bandwidth / 2):
        raise ParameterError(
            "fs must exceed twice the top sweep frequency "
            f"(need > {2 * (center_frequency + bandwidth / 2)} Hz, got {fs})"
        )
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    f_start = center_frequency - bandwidth / 2
    phase = 2 * np.pi * (f_start * t + bandwidth / (2 * duration) * t**2)
    return Waveform(
        samples=np.exp(1j * phase),
        sample_rate=fs,
        duration=duration,
        center_frequency=center_frequency,
        bandwidth=bandwidth,
    )


def spectrum_of(waveform: Waveform, fft_size: int) -> Spectrum:
    """Unnormalized ``fft_size``-point DFT of a zero-padded waveform.

    Raises
    ------
    TruncationError
        If ``fft_size`` is smaller than the waveform, which would silently
        discard signal energy and cripple detection.
    """
    n = len(waveform.samples)
    if fft_size < n:
        raise TruncationError(
            f"fft_size {fft_size} would truncate a {n}-sample pulse; "
            "choose fft_size >= signal length"
        )
    bins = np.fft.fft(waveform.samples, n=fft_size)
    return Spectrum(bins=bins, fft_size=fft_size, sample_rate=waveform.sample_rate)


def steering_column(spectrum: Spectrum, tau: float) -> np.ndarray:
    """Transmit spectrum delayed by ``tau`` seconds.

    Element n is ``S(n) * exp(-2j*pi*fs*n*tau/N)``: a circular shift of
    ``tau * fs`` (possibly fractional) samples in the time domain.
    """
    if not np.isfinite(tau):
        raise ParameterError("tau must be finite")
    n = np.arange(spectrum.fft_size)
    phase = -2j * np.pi * spectrum.sample_rate * n * tau / spectrum.fft_size
    return spectrum.bins * np.exp(phase)


def steering_matrix(spectrum: Spectrum, delays) -> SteeringMatrix:
    """Stack steering columns for ``delays`` (in input order).

    Raises
    ------
    ConditioningError
        If two delays coincide within DELAY_TIE_RESOLUTION, which makes the
        Gram matrix of the columns exactly singular.
    """
    delays = np.atleast_1d(np.asarray(delays, dtype=np.float64))
    if len(delays) == 0:
        raise ParameterError("at least one delay is required")
    if not np.all(np.isfinite(delays)):
        raise ParameterError("delays must be finite")
    if len(delays) > 1:
        gaps = np.diff(np.sort(delays))
        if np.min(gaps) < DELAY_TIE_RESOLUTION:
            dup = np.sort(delays)[np.argmin(gaps)]
            raise ConditioningError(
                f"duplicate delays near {dup:.9e} s produce a rank-deficient "
                "steering matrix"
            )
    n = np.arange(spectrum.fft_size)[:, None]
    phase = -2j * np.pi * spectrum.sample_rate * n * delays[None, :] / spectrum.fft_size
    columns = spectrum.bins[:, None] * np.exp(phase)
    return SteeringMatrix(columns=columns, delays=delays)


def bistatic_doppler(v: float, f: float, c: float, beta: float, theta: float) -> float:
    """Doppler shift of a bistatic geometry: ``(2*v*f/c) * cos(beta/2) * cos(theta)``.

    Utility only; near the baseline the separation angle approaches pi and
    the shift vanishes, which is why the hypothesis model omits Doppler.
    """
    if c <= 0:
        raise ParameterError("sound speed must be positive")
    return (2.0 * v * f / c) * np.cos(beta / 2.0) * np.cos(theta)
