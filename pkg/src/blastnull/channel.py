"""Synthesize received pulses from parametric multipath path sets.

The received spectrum is the sum of delay-steered transmit copies for the
direct blast, optionally for the target-scattered group, plus complex
white Gaussian noise.  Noise is generated directly in the frequency
domain: the DFT of i.i.d. circular Gaussian time noise with power
``sigma2`` per sample is i.i.d. circular Gaussian per bin with variance
``N * sigma2``, so both routes are statistically identical and this one
skips an FFT.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .exceptions import CalibrationError, FrameError, ParameterError
from .signalmodel import PathSet, Spectrum, steering_matrix

SeedLike = Union[int, np.random.SeedSequence, None]

# Envelope samples below this fraction of the peak do not count as pulse
# support when measuring mean direct-blast power.
SUPPORT_REL_AMPLITUDE = 1e-6


@dataclass(frozen=True)
class LevelSpec:
    """Requested interference levels in dB.

    snr_db: mean direct-blast power over the pulse support vs noise power
    per time sample.  sdr_db: scattered-group energy vs direct-group
    energy (both measured through their steering images).
    """

    snr_db: float
    sdr_db: float

    def __post_init__(self):
        if not (np.isfinite(self.snr_db) and np.isfinite(self.sdr_db)):
            raise ParameterError("snr_db and sdr_db must be finite")


@dataclass(frozen=True)
class ChannelRealization:
    """One synthesized received pulse and the truth that produced it."""

    spectrum: Spectrum
    hypothesis: str
    direct: PathSet
    scattered: Optional[PathSet]
    noise_power: float
    seed: SeedLike

    def __post_init__(self):
        if self.hypothesis not in ("H0", "H1"):
            raise ParameterError("hypothesis must be 'H0' or 'H1'")
        if self.hypothesis == "H0" and self.scattered is not None:
            raise ParameterError("an H0 realization cannot carry a scattered path set")
        if self.noise_power < 0:
            raise ParameterError("noise power must be >= 0")


def _check_frame(pathset: PathSet, spectrum: Spectrum) -> None:
    limit = spectrum.fft_size / spectrum.sample_rate
    if np.any(pathset.delays * spectrum.sample_rate >= spectrum.fft_size):
        raise FrameError(
            f"path delay {pathset.delays.max():.6f} s does not fit in the "
            f"{limit:.6f} s analysis frame"
        )


def path_image(spectrum: Spectrum, pathset: PathSet) -> np.ndarray:
    """Frequency-domain contribution of one path group: steered columns times amplitudes."""
    return steering_matrix(spectrum, pathset.delays).columns @ pathset.amplitudes


def noise_bins(fft_size: int, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Frequency-domain noise draw: i.i.d. circular Gaussian, variance N*sigma2 per bin."""
    scale = np.sqrt(fft_size * sigma2 / 2.0)
    return scale * (rng.standard_normal(fft_size) + 1j * rng.standard_normal(fft_size))


def synthesize(
    spectrum: Spectrum,
    direct: PathSet,
    scattered: Optional[PathSet],
    sigma2: float,
    seed: SeedLike = None,
) -> ChannelRealization:
    """Draw one received pulse under H0 (no target) or H1 (target present).

    Noise bins are i.i.d. circular Gaussian with per-bin variance
    ``N * sigma2`` (real and imaginary parts each ``N * sigma2 / 2``).
    The draw is a pure function of ``seed``; synthesizing H0 and H1 with
    the same seed shares the identical noise stream, so their difference
    is exactly the scattered contribution.
    """
    if sigma2 < 0:
        raise ParameterError("sigma2 must be >= 0")
    _check_frame(direct, spectrum)
    if scattered is not None:
        _check_frame(scattered, spectrum)

    mean = path_image(spectrum, direct)
    if scattered is not None:
        mean = mean + path_image(spectrum, scattered)

    n = spectrum.fft_size
    noise = noise_bins(n, sigma2, np.random.default_rng(seed))

    return ChannelRealization(
        spectrum=Spectrum(mean + noise, n, spectrum.sample_rate),
        hypothesis="H0" if scattered is None else "H1",
        direct=direct,
        scattered=scattered,
        noise_power=sigma2,
        seed=seed,
    )


def mean_power_over_support(time_signal: np.ndarray) -> float:
    """Mean power of a time signal over its (thresholded) support."""
    power = np.abs(time_signal) ** 2
    peak = power.max()
    if peak <= 0:
        raise CalibrationError("signal has zero energy; cannot measure its power")
    mask = power > (SUPPORT_REL_AMPLITUDE**2) * peak
    return float(power[mask].mean())


def calibrate_levels(
    spectrum: Spectrum,
    direct: PathSet,
    scattered: PathSet,
    levels: LevelSpec,
):
    """Scale the scattered group and set the noise power to hit requested levels.

    The scattered amplitudes are scaled uniformly so the ratio of
    frequency-domain energies ``||Phi_s b||^2 / ||Phi_d a||^2`` equals
    ``sdr_db``; the noise power per time sample is set so the mean
    time-domain direct-blast power over its support sits ``snr_db`` above
    it.

    Returns
    -------
    (direct, scaled_scattered, sigma2)
    """
    direct_image = path_image(spectrum, direct)
    scattered_image = path_image(spectrum, scattered)
    e_direct = float(np.real(np.vdot(direct_image, direct_image)))
    e_scattered = float(np.real(np.vdot(scattered_image, scattered_image)))
    if e_direct <= 0 or e_scattered <= 0:
        raise CalibrationError("both path groups need nonzero energy to calibrate")

    target_ratio = 10.0 ** (levels.sdr_db / 10.0)
    scale = np.sqrt(target_ratio * e_direct / e_scattered)
    scaled_scattered = scattered.scaled(scale)

    direct_time = np.fft.ifft(direct_image)
    mean_power = mean_power_over_support(direct_time)
    sigma2 = mean_power / 10.0 ** (levels.snr_db / 10.0)
    return direct, scaled_scattered, sigma2


def geometric_channel(
    n_paths: int = 10,
    decay: float = 0.7,
    delay_spread: float = 0.05,
    base_delay: float = 0.0,
    scattered_lag: float = 0.004,
):
    """Default parametric stand-in for a shallow-water multipath channel.

    Both groups carry ``n_paths`` arrivals with geometric amplitude decay
    ``decay**k`` spread evenly over ``delay_spread`` seconds.  The
    scattered group is delayed by ``scattered_lag`` and staggered half a
    path spacing so its delays interleave the direct ones.

    Returns
    -------
    (direct, scattered) : PathSet pair
    """
    if n_paths < 1:
        raise ParameterError("n_paths must be >= 1")
    k = np.arange(n_paths)
    amplitudes = decay**k
    if n_paths > 1:
        offsets = np.linspace(0.0, delay_spread, n_paths)
        stagger = 0.5 * delay_spread / (n_paths - 1)
    else:
        offsets = np.zeros(1)
        stagger = 0.0
    direct = PathSet(amplitudes, base_delay + offsets)
    scattered = PathSet(amplitudes, base_delay + scattered_lag + stagger + offsets)
    return direct, scattered
