"""Scenario-driven Monte Carlo experiment runner.

A scenario bundles the waveform, channel, level sweeps, detector choices
and trial counts.  ``run_sweep`` synthesizes matched H0/H1 trial pairs at
every sweep point, evaluates both detection statistics, applies
theoretical thresholds, and tabulates empirical against theoretical
rates.  Per-trial noise streams are derived by counter-based splitting
keyed on the sweep coordinates, so results are bit-reproducible and
independent of sweep order or batching.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .channel import LevelSpec, calibrate_levels, noise_bins, geometric_channel, path_image
from .detection import (
    KNOWN_NOISE,
    UNKNOWN_NOISE,
    batch_subspace_energies,
    detector_tail_probability,
    detector_threshold,
)
from .estimation import WrelaxConfig, partition_delays, wrelax
from .exceptions import BlastnullError, ParameterError
from .projections import project_out, subspace_numerator
from .signalmodel import PathSet, Spectrum, generate_lfm, spectrum_of, steering_matrix

CSV_SCHEMA_VERSION = 1

DELAY_MODES = ("oracle-exact", "estimated-once", "estimated-per-pulse")
DETECTOR_KINDS = (KNOWN_NOISE, UNKNOWN_NOISE)

# Stream labels inside each sweep point's seed space.  H0 and H1 trials
# share one stream (paired common random numbers): trial t sees the same
# noise under both hypotheses, so a zero-strength target gives bitwise
# equal statistics and hypothesis comparisons lose no variance to noise.
_STREAM_TRIALS = 0
_STREAM_CAL_H0 = 2
_STREAM_CAL_H1 = 3
_STREAM_CROSSING = 4


@dataclass(frozen=True)
class Scenario:
    """Full experiment description for the harness."""

    duration: float
    center_frequency: float
    bandwidth: float
    sample_rate: float
    fft_size: int
    snr_db: Tuple[float, ...]
    sdr_db: Tuple[float, ...]
    trials: int
    seed: int
    direct: Optional[PathSet] = None
    scattered: Optional[PathSet] = None
    preset: Optional[str] = None
    preset_paths: int = 3
    preset_decay: float = 0.7
    preset_delay_spread: float = 0.01
    preset_base_delay: float = 0.0
    preset_scattered_lag: float = 0.004
    detectors: Tuple[str, ...] = DETECTOR_KINDS
    pfa: Tuple[float, ...] = (1e-2,)
    delay_knowledge: str = "oracle-exact"
    est_paths: Optional[int] = None
    calibration_snr_db: float = 0.0
    wrelax_tol: float = 1e-6
    wrelax_max_iters: int = 50
    wrelax_refine: float = 0.01
    crossing_profile: Optional[Tuple[float, ...]] = None
    batch_size: int = 4096

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "sdr_db", tuple(float(s) for s in self.sdr_db))
        object.__setattr__(self, "detectors", tuple(self.detectors))
        object.__setattr__(self, "pfa", tuple(float(p) for p in self.pfa))
        if self.crossing_profile is not None:
            object.__setattr__(
                self, "crossing_profile", tuple(float(p) for p in self.crossing_profile)
            )
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if not self.snr_db or not self.sdr_db:
            raise ParameterError("sweep lists must be non-empty")
        if self.delay_knowledge not in DELAY_MODES:
            raise ParameterError(f"delay_knowledge must be one of {DELAY_MODES}")
        for kind in self.detectors:
            if kind not in DETECTOR_KINDS:
                raise ParameterError(f"unknown detector kind {kind!r}")
        for p in self.pfa:
            if not 0 < p < 1:
                raise ParameterError("pfa targets must lie in (0, 1)")
        if self.preset is None and (self.direct is None or self.scattered is None):
            raise ParameterError("either a channel preset or explicit path sets are required")
        if self.preset is not None and self.preset != "geometric":
            raise ParameterError(f"unknown channel preset {self.preset!r}")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")

    def pathsets(self) -> Tuple[PathSet, PathSet]:
        if self.preset is not None:
            return geometric_channel(
                n_paths=self.preset_paths,
                decay=self.preset_decay,
                delay_spread=self.preset_delay_spread,
                base_delay=self.preset_base_delay,
                scattered_lag=self.preset_scattered_lag,
            )
        return self.direct, self.scattered

    def wrelax_config(self, n_paths: int) -> WrelaxConfig:
        return WrelaxConfig(
            max_paths=n_paths,
            convergence_tol=self.wrelax_tol,
            max_inner_iters=self.wrelax_max_iters,
            refine_resolution=self.wrelax_refine,
        )


@dataclass(frozen=True)
class ResultRow:
    """One sweep point for one detector at one pfa target."""

    snr_db: float
    sdr_db: float
    est_paths: int
    fft_size: int
    delay_knowledge: str
    detector: str
    pfa: float
    threshold: float
    trials: int
    failures: int
    empirical_pfa: float
    empirical_pd: float
    theoretical_pfa: float
    theoretical_pd: float
    stat_mean_h0: float
    stat_std_h0: float
    stat_mean_h1: float
    stat_std_h1: float
    delta0: float
    delta1: float
    lambda0: float
    lambda1: float
    v: int
    r: int
    wall_time_s: float

    def __post_init__(self):
        for name in ("empirical_pfa", "empirical_pd", "theoretical_pfa", "theoretical_pd"):
            value = getattr(self, name)
            if not (np.isnan(value) or 0.0 <= value <= 1.0):
                raise ParameterError(f"{name} outside [0, 1]: {value}")


@dataclass(frozen=True)
class CrossingPulse:
    """One pulse of the scripted crossing demonstration."""

    pulse: int
    scale: float
    t0_value: float
    t0_detected: bool
    t1p_value: float
    t1p_detected: bool


def _point_key(snr_db: float, sdr_db: float) -> Tuple[int, int]:
    """Stable 64-bit key of a sweep point, independent of sweep order."""
    digest = hashlib.blake2b(
        f"snr={snr_db!r}|sdr={sdr_db!r}".encode(), digest_size=8
    ).digest()
    return (
        int.from_bytes(digest[:4], "little"),
        int.from_bytes(digest[4:], "little"),
    )


def trial_rng(seed: int, point: Tuple[int, int], stream: int, index: int) -> np.random.Generator:
    """Deterministic per-trial generator from counter-style splitting."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(*point, stream, index))
    return np.random.default_rng(ss)


def _estimate_delays(scenario, spectrum, direct, scattered, sigma2_cal, cal_point):
    """Estimate blast and scattered delays from two calibration pulses.

    ``cal_point`` is keyed on the calibration SNR and the sweep SDR only,
    so one calibration serves every SNR point of a sweep, the way a field
    calibration pulse taken in advance would.
    """
    n_est = scenario.est_paths or len(direct)
    mean_h0 = path_image(spectrum, direct)
    mean_h1 = mean_h0 + path_image(spectrum, scattered)
    n = spectrum.fft_size

    rng0 = trial_rng(scenario.seed, cal_point, _STREAM_CAL_H0, 0)
    pulse0 = Spectrum(mean_h0 + noise_bins(n, sigma2_cal, rng0), n, spectrum.sample_rate)
    tau_d = wrelax(pulse0, spectrum, scenario.wrelax_config(n_est)).delays

    rng1 = trial_rng(scenario.seed, cal_point, _STREAM_CAL_H1, 0)
    pulse1 = Spectrum(mean_h1 + noise_bins(n, sigma2_cal, rng1), n, spectrum.sample_rate)
    joint = wrelax(pulse1, spectrum, scenario.wrelax_config(2 * n_est)).delays
    _, tau_s = partition_delays(joint, tau_d)
    # Null the blast with the target-free estimates: they are immune to
    # joint-fit duplicates stealing a direct path, which would leak blast
    # energy into the test subspace and break the false-alarm rate.
    return tau_d, tau_s


def _per_pulse_delays(scenario, spectrum, pulse, n_est):
    """Re-estimate both delay groups from a single received pulse."""
    tau_d = wrelax(pulse, spectrum, scenario.wrelax_config(n_est)).delays
    joint = wrelax(pulse, spectrum, scenario.wrelax_config(2 * n_est)).delays
    _, tau_s = partition_delays(joint, tau_d)
    return tau_d, tau_s


def _theory_noncentralities(phi_d, phi_s, mean0, mean1, n, sigma2):
    """Noncentralities of the true hypothesis means through possibly estimated steering."""
    d0, _ = subspace_numerator(phi_d.columns, phi_s.columns, mean0)
    d1, _ = subspace_numerator(phi_d.columns, phi_s.columns, mean1)
    res0 = project_out(phi_d.columns, mean0)
    res1 = project_out(phi_d.columns, mean1)
    l0 = float(np.real(np.vdot(res0, res0))) / (n * sigma2)
    l1 = float(np.real(np.vdot(res1, res1))) / (n * sigma2)
    return d0 / (n * sigma2), d1 / (n * sigma2), l0, l1


def _synthesize_block(mean, n, sigma2, scenario, point, stream, start, count):
    rows = np.empty((count, n), dtype=np.complex128)
    for i in range(count):
        rng = trial_rng(scenario.seed, point, stream, start + i)
        rows[i] = mean + noise_bins(n, sigma2, rng)
    return rows


def _point_statistics(scenario, spectrum, mean, phi_d, phi_s, sigma2, point, stream, n_est):
    """All trial statistics for one hypothesis at one sweep point.

    Returns (t0_values, t1p_values, failures); failed trials carry NaN.
    """
    n = spectrum.fft_size
    trials = scenario.trials
    t0 = np.full(trials, np.nan)
    t1p = np.full(trials, np.nan)
    failures = 0

    if scenario.delay_knowledge == "estimated-per-pulse":
        for t in range(trials):
            rng = trial_rng(scenario.seed, point, stream, t)
            pulse = Spectrum(mean + noise_bins(n, sigma2, rng), n, spectrum.sample_rate)
            try:
                tau_d, tau_s = _per_pulse_delays(scenario, spectrum, pulse, n_est)
                pd_ = steering_matrix(spectrum, tau_d)
                ps_ = steering_matrix(spectrum, tau_s)
                num, den, v, r = batch_subspace_energies(pulse.bins[None, :], pd_, ps_)
                t0[t] = num[0] / (n * sigma2)
                t1p[t] = (num[0] / v) / (den[0] / r)
            except BlastnullError:
                failures += 1
        return t0, t1p, failures

    done = 0
    while done < trials:
        count = min(scenario.batch_size, trials - done)
        rows = _synthesize_block(mean, n, sigma2, scenario, point, stream, done, count)
        num, den, v, r = batch_subspace_energies(rows, phi_d, phi_s)
        t0[done : done + count] = num / (n * sigma2)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1p[done : done + count] = (num / v) / (den / r)
        done += count
    bad = ~np.isfinite(t1p)
    failures += int(np.sum(bad))
    return t0, t1p, failures


def run_sweep(scenario: Scenario) -> List[ResultRow]:
    """Run the Monte Carlo sweep and tabulate empirical vs theoretical rates."""
    wave = generate_lfm(
        scenario.duration,
        scenario.center_frequency,
        scenario.bandwidth,
        scenario.sample_rate,
    )
    spectrum = spectrum_of(wave, scenario.fft_size)
    direct0, scattered0 = scenario.pathsets()
    n = spectrum.fft_size

    rows: List[ResultRow] = []
    for sdr in scenario.sdr_db:
        cal_delays = None
        if scenario.delay_knowledge == "estimated-once":
            cal_direct, cal_scattered, sigma2_cal = calibrate_levels(
                spectrum, direct0, scattered0, LevelSpec(scenario.calibration_snr_db, sdr)
            )
            cal_point = _point_key(scenario.calibration_snr_db, sdr)
            cal_delays = _estimate_delays(
                scenario, spectrum, cal_direct, cal_scattered, sigma2_cal, cal_point
            )

        for snr in scenario.snr_db:
            started = time.perf_counter()
            point = _point_key(snr, sdr)
            direct, scattered, sigma2 = calibrate_levels(
                spectrum, direct0, scattered0, LevelSpec(snr, sdr)
            )
            n_est = scenario.est_paths or len(direct)

            if cal_delays is not None:
                tau_d, tau_s = cal_delays
            else:
                tau_d, tau_s = direct.delays, scattered.delays

            phi_d = steering_matrix(spectrum, tau_d)
            phi_s = steering_matrix(spectrum, tau_s)
            mean0 = path_image(spectrum, direct)
            mean1 = mean0 + path_image(spectrum, scattered)
            _, _, v, r = batch_subspace_energies(np.zeros((1, n), dtype=complex), phi_d, phi_s)
            d0, d1, l0, l1 = _theory_noncentralities(phi_d, phi_s, mean0, mean1, n, sigma2)

            t0_h0, t1p_h0, fail0 = _point_statistics(
                scenario, spectrum, mean0, phi_d, phi_s, sigma2, point, _STREAM_TRIALS, n_est
            )
            t0_h1, t1p_h1, fail1 = _point_statistics(
                scenario, spectrum, mean1, phi_d, phi_s, sigma2, point, _STREAM_TRIALS, n_est
            )
            wall = time.perf_counter() - started

            values = {KNOWN_NOISE: (t0_h0, t0_h1), UNKNOWN_NOISE: (t1p_h0, t1p_h1)}
            for kind in scenario.detectors:
                h0_vals, h1_vals = values[kind]
                ok0, ok1 = np.isfinite(h0_vals), np.isfinite(h1_vals)
                for pfa in scenario.pfa:
                    threshold = detector_threshold(kind, pfa, v, r)
                    rows.append(
                        ResultRow(
                            snr_db=snr,
                            sdr_db=sdr,
                            est_paths=n_est,
                            fft_size=n,
                            delay_knowledge=scenario.delay_knowledge,
                            detector=kind,
                            pfa=pfa,
                            threshold=threshold,
                            trials=scenario.trials,
                            failures=fail0 + fail1,
                            empirical_pfa=float(np.mean(h0_vals[ok0] > threshold)),
                            empirical_pd=float(np.mean(h1_vals[ok1] > threshold)),
                            theoretical_pfa=detector_tail_probability(
                                kind, threshold, v, r, d0, l0
                            ),
                            theoretical_pd=detector_tail_probability(
                                kind, threshold, v, r, d1, l1
                            ),
                            stat_mean_h0=float(np.mean(h0_vals[ok0])),
                            stat_std_h0=float(np.std(h0_vals[ok0])),
                            stat_mean_h1=float(np.mean(h1_vals[ok1])),
                            stat_std_h1=float(np.std(h1_vals[ok1])),
                            delta0=d0,
                            delta1=d1,
                            lambda0=l0,
                            lambda1=l1,
                            v=v,
                            r=r,
                            wall_time_s=wall,
                        )
                    )
    return rows


def run_crossing_demo(scenario: Scenario) -> List[CrossingPulse]:
    """Per-pulse detector outputs across a scripted scattered-amplitude profile.

    The profile stands in for target-strength physics: pulse p carries the
    scattered group scaled by ``crossing_profile[p]`` (zero means no
    target).  Thresholds come from the first pfa target.
    """
    if scenario.crossing_profile is None:
        raise ParameterError("scenario.crossing_profile is required for the crossing demo")
    wave = generate_lfm(
        scenario.duration,
        scenario.center_frequency,
        scenario.bandwidth,
        scenario.sample_rate,
    )
    spectrum = spectrum_of(wave, scenario.fft_size)
    direct0, scattered0 = scenario.pathsets()
    snr, sdr = scenario.snr_db[0], scenario.sdr_db[0]
    direct, scattered, sigma2 = calibrate_levels(
        spectrum, direct0, scattered0, LevelSpec(snr, sdr)
    )
    point = _point_key(snr, sdr)

    if scenario.delay_knowledge == "estimated-once":
        cal_direct, cal_scattered, sigma2_cal = calibrate_levels(
            spectrum, direct0, scattered0, LevelSpec(scenario.calibration_snr_db, sdr)
        )
        cal_point = _point_key(scenario.calibration_snr_db, sdr)
        tau_d, tau_s = _estimate_delays(
            scenario, spectrum, cal_direct, cal_scattered, sigma2_cal, cal_point
        )
    else:
        tau_d, tau_s = direct.delays, scattered.delays
    phi_d = steering_matrix(spectrum, tau_d)
    phi_s = steering_matrix(spectrum, tau_s)

    n = spectrum.fft_size
    mean_direct = path_image(spectrum, direct)
    mean_scattered = path_image(spectrum, scattered)
    _, _, v, r = batch_subspace_energies(np.zeros((1, n), dtype=complex), phi_d, phi_s)
    pfa = scenario.pfa[0]
    thr_t0 = detector_threshold(KNOWN_NOISE, pfa, v, r)
    thr_t1p = detector_threshold(UNKNOWN_NOISE, pfa, v, r)

    out: List[CrossingPulse] = []
    for p, scale in enumerate(scenario.crossing_profile):
        rng = trial_rng(scenario.seed, point, _STREAM_CROSSING, p)
        mean = mean_direct + scale * mean_scattered
        x = (mean + noise_bins(n, sigma2, rng))[None, :]
        num, den, v, r = batch_subspace_energies(x, phi_d, phi_s)
        t0 = float(num[0] / (n * sigma2))
        t1p = float((num[0] / v) / (den[0] / r))
        out.append(
            CrossingPulse(
                pulse=p,
                scale=float(scale),
                t0_value=t0,
                t0_detected=t0 > thr_t0,
                t1p_value=t1p,
                t1p_detected=t1p > thr_t1p,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Result serialization

# wall_time_s is intentionally absent: output files must be byte-identical
# across reruns of the same scenario and seed.
_CSV_FIELDS = [
    "snr_db",
    "sdr_db",
    "est_paths",
    "fft_size",
    "delay_knowledge",
    "detector",
    "pfa",
    "threshold",
    "trials",
    "failures",
    "empirical_pfa",
    "empirical_pd",
    "theoretical_pfa",
    "theoretical_pd",
    "stat_mean_h0",
    "stat_std_h0",
    "stat_mean_h1",
    "stat_std_h1",
    "delta0",
    "delta1",
    "lambda0",
    "lambda1",
    "v",
    "r",
]


def _format_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    """Render result rows as versioned CSV text (deterministic)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["schema_version"] + _CSV_FIELDS)
    for row in rows:
        writer.writerow(
            [CSV_SCHEMA_VERSION] + [_format_cell(getattr(row, name)) for name in _CSV_FIELDS]
        )
    return buf.getvalue()


def rows_to_json(rows: Sequence[ResultRow]) -> str:
    """Render result rows as versioned JSON text (deterministic)."""
    payload = {
        "schema_version": CSV_SCHEMA_VERSION,
        "rows": [
            {name: getattr(row, name) for name in _CSV_FIELDS} for row in rows
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
