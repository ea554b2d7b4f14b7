"""Built-in invariant suite for quick field verification.

Each check is a small, fast assertion of a structural property the
toolkit guarantees: steering-phase identities, projector algebra,
statistic invariances, tail-function consistency, and reproducibility.
Run via ``blastnull selftest``; the pytest suite covers the same ground
(and much more) with tolerances pinned per contract.
"""

from __future__ import annotations

import math

import numpy as np

from .channel import LevelSpec, calibrate_levels, geometric_channel, synthesize
from .detection import (
    KNOWN_NOISE,
    UNKNOWN_NOISE,
    blast_projector,
    detector_threshold,
    statistic_known_noise,
    statistic_unknown_noise,
)
from .estimation import (
    WrelaxConfig,
    block_inverse,
    estimate_amplitudes_h0,
    estimate_joint_h1,
    estimate_noise_h0,
    estimate_noise_h1,
    wrelax,
)
from .signalmodel import (
    PathSet,
    Spectrum,
    generate_lfm,
    spectrum_of,
    steering_column,
    steering_matrix,
)
from .tails import ChiSqParams, DncFParams, doubly_noncentral_f_sf, noncentral_chi2_sf, threshold_for_pfa


def _context():
    wave = generate_lfm(0.02, 2000.0, 400.0, 10000.0)
    spec = spectrum_of(wave, 256)
    direct, scattered = geometric_channel(
        n_paths=2, delay_spread=0.004, scattered_lag=0.0017
    )
    direct, scattered, sigma2 = calibrate_levels(
        spec, direct, scattered, LevelSpec(snr_db=0.0, sdr_db=-10.0)
    )
    return spec, direct, scattered, sigma2


def _check_steering_identities():
    spec, *_ = _context()
    assert np.allclose(steering_column(spec, 0.0), spec.bins)
    period = spec.fft_size / spec.sample_rate
    assert np.allclose(steering_column(spec, period), spec.bins)
    t1, t2 = 1.3e-3, 2.1e-4
    composed = steering_column(Spectrum(steering_column(spec, t1), spec.fft_size, spec.sample_rate), t2)
    assert np.max(np.abs(composed - steering_column(spec, t1 + t2))) < 1e-9


def _check_circular_shift():
    spec, *_ = _context()
    k = 17
    shifted = np.fft.ifft(steering_column(spec, k / spec.sample_rate))
    direct = np.roll(np.fft.ifft(spec.bins), k)
    assert np.max(np.abs(shifted - direct)) < 1e-9


def _check_projector_algebra():
    spec, direct, scattered, _ = _context()
    phi_d = steering_matrix(spec, direct.delays)
    proj = blast_projector(phi_d).matrix
    scale = np.linalg.norm(proj)
    assert np.linalg.norm(proj - proj.conj().T) < 1e-10 * scale
    assert np.linalg.norm(proj @ proj - proj) < 1e-9 * scale
    assert np.linalg.norm(proj @ phi_d.columns) < 1e-9 * np.linalg.norm(phi_d.columns)


def _check_statistic_invariances():
    spec, direct, scattered, sigma2 = _context()
    phi_d = steering_matrix(spec, direct.delays)
    phi_s = steering_matrix(spec, scattered.delays)
    x = synthesize(spec, direct, scattered, sigma2, seed=5).spectrum
    t0_a = statistic_known_noise(x, phi_d, phi_s, sigma2)
    t0_b = statistic_known_noise(x, phi_d, phi_s, 3.0 * sigma2)
    assert abs(t0_a.value / 3.0 - t0_b.value) <= 1e-12 * abs(t0_b.value)
    t1_a = statistic_unknown_noise(x, phi_d, phi_s)
    scaled = Spectrum((0.3 - 1.1j) * x.bins, x.fft_size, x.sample_rate)
    t1_b = statistic_unknown_noise(scaled, phi_d, phi_s)
    assert abs(t1_a.value - t1_b.value) <= 1e-10 * abs(t1_a.value)


def _check_tail_functions():
    assert abs(noncentral_chi2_sf(9.21034, ChiSqParams(2, 0.0)) - math.exp(-9.21034 / 2)) < 1e-12
    eta = threshold_for_pfa(1e-2, ChiSqParams(2, 0.0))
    assert abs(eta + 2 * math.log(1e-2)) < 1e-6
    assert doubly_noncentral_f_sf(0.0, DncFParams(6, 20, 1.0, 2.0)) == 1.0
    grid = [0.5, 1.0, 2.0, 4.0]
    vals = [doubly_noncentral_f_sf(g, DncFParams(6, 20, 1.0, 2.0)) for g in grid]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def _check_block_inverse():
    rng = np.random.default_rng(11)
    m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)) + 6 * np.eye(6)
    tl, tr, bl, br = block_inverse(m[:3, :3], m[:3, 3:], m[3:, :3], m[3:, 3:])
    assembled = np.block([[tl, tr], [bl, br]])
    assert np.max(np.abs(assembled @ m - np.eye(6))) < 1e-10


def _check_estimators():
    spec, direct, scattered, _ = _context()
    phi_d = steering_matrix(spec, direct.delays)
    phi_s = steering_matrix(spec, scattered.delays)
    clean = synthesize(spec, direct, scattered, 0.0, seed=0).spectrum
    joint = estimate_joint_h1(clean, phi_d, phi_s)
    assert np.max(np.abs(joint.a_hat - direct.amplitudes)) < 1e-8
    assert np.max(np.abs(joint.b_hat - scattered.amplitudes)) < 1e-8
    noisy = synthesize(spec, direct, scattered, 1e-3, seed=1).spectrum
    a0 = estimate_amplitudes_h0(noisy, phi_d)
    j = estimate_joint_h1(noisy, phi_d, phi_s)
    assert estimate_noise_h1(noisy, phi_d, phi_s, j.a_hat, j.b_hat) <= estimate_noise_h0(
        noisy, phi_d, a0
    )


def _check_wrelax_single_path():
    spec, *_ = _context()
    tau0 = 12.4 / spec.sample_rate
    received = Spectrum(0.8 * steering_column(spec, tau0), spec.fft_size, spec.sample_rate)
    result = wrelax(received, spec, WrelaxConfig(max_paths=1))
    assert abs(result.delays[0] - tau0) * spec.sample_rate < 1e-3
    assert abs(result.amplitudes[0] - 0.8) < 1e-6


def _check_reproducibility():
    spec, direct, scattered, sigma2 = _context()
    a = synthesize(spec, direct, scattered, sigma2, seed=42).spectrum.bins
    b = synthesize(spec, direct, scattered, sigma2, seed=42).spectrum.bins
    assert np.array_equal(a, b)
    h0 = synthesize(spec, direct, None, sigma2, seed=43).spectrum.bins
    h1 = synthesize(spec, direct, scattered, sigma2, seed=43).spectrum.bins
    phi_s = steering_matrix(spec, scattered.delays)
    assert np.allclose(h1 - h0, phi_s.columns @ scattered.amplitudes)


def _check_threshold_round_trip():
    for pfa in (1e-1, 1e-3, 1e-6):
        dist = ChiSqParams(6, 4.0)
        eta = threshold_for_pfa(pfa, dist)
        assert abs(noncentral_chi2_sf(eta, dist) - pfa) <= 1e-9 * pfa
    eta = threshold_for_pfa(1e-3, DncFParams(6, 40, 0.0, 0.0))
    assert abs(doubly_noncentral_f_sf(eta, DncFParams(6, 40, 0.0, 0.0)) - 1e-3) <= 1e-9 * 1e-3


def _check_detector_thresholds():
    eta0 = detector_threshold(KNOWN_NOISE, 1e-2, v=1, r=100)
    assert abs(eta0 - (-math.log(1e-2))) < 1e-6
    eta1 = detector_threshold(UNKNOWN_NOISE, 1e-2, v=3, r=100)
    assert eta1 > 0


CHECKS = [
    ("steering identities", _check_steering_identities),
    ("circular shift", _check_circular_shift),
    ("projector algebra", _check_projector_algebra),
    ("statistic invariances", _check_statistic_invariances),
    ("tail functions", _check_tail_functions),
    ("threshold round trip", _check_threshold_round_trip),
    ("detector thresholds", _check_detector_thresholds),
    ("block inverse", _check_block_inverse),
    ("amplitude/noise estimators", _check_estimators),
    ("single-path relaxation", _check_wrelax_single_path),
    ("reproducibility", _check_reproducibility),
]


def run_selftest() -> int:
    """Run every check; print one line each plus a summary.  Returns exit code."""
    passed = 0
    failed = 0
    for name, check in CHECKS:
        try:
            check()
        except Exception as exc:  # report, never abort the suite
            failed += 1
            print(f"FAIL  {name}: {exc}")
        else:
            passed += 1
            print(f"PASS  {name}")
    print(f"selftest: {passed} passed, {failed} failed")
    return 0 if failed == 0 else 1
