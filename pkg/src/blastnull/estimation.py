"""Multipath parameter estimation: delays, amplitudes, noise power.

Delays come from an iterative relaxation search: paths are introduced one
at a time, and after each introduction every path is re-estimated against
the residual of all the others until the residual energy settles.  The
per-path step is a matched-filter peak search over delay, coarse at one
sample via an inverse FFT of the conjugate-spectrum product, then refined
by successive parabolic interpolation down to a configurable fraction of
a sample.  Amplitudes under each hypothesis have closed forms; the joint
ones come from the partitioned-matrix inverse.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceWarning, ParameterError
from .projections import project_out, solve_gram, truncated_inverse
from .signalmodel import (
    DELAY_TIE_RESOLUTION,
    PathSet,
    Spectrum,
    SteeringMatrix,
    steering_column,
)


@dataclass(frozen=True)
class WrelaxConfig:
    """Knobs for the relaxation delay search."""

    max_paths: int
    convergence_tol: float = 1e-6
    max_inner_iters: int = 50
    refine_resolution: float = 0.01

    def __post_init__(self):
        if self.max_paths < 1:
            raise ParameterError("max_paths must be >= 1")
        if self.convergence_tol <= 0:
            raise ParameterError("convergence_tol must be positive")
        if self.max_inner_iters < 1:
            raise ParameterError("max_inner_iters must be >= 1")
        if not 0 < self.refine_resolution <= 1:
            raise ParameterError("refine_resolution must be in (0, 1] samples")


@dataclass(frozen=True)
class JointEstimate:
    """Joint amplitude estimates under H1 and the Schur-block inverse used."""

    a_hat: np.ndarray
    b_hat: np.ndarray
    k_matrix: np.ndarray


def estimate_amplitudes_h0(received: Spectrum, direct: SteeringMatrix) -> np.ndarray:
    """Least-squares path amplitudes of the direct blast alone."""
    return solve_gram(direct.columns, received.bins, delays=direct.delays)


def block_inverse(A, B, E, F):
    """Inverse of ``[[A, B], [E, F]]`` by blocks.

    Returns the four blocks (top-left, top-right, bottom-left,
    bottom-right) with the bottom-right equal to the inverse Schur
    complement ``K = (F - E A^-1 B)^-1``.
    """
    A = np.asarray(A, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    E = np.asarray(E, dtype=np.complex128)
    F = np.asarray(F, dtype=np.complex128)
    try:
        a_inv = np.linalg.inv(A)
        k = np.linalg.inv(F - E @ a_inv @ B)
    except np.linalg.LinAlgError as exc:
        raise ParameterError(f"partitioned inverse does not exist: {exc}") from exc
    top_left = a_inv + a_inv @ B @ k @ E @ a_inv
    top_right = -a_inv @ B @ k
    bottom_left = -k @ E @ a_inv
    return top_left, top_right, bottom_left, k


def estimate_joint_h1(
    received: Spectrum, direct: SteeringMatrix, scattered: SteeringMatrix
) -> JointEstimate:
    """Joint ML amplitudes of blast and scattered paths under H1.

    Uses the partitioned inverse: the scattered block needs only
    ``K = [Phi_s^H P_perp Phi_s]^-1``, which is pseudo-inverted with
    eigenvalue truncation so nearly coincident estimated delays do not
    blow up.
    """
    a0 = estimate_amplitudes_h0(received, direct)
    nulled = project_out(direct.columns, scattered.columns, delays=direct.delays)
    k, rank = truncated_inverse(nulled.conj().T @ nulled)
    if rank == 0:
        raise ParameterError(
            "scattered steering matrix lies entirely in the blast subspace"
        )
    misfit = direct.columns @ a0 - received.bins
    b1 = -k @ (scattered.columns.conj().T @ misfit)
    a1 = a0 - solve_gram(direct.columns, scattered.columns @ b1, delays=direct.delays)
    return JointEstimate(a_hat=a1, b_hat=b1, k_matrix=k)


def _correlation(reference: Spectrum, bins: np.ndarray, tau: float) -> complex:
    """Matched-filter output ``phi(tau)^H x`` at an arbitrary delay."""
    return complex(np.vdot(steering_column(reference, tau), bins))


# After the nominal grid is reached the parabola iteration continues a few
# decades further; on a clean peak each level cuts the error ~quadratically,
# so fractional delays are recovered to ~1e-6 samples at negligible cost.
_POLISH_LEVELS = 4


def _refine_delay(reference: Spectrum, bins: np.ndarray, k0: float, resolution: float) -> float:
    """Polish an integer-sample peak by successive parabolic interpolation."""
    fs = reference.sample_rate
    tau = k0 / fs
    h = 1.0
    floor = resolution / 10.0**_POLISH_LEVELS
    while h > floor:
        step = h / fs
        g_minus = abs(_correlation(reference, bins, tau - step))
        g_center = abs(_correlation(reference, bins, tau))
        g_plus = abs(_correlation(reference, bins, tau + step))
        denom = g_minus - 2.0 * g_center + g_plus
        if denom < 0:
            offset = 0.5 * (g_minus - g_plus) / denom
            offset = min(1.0, max(-1.0, offset))
            tau += offset * step
        h /= 10.0
    return tau


def _best_path(reference: Spectrum, bins: np.ndarray, resolution: float):
    """Strongest single path of ``bins``: coarse FFT search plus refinement."""
    n = reference.fft_size
    coarse = np.fft.ifft(np.conj(reference.bins) * bins) * n
    k0 = int(np.argmax(np.abs(coarse)))
    tau = _refine_delay(reference, bins, float(k0), resolution)
    tau %= n / reference.sample_rate
    norm = float(np.real(np.vdot(reference.bins, reference.bins)))
    amp = _correlation(reference, bins, tau) / norm
    return amp, tau


def wrelax(received: Spectrum, reference: Spectrum, cfg: WrelaxConfig) -> PathSet:
    """Estimate multipath amplitudes and delays by iterative relaxation.

    Stage m fits the m-th path to the residual of the current model, then
    sweeps all m paths against each other's residual until the total
    residual energy changes by less than ``cfg.convergence_tol``
    (relative) or ``cfg.max_inner_iters`` sweeps pass, and proceeds until
    ``cfg.max_paths`` paths exist.
    """
    if reference.fft_size != received.fft_size:
        raise ParameterError("received and reference spectra must share fft_size")
    norm = float(np.real(np.vdot(reference.bins, reference.bins)))
    if norm <= 0:
        raise ParameterError("reference spectrum has zero energy")

    x = received.bins
    amps: list[complex] = []
    taus: list[float] = []

    def model() -> np.ndarray:
        out = np.zeros_like(x)
        for amp, tau in zip(amps, taus):
            out += amp * steering_column(reference, tau)
        return out

    for stage in range(cfg.max_paths):
        amp, tau = _best_path(reference, x - model(), cfg.refine_resolution)
        amps.append(amp)
        taus.append(tau)
        if stage == 0:
            continue
        residual = x - model()
        prev_energy = float(np.real(np.vdot(residual, residual)))
        for _ in range(cfg.max_inner_iters):
            for i in range(len(amps)):
                others = model() - amps[i] * steering_column(reference, taus[i])
                amps[i], taus[i] = _best_path(reference, x - others, cfg.refine_resolution)
            residual = x - model()
            energy = float(np.real(np.vdot(residual, residual)))
            if abs(prev_energy - energy) <= cfg.convergence_tol * max(energy, 1e-300):
                break
            prev_energy = energy
        else:
            warnings.warn(
                f"relaxation stage {stage + 1} did not converge within "
                f"{cfg.max_inner_iters} sweeps; keeping best-so-far estimates",
                ConvergenceWarning,
            )

    taus_arr = np.array(taus)
    # Exact collisions would violate the path-set resolution rule; nudge
    # the later estimate by two resolution quanta (physically meaningless).
    order = np.argsort(taus_arr, kind="stable")
    for prev, cur in zip(order[:-1], order[1:]):
        if taus_arr[cur] - taus_arr[prev] < DELAY_TIE_RESOLUTION:
            taus_arr[cur] = taus_arr[prev] + 2 * DELAY_TIE_RESOLUTION
    return PathSet(np.array(amps), taus_arr)


def partition_delays(tau_joint, tau_d_ref):
    """Split joint delay estimates into blast-matched and scattered groups.

    Greedy one-to-one matching: repeatedly claim the (reference, estimate)
    pair with the smallest delay distance, ties broken by smaller indices.
    Claimed estimates return in reference order; the rest, ascending, are
    the scattered delays.
    """
    tau_joint = np.atleast_1d(np.asarray(tau_joint, dtype=np.float64))
    tau_d_ref = np.atleast_1d(np.asarray(tau_d_ref, dtype=np.float64))
    if len(tau_joint) != 2 * len(tau_d_ref):
        raise ParameterError("expected exactly twice as many joint estimates as references")

    pairs = sorted(
        (abs(tau_d_ref[i] - tau_joint[j]), i, j)
        for i in range(len(tau_d_ref))
        for j in range(len(tau_joint))
    )
    claimed_ref: set[int] = set()
    claimed_est: set[int] = set()
    matched = np.empty(len(tau_d_ref))
    for _, i, j in pairs:
        if i in claimed_ref or j in claimed_est:
            continue
        matched[i] = tau_joint[j]
        claimed_ref.add(i)
        claimed_est.add(j)
        if len(claimed_ref) == len(tau_d_ref):
            break
    rest = np.sort(tau_joint[[j for j in range(len(tau_joint)) if j not in claimed_est]])
    return matched, rest


def _residual_power(received: Spectrum, modeled: np.ndarray) -> float:
    resid = received.bins - modeled
    return float(np.real(np.vdot(resid, resid))) / received.fft_size**2


def estimate_noise_h0(received: Spectrum, direct: SteeringMatrix, a_hat) -> float:
    """ML noise power under H0: residual energy over N squared."""
    return _residual_power(received, direct.columns @ np.asarray(a_hat))


def estimate_noise_h1(
    received: Spectrum,
    direct: SteeringMatrix,
    scattered: SteeringMatrix,
    a_hat,
    b_hat,
) -> float:
    """ML noise power under H1: residual energy over N squared."""
    modeled = direct.columns @ np.asarray(a_hat) + scattered.columns @ np.asarray(b_hat)
    return _residual_power(received, modeled)
