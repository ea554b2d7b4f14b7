"""Blast-nulling projector and the two GLRT detection statistics.

The known-noise statistic is the energy of the received vector in the
blast-nulled scattered subspace over ``N * sigma2``; doubling it yields a
noncentral chi-squared variable with ``2v`` real degrees of freedom.  The
unknown-noise statistic normalizes that energy by the total
blast-complement energy, each divided by its degrees of freedom, giving a
(doubly noncentral) F variable with ``(2v, 2r)`` real degrees of freedom
that is invariant to any rescaling of the input.

``v`` is the numerical rank of the nulled scattered subspace and
``r = N - rank(direct steering matrix)`` the blast-complement rank; both
are reported in complex counts and doubled only at the distribution
boundary (see ``detector_null_params``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DegenerateInputError, ParameterError
from .projections import (
    gram,
    numerical_rank,
    project_out,
    solve_gram,
    whitened_subspace_basis,
)
from .signalmodel import Spectrum, SteeringMatrix
from .tails import ChiSqParams, DncFParams, pd_theoretical, threshold_for_pfa

KNOWN_NOISE = "T0"
UNKNOWN_NOISE = "T1prime"


@dataclass(frozen=True)
class Projector:
    """Explicit orthogonal-complement projector of the blast subspace.

    Hermitian and idempotent; annihilates every direct steering column.
    Formed densely for analysis and tests; the statistics below never
    build it.
    """

    matrix: np.ndarray
    source_delays: np.ndarray


@dataclass(frozen=True)
class Statistic:
    """One detector output with its subspace dimensions."""

    value: float
    kind: str
    dof_v: int
    dof_r: int


@dataclass(frozen=True)
class DetectionReport:
    """Statistic, threshold and theory for one detection decision."""

    statistic: Statistic
    threshold: float
    detected: bool
    pfa: float
    delta0: float
    delta1: float
    lambda0: float
    lambda1: float
    theoretical_pfa: float
    theoretical_pd: float


def blast_projector(direct: SteeringMatrix) -> Projector:
    """Dense projector onto the orthogonal complement of the blast subspace."""
    n = direct.fft_size
    coeff = solve_gram(direct.columns, np.eye(n, dtype=np.complex128), delays=direct.delays)
    matrix = np.eye(n, dtype=np.complex128) - direct.columns @ coeff
    return Projector(matrix=matrix, source_delays=direct.delays.copy())


def _subspace_energies(x: np.ndarray, direct: SteeringMatrix, scattered: SteeringMatrix):
    """Shared kernel: numerator energy, complement energy, and both ranks."""
    basis, v = whitened_subspace_basis(direct.columns, scattered.columns)
    proj = basis.conj().T @ x
    numerator = float(np.real(np.vdot(proj, proj)))
    residual = project_out(direct.columns, x, delays=direct.delays)
    denominator = float(np.real(np.vdot(residual, residual)))
    r = direct.fft_size - numerical_rank(gram(direct.columns))
    return numerator, denominator, v, r


def statistic_known_noise(
    received: Spectrum,
    direct: SteeringMatrix,
    scattered: SteeringMatrix,
    sigma2: float,
) -> Statistic:
    """GLRT statistic when the noise power is known.

    Blast-nulled scattered-subspace energy of the received vector over
    ``N * sigma2``, evaluated through the eigendecomposition of the nulled
    scattered Gram matrix.
    """
    if sigma2 <= 0:
        raise ParameterError("sigma2 must be positive")
    numerator, _, v, r = _subspace_energies(received.bins, direct, scattered)
    value = numerator / (received.fft_size * sigma2)
    return Statistic(value=value, kind=KNOWN_NOISE, dof_v=v, dof_r=r)


def statistic_unknown_noise(
    received: Spectrum,
    direct: SteeringMatrix,
    scattered: SteeringMatrix,
) -> Statistic:
    """GLRT statistic when the noise power is unknown.

    Ratio of per-degree-of-freedom energies, scale-invariant in the input.

    Raises
    ------
    DegenerateInputError
        If the received vector lies entirely in the blast subspace, where
        the ratio is undefined.
    """
    numerator, denominator, v, r = _subspace_energies(received.bins, direct, scattered)
    total = float(np.real(np.vdot(received.bins, received.bins)))
    if denominator <= 1e-30 * max(total, 1.0):
        raise DegenerateInputError(
            "received vector has no energy outside the blast subspace"
        )
    value = (numerator / v) / (denominator / r)
    return Statistic(value=value, kind=UNKNOWN_NOISE, dof_v=v, dof_r=r)


def decide(stat: Statistic, threshold: float) -> bool:
    """Declare a target present iff the statistic strictly exceeds the threshold."""
    if not np.isfinite(threshold):
        raise ParameterError("threshold must be finite")
    return bool(stat.value > threshold)


def detector_null_params(kind: str, v: int, r: int, delta0: float = 0.0, lambda0: float = 0.0):
    """Null distribution of a statistic kind, in the real dof convention.

    Doubling bridge: the known-noise statistic doubles into a chi-squared
    variable, so its parameters are ``(2v, 2*delta)``; the ratio statistic
    is already an F variable with ``(2v, 2r)`` degrees of freedom.
    """
    if kind == KNOWN_NOISE:
        return ChiSqParams(dof=2 * v, delta=2 * delta0)
    if kind == UNKNOWN_NOISE:
        return DncFParams(v=2 * v, r=2 * r, delta=2 * delta0, lam=2 * lambda0)
    raise ParameterError(f"unknown statistic kind {kind!r}")


def detector_threshold(
    kind: str,
    pfa: float,
    v: int,
    r: int,
    delta0: float = 0.0,
    lambda0: float = 0.0,
) -> float:
    """Decision threshold in statistic units for a target false-alarm rate."""
    dist = detector_null_params(kind, v, r, delta0, lambda0)
    eta = threshold_for_pfa(pfa, dist)
    return eta / 2.0 if kind == KNOWN_NOISE else eta


def detector_tail_probability(
    kind: str, eta: float, v: int, r: int, delta: float, lam: float = 0.0
) -> float:
    """P(statistic > eta) under the stated noncentralities (complex counts)."""
    dist = detector_null_params(kind, v, r, delta, lam)
    x = 2.0 * eta if kind == KNOWN_NOISE else eta
    return pd_theoretical(x, dist_h1=dist)


def make_report(
    stat: Statistic,
    pfa: float,
    delta0: float,
    delta1: float,
    lambda0: float = 0.0,
    lambda1: float = 0.0,
    threshold: Optional[float] = None,
) -> DetectionReport:
    """Assemble the decision plus its theoretical operating point.

    The threshold defaults to the exact-nulling design point (zero null
    noncentralities); the reported theoretical pfa uses the actual ones.
    """
    if threshold is None:
        threshold = detector_threshold(stat.kind, pfa, stat.dof_v, stat.dof_r)
    return DetectionReport(
        statistic=stat,
        threshold=threshold,
        detected=decide(stat, threshold),
        pfa=pfa,
        delta0=delta0,
        delta1=delta1,
        lambda0=lambda0,
        lambda1=lambda1,
        theoretical_pfa=detector_tail_probability(
            stat.kind, threshold, stat.dof_v, stat.dof_r, delta0, lambda0
        ),
        theoretical_pd=detector_tail_probability(
            stat.kind, threshold, stat.dof_v, stat.dof_r, delta1, lambda1
        ),
    )


def batch_subspace_energies(
    x_rows: np.ndarray, direct: SteeringMatrix, scattered: SteeringMatrix
):
    """Vectorized ``_subspace_energies`` over rows of received vectors.

    Identical math to the scalar path (tested against it); used by the
    experiment harness to evaluate many trials at once.

    Returns
    -------
    (numerator, denominator, v, r) with the first two shaped (T,).
    """
    basis, v = whitened_subspace_basis(direct.columns, scattered.columns)
    proj = x_rows @ basis.conj()
    numerator = np.sum(np.abs(proj) ** 2, axis=1)
    coeff = solve_gram(direct.columns, x_rows.T, delays=direct.delays)
    residual = x_rows - (direct.columns @ coeff).T
    denominator = np.sum(np.abs(residual) ** 2, axis=1)
    r = direct.fft_size - numerical_rank(gram(direct.columns))
    return numerator, denominator, v, r
