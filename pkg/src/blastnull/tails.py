"""Right-tail machinery for the detector distributions.

The known-noise statistic is (after doubling) noncentral chi-squared and
the unknown-noise statistic is doubly noncentral F.  Both survival
functions are evaluated by Poisson-mixture series: the chi-squared tail
as a Poisson-weighted ladder of central tails joined by the standard
upward recurrence, the F tail as a double Poisson mixture over
regularized incomplete-beta complements.  Poisson weights are formed in
the log domain so large noncentralities do not underflow.

Degrees-of-freedom convention: these routines speak the real-valued
convention throughout.  A complex quadratic form with v complex degrees
of freedom and noncentrality d maps to ``ChiSqParams(dof=2*v, delta=2*d)``
after doubling the statistic; the detection module owns that bridge.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.special import betainc, gammaln

from .exceptions import ParameterError, PrecisionWarning
from .projections import project_out, subspace_numerator
from .signalmodel import SteeringMatrix

# Poisson windows are widened until the neglected mass is below this.
SERIES_TOL = 1e-13
# Hard cap on series terms; beyond it a PrecisionWarning reports the
# achieved bound instead of silently spinning.
MAX_TERMS = 100_000


@dataclass(frozen=True)
class ChiSqParams:
    """Noncentral chi-squared parameters (real dof convention)."""

    dof: float
    delta: float

    def __post_init__(self):
        if self.dof < 1:
            raise ParameterError("dof must be >= 1")
        if self.delta < 0:
            raise ParameterError("delta must be >= 0")


@dataclass(frozen=True)
class DncFParams:
    """Doubly noncentral F parameters (real dof convention).

    ``delta`` is the numerator noncentrality, ``lam`` the denominator one.
    """

    v: float
    r: float
    delta: float
    lam: float

    def __post_init__(self):
        if self.v < 1 or self.r < 1:
            raise ParameterError("both dof must be >= 1")
        if self.delta < 0 or self.lam < 0:
            raise ParameterError("noncentralities must be >= 0")


def _upper_gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x).

    Series for the lower function when x < a + 1, Lentz continued
    fraction otherwise; relative accuracy near machine precision.
    """
    if x < 0 or a <= 0:
        raise ParameterError("need a > 0 and x >= 0")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        ap = a
        term = 1.0
        total = 1.0
        for _ in range(MAX_TERMS):
            ap += 1.0
            term *= x / ap
            total += term
            if term < total * 1e-17:
                break
        else:
            warnings.warn("incomplete-gamma series hit its term cap", PrecisionWarning)
        p = total * math.exp(a * math.log(x) - x - gammaln(a + 1.0))
        return min(1.0, max(0.0, 1.0 - p))
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:
        warnings.warn("incomplete-gamma fraction hit its term cap", PrecisionWarning)
    return min(1.0, max(0.0, math.exp(-x + a * math.log(x) - gammaln(a)) * h))


def _poisson_tail_bound(half: float, lo: int, hi: int) -> float:
    """Upper bound on the Poisson(half) mass outside [lo, hi].

    Geometric domination: successive weight ratios are half/(j+1) above
    the window and j/half below it, both strictly inside (0, 1) once the
    window spans the mode.
    """
    bound = 0.0
    ratio_up = half / (hi + 2.0)
    if ratio_up < 1.0:
        log_w = -half + (hi + 1) * math.log(half) - float(gammaln(hi + 2.0))
        bound += math.exp(log_w) / (1.0 - ratio_up)
    else:
        bound += 1.0
    if lo > 0:
        ratio_down = (lo - 1.0) / half
        log_w = -half + (lo - 1) * math.log(half) - float(gammaln(float(lo)))
        if ratio_down < 1.0:
            bound += math.exp(log_w) / (1.0 - ratio_down)
        else:
            bound += 1.0
    return bound


def _poisson_window(half: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Poisson(half) weights over a window capturing all but ~SERIES_TOL mass.

    Returns (indices, weights, neglected-mass bound).
    """
    if half < 0:
        raise ParameterError("noncentrality must be >= 0")
    if half == 0:
        return np.array([0]), np.array([1.0]), 0.0
    spread = 14.0 * math.sqrt(half) + 35.0
    lo = max(0, int(half - spread))
    hi = int(half + spread) + 1
    if hi - lo > MAX_TERMS:
        warnings.warn(
            f"Poisson window clipped to {MAX_TERMS} terms (noncentrality {2 * half:g})",
            PrecisionWarning,
        )
        lo = max(0, int(half) - MAX_TERMS // 2)
        hi = lo + MAX_TERMS
    j = np.arange(lo, hi + 1)
    logw = -half + j * math.log(half) - gammaln(j + 1.0)
    w = np.exp(logw)
    return j, w, _poisson_tail_bound(half, lo, hi)


def noncentral_chi2_sf(x: float, params: ChiSqParams) -> float:
    """Survival function of the noncentral chi-squared distribution.

    Poisson mixture of central tails; within one evaluation the central
    terms are chained by ``Q(a+1, y) = Q(a, y) + y^a e^-y / Gamma(a+1)``
    so only the first needs an incomplete-gamma call.
    """
    if x < 0:
        raise ParameterError("x must be >= 0")
    if x == 0:
        return 1.0
    s = params.dof / 2.0
    y = x / 2.0
    j, w, bound = _poisson_window(params.delta / 2.0)
    if bound > SERIES_TOL:
        warnings.warn(
            f"chi-squared tail truncation bound {bound:.2e} exceeds {SERIES_TOL:g}",
            PrecisionWarning,
        )
    q = np.empty(len(j))
    q[0] = _upper_gamma_q(s + j[0], y)
    if len(j) > 1:
        a = s + j[:-1]
        log_u = a * math.log(y) - y - gammaln(a + 1.0)
        q[1:] = q[0] + np.cumsum(np.exp(log_u))
    np.clip(q, 0.0, 1.0, out=q)
    return float(min(1.0, max(0.0, w @ q)))


def doubly_noncentral_f_sf(x: float, params: DncFParams) -> float:
    """Survival function of the doubly noncentral F distribution.

    Double Poisson mixture over incomplete-beta complements; the beta
    argument is the same for every mixture term, so the whole grid is one
    vectorized ``betainc`` call.
    """
    if x < 0:
        raise ParameterError("x must be >= 0")
    if x == 0:
        return 1.0
    v, r = params.v, params.r
    # P(F > x | j, k) = I_{1-q}(r/2 + k, v/2 + j) with q = v x / (v x + r)
    one_minus_q = r / (v * x + r)
    j, wj, bound_j = _poisson_window(params.delta / 2.0)
    k, wk, bound_k = _poisson_window(params.lam / 2.0)
    bound = bound_j + bound_k
    if bound > SERIES_TOL:
        warnings.warn(
            f"F tail truncation bound {bound:.2e} exceeds {SERIES_TOL:g}",
            PrecisionWarning,
        )
    a = v / 2.0 + j
    b = r / 2.0 + k
    grid = betainc(b[None, :], a[:, None], one_minus_q)
    return float(min(1.0, max(0.0, wj @ grid @ wk)))


DistParams = Union[ChiSqParams, DncFParams]


def survival_function(x: float, dist: DistParams) -> float:
    """Tail probability of either supported distribution family."""
    if isinstance(dist, ChiSqParams):
        return noncentral_chi2_sf(x, dist)
    if isinstance(dist, DncFParams):
        return doubly_noncentral_f_sf(x, dist)
    raise ParameterError(f"unsupported distribution parameters: {type(dist).__name__}")


def threshold_for_pfa(pfa: float, dist: DistParams) -> float:
    """Invert the survival function: eta with SF(eta) = pfa.

    Bracketing bisection on the monotone tail, terminating when the
    achieved tail probability is within 1e-10 relative of the target.
    """
    if not 0.0 < pfa < 1.0:
        raise ParameterError("pfa must lie strictly between 0 and 1")
    lo = 0.0
    hi = 1.0
    for _ in range(600):
        if survival_function(hi, dist) < pfa:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ParameterError("could not bracket the requested pfa")
    mid = 0.5 * (lo + hi)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        tail = survival_function(mid, dist)
        if abs(tail - pfa) <= 1e-10 * pfa:
            return mid
        if tail > pfa:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return mid


def pd_theoretical(eta: float, dist_h1: DistParams) -> float:
    """Detection probability: tail of the target-present distribution at eta."""
    return survival_function(eta, dist_h1)


def _means(direct: SteeringMatrix, scattered: SteeringMatrix, a, b_or_zero):
    a = np.asarray(a, dtype=np.complex128)
    mean0 = direct.columns @ a
    if b_or_zero is None:
        return mean0, mean0
    b = np.asarray(b_or_zero, dtype=np.complex128)
    return mean0, mean0 + scattered.columns @ b


def noncentrality_chi2(
    direct: SteeringMatrix,
    scattered: SteeringMatrix,
    a,
    b_or_zero,
    sigma2: float,
) -> Tuple[float, float]:
    """Numerator noncentralities (complex convention) under H0 and H1.

    Each is the blast-nulled scattered-subspace energy of the hypothesis
    mean, scaled by ``1 / (N * sigma2)``.  With the true direct delays in
    the projector the H0 value is exactly zero.
    """
    if sigma2 <= 0:
        raise ParameterError("sigma2 must be positive")
    n = direct.fft_size
    mean0, mean1 = _means(direct, scattered, a, b_or_zero)
    num0, _ = subspace_numerator(direct.columns, scattered.columns, mean0)
    num1, _ = subspace_numerator(direct.columns, scattered.columns, mean1)
    return num0 / (n * sigma2), num1 / (n * sigma2)


def noncentrality_denominator(
    direct: SteeringMatrix,
    scattered: SteeringMatrix,
    a,
    b_or_zero,
    sigma2: float,
) -> Tuple[float, float]:
    """Denominator noncentralities (complex convention) under H0 and H1.

    Each is the blast-complement energy of the hypothesis mean scaled by
    ``1 / (N * sigma2)``.
    """
    if sigma2 <= 0:
        raise ParameterError("sigma2 must be positive")
    n = direct.fft_size
    mean0, mean1 = _means(direct, scattered, a, b_or_zero)
    res0 = project_out(direct.columns, mean0)
    res1 = project_out(direct.columns, mean1)
    lam0 = float(np.real(np.vdot(res0, res0))) / (n * sigma2)
    lam1 = float(np.real(np.vdot(res1, res1))) / (n * sigma2)
    return lam0, lam1
