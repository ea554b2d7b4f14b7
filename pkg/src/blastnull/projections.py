"""Least-squares and blast-subspace projection helpers.

These are the shared numerical kernels behind amplitude estimation, the
detection statistics, and the noncentrality parameters.  The orthogonal
complement of the blast subspace is always applied implicitly, as
``x - Phi (Phi^H Phi)^-1 Phi^H x``, so no N x N matrix is ever formed on
the hot path.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConditioningError

# Relative singular-value cutoff for numerical rank decisions.  Consistent
# across estimation and detection so degrees of freedom stay stable when
# estimated delays nearly coincide.
RANK_RTOL = 1e-8

# Gram matrices with a larger condition number are treated as singular.
COND_LIMIT = 1e12


def gram(columns: np.ndarray) -> np.ndarray:
    """Hermitian Gram matrix ``A^H A`` of a column stack."""
    return columns.conj().T @ columns


def solve_gram(columns: np.ndarray, rhs: np.ndarray, delays=None) -> np.ndarray:
    """Least-squares coefficients ``(A^H A)^-1 A^H rhs``.

    Parameters
    ----------
    columns : ndarray, shape (N, M)
        Column stack A.
    rhs : ndarray, shape (N,) or (N, T)
        Right-hand side(s).
    delays : array_like, optional
        Path delays behind the columns, quoted in the error message when
        the Gram matrix is too ill-conditioned.

    Raises
    ------
    ConditioningError
        If the Gram condition number exceeds COND_LIMIT.
    """
    g = gram(columns)
    eig = np.linalg.eigvalsh(g)
    if eig[-1] <= 0 or eig[0] <= eig[-1] / COND_LIMIT:
        detail = "" if delays is None else f" (delays {np.asarray(delays)})"
        raise ConditioningError(
            f"steering Gram matrix condition exceeds {COND_LIMIT:.0e}{detail}"
        )
    return np.linalg.solve(g, columns.conj().T @ rhs)


def project_out(columns: np.ndarray, x: np.ndarray, delays=None) -> np.ndarray:
    """Residual of ``x`` after least-squares removal of ``range(columns)``.

    Equals the orthogonal-complement projector applied to ``x`` without
    forming it. ``x`` may be a vector or a stack of columns.
    """
    return x - columns @ solve_gram(columns, x, delays=delays)


def numerical_rank(hermitian: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Rank of a Hermitian PSD matrix with eigenvalues below rtol*max zeroed."""
    eig = np.linalg.eigvalsh(hermitian)
    top = eig[-1]
    if top <= 0:
        return 0
    return int(np.sum(eig > rtol * top))


def truncated_inverse(hermitian: np.ndarray, rtol: float = RANK_RTOL):
    """Eigen pseudo-inverse of a Hermitian PSD matrix.

    Eigenvalues below ``rtol`` times the largest are truncated, which keeps
    the inverse finite when estimated paths nearly coincide.

    Returns
    -------
    inverse : ndarray
        The pseudo-inverse.
    rank : int
        Number of retained eigenvalues.
    """
    eig, vec = np.linalg.eigh(hermitian)
    top = eig[-1]
    if top <= 0:
        return np.zeros_like(hermitian), 0
    keep = eig > rtol * top
    inv_eig = np.zeros_like(eig)
    inv_eig[keep] = 1.0 / eig[keep]
    return (vec * inv_eig) @ vec.conj().T, int(np.sum(keep))


def whitened_subspace_basis(direct_cols: np.ndarray, scattered_cols: np.ndarray):
    """Orthonormal-ized basis for the blast-nulled scattered subspace.

    Computes ``W = P_perp @ scattered_cols`` (blast complement applied to
    every scattered column), eigendecomposes ``W^H W`` and returns
    ``Z = W U_kept diag(1/sqrt(lam_kept))`` so that the numerator quadratic
    form of the detectors is simply ``||Z^H x||^2``.

    Returns
    -------
    basis : ndarray, shape (N, v)
    rank : int
        Numerical rank v of the nulled scattered subspace.
    """
    w = project_out(direct_cols, scattered_cols)
    g = w.conj().T @ w
    eig, vec = np.linalg.eigh(g)
    top = eig[-1]
    if top <= 0:
        return np.zeros((direct_cols.shape[0], 0), dtype=np.complex128), 0
    keep = eig > RANK_RTOL * top
    basis = w @ (vec[:, keep] / np.sqrt(eig[keep])[None, :])
    return basis, int(np.sum(keep))


def subspace_numerator(direct_cols: np.ndarray, scattered_cols: np.ndarray, x: np.ndarray):
    """Energy of ``x`` in the blast-nulled scattered subspace.

    Evaluates ``x^H P_perp Phi_s [Phi_s^H P_perp Phi_s]^+ Phi_s^H P_perp x``
    through the whitened-basis form.

    Returns
    -------
    value : float
    rank : int
        Numerical rank v used in the pseudo-inverse.
    """
    basis, rank = whitened_subspace_basis(direct_cols, scattered_cols)
    if rank == 0:
        return 0.0, 0
    proj = basis.conj().T @ x
    return float(np.real(np.vdot(proj, proj))), rank
