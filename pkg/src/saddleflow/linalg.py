"""Dense symmetric linear algebra used throughout the package.

Everything operates on plain numpy arrays. Matrices are small and dense
(dimensions in the tens), so factorizations are recomputed freely. All
tolerances are absolute-relative hybrids of the form ``tol * max(1, scale)``
so that checks stay meaningful when entries span several orders of
magnitude (large integral gains inflate some of the matrices handled here).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NotPositiveDefiniteError",
    "RankDeficientError",
    "SpectralBounds",
    "sym_eig",
    "cholesky",
    "weighted_norm",
    "lognorm_weighted",
    "spectral_bounds_gram",
]

SYMMETRY_TOL = 1e-10


class NotPositiveDefiniteError(ValueError):
    """A matrix required to be positive definite is not."""


class RankDeficientError(ValueError):
    """A matrix required to have full (row) rank does not."""


@dataclass(frozen=True)
class SpectralBounds:
    """Extreme eigenvalues of a symmetric positive-semidefinite matrix."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError("spectral bounds must be finite")
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float array with finite entries."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def as_vector(v, name: str = "vector", dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float array with finite entries."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} must have length {dim}, got {v.shape[0]}")
    return v


def _require_symmetric(S: np.ndarray, name: str) -> np.ndarray:
    """Check symmetry to hybrid tolerance and return the symmetrized matrix."""
    if S.shape[0] != S.shape[1]:
        raise ValueError(f"{name} must be square, got shape {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S))) if S.size else 0.0)
    skew = float(np.max(np.abs(S - S.T))) if S.size else 0.0
    if skew > SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric (max asymmetry {skew:.3e})")
    return 0.5 * (S + S.T)


def sym_eig(S) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    S : array_like
        Square symmetric matrix (asymmetry up to ``1e-10 * max(1, |S|)`` is
        symmetrized away before factoring).

    Returns
    -------
    eigenvalues : ndarray
        Sorted ascending.
    eigenvectors : ndarray
        Orthonormal, one eigenvector per column, so ``S @ V = V @ diag(w)``.
    """
    S = as_matrix(S, "S")
    S = _require_symmetric(S, "S")
    w, v = np.linalg.eigh(S)
    return w, v


def cholesky(P) -> np.ndarray:
    """Lower-triangular factor ``R`` with ``P = R @ R.T``.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot is non-positive, i.e. ``P`` is not positive definite.
    """
    P = as_matrix(P, "P")
    P = _require_symmetric(P, "P")
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc


def weighted_norm(P, v) -> float:
    """Norm ``sqrt(v' P v)`` induced by a symmetric positive-definite ``P``."""
    v = as_vector(v, "v")
    R = cholesky(P)  # raises NotPositiveDefiniteError for indefinite P
    if R.shape[0] != v.shape[0]:
        raise ValueError(f"P is {R.shape[0]}x{R.shape[0]} but v has length {v.shape[0]}")
    # ||v||_P = ||R' v||_2; evaluating through the factor keeps the result >= 0.
    return float(np.linalg.norm(R.T @ v))


def lognorm_weighted(P, A) -> float:
    """Logarithmic norm of ``A`` in the weighted norm defined by ``P``.

    This is the smallest ``b`` such that ``P A + A' P <= 2 b P`` in the
    semidefinite order, computed as ``0.5 * lambda_max(Rinv (P A + A' P) Rinv')``
    for the Cholesky factor ``P = R R'``. Negative values certify contraction.
    """
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    R = cholesky(P)
    if R.shape[0] != A.shape[0]:
        raise ValueError(f"P is {R.shape[0]}x{R.shape[0]} but A is {A.shape[0]}x{A.shape[0]}")
    P = as_matrix(P, "P")
    G = P @ A + A.T @ P
    W = np.linalg.solve(R, np.linalg.solve(R, G).T).T  # Rinv G Rinv'
    w = np.linalg.eigvalsh(0.5 * (W + W.T))
    return 0.5 * float(w[-1])


def spectral_bounds_gram(A) -> SpectralBounds:
    """Extreme eigenvalues of the Gram matrix ``A @ A.T``.

    Raises
    ------
    RankDeficientError
        If the smallest Gram eigenvalue is below ``1e-10`` (``A`` is not of
        full row rank to working precision).
    """
    A = as_matrix(A, "A")
    m, n = A.shape
    if m > n:
        raise ValueError(f"A must have rows <= cols, got shape {A.shape}")
    w = np.linalg.eigvalsh(A @ A.T)
    lower, upper = float(w[0]), float(w[-1])
    if lower <= 1e-10:
        raise RankDeficientError(f"Gram matrix nearly singular (lambda_min = {lower:.3e})")
    return SpectralBounds(lower=lower, upper=upper)
