"""
Small dense symmetric eigensolver and orthogonal-complement builder.

The matrices handled here are at most a few dozen rows (Hessians of the
tensor objective, Jacobians of the fixed-point map), so the cyclic Jacobi
method is used: it returns orthonormal eigenvectors directly.
"""
from typing import NamedTuple

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    EigenConvergenceError,
    NonFiniteError,
    NonUnitVectorError,
)

SYMMETRY_TOL = 1e-12
OFF_DIAGONAL_TOL = 1e-14
MAX_SWEEPS = 100
UNIT_TOL = 1e-12


class Spectrum(NamedTuple):
    """Ascending eigenvalues with column-aligned orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_matrix(a, strict: bool = False) -> np.ndarray:
    """
    Return a float copy of a square matrix, made exactly symmetric.

    With ``strict`` the input must already be symmetric to 1e-12 (relative to
    its largest entry); otherwise it is replaced by (A + A^T) / 2.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"Expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("Matrix has non-finite entries")

    if strict:
        scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
        deviation = float(np.max(np.abs(a - a.T))) if a.size else 0.0
        if deviation > SYMMETRY_TOL * scale:
            raise DimensionMismatchError(f"Matrix is not symmetric (deviation {deviation:.3e})")

    return (a + a.T) / 2.0


def _rotation(app: float, aqq: float, apq: float):
    """Cosine and sine of the rotation zeroing the (p, q) entry."""
    tau = (aqq - app) / (2.0 * apq)
    if tau >= 0.0:
        t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
    else:
        t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    return c, t * c


def _off_diagonal(a: np.ndarray) -> float:
    return float(np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0)))


def eigh(a) -> Spectrum:
    """
    Full spectrum of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius mass drops below
    1e-14 * ||A||_F. Eigenvalues are returned ascending; ties are ordered by
    the sign of the eigenvector's first nonzero component.
    """
    a = sym_matrix(a)
    n = a.shape[0]
    v = np.eye(n)

    threshold = OFF_DIAGONAL_TOL * float(np.linalg.norm(a))
    off = _off_diagonal(a)
    sweeps = 0
    while off > threshold:
        if sweeps == MAX_SWEEPS:
            raise EigenConvergenceError(
                f"Jacobi iteration did not converge in {MAX_SWEEPS} sweeps "
                f"(off-diagonal mass {off:.3e})",
                off_diagonal=off,
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s = _rotation(a[p, p], a[q, q], apq)
                rot = np.array([[c, s], [-s, c]])
                pq = [p, q]
                a[:, pq] = a[:, pq] @ rot
                a[pq, :] = rot.T @ a[pq, :]
                a[p, q] = a[q, p] = 0.0
                v[:, pq] = v[:, pq] @ rot
        sweeps += 1
        off = _off_diagonal(a)

    eigenvalues = np.diag(a).copy()
    order = np.lexsort((_leading_signs(v), eigenvalues))
    return Spectrum(eigenvalues[order], v[:, order])


def _leading_signs(v: np.ndarray) -> np.ndarray:
    signs = np.zeros(v.shape[1])
    for j in range(v.shape[1]):
        nonzero = np.flatnonzero(np.abs(v[:, j]) > UNIT_TOL)
        if nonzero.size:
            signs[j] = np.sign(v[nonzero[0], j])
    return signs


def spectral_radius(a) -> float:
    eigenvalues = eigh(a).eigenvalues
    return float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0


def lambda_min(a) -> float:
    return float(eigh(a).eigenvalues[0])


def lambda_max(a) -> float:
    return float(eigh(a).eigenvalues[-1])


def eig_general(b) -> np.ndarray:
    """
    Eigenvalues of a general square matrix, ordered by modulus then real part.

    Computed by LAPACK's Hessenberg-QR driver; no eigenvectors.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionMismatchError(f"Expected a square matrix, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise NonFiniteError("Matrix has non-finite entries")

    eigenvalues = np.linalg.eigvals(b).astype(np.complex128)
    order = np.lexsort((eigenvalues.real, np.abs(eigenvalues)))
    return eigenvalues[order]


def ortho_complement(x) -> np.ndarray:
    """
    Orthonormal basis of the complement of a unit vector, as columns.

    Uses the Householder reflector that maps e_1 onto +-x; its columns
    2..n are orthogonal to x.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatchError(f"Expected a vector, got shape {x.shape}")
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > UNIT_TOL:
        raise NonUnitVectorError(f"Vector norm {norm!r} differs from 1")

    n = x.size
    w = x.copy()
    w[0] += 1.0 if x[0] >= 0.0 else -1.0
    reflector = np.eye(n) - 2.0 * np.outer(w, w) / float(w @ w)
    return reflector[:, 1:]
