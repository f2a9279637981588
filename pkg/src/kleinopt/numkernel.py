"""Dense real-matrix kernels shared by every geometry.

All functions are pure and accept array-likes. Inputs containing NaN or
Inf are rejected with :class:`DomainError`.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError


@dataclass(frozen=True)
class Tolerances:
    """Single place for the numerical tolerances used across the package."""

    series: float = 1e-12          # expm vs truncated power series
    roundtrip: float = 1e-10       # exp(log(A)) == A, R @ R == S, ...
    decomposition: float = 1e-10   # SVD / QR / polar residuals
    symmetry: float = 1e-12        # accepted asymmetry for SPD input
    tangent: float = 1e-10         # tangent-space conditions
    membership: float = 1e-8       # points on the manifold
    solver_membership: float = 1e-6
    bisection: float = 1e-12


TOL = Tolerances()


def _as_finite(A, name="A"):
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} contains non-finite entries")
    return A


def _as_square(A, name="A"):
    A = _as_finite(A, name)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DomainError(f"{name} must be square, got shape {A.shape}")
    return A


def matrix_exp(A):
    """Matrix exponential by scaling and squaring with a degree-13 Pade
    approximant (Higham 2005, via :func:`scipy.linalg.expm`).

    Accepts a single square matrix or a stack of shape ``(..., n, n)``.
    """
    A = _as_square(A)
    return scipy.linalg.expm(A)


def matrix_log(A):
    """Principal real matrix logarithm.

    Raises
    ------
    DomainError
        If `A` is singular or has an eigenvalue on the closed negative
        real axis (no real principal logarithm).
    """
    A = _as_square(A)
    n = A.shape[0]
    if n == 0:
        return A.copy()
    eig = np.linalg.eigvals(A)
    scale = max(1.0, np.max(np.abs(eig)))
    if np.min(np.abs(eig)) <= 1e-14 * scale:
        raise DomainError("matrix is singular")
    on_axis = (eig.real <= 0) & (np.abs(eig.imag) <= 1e-12 * scale)
    if np.any(on_axis):
        raise DomainError("spectrum touches the negative real axis: outside principal branch")
    L = scipy.linalg.logm(A)
    if np.iscomplexobj(L):
        L = L.real
    return np.asarray(L, dtype=float)


def spd_sqrt(S):
    """Symmetric square root of a symmetric positive definite matrix."""
    S = _as_square(S, "S")
    if np.linalg.norm(S - S.T) > TOL.symmetry * max(1.0, np.linalg.norm(S)):
        raise DomainError("matrix is not symmetric")
    lam, V = np.linalg.eigh((S + S.T) / 2)
    if lam.size and lam[0] <= 0:
        raise DomainError("matrix is not positive definite")
    R = (V * np.sqrt(lam)) @ V.T
    return (R + R.T) / 2


def spd_inv_sqrt(S):
    S = _as_square(S, "S")
    lam, V = np.linalg.eigh((S + S.T) / 2)
    if lam.size and lam[0] <= 0:
        raise DomainError("matrix is not positive definite")
    R = (V / np.sqrt(lam)) @ V.T
    return (R + R.T) / 2


def thin_svd(A):
    """Thin SVD ``A = U @ diag(s) @ V.T`` with ``s`` descending.

    Returns ``(U, s, V)``; note that `V` (not ``V.T``) is returned.
    """
    A = _as_finite(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt.T


def qr_thin(A):
    """Thin QR with the diagonal of `R` made non-negative."""
    A = _as_finite(A)
    Q, R = np.linalg.qr(A, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def polar_decompose(A):
    """Polar decomposition ``A = Q @ S``, `Q` orthogonal, `S` SPD.

    For ``det(A) = 1`` both factors are unimodular, ``det(Q) = det(S) = 1``.
    """
    A = _as_square(A)
    U, s, V = thin_svd(A)
    if s.size and s[-1] <= 1e-14 * max(1.0, s[0]):
        raise DomainError("matrix is singular")
    Q = U @ V.T
    S = (V * s) @ V.T
    return Q, (S + S.T) / 2


def series_exp(A, terms=30):
    """Truncated Taylor series ``sum_{k<terms} A^k / k!``.

    Kept as a slow independent reference for :func:`matrix_exp`; also the
    exact exponential of a nilpotent matrix when ``terms > n``.
    """
    A = _as_square(A)
    out = np.eye(A.shape[-1])
    term = np.eye(A.shape[-1])
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def nilpotent_log(U):
    """Logarithm of a unipotent matrix via the finite series of log(I + N)."""
    U = _as_square(U)
    n = U.shape[0]
    N = U - np.eye(n)
    out = np.zeros_like(N)
    term = np.eye(n)
    for k in range(1, n + 1):
        term = term @ N
        out += ((-1) ** (k + 1) / k) * term
    return out


def complete_orthonormal(p):
    """Return an ``n x n`` rotation whose leading columns are `p`.

    `p` must have orthonormal columns. The trailing block is chosen so the
    determinant is +1.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    n, k = p.shape
    if k == n:
        P = p.copy()
    else:
        # Orthonormal basis of the complement from a full QR of [p | I].
        Q, _ = np.linalg.qr(np.hstack([p, np.eye(n)]), mode="complete")
        perp = Q[:, k:n]
        perp = perp - p @ (p.T @ perp)
        perp, _ = qr_thin(perp)
        P = np.hstack([p, perp])
    if np.linalg.det(P) < 0:
        if k < n:
            P[:, -1] *= -1
        else:
            raise DomainError("square input has determinant -1")
    return P


def orthogonal_complement(p):
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    return complete_orthonormal(p)[:, p.shape[1]:]
