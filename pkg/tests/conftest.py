"""Shared fixtures and independent oracles for the test suite.

The oracles here avoid the code paths they check: the embedded-exponential
oracle builds the full so(n) block and calls scipy directly, the NNLS oracle
enumerates every active set, and so on.
"""

import itertools
import math

import numpy as np
import pytest
import scipy.linalg

from kleinopt import make_geometry

# (name, n, k) triples covering every geometry at small size.
ALL_GEOMETRIES = [
    ("grassmann", 5, 2), ("stiefel", 5, 2), ("glplus", 3, None), ("sl", 3, None),
    ("so", 3, None), ("se", 3, None), ("spd", 3, None), ("unipotent", 4, None),
    ("translation", 3, None), ("sphere", 4, None),
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def geometry(spec):
    name, n, k = spec
    return make_geometry(name, n, k)


def geometry_id(spec):
    name, n, k = spec
    return f"{name}{n}" + ("" if k is None else f"_{k}")


def full_frame(p):
    """Any orthonormal completion ``[p | p_perp]`` (sign and det are irrelevant)."""
    p = p if p.ndim == 2 else p[:, None]
    n, k = p.shape
    Q, _ = np.linalg.qr(np.hstack([p, np.random.default_rng(0).standard_normal((n, n - k))]))
    Q[:, :k] = p
    return Q


def embedded_exp_oracle(p, w):
    """Geodesic ``[p | p_perp] expm(mu) [I; 0]`` for Grassmann/Stiefel/Sphere tangents.

    ``mu = [[p^T w, -B^T], [B, 0]]`` with ``B = p_perp^T w``; this is the
    one-parameter subgroup of SO(n) acting on the frame.
    """
    vec = p.ndim == 1
    P = full_frame(p)
    k = 1 if vec else p.shape[1]
    W = w[:, None] if vec else w
    X = P.T @ W
    A, B = X[:k], X[k:]
    n = P.shape[0]
    mu = np.zeros((n, n))
    mu[:k, :k] = A
    mu[k:, :k] = B
    mu[:k, k:] = -B.T
    out = P @ scipy.linalg.expm(mu)[:, :k]
    return out[:, 0] if vec else out


def spd_exp_oracle(p, w):
    """Affine-invariant exponential through a Cholesky factor instead of p^{1/2}."""
    L = np.linalg.cholesky(p)
    Li = np.linalg.inv(L)
    return L @ scipy.linalg.expm(Li @ w @ Li.T) @ L.T


def taylor(A, terms=30):
    out = np.zeros_like(A, dtype=float)
    term = np.eye(A.shape[0])
    for k in range(terms):
        out = out + term
        term = term @ A / (k + 1)
    return out


def nnls_bruteforce(X, W):
    """Solve each column of ``min |x - W h|, h >= 0`` by enumerating active sets."""
    k = W.shape[1]
    H = np.zeros((k, X.shape[1]))
    for j, x in enumerate(X.T):
        best, best_h = math.inf, None
        for size in range(k + 1):
            for idx in itertools.combinations(range(k), size):
                h = np.zeros(k)
                if idx:
                    sol = np.linalg.lstsq(W[:, list(idx)], x, rcond=None)[0]
                    if np.any(sol < 0):
                        continue
                    h[list(idx)] = sol
                val = float(np.sum((x - W @ h) ** 2))
                if val < best:
                    best, best_h = val, h
        H[:, j] = best_h
    return H


def random_rotation(n, rng):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


def procrustes_oracle(A, B):
    """min over SO(n) of |A - Q B|_F^2 by the SVD closed form."""
    U, _, Vt = np.linalg.svd(A @ B.T)
    D = np.eye(A.shape[0])
    D[-1, -1] = np.sign(np.linalg.det(U @ Vt))
    Q = U @ D @ Vt
    return Q, float(np.linalg.norm(A - Q @ B) ** 2)
