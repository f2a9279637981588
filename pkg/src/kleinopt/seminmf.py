"""Semi-nonnegative matrix factorization with unit columns on the sphere.

Fits ``X ~ W H`` with ``|w_j| = 1``, ``H >= 0`` and a bound ``S(W) <= eps``
on the largest pairwise arc length between columns of ``W``. Columns are
moved directly on the sphere by contracting, dilating or perturbing their
angle to the Karcher mean of the normalized data; no tangent space is used.
"""

from dataclasses import dataclass
import csv
import io
import math
import warnings

import numpy as np

from .errors import ConfigError, GeometryError
from .manifolds import Sphere
from .numkernel import thin_svd
from .randgen import random_source

STEP_TYPES = ("search_a", "search_b", "poll_plus", "poll_minus", "fail")


def spread(W, tol=1e-8):
    """Largest pairwise arc length ``max_{i<j} arccos(w_i . w_j)``."""
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if np.any(np.abs(np.linalg.norm(W, axis=0) - 1.0) > tol):
        raise GeometryError("columns of W must have unit length")
    k = W.shape[1]
    if k < 2:
        return 0.0
    G = np.clip(W.T @ W, -1.0, 1.0)
    iu = np.triu_indices(k, 1)
    return float(np.max(np.arccos(G[iu])))


def normalize_columns(X):
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise ConfigError("data matrix has a zero column")
    return X / norms


def karcher_mean(Xhat, tol=1e-10, max_iter=1000):
    """Karcher mean of unit vectors (columns of `Xhat`) on the sphere.

    Fixed-point iteration: average the log-map vectors at the current
    estimate and step along the exponential map. The data must lie in an
    open hemisphere around their normalized Euclidean mean.
    """
    Xhat = np.asarray(Xhat, dtype=float)
    n, m = Xhat.shape
    sphere = Sphere(n)
    mu = Xhat.sum(axis=1)
    nrm = np.linalg.norm(mu)
    if nrm < 1e-12 or np.min(mu @ Xhat) <= 0:
        raise GeometryError("mean not unique: data are not in an open hemisphere")
    mu = mu / nrm
    for _ in range(max_iter):
        step = np.mean([sphere.log_map(mu, x) for x in Xhat.T], axis=0)
        if np.linalg.norm(step) <= tol:
            return mu
        mu = sphere.exp_map(mu, step, check=False)
        mu /= np.linalg.norm(mu)
    raise RuntimeError("Karcher mean iteration did not converge")


# ---------------------------------------------------------------------------
# NNLS
# ---------------------------------------------------------------------------

def _solve_sub(G, c):
    try:
        return np.linalg.solve(G, c)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(G, c, rcond=None)[0]


def _nnls_column(G, c, tol, max_iter):
    """Active-set NNLS from the normal equations ``G x = c`` (G = W^T W)."""
    k = G.shape[0]
    x = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    grad = c - G @ x                 # negative gradient of 0.5|Wx - b|^2
    it = 0
    while True:
        free = ~passive & (grad > tol)
        if not np.any(free):
            break
        j = int(np.argmax(np.where(free, grad, -np.inf)))
        passive[j] = True
        while True:
            it += 1
            if it > max_iter:
                raise RuntimeError("NNLS did not converge")
            idx = np.flatnonzero(passive)
            z = np.zeros(k)
            if idx.size:
                z[idx] = _solve_sub(G[idx][:, idx], c[idx])
            if np.all(z[idx] > 0):
                x = z
                break
            # Step back to the boundary and release the blocking variables.
            neg = idx[z[idx] <= 0]
            alpha = np.min(x[neg] / (x[neg] - z[neg]))
            x = x + alpha * (z - x)
            passive &= x > tol
            x[~passive] = 0.0
        new_grad = c - G @ x
        if np.all(new_grad[~passive] <= tol) or np.array_equal(new_grad, grad):
            grad = new_grad
            break
        grad = new_grad
    return x


def nnls(X, W, tol=None, max_iter=None):
    """Column-wise ``argmin_{H >= 0} |X - W H|_F^2``.

    Returns ``(H, residual)`` with ``residual = |X - W H|_F^2``.
    """
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if W.ndim == 1:
        W = W[:, None]
    if X.shape[0] != W.shape[0]:
        raise ValueError(f"dimension mismatch: X {X.shape}, W {W.shape}")
    k = W.shape[1]
    full_rank = np.linalg.matrix_rank(W) == k
    if not full_rank:
        warnings.warn("W is not of full column rank", RuntimeWarning, stacklevel=2)
    G = W.T @ W
    C = W.T @ X
    if tol is None:
        tol = 10 * np.finfo(float).eps * max(1.0, float(np.abs(G).max()), float(np.abs(C).max())) * k
    max_iter = 30 * (k + 1) if max_iter is None else max_iter
    H = np.zeros((k, X.shape[1]))
    pending = range(X.shape[1])
    if full_rank and X.shape[1]:
        # Columns whose unconstrained solution is strictly positive are
        # already optimal (every KKT condition holds with all variables free).
        Z = np.linalg.solve(G, C)
        done = np.all(Z > 0, axis=0)
        H[:, done] = Z[:, done]
        pending = np.flatnonzero(~done)
    for i in pending:
        H[:, i] = _nnls_column(G, C[:, i], tol, max_iter)
    R = X - W @ H
    return H, float(np.sum(R * R))


# ---------------------------------------------------------------------------
# Moves on the sphere relative to the Karcher mean
# ---------------------------------------------------------------------------

@dataclass
class FrameAtColumn:
    """Decomposition ``w = cos(theta) xbar + sin(theta) v`` of one column."""

    xbar: np.ndarray
    w: np.ndarray
    v: np.ndarray
    theta: float
    u: np.ndarray = None
    phi: float = 0.0

    @classmethod
    def from_column(cls, xbar, w, rng=None):
        xbar = np.asarray(xbar, dtype=float)
        w = np.asarray(w, dtype=float)
        c = float(np.clip(xbar @ w, -1.0, 1.0))
        r = w - c * xbar
        nr = float(np.linalg.norm(r))
        if nr < 1e-15:
            raise GeometryError("column coincides with (or opposes) the mean; plane undefined")
        v = r / nr
        theta = math.atan2(nr, c)
        u = None
        if rng is not None:
            u = random_orthogonal_unit(rng, xbar, v)
        return cls(xbar, w, v, theta, u)

    def check(self, tol=1e-10):
        B = np.column_stack([self.xbar, self.v] + ([self.u] if self.u is not None else []))
        if np.linalg.norm(B.T @ B - np.eye(B.shape[1])) > tol:
            raise GeometryError("frame vectors are not orthonormal")

    def at(self, theta):
        return math.cos(theta) * self.xbar + math.sin(theta) * self.v


def random_orthogonal_unit(rng, *vectors):
    """Random unit vector orthogonal to the given orthonormal vectors."""
    Q = np.column_stack(vectors)
    while True:
        z = rng.standard_normal(Q.shape[0])
        z -= Q @ (Q.T @ z)
        z -= Q @ (Q.T @ z)
        nz = np.linalg.norm(z)
        if nz > 1e-12:
            return z / nz


def contract(frame, delta):
    """Shrink the angle to the mean by the factor `delta` in (0, 1)."""
    if not 0 < delta < 1:
        raise ConfigError("contraction factor must lie in (0, 1)")
    if not 0 < frame.theta < math.pi / 2:
        raise GeometryError("angle to the mean must lie in (0, pi/2)")
    return frame.at(delta * frame.theta)


def dilate(frame, gamma):
    """Grow the angle to the mean by `gamma` > 1; the result must stay below pi/2."""
    if not gamma > 1:
        raise ConfigError("dilation factor must exceed 1")
    theta = gamma * frame.theta
    if not 0 < theta < math.pi / 2:
        raise GeometryError("dilated angle leaves (0, pi/2)")
    return frame.at(theta)


def perturb(frame, theta_hat, phi, sign):
    """``cos(phi) [cos(theta_hat) xbar + sin(theta_hat) v] + sign sin(phi) u``."""
    if frame.u is None:
        raise GeometryError("frame has no perturbation direction")
    frame.check()
    if not 0 < theta_hat < math.pi / 2:
        raise GeometryError("theta_hat must lie in (0, pi/2)")
    if not 0 <= phi < math.pi / 2:
        raise GeometryError("phi must lie in [0, pi/2)")
    return math.cos(phi) * frame.at(theta_hat) + sign * math.sin(phi) * frame.u


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass
class SemiNmfConfig:
    k: int
    eps: float = math.pi / 4
    i_max: int = 500
    alpha_max: float = 1.0
    theta: float = 0.5
    gamma: float = 2.0
    delta: float = 0.99
    c: float = 1e-3
    q: float = 2.0
    seed: int = 0
    max_contractions: int = 5000
    pinv_cutoff: float = 1e-10

    def __post_init__(self):
        if not 0 < self.eps < math.pi + 1e-12:
            raise ConfigError("eps must lie in (0, pi]")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not 0 < self.theta < 1:
            raise ConfigError("theta must lie in (0, 1)")
        if not self.gamma > 1:
            raise ConfigError("gamma must exceed 1")
        if self.k < 1 or self.i_max < 0:
            raise ConfigError("need k >= 1 and i_max >= 0")

    def forcing(self, alpha):
        return self.c * alpha ** self.q


@dataclass
class Factorization:
    W: np.ndarray
    H: np.ndarray
    error: float
    spread: float


@dataclass
class SemiNmfRecord:
    i: int
    eps_i: float
    alpha_i: float
    step_type: str
    spread: float = 0.0
    forcing: float = 0.0


class SemiNmfTrace(list):
    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("i", "eps_i", "alpha_i", "step_type"))
        for r in self:
            writer.writerow([r.i, repr(float(r.eps_i)), repr(float(r.alpha_i)), r.step_type])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _angles(W, xbar):
    return np.arccos(np.clip(xbar @ W, -1.0, 1.0))


def _angles_ok(W, xbar):
    a = _angles(W, xbar)
    return bool(np.all((a > 0) & (a < math.pi / 2)))


def _pinv(H, cutoff):
    U, s, V = thin_svd(H)
    if s.size == 0 or s[0] == 0:
        return None
    keep = s > cutoff * s[0]
    return (V[:, keep] / s[keep]) @ U[:, keep].T


def initial_columns(xbar, k, eps, rng):
    """Columns near `xbar` at angles uniform in (0.05, min(eps/2, pi/4))."""
    hi = min(eps / 2, math.pi / 4)
    lo = min(0.05, hi / 2)
    cols = []
    for _ in range(k):
        v = random_orthogonal_unit(rng, xbar)
        t = rng.uniform(lo, hi)
        cols.append(math.cos(t) * xbar + math.sin(t) * v)
    return np.column_stack(cols)


def _search_contraction(X, H, xbar, cfg):
    Hp = _pinv(H, cfg.pinv_cutoff)
    if Hp is None:
        return None
    W = X @ Hp
    norms = np.linalg.norm(W, axis=0)
    if np.any(norms < 1e-14):
        return None
    W = W / norms
    try:
        frames = [FrameAtColumn.from_column(xbar, w) for w in W.T]
    except GeometryError:
        return None
    thetas = np.array([f.theta for f in frames])
    for _ in range(cfg.max_contractions + 1):
        W = np.column_stack([f.at(t) for f, t in zip(frames, thetas)])
        if np.all((thetas > 0) & (thetas < math.pi / 2)) and spread(W) <= cfg.eps:
            return W
        thetas = cfg.delta * thetas
    return None


def fit(X, cfg, rng=None, W0=None, callback=None):
    """Run the sphere-constrained semi-NMF.

    Returns ``(Factorization, trace)``. Every accepted iterate has unit
    columns, ``H >= 0``, ``S(W) <= eps`` and all column angles to the
    Karcher mean in (0, pi/2); the fit error is non-increasing and each
    decrease exceeds the forcing term.

    Parameters
    ----------
    callback : callable, optional
        Called as ``callback(i, W, H)`` with the initial factors (``i = 0``)
        and with every accepted iterate.
    """
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ConfigError("X contains non-finite entries")
    n, m = X.shape
    if n < 2:
        raise ConfigError("need at least two rows")
    if cfg.k > min(n, m):
        raise ConfigError(f"k = {cfg.k} exceeds min(n, m) = {min(n, m)}")
    rng = random_source(cfg.seed) if rng is None else rng
    xbar = karcher_mean(normalize_columns(X))

    if W0 is None:
        W = initial_columns(xbar, cfg.k, cfg.eps, rng)
    else:
        W = np.asarray(W0, dtype=float)
        if spread(W) > cfg.eps or not _angles_ok(W, xbar):
            raise ConfigError("initial W violates the spread or angle constraints")
    H, err = nnls(X, W)
    alpha = cfg.alpha_max
    trace = SemiNmfTrace()
    trace.append(SemiNmfRecord(0, err, alpha, "init", spread(W)))
    if callback is not None:
        callback(0, W, H)

    for i in range(1, cfg.i_max + 1):
        rho = cfg.forcing(alpha)
        accepted = None

        # Search: pseudo-inverse fit, contracted into the feasible set.
        Wc = _search_contraction(X, H, xbar, cfg)
        if Wc is not None:
            Hc, ec = nnls(X, Wc)
            if err - ec > rho:
                accepted = ("search_a", Wc, Hc, ec)

        # Search: random dilation of every column.
        if accepted is None:
            frames = [FrameAtColumn.from_column(xbar, w) for w in W.T]
            cols = []
            for f in frames:
                # Factor drawn in (1, 1 + alpha), restricted to keep the angle below pi/2.
                hi = min(1 + alpha, (math.pi / 2) / f.theta)
                g = rng.uniform(1.0, hi) if hi > 1 else 1.0
                cols.append(f.at(g * f.theta) if g > 1 and g * f.theta < math.pi / 2 else None)
            if all(c is not None for c in cols):
                Wd = np.column_stack(cols)
                if spread(Wd) <= cfg.eps and _angles_ok(Wd, xbar):
                    Hd, ed = nnls(X, Wd)
                    if err - ed > rho:
                        accepted = ("search_b", Wd, Hd, ed)

        # Poll: perturb every column within alpha, both signs.
        if accepted is None:
            frames = [FrameAtColumn.from_column(xbar, w, rng) for w in W.T]
            th = [rng.uniform(max(0.0, f.theta - alpha), min(math.pi / 2, f.theta + alpha))
                  for f in frames]
            ph = [rng.uniform(0.0, min(alpha, math.pi / 2)) for _ in frames]
            for sign, label in ((1.0, "poll_plus"), (-1.0, "poll_minus")):
                if not all(0 < t < math.pi / 2 and 0 < p < math.pi / 2 for t, p in zip(th, ph)):
                    break
                Wp = np.column_stack([perturb(f, t, p, sign) for f, t, p in zip(frames, th, ph)])
                Wp /= np.linalg.norm(Wp, axis=0)
                if spread(Wp) <= cfg.eps and _angles_ok(Wp, xbar):
                    Hp, ep = nnls(X, Wp)
                    if err - ep > rho:
                        accepted = (label, Wp, Hp, ep)
                        break

        if accepted is None:
            alpha = cfg.theta * alpha
            trace.append(SemiNmfRecord(i, err, alpha, "fail", spread(W), rho))
        else:
            label, W, H, err = accepted
            alpha = min(cfg.alpha_max, cfg.gamma * alpha)
            trace.append(SemiNmfRecord(i, err, alpha, label, spread(W), rho))
            if callback is not None:
                callback(i, W, H)

    return Factorization(W, H, err, spread(W)), trace


def synthetic_problem(n, m, k, eps, seed):
    """Exact ``X = W* H*`` with ``S(W*) <= eps / 2`` and ``H* >= 0``."""
    rng = random_source(seed)
    center = rng.standard_normal(n)
    center /= np.linalg.norm(center)
    cols = []
    for _ in range(k):
        v = random_orthogonal_unit(rng, center)
        t = rng.uniform(0.25, 1.0) * eps / 4
        cols.append(math.cos(t) * center + math.sin(t) * v)
    W = np.column_stack(cols)
    H = rng.uniform(0.0, 1.0, size=(k, m))
    return W @ H, W, H
