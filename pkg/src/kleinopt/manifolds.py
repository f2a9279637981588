"""Klein geometries G/H with closed-form exponential maps.

Points and tangent vectors are plain ndarrays; the geometry object carries
their meaning. Tangent vectors are stored in the representation used by the
closed-form maps:

* Grassmannian, Stiefel and sphere: ambient ``n x k`` (or ``n``) matrices at
  the base point.
* Matrix groups (GL+, SL, SO, SE, unipotent): left-trivialized algebra
  elements, so that ``exp_map(p, w) = p @ expm(w)``.
* SPD: symmetric matrices at the base point, affine-invariant metric.
* Translation: vectors in R^n.

Every geometry also exposes its *movers*: elements of the symmetry group
acting on the space. For the groups themselves the mover is the point; for
the Grassmannian, Stiefel manifold and sphere the movers are rotations in
SO(n) and a mover ``G`` represents the point ``G[:, :k]``.
"""

from collections import Counter
from dataclasses import dataclass
import math

import numpy as np

from . import numkernel as nk
from .errors import GeometryError, InjectivityRadiusError, LogUnavailableError, DomainError
from .numkernel import TOL

# Instrumentation: how often the tangent-level maps have been invoked.
CALL_COUNTS = Counter()


def bracket(a, b):
    return a @ b - b @ a


def _unit(n, i, j):
    E = np.zeros((n, n))
    E[i, j] = 1.0
    return E


def _skew_unit(n, i, j):
    return _unit(n, i, j) - _unit(n, j, i)


def _traceless_diagonal_basis(n):
    # Orthonormal basis of traceless diagonal matrices (Helmert contrasts).
    out = []
    for m in range(1, n):
        d = np.zeros(n)
        d[:m] = 1.0
        d[m] = -m
        out.append(np.diag(d / np.linalg.norm(d)))
    return out


def _symmetric_basis(n, traceless=False):
    out = [] if traceless else [_unit(n, i, i) for i in range(n)]
    if traceless:
        out.extend(_traceless_diagonal_basis(n))
    for i in range(n):
        for j in range(i + 1, n):
            out.append((_unit(n, i, j) + _unit(n, j, i)) / math.sqrt(2))
    return out


def _so_basis(n, scale=1.0 / math.sqrt(2), rows=None):
    idx = range(n) if rows is None else rows
    idx = list(idx)
    return [scale * _skew_unit(n, i, j) for a, i in enumerate(idx) for j in idx[a + 1:]]


@dataclass(frozen=True)
class AlgebraBasis:
    """Bases of the isotropy algebra ``h`` and its complement ``m``."""

    geometry: str
    h_basis: tuple
    m_basis: tuple

    @property
    def dim_h(self):
        return len(self.h_basis)

    @property
    def dim_m(self):
        return len(self.m_basis)

    def _projection_residual(self, X, basis):
        x = X.ravel()
        if not basis:
            return float(np.linalg.norm(x))
        B = np.stack([b.ravel() for b in basis], axis=1)
        coef, *_ = np.linalg.lstsq(B, x, rcond=None)
        return float(np.linalg.norm(x - B @ coef))

    def residual_in_h(self, X):
        return self._projection_residual(X, self.h_basis)

    def residual_in_m(self, X):
        return self._projection_residual(X, self.m_basis)

    def reductive_residuals(self):
        """Worst-case containment residuals of the three bracket relations.

        Returns a dict with keys ``"hh_in_h"``, ``"hm_in_m"`` and
        ``"mm_in_h"``; the first two vanish for a reductive split, the third
        also vanishes for a symmetric space.
        """
        hh = max((self.residual_in_h(bracket(a, b)) for a in self.h_basis for b in self.h_basis),
                 default=0.0)
        hm = max((self.residual_in_m(bracket(a, b)) for a in self.h_basis for b in self.m_basis),
                 default=0.0)
        mm = max((self.residual_in_h(bracket(a, b)) for a in self.m_basis for b in self.m_basis),
                 default=0.0)
        return {"hh_in_h": hh, "hm_in_m": hm, "mm_in_h": mm}


class KleinGeometry:
    """Common interface of all geometries.

    Subclasses set ``name``, ``point_shape``, ``tangent_dim``,
    ``exp_surjective`` and ``injectivity_radius`` and implement the
    underscore hooks.
    """

    name = None
    exp_surjective = True
    default_radius = math.inf
    is_group = True

    def __init__(self, injectivity_radius=None):
        self.injectivity_radius = (self.default_radius if injectivity_radius is None
                                   else float(injectivity_radius))
        if not self.injectivity_radius > 0:
            raise GeometryError("injectivity radius must be positive")

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(map(str, self._dims()))})"

    def __eq__(self, other):
        return type(self) is type(other) and self._dims() == other._dims()

    def __hash__(self):
        return hash((type(self).__name__, self._dims()))

    def _dims(self):
        return (self.n,)

    # -- points ---------------------------------------------------------
    def identity(self):
        raise NotImplementedError

    def check_membership(self, p):
        """Distance-like residual of `p` from the manifold (0 for members)."""
        p = np.asarray(p, dtype=float)
        if p.shape != self.point_shape or not np.all(np.isfinite(p)):
            return math.inf
        return float(self._membership(p))

    def reproject(self, p):
        """Snap a slightly drifted representation back onto the manifold."""
        return p

    def equal(self, p, q, tol=TOL.membership):
        return float(np.linalg.norm(np.asarray(p) - np.asarray(q))) <= tol

    def random_point(self, rng, scale=1.0):
        w = self.gaussian_tangent(self.identity(), rng)
        w *= scale * rng.uniform(0.1, 0.9) / self.norm(self.identity(), w)
        return self._exp(self.identity(), w)

    # -- tangent vectors --------------------------------------------------
    def tangent_residual(self, p, w):
        return float(self._tangent_residual(np.asarray(p, float), np.asarray(w, float)))

    def project_tangent(self, p, A):
        A = np.asarray(A, dtype=float)
        if A.shape != self.tangent_shape:
            raise GeometryError(f"expected shape {self.tangent_shape}, got {A.shape}")
        return self._project(np.asarray(p, float), A)

    def metric(self, p, a, b):
        return float(self._metric(np.asarray(p, float), np.asarray(a, float), np.asarray(b, float)))

    def norm(self, p, w):
        return math.sqrt(max(self.metric(p, w, w), 0.0))

    @property
    def tangent_shape(self):
        return self.point_shape

    def _check_tangent(self, p, w):
        if w.shape != self.tangent_shape:
            raise GeometryError(f"tangent shape {w.shape} != {self.tangent_shape}")
        scale = max(1.0, float(np.linalg.norm(w))) * max(1.0, float(np.linalg.norm(p)))
        if self._tangent_residual(p, w) > TOL.tangent * scale:
            raise GeometryError(f"{self!r}: tangent condition violated at base point")

    # -- exponential / logarithm -------------------------------------------
    def exp_map(self, p, w, check=True):
        """Move from `p` along the tangent `w` using the closed form of the geometry."""
        CALL_COUNTS["exp_map"] += 1
        p = np.asarray(p, dtype=float)
        w = np.asarray(w, dtype=float)
        if check:
            self._check_tangent(p, w)
            if not self.exp_surjective and self.norm(p, w) >= self.injectivity_radius:
                raise InjectivityRadiusError(
                    f"|w| = {self.norm(p, w):.4g} >= injectivity radius {self.injectivity_radius:.4g}")
        if not np.any(w):
            return p.copy()
        return self._exp(p, w)

    def log_map(self, p, q):
        """Inverse of :meth:`exp_map` on the principal neighbourhood of `p`."""
        CALL_COUNTS["log_map"] += 1
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        try:
            w = self._log(p, q)
        except DomainError as exc:
            raise InjectivityRadiusError(f"outside injectivity radius: {exc}") from exc
        return self._project(p, w)

    def _log(self, p, q):
        raise LogUnavailableError(f"log unavailable for {self!r}")

    # -- algebra ---------------------------------------------------------------
    def algebra_basis(self):
        raise NotImplementedError

    def klein_split(self):
        """The (h, m) split used for the reductive-structure checks."""
        return self.algebra_basis()

    def from_algebra(self, p, mu):
        """Tangent vector at `p` obtained by translating ``mu in m``."""
        return np.array(mu, dtype=float)

    def to_algebra(self, p, w):
        return np.array(w, dtype=float)

    def tangent_basis(self, p):
        """Metric-orthonormal basis of the tangent space at `p`."""
        return [self.from_algebra(p, mu) for mu in self.algebra_basis().m_basis]

    def gaussian_tangent(self, p, rng, basis=None):
        """Isotropic Gaussian tangent vector at `p`."""
        basis = self.tangent_basis(p) if basis is None else basis
        c = rng.standard_normal(len(basis))
        return np.tensordot(c, np.stack(basis), axes=1)

    # -- group action ----------------------------------------------------------
    def left_translate(self, g, h):
        """L_g(h): move point `h` by the group element `g`."""
        g = np.asarray(g, dtype=float)
        h = np.asarray(h, dtype=float)
        if self.check_membership(h) > TOL.membership:
            raise GeometryError("h is not a point of this geometry")
        if self.mover_residual(g) > TOL.membership:
            raise GeometryError("g is not a valid group element for this geometry")
        return self._translate(g, h)

    def _translate(self, g, h):
        return g @ h

    def mover_identity(self):
        return self.identity()

    def mover_from_point(self, p):
        return np.array(p, dtype=float)

    def mover_to_point(self, g):
        return g

    def mover_exp(self, mu):
        """Group exponential of an algebra element ``mu`` (embedded matrix)."""
        return nk.matrix_exp(mu)

    def mover_compose(self, g, m):
        return self._translate(g, m)

    def mover_inverse(self, m):
        return np.linalg.inv(m)

    def mover_distance(self, m):
        """Frobenius distance ``|m - e|`` of a mover from the identity."""
        return float(np.linalg.norm(m - self.mover_identity()))

    def mover_residual(self, m):
        return self.check_membership(m)

    def mover_reproject(self, m):
        return self.reproject(m)


class Translation(KleinGeometry):
    """R^n as SE(n)/SO(n); points and tangents are n-vectors."""

    name = "translation"
    exp_surjective = True
    default_radius = math.inf

    def __init__(self, n, injectivity_radius=None):
        self.n = int(n)
        self.point_shape = (self.n,)
        self.tangent_dim = self.n
        super().__init__(injectivity_radius)

    def identity(self):
        return np.zeros(self.n)

    def _membership(self, p):
        return 0.0

    def _tangent_residual(self, p, w):
        return 0.0

    def _project(self, p, A):
        return A.copy()

    def _metric(self, p, a, b):
        return float(a @ b)

    def _exp(self, p, w):
        return p + w

    def _log(self, p, q):
        return q - p

    def _translate(self, g, h):
        return g + h

    def block(self, v):
        """Algebra element ``[[0, v], [0, 0]]`` of size (n+1) x (n+1)."""
        tau = np.zeros((self.n + 1, self.n + 1))
        tau[:self.n, self.n] = v
        return tau

    def as_group(self, v):
        """Group element ``I + block(v)``."""
        return np.eye(self.n + 1) + self.block(v)

    def algebra_basis(self):
        m = tuple(self.block(e) for e in np.eye(self.n))
        return AlgebraBasis(self.name, (), m)

    def from_algebra(self, p, mu):
        mu = np.asarray(mu, dtype=float)
        return mu[:self.n, self.n].copy() if mu.ndim == 2 else mu.copy()

    def to_algebra(self, p, w):
        return self.block(w)

    def gaussian_tangent(self, p, rng, basis=None):
        return rng.standard_normal(self.n)

    def mover_exp(self, mu):
        return self.from_algebra(None, mu)

    def mover_inverse(self, m):
        return -np.asarray(m, dtype=float)

    def mover_residual(self, m):
        return self.check_membership(m)


class _MatrixGroup(KleinGeometry):
    """Shared pieces of the left-trivialized matrix groups."""

    def __init__(self, n, injectivity_radius=None):
        self.n = int(n)
        self.point_shape = (self.n, self.n)
        super().__init__(injectivity_radius)

    def identity(self):
        return np.eye(self.n)

    def _metric(self, p, a, b):
        return float(np.sum(a * b))

    def _exp(self, p, w):
        return p @ nk.matrix_exp(w)

    def _log(self, p, q):
        return nk.matrix_log(np.linalg.solve(p, q))


class GLPlus(_MatrixGroup):
    name = "glplus"
    exp_surjective = False
    default_radius = 1.0

    def __init__(self, n, injectivity_radius=None):
        super().__init__(n, injectivity_radius)
        self.tangent_dim = self.n ** 2

    def _membership(self, p):
        if np.linalg.det(p) > 0:
            return 0.0
        return max(float(np.linalg.svd(p, compute_uv=False)[-1]), np.finfo(float).eps)

    def _tangent_residual(self, p, w):
        return 0.0

    def _project(self, p, A):
        return A.copy()

    def algebra_basis(self):
        m = tuple(_unit(self.n, i, j) for i in range(self.n) for j in range(self.n))
        return AlgebraBasis(self.name, (), m)

    def klein_split(self):
        return AlgebraBasis(self.name, tuple(_so_basis(self.n)), tuple(_symmetric_basis(self.n)))

    def gaussian_tangent(self, p, rng, basis=None):
        return rng.standard_normal((self.n, self.n))


class SL(_MatrixGroup):
    name = "sl"
    exp_surjective = False
    default_radius = 1.0

    def __init__(self, n, injectivity_radius=None):
        super().__init__(n, injectivity_radius)
        self.tangent_dim = self.n ** 2 - 1

    def _membership(self, p):
        return abs(float(np.linalg.det(p)) - 1.0)

    def _tangent_residual(self, p, w):
        return abs(float(np.trace(w)))

    def _project(self, p, A):
        return A - np.trace(A) / self.n * np.eye(self.n)

    def reproject(self, p):
        d = np.linalg.det(p)
        return p / np.sign(d) / abs(d) ** (1.0 / self.n) if d != 0 else p

    def algebra_basis(self):
        off = [_unit(self.n, i, j) for i in range(self.n) for j in range(self.n) if i != j]
        return AlgebraBasis(self.name, (), tuple(_traceless_diagonal_basis(self.n) + off))

    def klein_split(self):
        # SL(n)/SO(n): h = so(n), m = traceless symmetric matrices.
        return AlgebraBasis(self.name, tuple(_so_basis(self.n)),
                            tuple(_symmetric_basis(self.n, traceless=True)))

    def gaussian_tangent(self, p, rng, basis=None):
        return self._project(p, rng.standard_normal((self.n, self.n)))


class SO(_MatrixGroup):
    name = "so"
    exp_surjective = True
    default_radius = math.pi

    def __init__(self, n, injectivity_radius=None):
        super().__init__(n, injectivity_radius)
        self.tangent_dim = self.n * (self.n - 1) // 2

    def _membership(self, p):
        r = float(np.linalg.norm(p.T @ p - np.eye(self.n)))
        if np.linalg.det(p) < 0:
            r += 2.0
        return r

    def _tangent_residual(self, p, w):
        return float(np.linalg.norm(w + w.T))

    def _project(self, p, A):
        return (A - A.T) / 2

    def _log(self, p, q):
        L = nk.matrix_log(p.T @ q)
        return (L - L.T) / 2

    def reproject(self, p):
        Q, _ = nk.polar_decompose(p)
        return Q

    def algebra_basis(self):
        return AlgebraBasis(self.name, (), tuple(_so_basis(self.n)))

    def gaussian_tangent(self, p, rng, basis=None):
        G = rng.standard_normal((self.n, self.n))
        return (G - G.T) / 2

    def mover_inverse(self, m):
        return m.T.copy()


class SE(_MatrixGroup):
    """Rigid motions as (n+1) x (n+1) block matrices ``[[O, v], [0, 1]]``."""

    name = "se"
    exp_surjective = False
    default_radius = 1.0

    def __init__(self, n, injectivity_radius=None):
        super().__init__(n, injectivity_radius)
        self.point_shape = (self.n + 1, self.n + 1)
        self.tangent_dim = self.n * (self.n + 1) // 2

    def identity(self):
        return np.eye(self.n + 1)

    def _membership(self, p):
        n = self.n
        O = p[:n, :n]
        r = float(np.linalg.norm(O.T @ O - np.eye(n)))
        r += float(np.linalg.norm(p[n, :n])) + abs(p[n, n] - 1.0)
        if np.linalg.det(O) < 0:
            r += 2.0
        return r

    def _tangent_residual(self, p, w):
        n = self.n
        A = w[:n, :n]
        return float(np.linalg.norm(A + A.T) + np.linalg.norm(w[n, :]))

    def _project(self, p, A):
        n = self.n
        out = np.zeros_like(A)
        out[:n, :n] = (A[:n, :n] - A[:n, :n].T) / 2
        out[:n, n] = A[:n, n]
        return out

    def reproject(self, p):
        n = self.n
        out = p.copy()
        out[:n, :n], _ = nk.polar_decompose(p[:n, :n])
        out[n, :n] = 0.0
        out[n, n] = 1.0
        return out

    def compose(self, O, v):
        """Block element built from a rotation `O` and translation `v`."""
        M = np.eye(self.n + 1)
        M[:self.n, :self.n] = O
        M[:self.n, self.n] = v
        return M

    def _rotations(self):
        N = self.n + 1
        return [_skew_unit(N, i, j) / math.sqrt(2) for i in range(self.n) for j in range(i + 1, self.n)]

    def _translations(self):
        return [_unit(self.n + 1, i, self.n) for i in range(self.n)]

    def algebra_basis(self):
        return AlgebraBasis(self.name, (), tuple(self._rotations() + self._translations()))

    def klein_split(self):
        # SE(n)/SO(n) = T(n): h = rotations, m = translations.
        return AlgebraBasis(self.name, tuple(self._rotations()), tuple(self._translations()))

    def gaussian_tangent(self, p, rng, basis=None):
        return self._project(p, rng.standard_normal(self.point_shape))

    def mover_inverse(self, m):
        n = self.n
        O, v = m[:n, :n], m[:n, n]
        return self.compose(O.T, -O.T @ v)


class Unipotent(_MatrixGroup):
    """Upper-triangular matrices with unit diagonal."""

    name = "unipotent"
    exp_surjective = False
    default_radius = 1.0

    def __init__(self, n, injectivity_radius=None):
        super().__init__(n, injectivity_radius)
        self.tangent_dim = self.n * (self.n - 1) // 2

    def _membership(self, p):
        return float(np.linalg.norm(np.diag(p) - 1.0) + np.linalg.norm(np.tril(p, -1)))

    def _tangent_residual(self, p, w):
        return float(np.linalg.norm(np.tril(w)))

    def _project(self, p, A):
        return np.triu(A, 1)

    def _exp(self, p, w):
        # Nilpotent: the series terminates after n terms.
        return p @ nk.series_exp(w, terms=self.n + 1)

    def _log(self, p, q):
        return nk.nilpotent_log(np.linalg.solve(p, q))

    def reproject(self, p):
        out = np.triu(p, 1)
        np.fill_diagonal(out, 1.0)
        return out

    def algebra_basis(self):
        m = tuple(_unit(self.n, i, j) for i in range(self.n) for j in range(i + 1, self.n))
        return AlgebraBasis(self.name, (), m)

    def gaussian_tangent(self, p, rng, basis=None):
        return np.triu(rng.standard_normal((self.n, self.n)), 1)

    def mover_exp(self, mu):
        return nk.series_exp(mu, terms=self.n + 1)


class SPD(KleinGeometry):
    """Symmetric positive definite matrices, GL+(n)/SO(n).

    The group law is ``g . h = g^{1/2} h g^{1/2}`` and the metric is the
    affine-invariant one.
    """

    name = "spd"
    exp_surjective = True
    default_radius = math.inf

    def __init__(self, n, injectivity_radius=None):
        self.n = int(n)
        self.point_shape = (self.n, self.n)
        self.tangent_dim = self.n * (self.n + 1) // 2
        super().__init__(injectivity_radius)

    def identity(self):
        return np.eye(self.n)

    def _membership(self, p):
        asym = float(np.linalg.norm(p - p.T))
        lam = np.linalg.eigvalsh((p + p.T) / 2)[0]
        return asym + (max(-lam, 0.0) + np.finfo(float).eps if lam <= 0 else 0.0)

    def _tangent_residual(self, p, w):
        return float(np.linalg.norm(w - w.T))

    def _project(self, p, A):
        return (A + A.T) / 2

    def _metric(self, p, a, b):
        pinv = np.linalg.inv(p)
        return float(np.trace(pinv @ a @ pinv @ b))

    @staticmethod
    def _sym_fn(S, fn):
        lam, V = np.linalg.eigh((S + S.T) / 2)
        out = (V * fn(lam)) @ V.T
        return (out + out.T) / 2

    def _exp(self, p, w):
        r = nk.spd_sqrt(p)
        ri = nk.spd_inv_sqrt(p)
        out = r @ self._sym_fn(ri @ w @ ri, np.exp) @ r
        return (out + out.T) / 2

    def _log(self, p, q):
        r = nk.spd_sqrt(p)
        ri = nk.spd_inv_sqrt(p)
        inner = ri @ q @ ri
        if np.linalg.eigvalsh((inner + inner.T) / 2)[0] <= 0:
            raise DomainError("target is not positive definite")
        return r @ self._sym_fn(inner, np.log) @ r

    def reproject(self, p):
        return self._sym_fn(p, lambda lam: np.maximum(lam, 1e-12 * max(1.0, lam[-1])))

    def _translate(self, g, h):
        r = nk.spd_sqrt(g)
        out = r @ h @ r
        return (out + out.T) / 2

    def algebra_basis(self):
        return AlgebraBasis(self.name, tuple(_so_basis(self.n)), tuple(_symmetric_basis(self.n)))

    def from_algebra(self, p, mu):
        r = nk.spd_sqrt(p)
        return r @ np.asarray(mu, dtype=float) @ r

    def to_algebra(self, p, w):
        ri = nk.spd_inv_sqrt(p)
        return ri @ np.asarray(w, dtype=float) @ ri

    def gaussian_tangent(self, p, rng, basis=None):
        G = rng.standard_normal((self.n, self.n))
        return self.from_algebra(p, (G + G.T) / 2)

    def mover_exp(self, mu):
        return self._sym_fn(np.asarray(mu, dtype=float), np.exp)

    def mover_residual(self, m):
        return self.check_membership(m)


class _OrthogonalQuotient(KleinGeometry):
    """Spaces of orthonormal k-frames, SO(n) acting on the left.

    The algebra so(n) is split relative to the frame ``[p | p_perp]``; an
    algebra element ``mu = [[A, -B^T], [B, D]]`` maps to the tangent
    ``p A + p_perp B``. Under the canonical metric the embedded basis
    ``E_ij - E_ji`` of ``m`` is orthonormal.
    """

    is_group = False

    def __init__(self, n, k, injectivity_radius=None):
        self.n = int(n)
        self.k = int(k)
        if not 0 < self.k <= self.n:
            raise GeometryError("need 0 < k <= n")
        super().__init__(injectivity_radius)

    def _dims(self):
        return (self.n, self.k)

    def _frame(self, p):
        return p if p.ndim == 2 else p[:, None]

    def identity(self):
        return np.eye(self.n)[:, :self.k]

    def _membership(self, p):
        f = self._frame(p)
        return float(np.linalg.norm(f.T @ f - np.eye(f.shape[1])))

    def reproject(self, p):
        f, _ = nk.qr_thin(self._frame(p))
        return f.reshape(p.shape)

    def from_algebra(self, p, mu):
        p = np.asarray(p, dtype=float)
        P = nk.complete_orthonormal(p)
        w = P @ np.asarray(mu, dtype=float)[:, :self.k]
        return w.reshape(p.shape)

    def to_algebra(self, p, w):
        p = np.asarray(p, dtype=float)
        k = self.k
        P = nk.complete_orthonormal(p)
        X = P.T @ self._frame(np.asarray(w, dtype=float))
        mu = np.zeros((self.n, self.n))
        mu[:, :k] = X
        mu[:k, k:] = -X[k:, :].T
        return mu

    def _translate(self, g, h):
        return g @ h

    def left_translate(self, g, h):
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n, self.n) or SO(self.n).check_membership(g) > TOL.membership:
            raise GeometryError("points of this space are moved by SO(n) elements only")
        if self.check_membership(h) > TOL.membership:
            raise GeometryError("h is not a point of this geometry")
        return g @ np.asarray(h, dtype=float)

    def mover_identity(self):
        return np.eye(self.n)

    def mover_from_point(self, p):
        return nk.complete_orthonormal(np.asarray(p, dtype=float))

    def mover_to_point(self, g):
        out = g[:, :self.k].copy()
        return out.reshape(self.point_shape)

    def mover_inverse(self, m):
        return m.T.copy()

    def mover_residual(self, m):
        return SO(self.n).check_membership(m)

    def mover_reproject(self, m):
        Q, _ = nk.polar_decompose(m)
        return Q

    def _m_pairs(self):
        raise NotImplementedError

    def algebra_basis(self):
        n = self.n
        pairs = self._m_pairs()
        m = tuple(_skew_unit(n, i, j) for i, j in pairs)
        in_m = set(pairs)
        h = tuple(_skew_unit(n, i, j) for i in range(n) for j in range(i + 1, n)
                  if (i, j) not in in_m)
        return AlgebraBasis(self.name, h, m)


class Grassmann(_OrthogonalQuotient):
    """k-planes in R^n, O(n)/(O(k) x O(n-k)), represented by orthonormal n x k frames."""

    name = "grassmann"
    exp_surjective = True
    default_radius = math.pi / 2

    def __init__(self, n, k, injectivity_radius=None):
        super().__init__(n, k, injectivity_radius)
        self.point_shape = (self.n, self.k)
        self.tangent_dim = self.k * (self.n - self.k)

    def equal(self, p, q, tol=TOL.membership):
        p = np.asarray(p)
        q = np.asarray(q)
        return float(np.linalg.norm(p @ p.T - q @ q.T)) <= tol

    def _tangent_residual(self, p, w):
        return float(np.linalg.norm(p.T @ w))

    def _project(self, p, A):
        return A - p @ (p.T @ A)

    def _metric(self, p, a, b):
        return float(np.sum(a * b))

    def _exp(self, p, w):
        U, s, V = nk.thin_svd(w)
        out = (p @ V * np.cos(s) + U * np.sin(s)) @ V.T
        return out

    def _log(self, p, q):
        M = p.T @ q
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] <= 1e-12:
            raise DomainError("a principal angle reaches pi/2")
        L = np.linalg.solve(M.T, (q - p @ M).T).T
        U, s, V = nk.thin_svd(L)
        return (U * np.arctan(s)) @ V.T

    def _m_pairs(self):
        return [(i, j) for i in range(self.k) for j in range(self.k, self.n)]

    def gaussian_tangent(self, p, rng, basis=None):
        return self._project(p, rng.standard_normal(self.point_shape))


class Stiefel(_OrthogonalQuotient):
    """Orthonormal k-frames in R^n, O(n)/O(n-k), canonical metric."""

    name = "stiefel"
    exp_surjective = True
    default_radius = math.pi

    def __init__(self, n, k, injectivity_radius=None):
        super().__init__(n, k, injectivity_radius)
        self.point_shape = (self.n, self.k)
        self.tangent_dim = self.n * self.k - self.k * (self.k + 1) // 2

    def _tangent_residual(self, p, w):
        S = p.T @ w
        return float(np.linalg.norm(S + S.T))

    def _project(self, p, A):
        S = p.T @ A
        return A - p @ ((S + S.T) / 2)

    def _metric(self, p, a, b):
        return float(np.sum(a * b) - 0.5 * np.sum((p.T @ a) * (p.T @ b)))

    def _exp(self, p, w):
        k = self.k
        A = p.T @ w
        Q, R = nk.qr_thin(w - p @ A)
        block = np.zeros((2 * k, 2 * k))
        block[:k, :k] = A
        block[:k, k:] = -R.T
        block[k:, :k] = R
        E = nk.matrix_exp(block)
        return p @ E[:k, :k] + Q @ E[k:, :k]

    def _m_pairs(self):
        return [(i, j) for i in range(self.k) for j in range(i + 1, self.n)]

    def gaussian_tangent(self, p, rng, basis=None):
        G = rng.standard_normal((self.k, self.k))
        Z = rng.standard_normal(self.point_shape)
        return p @ ((G - G.T) / math.sqrt(2)) + (Z - p @ (p.T @ Z))


class Sphere(_OrthogonalQuotient):
    """Unit sphere S^{n-1} in R^n; points are 1-D arrays."""

    name = "sphere"
    exp_surjective = True
    default_radius = math.pi

    def __init__(self, n, injectivity_radius=None):
        super().__init__(n, 1, injectivity_radius)
        self.point_shape = (self.n,)
        self.tangent_dim = self.n - 1

    def _dims(self):
        return (self.n,)

    def identity(self):
        e = np.zeros(self.n)
        e[0] = 1.0
        return e

    def _membership(self, p):
        return abs(float(np.linalg.norm(p)) - 1.0)

    def reproject(self, p):
        return p / np.linalg.norm(p)

    def _tangent_residual(self, p, w):
        return abs(float(p @ w))

    def _project(self, p, A):
        return A - (p @ A) * p

    def _metric(self, p, a, b):
        return float(a @ b)

    def _exp(self, p, w):
        t = float(np.linalg.norm(w))
        return math.cos(t) * p + (math.sin(t) / t) * w

    def _log(self, p, q):
        c = float(np.clip(p @ q, -1.0, 1.0))
        v = q - c * p
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            if c > 0:
                return np.zeros_like(p)
            raise DomainError("antipodal points")
        theta = math.atan2(nv, c)
        if theta >= math.pi - 1e-12:
            raise DomainError("antipodal points")
        return (theta / nv) * v

    def _m_pairs(self):
        return [(0, j) for j in range(1, self.n)]

    def gaussian_tangent(self, p, rng, basis=None):
        return self._project(p, rng.standard_normal(self.n))


GEOMETRIES = {
    "grassmann": Grassmann,
    "stiefel": Stiefel,
    "so": SO,
    "se": SE,
    "spd": SPD,
    "sl": SL,
    "glplus": GLPlus,
    "unipotent": Unipotent,
    "translation": Translation,
    "sphere": Sphere,
}


def make_geometry(name, n, k=None, injectivity_radius=None):
    """Build a geometry from its lowercase name (as used by the CLI)."""
    try:
        cls = GEOMETRIES[name.lower()]
    except KeyError:
        raise GeometryError(f"unknown geometry {name!r}; choose from {sorted(GEOMETRIES)}") from None
    if cls in (Grassmann, Stiefel):
        if k is None:
            raise GeometryError(f"{name} needs k")
        return cls(n, k, injectivity_radius=injectivity_radius)
    return cls(n, injectivity_radius=injectivity_radius)


def algebra_basis(geometry):
    return geometry.algebra_basis()


def sl_sample(mu, eta):
    """Element ``exp(eta) @ exp(mu)`` of SL(n).

    `mu` is traceless symmetric and `eta` skew-symmetric; every element of
    SL(n) arises this way, with the two factors recovered by the polar
    decomposition.
    """
    mu = np.asarray(mu, dtype=float)
    eta = np.asarray(eta, dtype=float)
    scale = max(1.0, float(np.linalg.norm(mu)))
    if np.linalg.norm(mu - mu.T) > TOL.tangent * scale or abs(np.trace(mu)) > TOL.tangent * scale:
        raise GeometryError("mu must be traceless symmetric")
    if np.linalg.norm(eta + eta.T) > TOL.tangent * max(1.0, float(np.linalg.norm(eta))):
        raise GeometryError("eta must be skew-symmetric")
    S = SPD._sym_fn(mu, np.exp)
    return nk.matrix_exp(eta) @ S
