"""Seeded samplers: tangent directions and small random group elements."""

from dataclasses import dataclass
import functools
import math

import numpy as np

from .errors import ConfigError
from .numkernel import TOL


def random_source(seed):
    """A PCG64 generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def random_tangent(geom, base, s, rng, basis=None):
    """Random tangent at `base` with metric norm in the open interval (0, s).

    The direction is isotropic (Gaussian coefficients over a metric-
    orthonormal basis, normalized), so its density is positive in every
    direction; the length is uniform on (0, s).
    """
    if not s > 0:
        raise ConfigError("step size must be positive")
    while True:
        w = geom.gaussian_tangent(base, rng, basis)
        nrm = geom.norm(base, w)
        length = rng.uniform(0.0, s)
        if nrm > 0 and length > 0:
            return w * (length / nrm)


@functools.lru_cache(maxsize=4096)
def solve_t_exp_t(r, tol=TOL.bisection):
    """Solve ``t * exp(t) = r`` for ``t >= 0`` by bisection."""
    if r < 0:
        raise ConfigError("r must be non-negative")
    if r == 0:
        return 0.0
    # t * e^t >= t, so the root lies in [0, r].
    lo, hi = 0.0, float(r)
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) < r:
            lo = mid
        else:
            hi = mid
    # lo is on the safe side: lo * exp(lo) <= r.
    return lo


@dataclass(frozen=True)
class GeneratorConfig:
    """Black-box generator of group elements within ``|g - e| < r < R``."""

    geometry: object
    R: float = 1.0

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigError("R must be positive")
        rho = self.geometry.injectivity_radius
        if math.isfinite(rho) and self.R > rho:
            raise ConfigError(f"R = {self.R} exceeds the injectivity radius {rho}")
        # The m-basis is fixed per geometry; stack it once for all draws.
        object.__setattr__(self, "m_stack", np.stack(self.geometry.algebra_basis().m_basis))


def random_algebra_element(geom, rng, radius, basis=None):
    """Element of ``m`` (as a group-algebra matrix) with Frobenius norm in (0, radius)."""
    m = np.stack(geom.algebra_basis().m_basis if basis is None else basis)
    while True:
        c = rng.standard_normal(len(m))
        mu = np.tensordot(c, m, axes=1)
        nrm = float(np.linalg.norm(mu))
        length = rng.uniform(0.0, radius)
        if nrm > 0 and length > 0:
            return mu * (length / nrm)


def random_group_element(cfg, r, rng, max_tries=1000):
    """Random mover ``g`` with ``|g - e|_F < r`` and ``|g^-1 - e|_F < r``.

    Draws ``mu`` in ``m`` with ``|mu| < t`` where ``t e^t = r`` and
    exponentiates it; since ``|exp(mu) - e| <= |mu| e^{|mu|}`` the ball
    condition holds by construction. Draws whose inverse leaves the ball are
    rejected (for the exponential generator this cannot happen, because
    ``exp(-mu)`` obeys the same bound).
    """
    if not 0 < r < cfg.R:
        raise ConfigError(f"need 0 < r < R, got r={r}, R={cfg.R}")
    geom = cfg.geometry
    t = solve_t_exp_t(r)
    basis = cfg.m_stack
    for _ in range(max_tries):
        mu = random_algebra_element(geom, rng, t, basis)
        g = geom.mover_exp(mu)
        if geom.mover_distance(g) < r and geom.mover_distance(geom.mover_inverse(g)) < r:
            return g
    raise RuntimeError("generator failed to produce an element inside the ball")
