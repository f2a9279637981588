"""Direct-search solvers on Klein geometries.

Three drivers are provided:

``direct_search``
    Wraps a pluggable poll strategy that works in coordinates of ``m``.
    Candidates are mapped to the manifold through the exponential map at an
    anchor point; the anchor only moves when the best offset leaves the
    ball of radius ``s_fix`` (the annulus rule).
``probabilistic_descent_algebra``
    Probabilistic descent with one random direction (and its negative) per
    iteration, drawn in the tangent space of a fixed anchor.
``probabilistic_descent_group``
    The same method expressed with group elements only: the trial points
    are ``g M`` and ``g M^-1`` for a random small mover ``M``.
"""

from dataclasses import dataclass, field, fields
import csv
import io
import math
import time
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .randgen import GeneratorConfig, random_group_element, random_source, random_tangent

TRACE_HEADER = ("k", "evals", "f_best", "step", "moved", "ms")


@dataclass
class SolverConfig:
    s_fix: float = 0.25
    s_max: float = 0.5
    R: float = 1.0
    s0: Optional[float] = None
    r0: Optional[float] = None
    c: float = 1e-3
    q: float = 2.0
    max_evals: int = 10_000
    seed: int = 0
    n_directions: int = 1
    reproject_every: int = 100
    # Floor for s and r. Below ~1e-15 a sampled mover cannot be told apart
    # from the identity in floating point, so halving stops here.
    min_step: float = 1e-12

    def __post_init__(self):
        if not self.c > 0 or not self.q > 1:
            raise ConfigError("forcing function needs c > 0 and q > 1")
        if not 0 < self.s_fix < self.s_max:
            raise ConfigError("need 0 < s_fix < s_max")
        if self.max_evals < 1:
            raise ConfigError("max_evals must be positive")
        if not 0 < self.min_step < self.s_fix:
            raise ConfigError("need 0 < min_step < s_fix")
        if self.n_directions < 1:
            raise ConfigError("n_directions must be positive")

    @property
    def initial_step(self):
        return self.s_max / 2 if self.s0 is None else self.s0

    @property
    def initial_radius(self):
        return self.R / 2 if self.r0 is None else self.r0

    def replace(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return SolverConfig(**values)


def forcing(alpha, cfg=None):
    """Sufficient-decrease threshold ``c * alpha**q`` (default ``1e-3 alpha^2``)."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    c, q = (1e-3, 2.0) if cfg is None else (cfg.c, cfg.q)
    return c * alpha ** q


@dataclass
class Objective:
    """Black-box objective with optional inequality constraints ``g(p) <= 0``.

    Infeasible points and non-finite values evaluate to ``+inf`` (extreme
    barrier).
    """

    func: Callable
    constraints: Optional[Callable] = None
    evals: int = 0
    nonfinite: int = 0

    def feasible(self, p):
        if self.constraints is None:
            return True
        return bool(np.all(np.asarray(self.constraints(p)) <= 0))

    def __call__(self, p):
        self.evals += 1
        if not self.feasible(p):
            return math.inf
        value = float(self.func(p))
        if not math.isfinite(value):
            self.nonfinite += 1
            return math.inf
        return value


def _as_objective(obj):
    if isinstance(obj, Objective):
        obj.evals = 0
        return obj
    return Objective(obj)


@dataclass
class TraceRecord:
    k: int
    evals: int
    f_best: float
    step: float
    moved: bool
    ms: float
    accepted: str = ""
    forcing: float = 0.0
    f_prev: float = math.nan
    clipped: int = 0
    # Norm of the tangent offset from the anchor after this iteration
    # (before any anchor reset).
    offset: float = 0.0


class Trace(list):
    """List of :class:`TraceRecord` with CSV export."""

    @property
    def f_best(self):
        return self[-1].f_best if self else math.nan

    @property
    def evals(self):
        return self[-1].evals if self else 0

    def to_csv(self, path=None, timing=False):
        """Write ``k,evals,f_best,step,moved,ms``.

        Wall-clock times are left blank unless `timing` is set, so traces of
        identical runs are byte-identical.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in self:
            writer.writerow([r.k, r.evals, repr(float(r.f_best)), repr(float(r.step)),
                             int(r.moved), f"{r.ms:.3f}" if timing else ""])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _ms_since(t0):
    return 1e3 * (time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Pluggable poll strategy for the generic wrapper
# ---------------------------------------------------------------------------

class CoordinateSearch:
    """Compass search on the coordinates of ``m``.

    Polls ``center +- step * e_i``, moves to the best improving point, and
    halves the step when the poll fails. Converged once ``step < min_step``.
    """

    def __init__(self, step=0.5, min_step=1e-9, shrink=0.5):
        self.initial_step = step
        self.min_step = min_step
        self.shrink = shrink

    def start(self, dim):
        self.dim = dim
        self.step = self.initial_step
        self.center = np.zeros(dim)

    def recenter(self):
        """New mesh around the origin of a fresh tangent space, same step."""
        self.center = np.zeros(self.dim)

    def candidates(self):
        E = np.eye(self.dim) * self.step
        return [self.center + e for e in E] + [self.center - e for e in E]

    def update(self, candidates, values, f_center):
        """Consume poll values; returns True if the center moved."""
        j = int(np.argmin(values)) if len(values) else -1
        if j >= 0 and values[j] < f_center:
            self.center = np.asarray(candidates[j], dtype=float)
            return True
        self.step *= self.shrink
        return False

    @property
    def converged(self):
        return self.step < self.min_step


def direct_search(geom, obj, dsm=None, cfg=None, x0=None):
    """Generic direct search on a reductive homogeneous space.

    Parameters
    ----------
    geom : KleinGeometry
    obj : callable or Objective
        Objective on points of `geom`.
    dsm : poll strategy, optional
        Object with ``start(dim)``, ``candidates()``,
        ``update(cands, values, f_center)``, ``recenter()`` and
        ``converged``. Defaults to :class:`CoordinateSearch`.
    cfg : SolverConfig
        ``s_fix`` and ``s_max`` are replaced by infinity when the
        exponential map of `geom` is surjective.
    x0 : point, optional
        Initial anchor; the identity by default.

    Returns
    -------
    point, trace
    """
    cfg = SolverConfig() if cfg is None else cfg
    dsm = CoordinateSearch() if dsm is None else dsm
    obj = _as_objective(obj)
    if geom.exp_surjective:
        s_fix = s_max = math.inf
    else:
        s_fix, s_max = cfg.s_fix, cfg.s_max
        if s_max > geom.injectivity_radius:
            raise ConfigError("s_max exceeds the injectivity radius")

    anchor = geom.identity() if x0 is None else np.asarray(x0, dtype=float)
    if not obj.feasible(anchor):
        raise ConfigError("initial point violates the inequality constraints")
    basis = np.stack(geom.tangent_basis(anchor))
    f_best = obj(anchor)
    best = anchor
    dsm.start(len(basis))
    trace = Trace()
    k = 0
    moves = 0

    def to_point(mu):
        return geom.exp_map(anchor, np.tensordot(mu, basis, axes=1), check=False)

    while obj.evals < cfg.max_evals and not dsm.converged:
        t0 = time.perf_counter()
        k += 1
        f_prev = f_best
        cands = []
        clipped = 0
        for mu in dsm.candidates():
            nrm = float(np.linalg.norm(mu))
            if nrm >= s_max:
                mu = mu * (s_max * (1 - 1e-12) / nrm)
                clipped += 1
            cands.append(mu)
        values = []
        for mu in cands:
            if obj.evals >= cfg.max_evals:
                break
            values.append(obj(to_point(mu)))
        f_center = f_best
        improved = dsm.update(cands[:len(values)], values, f_center)
        moved = False
        offset = float(np.linalg.norm(dsm.center))
        if improved:
            f_best = min(values)
            best = to_point(dsm.center)
            if offset > s_fix:
                anchor = best
                moves += 1
                if moves % cfg.reproject_every == 0:
                    anchor = geom.reproject(anchor)
                basis = np.stack(geom.tangent_basis(anchor))
                dsm.recenter()
                moved = True
        trace.append(TraceRecord(k, obj.evals, f_best, dsm.step, moved, _ms_since(t0),
                                 accepted="poll" if improved else "", f_prev=f_prev,
                                 clipped=clipped, offset=offset))
    return best, trace


# ---------------------------------------------------------------------------
# Probabilistic descent
# ---------------------------------------------------------------------------

def _check_algebra_config(geom, cfg):
    if not cfg.s_max < geom.injectivity_radius / 2:
        raise ConfigError(f"need s_max < rho/2 = {geom.injectivity_radius / 2:.4g}")
    if not 0 < cfg.initial_step <= cfg.s_max:
        raise ConfigError("initial step must lie in (0, s_max]")


def probabilistic_descent_algebra(geom, obj, cfg=None, rng=None, x0=None):
    """Probabilistic descent through the tangent space of a moving anchor.

    Each iteration draws ``omega`` with ``0 < |omega| < s`` and tries
    ``exp_g(w + omega)`` then ``exp_g(w - omega)``, accepting on
    ``f < f_best - forcing(|omega|)``. The step doubles (capped at
    ``s_max``) on success and halves otherwise. The anchor ``g`` moves to
    the incumbent, and the offset ``w`` resets, only once ``|w|`` exceeds
    ``s_fix``.

    Returns ``(point, trace)``.
    """
    cfg = SolverConfig() if cfg is None else cfg
    _check_algebra_config(geom, cfg)
    rng = random_source(cfg.seed) if rng is None else rng
    obj = _as_objective(obj)

    anchor = geom.identity() if x0 is None else np.asarray(x0, dtype=float)
    if not obj.feasible(anchor):
        raise ConfigError("initial point violates the inequality constraints")
    basis = geom.tangent_basis(anchor)
    w = np.zeros(geom.tangent_shape)
    best = anchor
    f_best = obj(anchor)
    s = cfg.initial_step
    trace = Trace()
    k = 0
    moves = 0

    while obj.evals < cfg.max_evals:
        t0 = time.perf_counter()
        f_prev = f_best
        step_used = s
        accepted = ""
        rho = 0.0
        w_test = w
        for _ in range(cfg.n_directions):
            omega = random_tangent(geom, anchor, s, rng, basis)
            rho = forcing(geom.norm(anchor, omega), cfg)
            for sign, label in ((1.0, "plus"), (-1.0, "minus")):
                if obj.evals >= cfg.max_evals:
                    break
                trial_w = w + sign * omega
                h = geom.exp_map(anchor, trial_w, check=False)
                f = obj(h)
                if f < f_best - rho:
                    best, f_best, w_test, accepted = h, f, trial_w, label
                    break
            if accepted or obj.evals >= cfg.max_evals:
                break

        s = min(cfg.s_max, 2 * s) if accepted else max(s / 2, cfg.min_step)
        moved = False
        offset = geom.norm(anchor, w_test)
        if accepted and offset > cfg.s_fix:
            anchor = best
            moves += 1
            if moves % cfg.reproject_every == 0:
                anchor = best = geom.reproject(anchor)
            basis = geom.tangent_basis(anchor)
            w = np.zeros(geom.tangent_shape)
            moved = True
        else:
            w = w_test
        trace.append(TraceRecord(k, obj.evals, f_best, step_used, moved, _ms_since(t0),
                                 accepted=accepted, forcing=rho, f_prev=f_prev, offset=offset))
        k += 1
    return best, trace


def probabilistic_descent_group(geom, obj, gen=None, cfg=None, rng=None, x0=None):
    """Probabilistic descent that only multiplies group elements.

    Each iteration draws a mover ``M`` with ``|M - e| < r`` and tries
    ``L_g(M)`` then ``L_g(M^-1)``, accepting on
    ``f < f(g) - forcing(|M - e|)``. The radius doubles (capped at ``R``)
    on success and halves otherwise. No tangent vector or logarithm is
    used.

    Returns ``(point, trace)``; the point is the manifold point represented
    by the final mover.
    """
    cfg = SolverConfig() if cfg is None else cfg
    gen = GeneratorConfig(geom, cfg.R) if gen is None else gen
    rng = random_source(cfg.seed) if rng is None else rng
    obj = _as_objective(obj)
    R = gen.R
    r = cfg.initial_radius
    if not 0 < r <= R:
        raise ConfigError("initial radius must lie in (0, R]")
    r_cap = math.nextafter(R, 0.0)

    g = geom.mover_identity() if x0 is None else geom.mover_from_point(x0)
    p = geom.mover_to_point(g)
    if not obj.feasible(p):
        raise ConfigError("initial point violates the inequality constraints")
    f_best = obj(p)
    trace = Trace()
    k = 0
    moves = 0

    while obj.evals < cfg.max_evals:
        t0 = time.perf_counter()
        f_prev = f_best
        step_used = r
        M = random_group_element(gen, min(r, r_cap), rng)
        accepted = ""
        rho = 0.0
        for label, mover in (("plus", M), ("minus", None)):
            if obj.evals >= cfg.max_evals:
                break
            if mover is None:
                mover = geom.mover_inverse(M)
            rho = forcing(geom.mover_distance(mover), cfg)
            h = geom.mover_compose(g, mover)
            f = obj(geom.mover_to_point(h))
            if f < f_best - rho:
                g, f_best, accepted = h, f, label
                moves += 1
                if moves % cfg.reproject_every == 0:
                    g = geom.mover_reproject(g)
                break
        r = min(R, 2 * r) if accepted else max(r / 2, cfg.min_step)
        trace.append(TraceRecord(k, obj.evals, f_best, step_used, bool(accepted), _ms_since(t0),
                                 accepted=accepted, forcing=rho, f_prev=f_prev))
        k += 1
    return geom.mover_to_point(g), trace
