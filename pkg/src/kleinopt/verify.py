"""Property and oracle checks runnable from the command line.

Each suite returns a list of :class:`Check` rows; ``verify all`` simply
concatenates them. The checks are deliberately small (a few seconds in
total) and use oracles that do not share code with the routine under test.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from . import numkernel as nk
from .manifolds import CALL_COUNTS, algebra_basis, make_geometry
from .randgen import GeneratorConfig, random_algebra_element, random_group_element, \
    random_source, random_tangent, solve_t_exp_t
from .seminmf import SemiNmfConfig, fit, karcher_mean, nnls, synthetic_problem
from .solvers import (SolverConfig, direct_search, probabilistic_descent_algebra,
                      probabilistic_descent_group)

SUITES = ("kernels", "manifolds", "generators", "solvers", "seminmf")

# Geometries with small dimensions used by the manifold and generator checks.
SMALL_GEOMETRIES = (
    ("translation", 3, None), ("glplus", 3, None), ("sl", 3, None), ("so", 3, None),
    ("se", 3, None), ("unipotent", 4, None), ("spd", 3, None), ("grassmann", 5, 2),
    ("stiefel", 5, 2), ("sphere", 4, None),
)


@dataclass
class Check:
    name: str
    residual: float
    tol: float
    passed: bool
    # How residual is compared with tol for a pass.
    sense: str = "<="

    def line(self):
        op = self.sense
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<48s} residual={self.residual:.3e} ({op} {self.tol:.0e})"


def _le(name, residual, tol):
    residual = float(residual)
    return Check(name, residual, tol, bool(residual <= tol))


def _gt(name, residual, tol):
    residual = float(residual)
    return Check(name, residual, tol, bool(residual > tol), ">")


def _geom(name, n, k):
    return make_geometry(name, n, k)


def kernels(seed=0):
    rng = random_source(seed)
    out = []
    worst = 0.0
    for _ in range(20):
        A = rng.standard_normal((4, 4)) * 0.5
        worst = max(worst, np.linalg.norm(nk.matrix_exp(A) - nk.series_exp(A, 40)))
    out.append(_le("matrix_exp vs power series", worst, nk.TOL.series * 10))
    worst = 0.0
    for _ in range(20):
        A = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
        worst = max(worst, np.linalg.norm(nk.matrix_exp(nk.matrix_log(A)) - A))
    out.append(_le("exp(log(A)) round trip", worst, nk.TOL.roundtrip))
    B = rng.standard_normal((5, 5))
    S = B @ B.T + np.eye(5)
    R = nk.spd_sqrt(S)
    out.append(_le("spd_sqrt squares back", np.linalg.norm(R @ R - S), nk.TOL.roundtrip))
    A = rng.standard_normal((6, 3))
    U, s, V = nk.thin_svd(A)
    out.append(_le("thin SVD reconstruction", np.linalg.norm(U * s @ V.T - A),
                   nk.TOL.decomposition))
    Q, Rq = nk.qr_thin(A)
    out.append(_le("thin QR reconstruction", np.linalg.norm(Q @ Rq - A), nk.TOL.decomposition))
    Q, P = nk.polar_decompose(B)
    out.append(_le("polar reconstruction", np.linalg.norm(Q @ P - B), nk.TOL.decomposition))
    return out


def manifolds(seed=0):
    rng = random_source(seed)
    out = []
    for name, n, k in SMALL_GEOMETRIES:
        geom = _geom(name, n, k)
        res = geom.klein_split().reductive_residuals()
        out.append(_le(f"{geom!r} [h,h] in h", res["hh_in_h"], 1e-10))
        out.append(_le(f"{geom!r} [h,m] in m", res["hm_in_m"], 1e-10))
        worst = 0.0
        for _ in range(20):
            p = geom.random_point(rng)
            w = random_tangent(geom, p, 1.0, rng)
            worst = max(worst, geom.check_membership(geom.exp_map(p, w)))
        out.append(_le(f"{geom!r} exp_map membership", worst, nk.TOL.membership))
    for name, n, k in (("grassmann", 5, 2), ("sphere", 4, None), ("spd", 3, None)):
        geom = _geom(name, n, k)
        res = geom.algebra_basis().reductive_residuals()
        out.append(_le(f"{geom!r} [m,m] in h (symmetric)", res["mm_in_h"], 1e-10))
    res = algebra_basis(_geom("stiefel", 5, 2)).reductive_residuals()
    out.append(_gt("Stiefel(5, 2) [m,m] leaves h (witness)", res["mm_in_h"], 1e-3))
    return out


def generators(seed=0, draws=2000):
    rng = random_source(seed)
    out = []
    violations = 0
    for name, n, k in SMALL_GEOMETRIES:
        geom = _geom(name, n, k)
        basis = geom.algebra_basis().m_basis
        for _ in range(draws // len(SMALL_GEOMETRIES)):
            mu = random_algebra_element(geom, rng, 1.5, basis)
            nrm = np.linalg.norm(mu)
            if geom.mover_distance(geom.mover_exp(mu)) > nrm * math.exp(nrm) * (1 + 1e-12):
                violations += 1
    out.append(_le("|exp(mu) - e| <= |mu| e^|mu| violations", violations, 0))
    t = solve_t_exp_t(0.5)
    out.append(_le("bisection t e^t = r", abs(t * math.exp(t) - 0.5), 1e-11))
    for r in (0.01, 0.1, 0.5):
        worst = 0.0
        for name, n, k in SMALL_GEOMETRIES:
            geom = _geom(name, n, k)
            cfg = GeneratorConfig(geom, min(1.0, geom.injectivity_radius))
            for _ in range(50):
                g = random_group_element(cfg, r, rng)
                worst = max(worst, geom.mover_distance(g) / r)
        out.append(Check(f"generator ball |g - e| / r < 1 at r={r}", worst, 1.0, worst < 1.0, "<"))
    so3 = _geom("so", 3, None)
    norms = [so3.norm(None, random_tangent(so3, so3.identity(), 1.0, rng)) for _ in range(500)]
    out.append(Check("random_tangent norms in (0, 1)", max(norms), 1.0,
                     bool(min(norms) > 0 and max(norms) < 1), "<"))
    return out


def solvers(seed=0):
    out = []
    A = np.diag(np.arange(1.0, 6.0))
    sphere = _geom("sphere", 5, None)
    x0 = np.ones(5) / math.sqrt(5)
    cfg = SolverConfig(max_evals=4000, seed=seed)
    _, tr = probabilistic_descent_algebra(sphere, lambda x: x @ A @ x, cfg, x0=x0)
    out.append(_le("algebra descent, sphere Rayleigh gap", tr.f_best - 1.0, 1e-4))
    out.append(_le("algebra descent trace monotone",
                   max(0.0, max(b.f_best - a.f_best for a, b in zip(tr, tr[1:]))), 0.0))
    CALL_COUNTS.clear()
    _, tr = probabilistic_descent_group(sphere, lambda x: x @ A @ x, cfg=cfg, x0=x0)
    out.append(_le("group descent, sphere Rayleigh gap", tr.f_best - 1.0, 1e-4))
    out.append(_le("group descent log_map/exp_map calls",
                   CALL_COUNTS["log_map"] + CALL_COUNTS["exp_map"], 0))
    trans = _geom("translation", 4, None)
    target = np.arange(1.0, 5.0) / 3
    _, tr = direct_search(trans, lambda x: float(np.sum((x - target) ** 2)),
                          cfg=SolverConfig(max_evals=20000))
    out.append(_le("direct search, translation quadratic gap", tr.f_best, 1e-6))
    out.append(_le("surjective geometry anchor moves", sum(r.moved for r in tr), 0))
    return out


def _nnls_brute(X, W):
    k = W.shape[1]
    H = np.zeros((k, X.shape[1]))
    for j, x in enumerate(X.T):
        best = (math.inf, None)
        for size in range(k + 1):
            for idx in itertools.combinations(range(k), size):
                h = np.zeros(k)
                if idx:
                    sol = np.linalg.lstsq(W[:, idx], x, rcond=None)[0]
                    if np.any(sol < 0):
                        continue
                    h[list(idx)] = sol
                val = np.sum((x - W @ h) ** 2)
                if val < best[0]:
                    best = (val, h)
        H[:, j] = best[1]
    return H


def seminmf(seed=0):
    rng = random_source(seed)
    out = []
    worst = 0.0
    for _ in range(50):
        W = rng.standard_normal((4, 2))
        X = rng.standard_normal((4, 3))
        worst = max(worst, np.max(np.abs(nnls(X, W)[0] - _nnls_brute(X, W))))
    out.append(_le("NNLS vs exhaustive active sets", worst, 1e-8))
    beta = 0.4
    pts = np.array([[math.cos(beta), math.sin(beta), 0.0],
                    [math.cos(beta), -math.sin(beta), 0.0]]).T
    out.append(_le("Karcher mean of two points is the midpoint",
                   np.linalg.norm(karcher_mean(pts) - np.array([1.0, 0.0, 0.0])), 1e-9))
    X, _, _ = synthetic_problem(8, 30, 2, math.pi / 4, seed)
    fac, tr = fit(X, SemiNmfConfig(k=2, i_max=60, seed=seed))
    errs = [r.eps_i for r in tr]
    out.append(_le("fit error non-increasing",
                   max(0.0, max(b - a for a, b in zip(errs, errs[1:]))), 0.0))
    out.append(_le("accepted W spread minus eps", max(0.0, fac.spread - math.pi / 4), 0.0))
    out.append(_le("min(H) violation", max(0.0, -float(fac.H.min())), 0.0))
    return out


def run(suite, seed=0):
    """Run one suite (or ``"all"``) and return its checks."""
    table = {"kernels": kernels, "manifolds": manifolds, "generators": generators,
             "solvers": solvers, "seminmf": seminmf}
    if suite == "all":
        return [c for name in SUITES for c in table[name](seed)]
    return table[suite](seed)
