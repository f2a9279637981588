"""Command-line harness: ``kleinopt bench | seminmf | verify``.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 config error.
"""

import argparse
import csv
from dataclasses import asdict, dataclass
import json
import math
import os
import sys
import time

import numpy as np

from . import verify as verify_mod
from .errors import ConfigError
from .manifolds import make_geometry
from .randgen import GeneratorConfig, random_source
from .seminmf import SemiNmfConfig, fit, synthetic_problem
from .solvers import (CoordinateSearch, SolverConfig, direct_search,
                      probabilistic_descent_algebra, probabilistic_descent_group)

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2, 3

OBJECTIVES = ("rayleigh", "procrustes", "nearest_spd", "quadratic", "custom")
ALGORITHMS = ("algebra", "group", "wrapper")
COMPATIBLE = {
    "rayleigh": ("grassmann", "stiefel", "sphere"),
    "procrustes": ("so",),
    "nearest_spd": ("spd",),
    "quadratic": ("translation",),
}
# ``custom`` takes its matrix from --matrix and picks the objective family
# from the geometry.
CUSTOM_FAMILY = {g: obj for obj, gs in COMPATIBLE.items() for g in gs}

BENCH_DEFAULTS = {
    "geometry": "sphere", "n": 8, "k": None, "objective": "rayleigh", "algorithm": "algebra",
    "seed": 0, "max_evals": 20000, "s_fix": None, "s_max": None, "radius_cap": None,
    "replicates": 1, "out": None, "matrix": None, "timing": False,
}
SEMINMF_DEFAULTS = {
    "input": None, "synthetic": None, "k": 3, "eps": math.pi / 4, "iters": 500, "seed": 0,
    "out": None,
}


class InputError(Exception):
    """Unreadable or malformed input file (exit code 2)."""


# ---------------------------------------------------------------------------
# Configuration plumbing
# ---------------------------------------------------------------------------

def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a flat JSON object")
    return {key.replace("-", "_"): value for key, value in data.items()}


def _merge(defaults, args):
    """defaults < config file < explicit command-line flags."""
    merged = dict(defaults)
    file_values = _load_config(getattr(args, "config", None))
    unknown = set(file_values) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    merged.update(file_values)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            merged[key] = value
    return merged


def read_matrix(path):
    """Read a matrix from ``.json`` (array of arrays), ``.npy`` or CSV."""
    if not os.path.exists(path):
        raise InputError(f"no such file: {path}")
    if path.endswith(".json"):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
        if isinstance(data, dict):
            data = data.get("matrix", data.get("point"))
        try:
            M = np.array(data, dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}: not a numeric matrix") from exc
    elif path.endswith(".npy"):
        M = np.load(path)
    else:
        M = _read_csv(path)
    if M.ndim not in (1, 2) or M.size == 0 or not np.all(np.isfinite(M)):
        raise InputError(f"{path}: expected a finite, non-empty matrix")
    return M


def _read_csv(path):
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise InputError(f"{path}: row {lineno}: non-numeric entry") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InputError(
                    f"{path}: row {lineno}: expected {width} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: empty file")
    return np.array(rows)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _matrix_json(M):
    return np.asarray(M, dtype=float).tolist()


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------

@dataclass
class Problem:
    objective: object
    oracle: float
    start: np.ndarray


@dataclass
class RunResult:
    replicate: int
    seed: int
    best: float
    oracle: float
    gap: float
    evals: int
    wall_clock_s: float = None


def build_problem(geom, objective, seed, matrix=None):
    """Objective, analytic optimum and a seeded start point."""
    rng = random_source(seed)
    name = geom.name
    if objective == "custom":
        if matrix is None:
            raise ConfigError("objective 'custom' needs --matrix")
        objective = CUSTOM_FAMILY.get(name)
    if objective not in COMPATIBLE or name not in COMPATIBLE[objective]:
        raise ConfigError(f"objective {objective!r} is not defined on geometry {name!r}")
    n = geom.n

    if objective == "rayleigh":
        A = np.diag(np.arange(1.0, n + 1)) if matrix is None else np.asarray(matrix, float)
        if A.shape != (n, n) or np.linalg.norm(A - A.T) > 1e-12 * max(1, np.linalg.norm(A)):
            raise ConfigError("rayleigh needs a symmetric n x n matrix")
        k = getattr(geom, "k", 1)
        oracle = float(np.sum(np.linalg.eigvalsh(A)[:k]))
        if name == "sphere":
            func = lambda x: float(x @ A @ x)
        else:
            func = lambda p: float(np.trace(p.T @ A @ p))
    elif objective == "procrustes":
        if matrix is None:
            B = rng.standard_normal((n, 2 * n))
            A = geom.random_point(rng) @ B + 0.1 * rng.standard_normal((n, 2 * n))
        else:
            M = np.asarray(matrix, float)
            if M.ndim != 2 or M.shape[0] != 2 * n:
                raise ConfigError("procrustes --matrix must stack A over B (2n rows)")
            A, B = M[:n], M[n:]
        U, _, Vt = np.linalg.svd(A @ B.T)
        D = np.eye(n)
        D[-1, -1] = np.sign(np.linalg.det(U @ Vt))
        Q = U @ D @ Vt
        oracle = float(np.linalg.norm(A - Q @ B) ** 2)
        func = lambda Q: float(np.linalg.norm(A - Q @ B) ** 2)
    elif objective == "nearest_spd":
        if matrix is None:
            T = geom.random_point(rng)
        else:
            T = np.asarray(matrix, float)
            if geom.check_membership(T) > 1e-8:
                raise ConfigError("nearest_spd target must be symmetric positive definite")
        oracle = 0.0
        func = lambda S: float(np.linalg.norm(S - T) ** 2)
    else:
        target = rng.uniform(-1, 1, n) if matrix is None else np.asarray(matrix, float).ravel()
        if target.shape != (n,):
            raise ConfigError("quadratic --matrix must hold n numbers")
        oracle = 0.0
        func = lambda x: float(np.sum((x - target) ** 2))
    start = geom.random_point(rng)
    return Problem(func, oracle, start)


def _solver_config(spec, geom, seed):
    values = {"seed": seed, "max_evals": int(spec["max_evals"])}
    rho = geom.injectivity_radius
    s_max = spec["s_max"]
    if s_max is None:
        s_max = 0.5 if math.isinf(rho) else min(0.5, 0.45 * rho)
    s_fix = spec["s_fix"] if spec["s_fix"] is not None else s_max / 2
    values.update(s_max=float(s_max), s_fix=float(s_fix))
    if spec["radius_cap"] is not None:
        values["R"] = float(spec["radius_cap"])
    elif math.isfinite(rho):
        values["R"] = min(1.0, rho)
    return SolverConfig(**values)


def run_benchmark(spec, out_dir=None, log=print):
    """Run every replicate of `spec`; returns the list of :class:`RunResult`."""
    if spec["algorithm"] not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {spec['algorithm']!r}")
    if spec["objective"] not in OBJECTIVES:
        raise ConfigError(f"unknown objective {spec['objective']!r}")
    try:
        geom = make_geometry(spec["geometry"], int(spec["n"]), spec["k"])
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    matrix = read_matrix(spec["matrix"]) if spec["matrix"] else None
    base_seed = int(spec["seed"])
    problem = build_problem(geom, spec["objective"], base_seed, matrix)
    if int(spec["replicates"]) < 1:
        raise ConfigError("replicates must be positive")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    results = []
    for i in range(int(spec["replicates"])):
        seed = base_seed + i
        cfg = _solver_config(spec, geom, seed)
        t0 = time.perf_counter()
        if spec["algorithm"] == "algebra":
            point, trace = probabilistic_descent_algebra(geom, problem.objective, cfg,
                                                         x0=problem.start)
        elif spec["algorithm"] == "group":
            point, trace = probabilistic_descent_group(geom, problem.objective,
                                                       GeneratorConfig(geom, cfg.R), cfg,
                                                       x0=problem.start)
        else:
            point, trace = direct_search(geom, problem.objective, CoordinateSearch(), cfg,
                                         x0=problem.start)
        elapsed = time.perf_counter() - t0
        best = float(trace.f_best)
        res = RunResult(i, seed, best, problem.oracle, best - problem.oracle, trace.evals,
                        elapsed if spec["timing"] else None)
        results.append(res)
        log(f"replicate {i} seed {seed}: best={best:.12g} oracle={problem.oracle:.12g} "
            f"gap={res.gap:.3e} evals={res.evals}")
        if out_dir:
            trace.to_csv(os.path.join(out_dir, f"trace_{i}.csv"), timing=spec["timing"])
            _write_json(os.path.join(out_dir, f"point_{i}.json"), {
                "geometry": geom.name, "n": geom.n, "k": getattr(geom, "k", None),
                "shape": list(np.shape(point)), "point": _matrix_json(point)})
    if out_dir:
        meta = {key: spec[key] for key in ("geometry", "n", "k", "objective", "algorithm",
                                           "seed", "max_evals", "replicates")}
        _write_json(os.path.join(out_dir, "results.json"),
                    {"spec": meta, "runs": [asdict(r) for r in results]})
    return results


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_bench(args):
    spec = _merge(BENCH_DEFAULTS, args)
    results = run_benchmark(spec, spec["out"])
    bad = [r for r in results if r.gap < -1e-9]
    if bad:
        print(f"error: {len(bad)} run(s) beat the analytic optimum", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _parse_synthetic(text):
    parts = str(text).split(",")
    if len(parts) != 5:
        raise ConfigError("--synthetic expects n,m,k,eps,seed")
    try:
        n, m, k = (int(p) for p in parts[:3])
        eps, seed = float(parts[3]), int(parts[4])
    except ValueError as exc:
        raise ConfigError(f"--synthetic: {exc}") from exc
    return n, m, k, eps, seed


def cmd_seminmf(args):
    spec = _merge(SEMINMF_DEFAULTS, args)
    k, eps = int(spec["k"]), float(spec["eps"])
    if spec["synthetic"]:
        n, m, k, eps, gen_seed = _parse_synthetic(spec["synthetic"])
        X, _, _ = synthetic_problem(n, m, k, eps, gen_seed)
    elif spec["input"]:
        X = read_matrix(spec["input"])
        if X.ndim != 2:
            raise InputError("X must be a matrix")
    else:
        raise ConfigError("give --input FILE or --synthetic n,m,k,eps,seed")
    cfg = SemiNmfConfig(k=k, eps=eps, i_max=int(spec["iters"]), seed=int(spec["seed"]))
    fac, trace = fit(X, cfg)
    rel = float(np.linalg.norm(X - fac.W @ fac.H) / np.linalg.norm(X))
    print(f"final eps_i={fac.error:.12g} S(W)={fac.spread:.12g} relative_fit={rel:.6g}")
    out = spec["out"]
    if out:
        os.makedirs(out, exist_ok=True)
        _write_json(os.path.join(out, "W.json"), _matrix_json(fac.W))
        _write_json(os.path.join(out, "H.json"), _matrix_json(fac.H))
        trace.to_csv(os.path.join(out, "trace.csv"))
    return EXIT_OK


def cmd_verify(args):
    checks = verify_mod.run(args.suite, seed=args.seed or 0)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="kleinopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a benchmark problem")
    b.add_argument("--geometry")
    b.add_argument("--n", type=int)
    b.add_argument("--k", type=int)
    b.add_argument("--objective", choices=OBJECTIVES)
    b.add_argument("--algorithm", choices=ALGORITHMS)
    b.add_argument("--matrix", help="problem data (.json, .npy or CSV)")
    b.add_argument("--seed", type=int)
    b.add_argument("--max-evals", dest="max_evals", type=int)
    b.add_argument("--s-fix", dest="s_fix", type=float)
    b.add_argument("--s-max", dest="s_max", type=float)
    b.add_argument("--radius-cap", dest="radius_cap", type=float)
    b.add_argument("--replicates", type=int)
    b.add_argument("--out", help="output directory")
    b.add_argument("--config", help="JSON file with flat keys mirroring the flags")
    b.add_argument("--timing", action="store_true", help="record wall-clock times")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("seminmf", help="fit a sphere-constrained semi-NMF")
    s.add_argument("--input", help="X as CSV (rows = dimensions) or JSON matrix")
    s.add_argument("--synthetic", help="n,m,k,eps,seed")
    s.add_argument("--k", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--iters", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")
    s.add_argument("--config")
    s.set_defaults(func=cmd_seminmf)

    v = sub.add_parser("verify", help="run property and oracle checks")
    v.add_argument("suite", nargs="?", default="all", choices=verify_mod.SUITES + ("all",))
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
