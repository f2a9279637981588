import json
import math

import numpy as np
import pytest

from kleinopt import cli


def bench_args(*extra):
    return ["bench", *extra]


def read_results(out):
    with open(out / "results.json") as fh:
        return json.load(fh)


def test_bench_quadratic_translation_algebra(tmp_path, capsys):
    out = tmp_path / "q"
    code = cli.main(bench_args("--geometry", "translation", "--n", "5", "--objective", "quadratic",
                               "--algorithm", "algebra", "--max-evals", "20000",
                               "--out", str(out)))
    assert code == cli.EXIT_OK
    run = read_results(out)["runs"][0]
    assert run["oracle"] == 0.0
    assert run["gap"] <= 1e-6
    assert run["wall_clock_s"] is None
    assert (out / "trace_0.csv").read_text().splitlines()[0] == "k,evals,f_best,step,moved,ms"
    point = json.loads((out / "point_0.json").read_text())
    assert point["geometry"] == "translation" and point["shape"] == [5]
    assert "gap=" in capsys.readouterr().out


def test_bench_grassmann_rayleigh_oracle(tmp_path):
    out = tmp_path / "g"
    code = cli.main(bench_args("--geometry", "grassmann", "--n", "6", "--k", "2",
                               "--objective", "rayleigh", "--out", str(out)))
    assert code == cli.EXIT_OK
    run = read_results(out)["runs"][0]
    # diag(1..6): the two smallest eigenvalues sum to 3.
    assert run["oracle"] == 3.0
    assert 0 <= run["gap"] + 1e-9 and run["gap"] <= 1e-3


def test_bench_group_procrustes(tmp_path):
    out = tmp_path / "p"
    code = cli.main(bench_args("--geometry", "so", "--n", "3", "--objective", "procrustes",
                               "--algorithm", "group", "--out", str(out)))
    assert code == cli.EXIT_OK
    assert read_results(out)["runs"][0]["gap"] <= 1e-4


def test_procrustes_oracle_matches_independent_closed_form():
    from kleinopt import make_geometry
    from conftest import procrustes_oracle
    geom = make_geometry("so", 3)
    prob = cli.build_problem(geom, "procrustes", seed=5)
    rng = cli.random_source(5)
    B = rng.standard_normal((3, 6))
    A = geom.random_point(rng) @ B + 0.1 * rng.standard_normal((3, 6))
    _, opt = procrustes_oracle(A, B)
    assert prob.oracle == pytest.approx(opt, abs=1e-12)


def test_bench_outputs_are_byte_identical(tmp_path):
    args = ["--geometry", "sphere", "--n", "5", "--max-evals", "3000", "--replicates", "2",
            "--seed", "4"]
    for name in ("a", "b"):
        assert cli.main(bench_args(*args, "--out", str(tmp_path / name))) == cli.EXIT_OK
    for f in ("trace_0.csv", "trace_1.csv", "point_0.json", "point_1.json", "results.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    runs = read_results(tmp_path / "a")["runs"]
    assert [r["seed"] for r in runs] == [4, 5]


def test_bench_timing_flag_records_wall_clock(tmp_path):
    out = tmp_path / "t"
    cli.main(bench_args("--geometry", "sphere", "--n", "4", "--max-evals", "200", "--timing",
                        "--out", str(out)))
    assert read_results(out)["runs"][0]["wall_clock_s"] > 0


def test_bench_incompatible_spec_exits_config(capsys):
    code = cli.main(bench_args("--geometry", "so", "--n", "3", "--objective", "rayleigh"))
    assert code == cli.EXIT_CONFIG
    assert "not defined" in capsys.readouterr().err


def test_bench_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"geometry": "sphere", "n": 4, "max-evals": 500, "seed": 2}))
    out = tmp_path / "c"
    assert cli.main(bench_args("--config", str(cfg), "--seed", "9", "--out", str(out))) == 0
    spec = read_results(out)["spec"]
    assert spec["n"] == 4 and spec["max_evals"] == 500 and spec["seed"] == 9


def test_bench_config_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert cli.main(bench_args("--config", str(cfg))) == cli.EXIT_CONFIG


def test_bench_custom_matrix(tmp_path):
    A = np.diag([3.0, 1.0, 2.0, 5.0])
    path = tmp_path / "A.json"
    path.write_text(json.dumps(A.tolist()))
    out = tmp_path / "m"
    assert cli.main(bench_args("--geometry", "sphere", "--n", "4", "--objective", "custom",
                               "--matrix", str(path), "--out", str(out))) == 0
    run = read_results(out)["runs"][0]
    assert run["oracle"] == 1.0 and run["gap"] <= 1e-4


def test_bench_missing_matrix_file_exits_input(tmp_path):
    code = cli.main(bench_args("--geometry", "sphere", "--n", "4", "--objective", "custom",
                               "--matrix", str(tmp_path / "absent.csv")))
    assert code == cli.EXIT_INPUT


def test_seminmf_synthetic(tmp_path, capsys):
    out = tmp_path / "s"
    code = cli.main(["seminmf", "--synthetic", f"10,50,3,{math.pi / 4},1", "--out", str(out)])
    assert code == cli.EXIT_OK
    line = capsys.readouterr().out.strip().splitlines()[-1]
    rel = float(line.split("relative_fit=")[1])
    assert rel <= 0.05
    W = np.array(json.loads((out / "W.json").read_text()))
    H = np.array(json.loads((out / "H.json").read_text()))
    assert W.shape == (10, 3) and H.shape == (3, 50)
    np.testing.assert_allclose(np.linalg.norm(W, axis=0), 1.0, atol=1e-10)
    assert H.min() >= 0
    assert (out / "trace.csv").exists()


def test_seminmf_rank_one_is_monotone(tmp_path):
    rng = np.random.default_rng(3)
    X = np.abs(rng.standard_normal((4, 12))) + 0.1
    path = tmp_path / "X.csv"
    np.savetxt(path, X, delimiter=",")
    out = tmp_path / "r1"
    assert cli.main(["seminmf", "--input", str(path), "--k", "1", "--iters", "50",
                     "--out", str(out)]) == 0
    rows = (out / "trace.csv").read_text().splitlines()
    header = rows[0].split(",")
    col = header.index("eps_i")
    errs = [float(r.split(",")[col]) for r in rows[1:]]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_seminmf_malformed_csv_names_row(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,3\n4,5,6\n7,x,9\n")
    assert cli.main(["seminmf", "--input", str(path)]) == cli.EXIT_INPUT
    assert "row 3" in capsys.readouterr().err
    path.write_text("1,2,3\n4,5\n")
    assert cli.main(["seminmf", "--input", str(path)]) == cli.EXIT_INPUT
    assert "row 2" in capsys.readouterr().err


def test_seminmf_requires_data():
    assert cli.main(["seminmf"]) == cli.EXIT_CONFIG


def test_verify_manifolds_prints_residuals(capsys):
    assert cli.main(["verify", "manifolds"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "residual=" in out and "FAIL" not in out
    assert "Stiefel" in out and "witness" in out


def test_verify_all_exits_zero(capsys):
    assert cli.main(["verify"]) == cli.EXIT_OK
    assert capsys.readouterr().out.strip().endswith("checks passed")


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "kleinopt", "verify", "kernels"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS" in proc.stdout
