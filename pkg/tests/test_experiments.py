import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from newton_noda.cli import main
from newton_noda.experiments import (
    ExperimentConfig,
    build_problem,
    generate_a,
    run_experiment,
    run_gamma_sweep,
    run_table1,
    trace_to_csv,
)
from newton_noda.linalg import write_matrix_market
from newton_noda.nni import TRACE_COLUMNS, Status
from newton_noda.problem import build_laplacian_2d
from newton_noda.verify import validate_trace


def test_generate_a_deterministic():
    np.testing.assert_array_equal(generate_a(4, "ge1", 0), generate_a(4, "ge1", 0))
    assert not np.array_equal(generate_a(4, "ge1", 0), generate_a(4, "ge1", 1))


@pytest.mark.parametrize("seed", [0, 1, 2**64 - 1])
def test_generate_a_ranges(seed):
    a = generate_a(5000, "ge1", seed)
    assert a.min() >= 1 and a.max() < 2
    a = generate_a(5000, "unit_interval", seed)
    assert a.max() < 1 and a.min() >= 1e-3
    a = generate_a(5000, "positive", seed)
    assert a.min() >= 1e-3 and a.max() < 2 + 1e-3


def test_generate_a_modes():
    np.testing.assert_array_equal(generate_a(3, "unit-interval", 4), generate_a(3, "unit_interval", 4))
    with pytest.raises(ValueError):
        generate_a(3, "negative", 0)
    with pytest.raises(ValueError):
        generate_a(0, "ge1", 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(grid_dim=3)
    with pytest.raises(ValueError):
        ExperimentConfig(format="xml")
    with pytest.raises(ValueError):
        ExperimentConfig(a_seed=-1)
    assert ExperimentConfig(grid_dim=1, m=7).n == 7
    assert ExperimentConfig(grid_dim=2, m=7).n == 49


def test_build_problem_dimension():
    prob = build_problem(ExperimentConfig(grid_dim=1, m=30))
    assert prob.n == 30
    assert build_problem(ExperimentConfig(m=6)).n == 36


def test_run_experiment_figure1():
    res = run_experiment(ExperimentConfig())
    assert res.status is Status.CONVERGED
    assert 5 <= res.trace.iterations <= 15
    assert res.trace.records[-1].rel_residual <= 1e-12


def test_linear_case_matches_dense_eigensolver():
    for scale in (False, True):
        res = run_experiment(ExperimentConfig(m=2, gamma=0.0, scale_by_h2=scale))
        A = build_laplacian_2d(2, scale).toarray()
        assert res.lam == pytest.approx(np.linalg.eigvalsh(A)[0], abs=1e-10)


def test_oracle_check_attached():
    res = run_experiment(ExperimentConfig(m=5, oracle_check=True))
    assert res.oracle["bordered"]["passed"]
    assert res.oracle["fd_jacobian"]["passed"]
    big = run_experiment(ExperimentConfig(m=30, oracle_check=True))
    assert big.oracle == {}


def test_gamma_sweep():
    base = ExperimentConfig(m=12, a_mode="ge1")
    rows = run_gamma_sweep(base, [1, 10, 100, 1000])
    assert [r["gamma"] for r in rows] == [1, 10, 100, 1000]
    assert all(r["status"] == "converged" for r in rows)
    single = run_gamma_sweep(base, [10])[0]
    direct = run_experiment(base)
    assert single["iterations"] == direct.trace.iterations
    assert single["final_lambda"] == direct.lam
    with pytest.raises(ValueError):
        run_gamma_sweep(base, [])


def test_gamma_sweep_records_row_failure():
    rows = run_gamma_sweep(ExperimentConfig(m=5), [1.0, -1.0, 2.0])
    assert rows[0]["status"] == "converged" and rows[2]["status"] == "converged"
    assert rows[1]["status"].startswith("error")


def test_table1_small():
    rows = run_table1(seed=0, sides=(6, 8))
    assert [(r["n"], r["a_mode"]) for r in rows] == [
        (36, "ge1"), (64, "ge1"),
        (36, "unit_interval"), (64, "unit_interval"),
        (36, "positive"), (64, "positive"),
    ]
    assert all(r["status"] == "converged" and r["final_rel_residual"] <= 1e-12 for r in rows)


def test_csv_trace_format():
    res = run_experiment(ExperimentConfig(m=5))
    rows = list(csv.reader(trace_to_csv(res.trace).splitlines()))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert len(rows) == len(res.trace.records) + 1
    assert [int(r[0]) for r in rows[1:]] == list(range(len(rows) - 1))
    # last record has no step
    assert rows[-1][4] == "" and rows[-1][5] == ""
    assert float(rows[1][1]) == res.trace.records[0].lam


def test_cli_solve_csv(tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["solve", "--m", "10", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(TRACE_COLUMNS)


def test_cli_solve_json(tmp_path):
    out = tmp_path / "trace.json"
    code = main(["solve", "--m", "6", "--a-mode", "positive", "--format", "json",
                 "--oracle-check", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert set(doc) >= {"config", "records", "status", "wall_time_seconds", "oracle"}
    assert doc["status"] == "converged"
    assert list(doc["records"][0]) == list(TRACE_COLUMNS)
    assert doc["config"]["a_mode"] == "positive"
    assert doc["wall_time_seconds"] >= 0


def test_cli_rerun_byte_identical(tmp_path):
    for fmt, extra in (("csv", []), ("json", ["--no-wall-time"])):
        path = tmp_path / f"trace.{fmt}"
        argv = ["solve", "--m", "8", "--a-seed", "7", "--format", fmt, "--out", str(path)] + extra
        outputs = []
        for _ in range(2):
            assert main(argv) == 0
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]


def test_cli_exit_codes(tmp_path):
    assert main(["solve", "--m", "10", "--max-iter", "2", "--out", str(tmp_path / "x")]) == 2
    assert main(["solve", "--m", "1"]) == 5
    assert main(["solve", "--m", "4", "--out", str(tmp_path / "missing" / "x.csv")]) == 5
    with pytest.raises(SystemExit) as info:
        main(["solve", "--a-mode", "bogus"])
    assert info.value.code == 5


def test_cli_matrix_market_roundtrip(tmp_path):
    mtx = tmp_path / "A.mtx"
    out1, out2 = tmp_path / "one.csv", tmp_path / "two.csv"
    assert main(["solve", "--m", "5", "--export-matrix", str(mtx), "--out", str(out1)]) == 0
    assert mtx.read_text().startswith("%%MatrixMarket matrix coordinate real symmetric")
    assert main(["solve", "--m", "5", "--matrix", str(mtx), "--out", str(out2)]) == 0
    assert out1.read_text() == out2.read_text()


def test_cli_matrix_market_general(tmp_path):
    from newton_noda.verify import random_m_matrix

    mtx = tmp_path / "R.mtx"
    write_matrix_market(mtx, random_m_matrix(np.random.default_rng(3), 20))
    assert main(["solve", "--matrix", str(mtx), "--a-mode", "ge1", "--out", str(tmp_path / "r.csv")]) == 0


def test_cli_gamma_sweep_and_table(tmp_path, capsys):
    assert main(["gamma-sweep", "--m", "8", "--a-mode", "ge1", "--gammas", "1,1000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "gamma,iterations,final_lambda,final_rel_residual,status"
    assert len(lines) == 3
    out = tmp_path / "t.json"
    assert main(["table1", "--sides", "5,6", "--format", "json", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert len(rows) == 6 and all(r["status"] == "converged" for r in rows)


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "newton_noda", "solve", "--m", "4"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("k,lambda,")


def test_emitted_traces_validate():
    for mode in ("ge1", "unit_interval", "positive"):
        cfg = ExperimentConfig(m=12, a_mode=mode, a_seed=3)
        res = run_experiment(cfg)
        assert validate_trace(build_problem(cfg), res.trace).passed
