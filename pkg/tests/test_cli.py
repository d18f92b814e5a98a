import json

import pytest

from lll_lab.cli import main
from lll_lab.csp import load_instance

EDGE = '{"variables":[{"domain":["0","1"]},{"domain":["0","1"]}],"constraints":[{"scope":[0,1],"forbidden":[1,1]}]}'


@pytest.fixture
def edge_file(tmp_path):
    f = tmp_path / "edge.json"
    f.write_text(EDGE)
    return str(f)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_params(capsys, edge_file):
    code, out, _ = run(capsys, "params", "--instance", edge_file)
    rep = json.loads(out)
    assert code == 0 and rep["schema_version"] == 1
    assert rep["params"] == {"p": 0.25, "D": 0, "k": 2, "chi_min": 2.0, "chi_max": 2.0}
    assert rep["pd_exponent"] == pytest.approx(4.818842, abs=1e-6)


def test_malformed_file_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    code, _, err = run(capsys, "params", "--instance", str(bad))
    assert code == 2 and "error" in err
    code, _, _ = run(capsys, "params", "--instance", str(tmp_path / "missing.json"))
    assert code == 2


def test_influence_writes_csv_and_norms(capsys, edge_file, tmp_path):
    out = tmp_path / "m.csv"
    code, _, _ = run(capsys, "influence", "--instance", edge_file, "--out", str(out))
    assert code == 0
    assert out.read_text().splitlines()[0] == "u,0,1"
    norms = json.loads((tmp_path / "m.norms.json").read_text())
    assert norms["inf_norm"] == 0.5 and norms["one_norm"] == 0.5


def test_couple_exact_and_montecarlo(capsys, edge_file, tmp_path):
    code, out, _ = run(capsys, "couple", "--instance", edge_file, "--u", "0", "--i", "1", "--j", "0", "--rational")
    rep = json.loads(out)
    assert code == 0
    assert rep["expected_hamming"] == {"value": 0.5, "exact": "1/2"}
    assert rep["bound_rhs"] == pytest.approx(0.25)
    assert rep["coupling_condition"]["satisfied"] is False
    assert rep["marginal_tv_sum"] == pytest.approx(0.5)
    trace = tmp_path / "t.jsonl"
    code, out, _ = run(capsys, "couple", "--instance", edge_file, "--u", "0", "--i", "1", "--j", "0",
                       "--mode", "montecarlo", "--trials", "100000", "--seed", "4", "--trace", str(trace))
    rep = json.loads(out)
    assert abs(rep["expected_hamming"] - 0.5) <= rep["half_width"]
    assert json.loads(trace.read_text().splitlines()[0])["level"] == 0


def test_couple_errors(capsys, edge_file):
    single = '{"variables":[{"domain":["0","1"]}],"constraints":[{"scope":[0],"forbidden":[1]}]}'
    assert run(capsys, "couple", "--instance", edge_file, "--u", "5", "--i", "0", "--j", "1")[0] == 2
    assert run(capsys, "couple", "--instance", edge_file, "--u", "0", "--i", "0", "--j", "1",
               "--mode", "montecarlo", "--trials", "0")[0] == 2
    assert run(capsys, "couple", "--instance", edge_file, "--u", "0", "--i", "0", "--j", "1",
               "--mode", "montecarlo", "--trials", "100", "--max-trials", "10")[0] == 2
    import pathlib
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        f = pathlib.Path(d) / "s.json"
        f.write_text(single)
        code, _, err = run(capsys, "couple", "--instance", str(f), "--u", "0", "--i", "0", "--j", "1")
        assert code == 2 and "zero probability" in err


def test_gen_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for f in (a, b):
        assert run(capsys, "gen", "--family", "uniform-atomic", "--n", "8", "--q", "2", "--k", "3", "--m", "5",
                   "--seed", "1", "--out", str(f))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    csp = load_instance(a)
    assert csp.n == 8 and len(csp.constraints) == 5
    assert run(capsys, "gen", "--family", "uniform-atomic", "--n", "8")[0] == 2


def test_gen_hardcore_tree(capsys):
    code, out, _ = run(capsys, "gen", "--family", "hardcore-tree", "--delta", "3", "--levels", "3", "--lambda", "6")
    desc = json.loads(out)
    assert code == 0 and len(desc["variables"]) == 10 and len(desc["constraints"]) == 9


def test_hardcore_command(capsys):
    code, out, _ = run(capsys, "hardcore", "--delta", "3", "--lambda", "6", "--levels", "2", "3")
    rep = json.loads(out)
    assert code == 0
    assert rep["lambda_c"] == pytest.approx(4.0)
    assert rep["r_star"] == pytest.approx(1.2187766, abs=1e-7)
    for row in rep["levels"]:
        assert row["inf_norm"] >= row["lower_bound"] - 1e-10
    code, out, _ = run(capsys, "hardcore", "--p", str(36 / 49), "--D", "4")
    assert json.loads(out)["construction"]["above_threshold"] is True
    assert run(capsys, "hardcore", "--p", "0.5")[0] == 2


def test_verify_negative_control(capsys, edge_file):
    assert run(capsys, "verify", "--instance", edge_file)[0] == 0
    code, out, _ = run(capsys, "verify", "--instance", edge_file, "--corrupt-log")
    rep = json.loads(out)
    assert code == 1 and not rep["passed"]
    assert rep["checks"]["coupling.log-facts"]["failed"] == 1


def test_verify_hardcore_sweep(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "hardcore")
    rep = json.loads(out)
    assert code == 0
    assert {(r["lambda"], r["levels"]) for r in rep["hardcore"]} == {(l, n) for l in (5, 6, 8) for n in (2, 3)}


def test_verify_identical_across_thread_counts(capsys, tmp_path, monkeypatch):
    outs = []
    for threads in ("1", "2"):
        monkeypatch.setenv("LLL_LAB_THREADS", threads)
        f = tmp_path / f"r{threads}.json"
        assert run(capsys, "verify", "--count", "4", "--seed", "3", "--out", str(f))[0] == 0
        outs.append(f.read_bytes())
    assert outs[0] == outs[1]
