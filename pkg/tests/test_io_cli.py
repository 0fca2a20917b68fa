import csv
import io
import json
import math
import subprocess
import sys

import pytest

from ccmatch import InstanceError, Status, solve
from ccmatch.cli import main
from ccmatch.io import (age_group, dumps_instance, fmt, group_loads_csv, ingest_movielens,
                        instance_from_json, instance_to_json, loads_csv, loads_instance,
                        matching_solution, neighborhood_csv, read_movielens, rows_csv,
                        run_experiment, solution_csv, solution_from_json, solution_to_json,
                        variance_csv, write_report)
from ccmatch.solver import verify_solution
from support import nested_instance, small_instances


def test_instance_json_roundtrip():
    for inst in small_instances(20, seed=70, cost_kinds=("quadratic", "piecewise", "table", "nsw")):
        again = loads_instance(dumps_instance(inst))
        assert instance_to_json(again) == instance_to_json(inst)
        assert again.edges == inst.edges and again.utilities == inst.utilities
        assert again.platform_tables == inst.platform_tables
        assert again.group_tables == inst.group_tables


def test_documented_example_parses():
    text = json.dumps({
        "n": 3, "m": 2, "ell": 4,
        "edges": [[0, 0, 5], [1, 0, 3], [2, 1, 4]],
        "groups": {"structure": "disjoint", "sets": [[0, 1], [2]]},
        "costs": {"platform_defaults": {"platform": {"preset": "quadratic"},
                                        "group": {"preset": "quadratic"}},
                  "per_platform": {"1": {"table": [0, 2, 5]}},
                  "per_group_per_platform": [{"platform": 0, "group": 0, "cost": {"preset": "zero"}}]}})
    inst = loads_instance(text)
    assert inst.n == 3 and inst.ell == 4
    assert inst.platform_tables[1].values == (0.0, 2.0)
    assert inst.family.kind == "disjoint"


def test_bad_json_reports_position():
    with pytest.raises(InstanceError) as err:
        loads_instance('{"n": 3,\n "m": }')
    assert "line 2" in str(err.value)
    with pytest.raises(InstanceError):
        instance_from_json({"n": 1})


def test_solution_json_roundtrip():
    for inst in small_instances(10, seed=71):
        sol = solve(inst)
        back = solution_from_json(json.loads(json.dumps(solution_to_json(sol))))
        assert back.matching == sol.matching and back.status is sol.status
        assert back.cost == pytest.approx(sol.cost)
        assert verify_solution(inst, back).failures() == verify_solution(inst, sol).failures()


def test_solution_csv_roundtrip():
    inst = nested_instance(3.0)
    sol = solve(inst)
    (row,) = csv.DictReader(io.StringIO(solution_csv(sol, "solve")))
    assert row["status"] == sol.status.value
    assert float(row["cost"]) == pytest.approx(sol.cost, rel=1e-6)
    assert float(row["lp_lower_bound"]) == pytest.approx(sol.lp_lower_bound, rel=1e-6)
    assert int(row["matched"]) == len(sol.matching)
    base = matching_solution(inst, {0: 0, 1: 0, 2: 0})
    (row,) = csv.DictReader(io.StringIO(solution_csv(base, "greedy")))
    assert row["lp_lower_bound"] == "" and row["status"] == Status.HEURISTIC.value


def test_fmt():
    assert fmt(None) == "" and fmt(3) == "3" and fmt(1 / 3) == "0.333333" and fmt(float("nan")) == "nan"


def test_age_groups():
    assert [age_group(a) for a in (7, 14, 15, 29, 30, 44, 45, 59, 60, 74, 75, 90)] == \
        [4, 4, 0, 0, 1, 1, 2, 2, 3, 3, 3, 3]


@pytest.fixture
def ml_dir(tmp_path):
    ratings = [(1, 10, 5), (1, 20, 3), (2, 10, 4), (3, 20, 2), (3, 30, 5), (4, 30, 1), (5, 40, 4),
               (6, 10, 1), (2, 30, 3)]
    (tmp_path / "u.data").write_text(
        "".join(f"{u}\t{m}\t{r}\t88125000\n" for u, m, r in ratings) + "garbage line\n")
    ages = {1: 12, 2: 25, 3: 40, 4: 80, 5: 33, 6: 61}
    (tmp_path / "u.user").write_text(
        "".join(f"{u}|{a}|M|other|00000\n" for u, a in ages.items()))
    return tmp_path


def test_read_movielens(ml_dir):
    data = read_movielens(ml_dir / "u.data", ml_dir / "u.user")
    assert len(data.ratings) == 9 and data.skipped_ratings == 1
    assert data.ages[4] == 80


def test_ingest_movielens(ml_dir):
    inst = ingest_movielens(ml_dir / "u.data", ml_dir / "u.user", top_k=3)
    # movies 10 and 30 have 3 ratings, 20 has 2; movie 40 is dropped with user 5
    assert inst.m == 3 and inst.n == 5 and len(inst.edges) == 8
    assert sorted(inst.utilities) == [1, 1, 2, 3, 3, 4, 5, 5]
    assert inst.family.kind == "disjoint"
    # groups over retained users: under-15, 15-29, 30-44, 60+ (80 and 61)
    assert sorted(len(g) for g in inst.groups) == [1, 1, 1, 2]
    nsw = ingest_movielens(ml_dir / "u.data", ml_dir / "u.user", top_k=3, cost="nsw")
    assert nsw.platform_tables[0].values[1] == pytest.approx(-math.log(2) / 3)


def test_experiment_invariants(ml_dir, tmp_path):
    inst = ingest_movielens(ml_dir / "u.data", ml_dir / "u.user", top_k=3)
    rep = run_experiment(inst, [0, 6, 12, 100])
    assert [r.threshold for r in rep.rows] == [0, 6, 12, 100]
    for r in rep.rows[:3]:
        assert r.lp_lower_bound <= r.alg_cost + 1e-9
        assert r.alg_cost <= r.lp_lower_bound + r.additive_bound + 1e-9
    assert rep.rows[-1].status == "Infeasible" and "solve" in rep.rows[-1].error
    for t, alg, var in rep.variance():
        assert var >= 0
    for _, p, j, nu, share in rep.group_loads:
        assert 0 < share <= 1
    paths = write_report(rep, tmp_path / "out")
    assert {p.name for p in paths} == {"rows.csv", "loads.csv", "variance.csv", "group_loads.csv",
                                       "neighborhood.csv"}
    rows = list(csv.DictReader(io.StringIO(rows_csv(rep))))
    assert [float(r["threshold"]) for r in rows] == [0, 6, 12, 100]
    assert float(rows[1]["alg_cost"]) == pytest.approx(rep.rows[1].alg_cost, rel=1e-6)
    assert len(list(csv.reader(io.StringIO(variance_csv(rep))))) == 1 + len(rep.variance())


# -- command line ----------------------------------------------------------------

def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_gen_solve_verify(tmp_path, capsys):
    inst_path, sol_path = tmp_path / "inst.json", tmp_path / "sol.json"
    code, _, _ = run_cli(capsys, "gen", "random", "--seed", "3", "--n", "6", "--structure", "laminar",
                         "--depth", "3", "--out", str(inst_path))
    assert code == 0
    code, _, _ = run_cli(capsys, "solve", str(inst_path), "--out", str(sol_path))
    assert code == 0
    code, out, _ = run_cli(capsys, "verify", str(inst_path), str(sol_path))
    assert out.startswith("OK gap=")
    for cmd in ("greedy", "naive", "oracle"):
        code, out, _ = run_cli(capsys, cmd, str(inst_path))
        assert code in (0, 2)
        if code == 0:
            assert json.loads(out)["algorithm"] == cmd
    code, out, _ = run_cli(capsys, "solve", str(inst_path), "--format", "csv")
    assert out.splitlines()[0].startswith("algorithm,status,cost")
    code, out, _ = run_cli(capsys, "network", str(inst_path))
    assert code == 0 and out.startswith("s i0 ")


def test_cli_exit_codes(tmp_path, capsys):
    path = tmp_path / "inst.json"
    run_cli(capsys, "gen", "random", "--ell", "999", "--out", str(path))
    assert run_cli(capsys, "solve", str(path))[0] == 2
    # crossing edge groups: the solver refuses general families
    run_cli(capsys, "gen", "indset", "--vertices", "4", "--graph", "complete", "--out", str(path))
    code, _, err = run_cli(capsys, "solve", str(path))
    assert code == 1 and "laminar" in err
    path.write_text("{not json")
    code, _, err = run_cli(capsys, "solve", str(path))
    assert code == 1 and "line 1" in err
    assert run_cli(capsys, "solve", str(tmp_path / "missing.json"))[0] == 1
    with pytest.raises(SystemExit) as ex:
        main(["bogus"])
    assert ex.value.code == 1


def test_cli_uniform_and_verify_failure(tmp_path, capsys):
    path = tmp_path / "u.json"
    run_cli(capsys, "gen", "random", "--uniform", "--umin", "2", "--seed", "5", "--out", str(path))
    code, out, _ = run_cli(capsys, "uniform", str(path))
    assert code == 0
    sol = json.loads(out)
    sol["cost"] += 5
    (tmp_path / "bad.json").write_text(json.dumps(sol))
    code, out, _ = run_cli(capsys, "verify", str(path), str(tmp_path / "bad.json"))
    assert code == 1 and "FAIL cost" in out


def test_cli_movielens_experiment(ml_dir, tmp_path, capsys):
    inst = tmp_path / "ml.json"
    code, _, _ = run_cli(capsys, "movielens", "--data", str(ml_dir / "u.data"), "--users",
                         str(ml_dir / "u.user"), "--top-k", "3", "--out", str(inst))
    assert code == 0
    code, out, _ = run_cli(capsys, "experiment", str(inst), "--thresholds", "4,8",
                           "--out-dir", str(tmp_path / "rep"))
    assert code == 0 and out.startswith("threshold,naive_cost")
    assert (tmp_path / "rep" / "loads.csv").exists()


def test_cli_deterministic_subprocess(tmp_path):
    cmd = [sys.executable, "-m", "ccmatch.cli", "gen", "random", "--seed", "8", "--costs", "table"]
    a = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    assert a == b
    solved = subprocess.run([sys.executable, "-m", "ccmatch.cli", "solve", "-"], input=a,
                            capture_output=True, text=True)
    assert solved.returncode == 0 and json.loads(solved.stdout)["status"] in ("ExactIntegral", "Rounded")


def test_csv_byte_deterministic(ml_dir):
    inst = ingest_movielens(ml_dir / "u.data", ml_dir / "u.user", top_k=3)
    runs = []
    for _ in range(2):
        text = rows_csv(run_experiment(inst, [3, 9]))
        # runtimes differ between runs; every other field must match byte for byte
        runs.append([{k: v for k, v in row.items() if not k.endswith("runtime_s")}
                     for row in csv.DictReader(io.StringIO(text))])
    assert runs[0] == runs[1]


def test_loads_csv_deterministic(ml_dir):
    inst = ingest_movielens(ml_dir / "u.data", ml_dir / "u.user", top_k=3)
    a, b = run_experiment(inst, [3, 9]), run_experiment(inst, [3, 9])
    for fn in (loads_csv, group_loads_csv, neighborhood_csv, variance_csv):
        assert fn(a) == fn(b)
