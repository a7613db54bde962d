import csv
import io
import json

import pytest

from suu.cli import (EXIT_INCOMPATIBLE, EXIT_LIMITS, EXIT_OK, EXIT_USAGE, REPORT_COLUMNS, compare_rows,
                     main)
from suu.model import Instance, generate_random_instance, read_instance, write_instance
from suu.simulator import ESTIMATE_COLUMNS


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def random_file(tmp_path, capsys):
    path = tmp_path / "a.json"
    assert _run(capsys, "gen", "--random", "-n", 8, "-m", 4, "--seed", 1, "-o", path)[0] == EXIT_OK
    return path


def test_gen_random(random_file, capsys):
    inst = read_instance(random_file)
    assert (inst.n, inst.m) == (8, 4)
    code, out, _ = _run(capsys, "gen", "--random", "-n", 8, "-m", 4, "--seed", 1)
    assert code == EXIT_OK and "valid" in out and inst.instance_id() in out


def test_gen_lr_hard(tmp_path, capsys):
    path = tmp_path / "h.json"
    assert _run(capsys, "gen", "--lr-hard", "-n", 16, "-m", 4, "-o", path)[0] == EXIT_OK
    inst = read_instance(path)
    assert (inst.n, inst.m) == (16, 4)


def test_gen_chains(tmp_path, capsys):
    path = tmp_path / "c.json"
    assert _run(capsys, "gen", "--chains", "3x4", "-m", 2, "--seed", 5, "-o", path)[0] == EXIT_OK
    chains = read_instance(path).precedence.chains
    assert len(chains) == 3 and all(len(c) == 4 for c in chains)


@pytest.mark.parametrize("argv", [
    ["gen", "--random", "-n", "4", "-m", "2"],               # no seed
    ["gen", "--chains", "3by4", "-m", "2", "--seed", "1"],
    ["gen", "--random", "-m", "2", "--seed", "1"],
    ["gen", "--random", "-n", "4", "-m", "2", "--seed", "1", "--q-low", "0.9", "--q-high", "0.1"],
])
def test_gen_usage_errors(argv, capsys):
    assert _run(capsys, *argv)[0] == EXIT_USAGE


def test_run_outputs(random_file, tmp_path, capsys):
    code, out, _ = _run(capsys, "run", "--policy", "sem", "--trials", 1000, "--seed", 9, random_file)
    assert code == EXIT_OK
    (row,) = _rows(out)
    assert list(row) == ESTIMATE_COLUMNS
    assert int(row["trials"]) == 1000 and float(row["mean"]) > 0 and float(row["stderr"]) > 0

    out_dir = tmp_path / "run"
    _run(capsys, "run", "--policy", "sem", "--trials", 200, "--seed", 9, "--out", out_dir, random_file)
    lines = (out_dir / "trace.jsonl").read_text().splitlines()
    assert lines and all(set(json.loads(l)) == {"t", "assign", "completed"} for l in lines)
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["seed"] == 9 and summary["trial0"]["makespan"] == len(lines)


def test_run_is_reproducible(random_file, tmp_path, capsys):
    files = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        _run(capsys, "run", "--policy", "greedy", "--trials", 50, "--seed", 3, "--out", d, random_file)
        files.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert files[0] == files[1]


def test_run_incompatible(random_file, capsys):
    code, _, err = _run(capsys, "run", "--policy", "chains", "--seed", 1, random_file)
    assert code == EXIT_INCOMPATIBLE
    assert "chains" in err and "independent" in err


def test_run_errors(tmp_path, capsys):
    assert _run(capsys, "run", "--policy", "sem", "--seed", 1, tmp_path / "missing.json")[0] == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run(capsys, "run", "--policy", "sem", "--seed", 1, bad)[0] == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["run", "--policy", "nope", "--seed", "1", str(bad)])
    assert exc.value.code == EXIT_USAGE


def test_oracle_command(tmp_path, capsys):
    path = tmp_path / "one.json"
    write_instance(Instance([[0.5]]), path)
    table = tmp_path / "table.json"
    code, out, _ = _run(capsys, "oracle", path, "--out", table)
    assert code == EXIT_OK and out.strip() == "2"
    assert json.loads(table.read_text())["values"]["1"] == pytest.approx(2.0)

    big = tmp_path / "five.json"
    write_instance(generate_random_instance(5, 2, seed=0), big)
    code, _, err = _run(capsys, "oracle", big)
    assert code == EXIT_LIMITS and "--n-max" in err
    assert _run(capsys, "oracle", big, "--n-max", 5)[0] == EXIT_OK


def test_compare_against_oracle(tmp_path, capsys):
    path = tmp_path / "tiny.json"
    write_instance(generate_random_instance(3, 2, seed=4), path)
    code, out, _ = _run(capsys, "compare", "--policies", "obl,sem,greedy", "--oracle", "--trials", 3000,
                        "--seed", 2, path)
    assert code == EXIT_OK
    rows = _rows(out)
    assert list(rows[0]) == REPORT_COLUMNS and len(rows) == 3
    for r in rows:
        oracle, se = float(r["oracle"]), float(r["stderr"])
        assert float(r["ratio_oracle"]) >= 1 - 3 * se / oracle
        assert float(r["ratio_lp"]) >= 1 - 3 * se / float(r["lp_lower"])
        assert float(r["ratio_offline"]) >= 1


def test_compare_sem_beats_obl_mostly():
    wins = 0
    for s in range(50):
        inst = generate_random_instance(12, 4, seed=s)
        obl, sem = compare_rows(inst, ["obl", "sem"], 300, s, offline_trials=1)
        wins += sem["mean"] <= obl["mean"]
    assert wins >= 40


def test_compare_is_paired():
    inst = generate_random_instance(6, 3, seed=1)
    a = compare_rows(inst, ["sem", "sem"], 200, 7, offline_trials=10)
    assert a[0]["mean"] == a[1]["mean"]


def test_compare_json_and_report(random_file, tmp_path, capsys):
    rep = tmp_path / "rep.json"
    _run(capsys, "compare", "--policies", "obl,sem", "--trials", 100, "--seed", 1, "--format", "json",
         "-o", rep, random_file)
    rows = json.loads(rep.read_text())
    assert [r["policy"] for r in rows] == ["obl", "sem"]
    assert rows[0]["oracle"] is None and rows[0]["ratio_oracle"] is None
    code, out, err = _run(capsys, "report", rep, "--summary")
    assert code == EXIT_OK
    assert [r["policy"] for r in _rows(out)] == ["obl", "sem"]
    assert "geometric mean" in err
    assert _run(capsys, "report", tmp_path / "none.csv")[0] == EXIT_USAGE


def test_compare_unknown_policy(random_file, capsys):
    assert _run(capsys, "compare", "--policies", "sem,bogus", "--seed", 1, random_file)[0] == EXIT_USAGE
