import csv
import io
import json
import math
import subprocess
import sys

import pytest

from congestpa.cli import CSV_HEADER, main
from congestpa.graphs import NetworkGraph, Partition
from congestpa.pa import K_M


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_gen_grid_apex(tmp_path, capsys):
    prefix = str(tmp_path / "g")
    assert main(["gen", "--grid-apex", "8", "8", "--out-prefix", prefix]) == 0
    g = NetworkGraph.read(prefix + ".graph")
    part = Partition.read(prefix + ".part")
    assert g.n == 65 and part.n == 65


def test_run_pa_on_generated_grid(tmp_path, capsys):
    prefix = str(tmp_path / "g")
    main(["gen", "--grid-apex", "8", "8", "--out-prefix", prefix])
    capsys.readouterr()
    code = main(["run", "--alg", "pa", "--mode", "det", "--graph", prefix + ".graph",
                 "--partition", prefix + ".part", "--root", "64"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.splitlines()[0] == ",".join(CSV_HEADER)
    (row,) = _rows(out)
    assert row["ok"] == "true" and row["n"] == "65"
    n = 65
    assert int(row["messages"]) <= K_M * n * math.log(n) ** 2


@pytest.mark.parametrize("alg", ["baseline", "mst", "labels", "kdom", "shortcut-det", "shortcut-rand"])
def test_run_each_algorithm(alg, capsys):
    code = main(["run", "--alg", alg, "--random", "60", "--parts", "4", "--seed", "3"])
    (row,) = _rows(capsys.readouterr().out)
    assert code == 0 and row["ok"] == "true" and row["algorithm"] == alg


def test_shortcut_targets_and_files(tmp_path, capsys):
    code = main(["run", "--alg", "shortcut-det", "--random", "80", "--parts", "5", "--seed", "1",
                 "--b", "2", "--c", "4", "--out-shortcut", str(tmp_path / "h.txt"),
                 "--report-json", str(tmp_path / "r.json"), "--format", "json"])
    rows = json.loads(capsys.readouterr().out)
    assert code in (0, 1) and rows[0]["mode"] == "det"
    if code == 0:
        assert (tmp_path / "h.txt").exists()
    assert "messages" in json.loads((tmp_path / "r.json").read_text())


@pytest.mark.parametrize("argv", [
    ["run", "--alg", "pa"],
    ["run", "--alg", "pa", "--random", "20", "--grid-apex", "3", "3"],
    ["run", "--alg", "nope", "--random", "20"],
    ["run", "--random", "20"],
    ["sweep", "--alg", "pa"],
    ["run", "--alg", "pa", "--graph", "/does/not/exist"],
    ["frobnicate"],
])
def test_usage_errors_exit_nonzero(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_rand_needs_seed(capsys):
    assert main(["run", "--alg", "pa", "--mode", "rand", "--random", "20"]) == 2
    assert "seed" in capsys.readouterr().err


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alg": "pa", "random": 40, "parts": 3, "seed": 5, "mode": "rand"}))
    assert main(["run", "--config", str(cfg)]) == 0
    (row,) = _rows(capsys.readouterr().out)
    assert row["mode"] == "rand" and row["seed"] == "5"
    assert main(["run", "--config", str(cfg), "--mode", "det", "--seed", "6"]) == 0
    (row,) = _rows(capsys.readouterr().out)
    assert row["mode"] == "det" and row["seed"] == "6"


def test_same_config_same_bytes(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"o{k}.csv"
        assert main(["run", "--alg", "pa", "--mode", "rand", "--seed", "9", "--random", "70",
                     "--parts", "5", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_sweep_rows(capsys):
    code = main(["sweep", "--alg", "baseline,pa", "--grid-apex-D", "4,6", "--seeds", "1,2"])
    rows = _rows(capsys.readouterr().out)
    assert code == 0 and len(rows) == 8
    assert [r["algorithm"] for r in rows[:2]] == ["baseline", "pa"]
    assert all(r["ok"] == "true" for r in rows)


def test_algorithm_error_row(tmp_path, capsys):
    # a disconnected part makes the leaderless pipeline fail
    g = tmp_path / "g.txt"
    g.write_text("4 3\n0 1\n1 2\n2 3\n")
    p = tmp_path / "p.txt"
    p.write_text("0 0\n1 1\n2 1\n3 0\n")
    code = main(["run", "--alg", "pa", "--graph", str(g), "--partition", str(p)])
    cap = capsys.readouterr()
    (row,) = _rows(cap.out)
    assert code == 1 and row["ok"] == "false" and cap.err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "congestpa", "gen", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "--grid-apex" in out.stdout
