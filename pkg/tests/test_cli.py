import subprocess
import sys
from pathlib import Path

import pytest

from golden_cases import CASES
from pcnsim.cli import main

GOLDEN = Path(__file__).parent / "golden"


def run(argv, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, out.read_text() if out.exists() else None


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(name, tmp_path):
    code, text = run(CASES[name], tmp_path)
    assert code == 0
    assert text.encode() == (GOLDEN / name).read_bytes()


def test_header(tmp_path):
    _, text = run(CASES["single_integer.csv"], tmp_path)
    lines = text.splitlines()
    assert lines[0] == "# pcnsim 0.1.0"
    assert lines[1].startswith("# command=single B=100 ")


def test_capacity_floor(capsys):
    assert main(["single", "--B", "4.0", "--n", "10"]) == 2
    assert "4.01" in capsys.readouterr().err


def test_zero_items(tmp_path):
    code, text = run(["single", "--B", "100", "--n", "0"], tmp_path)
    assert code == 0 and text.splitlines()[-1].split(",")[4] == "0"


def test_pin_m3():
    assert main(["adversary", "pin", "--B", "256", "--m", "3", "--n", "1", "--trials", "1"]) == 2


def test_greedy_adversary_ratio(tmp_path):
    _, text = run(["adversary", "greedy", "--B", "1024", "--m", "16", "--phases", "10"], tmp_path)
    row = text.splitlines()[3].split(",")
    assert row[4] == "greedy" and float(row[7]) >= 16


def test_audit_exit_codes(tmp_path, capsys):
    assert run(["audit", "--B", "100", "--n", "10000", "--seed", "3"], tmp_path)[0] == 0
    code, text = run(["audit", "--B", "100", "--n", "0"], tmp_path)
    assert code == 0 and text.splitlines()[-1].startswith("step")
    assert run(["audit", "--B", "100", "--n", "500", "--seed", "3", "--inject-fault"], tmp_path)[0] == 3
    assert "audit violation at step" in capsys.readouterr().err


def test_audit_non_integer_b():
    assert main(["audit", "--B", "100.5", "--n", "10"]) == 2


def test_network_bad_line(tmp_path, capsys):
    p = tmp_path / "edges.csv"
    p.write_text("node_a,node_b,scid,capacity,htlc_min,htlc_max\nA,B,x,100,1,100\nB,C,y,1e3,1,5\n")
    assert main(["network", "--graph", str(p), "--n", "10"]) == 2
    assert "line 3" in capsys.readouterr().err


def test_network_missing_file(tmp_path):
    assert main(["network", "--graph", str(tmp_path / "nope.csv"), "--n", "10"]) == 2


def test_network_graph_file(tmp_path):
    p = tmp_path / "edges.csv"
    p.write_text("node_a,node_b,scid,capacity,htlc_min,htlc_max\nA,B,x,1000,1,1000\nB,C,y,1000,1,1000\n")
    code, text = run(["network", "--graph", str(p), "--n", "100", "--seed", "1"], tmp_path)
    assert code == 0 and text.splitlines()[-1].startswith("exp,guarantee,1,100,")


def test_network_paired_runs(tmp_path):
    acc = {}
    for policy in ("exp", "greedy"):
        _, text = run(["network", "--synthetic", "random:200:6:0", "--n", "20000", "--policy", policy,
                       "--seed", "1"], tmp_path, f"{policy}.csv")
        acc[policy] = int(text.splitlines()[-1].split(",")[5])
    assert abs(acc["exp"] - acc["greedy"]) <= 0.05 * acc["greedy"], acc


def test_unwritable_output(tmp_path):
    assert main(["single", "--B", "10", "--n", "1", "--out", str(tmp_path / "no" / "x.csv")]) == 1


def test_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("PCNSIM_SEED", "42")
    _, a = run(["single", "--B", "1000", "--n", "100000"], tmp_path, "a.csv")
    assert a == (GOLDEN / "single_exp_guarantee.csv").read_text()


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    res = subprocess.run([sys.executable, "-m", "pcnsim", *CASES["network_path3.csv"], "--out", str(out)],
                         capture_output=True)
    assert res.returncode == 0
    assert out.read_bytes() == (GOLDEN / "network_path3.csv").read_bytes()
