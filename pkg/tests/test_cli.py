import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import DATA
from pbslab.cli import main
from pbslab.conversion import Schedule
from pbslab.plan import Plan
from pbslab.prediction import FitResult
from pbslab.rl import Agent, DuelingNet


def rows_of(path):
    return list(csv.DictReader(open(path)))


def test_gen_writes_instances_and_manifest(tmp_path):
    assert main(["gen", "R322", "--count", "5", "--seed", "3", "--out", str(tmp_path / "g")]) == 0
    files = sorted(p.name for p in (tmp_path / "g").glob("*.json"))
    assert len(files) == 6 and "instances.manifest.json" in files
    manifest = json.loads((tmp_path / "g" / "instances.manifest.json").read_text())
    assert manifest["command"] == "gen" and manifest["seed"] == 3 and manifest["count"] == 5


def test_solve_bfs_summary_and_determinism(tmp_path):
    main(["gen", "R322", "--count", "6", "--seed", "1", "--out", str(tmp_path / "g")])
    for name in ("a.csv", "b.csv"):
        assert main(["solve", str(tmp_path / "g"), "--policy", "bfs", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = rows_of(tmp_path / "a.csv")
    assert list(rows[0]) == ["id", "policy", "objective", "success", "millis"]
    assert rows[-1]["id"] == "SUMMARY" and len(rows) == 7
    assert all(r["success"] in ("1", "6/6") for r in rows)
    assert json.loads((tmp_path / "a.csv.manifest.json").read_text())["command"] == "solve"


def test_solve_guided_parallel_matches_serial(tmp_path):
    main(["gen", "R422", "--count", "8", "--seed", "2", "--out", str(tmp_path / "g")])
    main(["solve", str(tmp_path / "g"), "--policy", "guided", "--seed", "5", "--out", str(tmp_path / "s.csv")])
    main(["solve", str(tmp_path / "g"), "--policy", "guided", "--seed", "5", "--jobs", "2",
          "--out", str(tmp_path / "p.csv")])
    assert (tmp_path / "s.csv").read_bytes() == (tmp_path / "p.csv").read_bytes()


def test_solve_rl_with_checkpoint(tmp_path, capsys):
    agent = Agent(DuelingNet.init(8, 8, (8,), rng=np.random.default_rng(0)), 4, 4, 2, 2)
    agent.save(tmp_path / "m.json")
    main(["gen", "R422", "--count", "3", "--out", str(tmp_path / "g")])
    code = main(["solve", str(tmp_path / "g"), "--policy", "rl", "--model", str(tmp_path / "m.json")])
    assert code in (0, 3)
    assert "SUMMARY" in capsys.readouterr().out
    assert main(["solve", str(tmp_path / "g"), "--policy", "rl"]) == 2


def test_anchor_trace_and_convert(tmp_path, capsys):
    fixture = str(DATA / "anchor_instance.json")
    assert main(["solve", fixture, "--plans-dir", str(tmp_path), "--trace"]) == 0
    out = capsys.readouterr().out
    assert "step 13" in out and "step 14" not in out
    (plan_file,) = tmp_path.glob("*.plan.json")
    assert Plan.load(plan_file).objective == 13
    assert main(["convert", str(DATA / "anchor_plan.json"), "--instance", fixture,
                 "--out", str(tmp_path / "s.json")]) == 0
    assert "makespan 8 moves 13" in capsys.readouterr().out
    assert Schedule.load(tmp_path / "s.json").makespan == 8


def test_show_renders(capsys):
    assert main(["show", str(DATA / "anchor_instance.json")]) == 0
    assert capsys.readouterr().out.strip()


def test_export_lp_is_stable(tmp_path):
    fixture = str(DATA / "anchor_instance.json")
    for name in ("a.lp", "b.lp"):
        assert main(["export-lp", fixture, "--K", "13", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.lp").read_bytes() == (tmp_path / "b.lp").read_bytes()
    assert (tmp_path / "a.lp").read_text().startswith("\\ multi-item retrieval model")


def test_predict_query_and_fit(tmp_path, capsys):
    assert main(["predict", "--query", "10", "2", "6"]) == 0
    assert "31.79" in capsys.readouterr().out
    main(["gen", "R322", "--count", "12", "--seed", "4", "--out", str(tmp_path / "a")])
    main(["gen", "R412", "--count", "12", "--seed", "4", "--out", str(tmp_path / "b")])
    main(["gen", "R423", "--count", "12", "--seed", "4", "--out", str(tmp_path / "c")])
    for sub in "abc":
        assert main(["samples", str(tmp_path / sub), "--out", str(tmp_path / f"{sub}.csv")]) == 0
    merged = tmp_path / "all.csv"
    lines = [open(tmp_path / f"{s}.csv").read().splitlines() for s in "abc"]
    merged.write_text("\n".join(lines[0] + lines[1][1:] + lines[2][1:]) + "\n")
    assert main(["predict", "--samples", str(merged), "--out", str(tmp_path / "fit.json")]) == 0
    fit = FitResult.load(tmp_path / "fit.json")
    assert fit.alpha1 > 0


def test_decompose_cli(tmp_path):
    main(["gen", "R-6x37-1-22", "--count", "1", "--seed", "2", "--out", str(tmp_path / "g")])
    (inst,) = [p for p in (tmp_path / "g").glob("*.json") if "manifest" not in p.name]
    assert main(["decompose", str(inst), "--out", str(tmp_path / "p.json"), "--trace", str(tmp_path / "t.csv")]) == 0
    assert Plan.load(tmp_path / "p.json").objective == int(rows_of(tmp_path / "t.csv")[-1]["recorded_total"])


def test_input_errors_exit_2(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing")]) == 2
    assert main(["gen", "R-2x2-3-3", "--out", str(tmp_path / "x")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["solve", str(tmp_path / "bad.json")]) == 2
    assert main(["gen", "Q42", "--out", str(tmp_path / "x")]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 2


def test_failures_exit_3(tmp_path):
    broken = Plan.load(DATA / "anchor_plan.json")
    broken.moves = broken.moves[:-1]
    broken.save(tmp_path / "short.json")
    assert main(["convert", str(tmp_path / "short.json"), "--instance", str(DATA / "anchor_instance.json")]) == 3


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "pbslab", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "pbslab" in out.stdout
