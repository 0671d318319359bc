"""The acceptance suite: ``all-checks --seed 1`` run twice with different worker counts.

Criteria 1-13 are judged from the single-worker run (verdicts and time
limits); criterion 14 compares the two JSON documents with wall times removed.
Each test prints one ``criterion N ... PASS/FAIL`` line.
"""

import json

import pytest

from imub.checks import CRITERIA
from imub.cli import run

WORKER_COUNTS = (1, 2)


def _strip_times(obj):
    if isinstance(obj, dict):
        return {k: _strip_times(v) for k, v in obj.items() if k != "wall_time_ms"}
    if isinstance(obj, list):
        return [_strip_times(v) for v in obj]
    return obj


@pytest.fixture(scope="module")
def acceptance_runs(tmp_path_factory):
    out = {}
    for w in WORKER_COUNTS:
        d = tmp_path_factory.mktemp(f"workers{w}")
        path = d / "report.json"
        code = run(["all-checks", "--seed", "1", "--workers", str(w), "--json", str(path), "--out-dir", str(d)])
        out[w] = {"code": code, "doc": json.loads(path.read_text(encoding="utf-8")), "text": path.read_text(),
                  "dir": d}
    return out


def _announce(capsys, number, name, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number:2d} {name:28s} {'PASS' if ok else 'FAIL'}  {detail}", flush=True)


@pytest.mark.slow
@pytest.mark.parametrize("crit", CRITERIA, ids=lambda c: f"{c.number:02d}-{c.name}")
def test_criterion(crit, acceptance_runs, capsys):
    doc = acceptance_runs[1]["doc"]
    (summary,) = [c for c in doc["criteria"] if c["criterion"] == crit.number]
    reports = [r for r in doc["reports"] if r["params"].get("criterion") == crit.number]
    seconds = summary["wall_time_ms"] / 1e3
    failed = [r["check"] for r in reports if r["verdict"] == "fail"]
    ok = summary["verdict"] == "pass" and seconds < crit.time_limit_s
    detail = f"{seconds:7.1f}s / limit {crit.time_limit_s}s" + (f"  failing: {failed}" if failed else "")
    _announce(capsys, crit.number, crit.name, ok, detail)
    assert summary["verdict"] == "pass", failed
    assert seconds < crit.time_limit_s
    if crit.number == 5:
        d = acceptance_runs[1]["dir"]
        assert (d / "fig1_path.csv").stat().st_size > 0 and (d / "fig1_trace.csv").stat().st_size > 0


@pytest.mark.slow
def test_criterion_14_determinism(acceptance_runs, capsys):
    a, b = (_strip_times(acceptance_runs[w]["doc"]) for w in WORKER_COUNTS)
    # the config echo records the worker count itself; everything else must match
    a["config"].pop("workers"), b["config"].pop("workers")
    a["config"].pop("json"), b["config"].pop("json")
    a["config"].pop("out_dir"), b["config"].pop("out_dir")
    same = json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    figs = all((acceptance_runs[1]["dir"] / f).read_bytes() == (acceptance_runs[2]["dir"] / f).read_bytes()
               for f in ("fig1_path.csv", "fig1_trace.csv"))
    _announce(capsys, 14, "determinism", same and figs, f"workers {WORKER_COUNTS}")
    assert same and figs
    assert acceptance_runs[1]["code"] == acceptance_runs[2]["code"] == 0
