from __future__ import annotations

import csv
import io
import json
import textwrap

import numpy as np
import pytest

from hjjunction.harness.cli import run_cli

CFL_QUADRATIC = """
[junction]
branches = 3

[[hamiltonians]]
name = "quadratic"

[junction_function]
type = "flux_limited"
A = 1.0

[initial]
kind = "zero"

[grid]
dx = 0.1
length = 2.0
"""

TENT_LINE = """
[junction]
branches = 2

[[hamiltonians]]
name = "quadratic"

[junction_function]
type = "flux_limited"
A = "A0"

[initial]
kind = "tent"

[grid]
dx = 0.1

[experiment]
horizon = 0.0
radius = 1.0
dx_list = [0.1, 0.05, 0.025]
"""


@pytest.fixture
def write(tmp_path):
    def _write(text: str, name: str = "cfg.toml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text))
        return str(path)

    return _write


def test_cfl_reports_half_dx(write, tmp_path, capsys):
    out = tmp_path / "cfl.json"
    assert run_cli(["cfl", "--config", write(CFL_QUADRATIC), "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["dt_max"] == pytest.approx(0.05, rel=1e-12)
    assert d["bounds"]["m0"] == -1.0
    text = out.read_text()
    assert text == json.dumps(d, sort_keys=True, indent=2) + "\n"


def test_solve_at_time_zero_returns_datum(write, tmp_path):
    out = tmp_path / "u.csv"
    assert run_cli(["solve", "--config", write(TENT_LINE), "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert {r["t"] for r in rows} == {"0"}
    for r in rows:
        x = float(r["x"])
        assert float(r["U"]) == max(0.0, 1.0 - x)
    assert b"\r\n" not in out.read_bytes()


def test_solve_is_bit_identical(write, tmp_path):
    cfg = write(TENT_LINE.replace("horizon = 0.0", "horizon = 0.3"))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(["solve", "--config", cfg, "--out", str(a)]) == 0
    assert run_cli(["solve", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_converge_with_one_grid_exits_2(write, capsys):
    cfg = write(TENT_LINE.replace("dx_list = [0.1, 0.05, 0.025]", "dx_list = [0.1]"))
    assert run_cli(["converge", "--config", cfg]) == 2
    assert "at least 3" in capsys.readouterr().err


def test_converge_writes_table_and_summary(write, tmp_path, capsys):
    cfg = write(TENT_LINE.replace("horizon = 0.0", "horizon = 0.2"))
    out = tmp_path / "rows.csv"
    assert run_cli(["converge", "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "dx,dt,sup_error,runtime,steps"
    assert len(lines) == 4
    summary = json.loads(capsys.readouterr().out)
    assert summary["oracle"] == "hopf-lax"
    assert summary["violations"] == 0


@pytest.mark.parametrize(
    "text",
    [
        CFL_QUADRATIC + "\n[grid2]\nx = 1\n",
        CFL_QUADRATIC.replace('kind = "zero"', 'kind = "spiral"'),
        "this is not toml = = =",
    ],
)
def test_malformed_config_exits_2(write, text, capsys):
    assert run_cli(["cfl", "--config", write(text)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_file_and_bad_subcommand(tmp_path):
    assert run_cli(["cfl", "--config", str(tmp_path / "nope.toml")]) == 2
    assert run_cli(["frobnicate", "--config", "x"]) == 2


def test_certify_vertex_json(write, tmp_path):
    cfg = write(
        CFL_QUADRATIC.replace("branches = 3", "branches = 2").replace("A = 1.0", 'A = "A0"')
        + "\n[vertex]\ngamma = 0.1\nK = 5.0\nsamples = 1000\n"
    )
    out = tmp_path / "v.json"
    assert run_cli(["certify-vertex", "--config", cfg, "--out", str(out), "--strict", "--seed", "4"]) == 0
    d = json.loads(out.read_text())
    assert d["passed"] is True
    assert d["sample_count"] == 1000
    assert set(d["checks"]) == {"compatibility", "diagonal", "hessian_fd", "superlinearity"}


def test_certify_vertex_rejects_non_smooth(write):
    cfg = write(CFL_QUADRATIC.replace('name = "quadratic"', 'name = "absolute"'))
    assert run_cli(["certify-vertex", "--config", cfg]) == 2


def test_check_invariants_small(write, tmp_path):
    cfg = write(CFL_QUADRATIC + "\n[invariants]\nrandom_data = 3\nsteps = 50\nprobes = 30\n")
    out = tmp_path / "inv.json"
    assert run_cli(["check-invariants", "--config", cfg, "--out", str(out), "--strict", "--seed", "1"]) == 0
    d = json.loads(out.read_text())
    assert d["passed"] and d["gradient_violations"] == 0 and d["comparison_failures"] == 0


def test_strict_solve_flags_violations(write, tmp_path, monkeypatch):
    from hjjunction.harness import cli

    monkeypatch.setattr(cli, "stability_constant", lambda *a, **k: 0.0)
    cfg = write(CFL_QUADRATIC + "\n[experiment]\nhorizon = 0.2\n")
    assert run_cli(["solve", "--config", cfg, "--out", str(tmp_path / "s.csv"), "--strict"]) == 1
    assert run_cli(["solve", "--config", cfg, "--out", str(tmp_path / "s.csv")]) == 0
