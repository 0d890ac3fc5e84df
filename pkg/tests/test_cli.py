import csv
import json

import numpy as np
import pytest

from optoring import cli
from optoring.benchmark import benchmark_ring
from optoring.ring import RingParams

BASE = {
    "lattice": {"topology": "ring", "L": 8},
    "params": {"omega_m": 1.0, "delta_tilde": -1.2, "g": 0.002, "J": 0.2,
               "gamma_c": 0.1, "gamma_m": 0.001, "nbar": 100},
    "drive": {"mode": "alpha_prescribed", "alpha_magnitude": 10.0, "phi_n": 1},
    "run": {"J_over_gamma_c": [0.25, 2.0], "squeezing": {"G_plus": 0.01, "G_minus": 0.02, "nu": 0.3}},
}


def write_config(tmp_path, doc=None, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc or BASE, indent=2))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def run(tmp_path, command, *extra, doc=None, out="out"):
    cfg = write_config(tmp_path, doc)
    code = cli.run([command, "--config", str(cfg), "--out", str(tmp_path / out),
                    "--threads", "1", *extra])
    return code, tmp_path / out


@pytest.fixture(autouse=True)
def no_env_threads(monkeypatch):
    monkeypatch.delenv("OPTORING_THREADS", raising=False)


@pytest.mark.parametrize("command,grid", [
    ("hoppings", "delta_tilde:-1.5:-0.5:5"),
    ("phase-diagram", "J_over_gamma_c:0.5:2:3,delta_tilde:-1.5:1.5:4"),
    ("benchmark", "J_over_gamma_c:0.5:2:2,delta_tilde:-1.3:-0.7:2"),
    ("coherence", "J_over_gamma_c:0.5:2:3"),
    ("rates", None),
    ("squeezing", None),
])
def test_commands_write_outputs(tmp_path, command, grid):
    extra = ["--grid", grid] if grid else []
    code, out = run(tmp_path, command, *extra, "--svg")
    assert code == 0
    header, rows = read_csv(out / f"{command}.csv")
    assert header[-1] == "status" and rows
    assert all(h.endswith("]") for h in header[:-1])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == command
    assert manifest["unit_convention"].startswith("frequencies and rates in units of omega_m")
    assert manifest["config_snapshot"]["lattice"]["L"] == 8
    assert (out / f"{command}.svg").exists()


def test_ridge_short_range_regime(tmp_path):
    code, out = run(tmp_path, "ridge")
    assert code == 0
    header, rows = read_csv(out / "ridge.csv")
    col = {h: i for i, h in enumerate(header)}
    first = rows[0]
    assert float(first[col["J_over_gamma_c[1]"]]) == 0.25
    q1 = float(first[col["Q_1_eff[omega_m*gamma_m]"]])
    qc = float(first[col["Q_C_eff[omega_m*gamma_m]"]])
    assert abs(q1) >= 0.9 * abs(qc)
    assert float(first[col["Q_C_mf[omega_m*gamma_m]"]]) == pytest.approx(qc, rel=0.05)


def test_phase_diagram_without_phase_is_zero(tmp_path):
    doc = json.loads(json.dumps(BASE))
    doc["drive"]["phi_n"] = 0
    code, out = run(tmp_path, "phase-diagram", "--grid", "J_over_gamma_c:0.5:2:3,delta_tilde:-1.5:-0.5:4",
                    doc=doc)
    assert code == 0
    header, rows = read_csv(out / "phase-diagram.csv")
    j = header.index("Q_C[omega_m*gamma_m]")
    vals = [float(r[j]) for r in rows if r[-1] != "unstable"]
    assert vals and all(abs(v) <= 1e-12 for v in vals)


def test_unstable_rows_are_labelled(tmp_path):
    code, out = run(tmp_path, "phase-diagram", "--grid", "delta_tilde:-1.2:0.8:3")
    assert code == 0
    _, rows = read_csv(out / "phase-diagram.csv")
    assert [r[-1] for r in rows] == ["ok", "ok", "unstable"]
    assert rows[-1][5] == "nan"


def test_all_unstable_exit_code(tmp_path):
    code, out = run(tmp_path, "phase-diagram", "--grid", "delta_tilde:0.8:0.8:1")
    assert code == 3
    assert (out / "phase-diagram.csv").exists()


def test_benchmark_row_matches_library(tmp_path):
    doc = json.loads(json.dumps(BASE))
    doc["params"].update({"g": 0.01, "nbar": 10})
    doc["drive"]["phi_n"] = 2
    code, out = run(tmp_path, "benchmark", "--grid", "J_over_gamma_c:1:1:1",
                    "--derived", "delta_tilde=-J-omega_m", doc=doc)
    assert code == 0
    header, rows = read_csv(out / "benchmark.csv")
    delta = float(rows[0][header.index("delta[1]")])
    ref = benchmark_ring(RingParams(8, 2 * 2 * np.pi / 8, 0.01, 10.0, -1.1, 0.1, 0.1, 1e-3, 10.0)).delta
    assert delta == pytest.approx(ref, rel=1e-10)
    assert rows[0][header.index("delta_ge_5pct[1]")] == ("1" if ref >= 0.05 else "0")


def test_deterministic_and_thread_independent(tmp_path, monkeypatch):
    grid = "J_over_gamma_c:0.5:2:3,delta_tilde:-1.5:1.5:5"
    _, a = run(tmp_path, "phase-diagram", "--grid", grid, out="a")
    _, b = run(tmp_path, "phase-diagram", "--grid", grid, out="b")
    monkeypatch.setenv("OPTORING_THREADS", "2")
    _, c = run(tmp_path, "phase-diagram", "--grid", grid, out="c")
    data = [(d / "phase-diagram.csv").read_bytes() for d in (a, b, c)]
    assert data[0] == data[1] == data[2]
    assert json.loads((c / "manifest.json").read_text())["flags"]["threads"] == 2


def test_env_threads_must_be_integer(tmp_path, monkeypatch):
    monkeypatch.setenv("OPTORING_THREADS", "many")
    code, _ = run(tmp_path, "rates")
    assert code == 2


def test_config_error_exit_code(tmp_path, capsys):
    doc = json.loads(json.dumps(BASE))
    doc["params"]["bogus"] = 1
    code, _ = run(tmp_path, "rates", doc=doc)
    assert code == 2
    err = capsys.readouterr().err
    assert "bogus" in err and "line" in err and "column" in err


def test_bad_grid_exit_code(tmp_path):
    code, _ = run(tmp_path, "hoppings", "--grid", "kappa:0:1:3")
    assert code == 2
    code, _ = run(tmp_path, "hoppings", "--grid", "delta_tilde:1:0:3")
    assert code == 2


def test_non_ring_rejected_for_ring_commands(tmp_path):
    doc = json.loads(json.dumps(BASE))
    doc["lattice"] = {"topology": "open_chain", "L": 8}
    code, _ = run(tmp_path, "phase-diagram", doc=doc)
    assert code == 2


def test_squeezing_rows(tmp_path):
    code, out = run(tmp_path, "squeezing")
    assert code == 0
    header, rows = read_csv(out / "squeezing.csv")
    assert [int(r[0]) for r in rows] == [0, 1, 2, 3, 4]
    ph = float(rows[1][header.index("arg_pairing[rad]")])
    assert ph == pytest.approx(0.3, abs=1e-12)


def test_squeezing_requires_tones(tmp_path):
    doc = json.loads(json.dumps(BASE))
    del doc["run"]["squeezing"]
    code, _ = run(tmp_path, "squeezing", doc=doc)
    assert code == 2


def test_svg_failure_does_not_fail_run(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.PLOT_COLUMNS, "rates", "no-such-column")
    code, out = run(tmp_path, "rates", "--svg")
    assert code == 0 and (out / "rates.csv").exists()


def test_main_exits_with_code(tmp_path):
    cfg = write_config(tmp_path)
    with pytest.raises(SystemExit) as exc:
        cli.main(["rates", "--config", str(cfg), "--out", str(tmp_path / "m"), "--threads", "1"])
    assert exc.value.code == 0
