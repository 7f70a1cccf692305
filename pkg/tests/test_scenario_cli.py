import csv
import json
import re

import numpy as np
import pytest

from equidyn.cli import main
from equidyn.errors import ConfigError
from equidyn.scenario import EXAMPLE_SETS, bundled_names, load_scenario, parse_scenario


def _write(tmp_path, doc, name="case.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


ZERO_DOC = {
    "name": "still", "family": "se2", "n_agents": 2,
    "params": {"lambda1": "0", "lambda2": "0", "mu1": "0", "mu2": "0"},
    "initial": [0.25, 0.5, 1.0, -1.0],
    "integrator": {"t_end": 1.0, "dt": 0.25},
}


def test_every_bundled_scenario_parses():
    names = bundled_names()
    assert {n for group in EXAMPLE_SETS.values() for n in group} <= set(names)
    for name in names:
        load_scenario(name)


def test_run_attraction_to_unit_separation(tmp_path):
    assert main(["run", "A3", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "A3_invariants.csv")
    assert rows[0] == ["t", "rho2"]
    assert float(rows[-1][0]) == pytest.approx(20.0)
    assert 0.999 <= float(rows[-1][1]) <= 1.001


def test_zero_field_rows_are_constant(tmp_path):
    assert main(["run", _write(tmp_path, ZERO_DOC), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "still_traj.csv")
    assert rows[0] == ["t", "x1", "y1", "x2", "y2"]
    assert [r[0] for r in rows[1:]] == ["0", "0.25", "0.5", "0.75", "1"]
    assert all(r[1:] == ["0.25", "0.5", "1", "-1"] for r in rows[1:])


def test_csv_uses_round_trip_digits_and_lf(tmp_path):
    doc = {**ZERO_DOC, "params": {**ZERO_DOC["params"], "lambda2": "1 - rho2"},
           "initial": [0, 0, 0.1, 0.3]}
    main(["run", _write(tmp_path, doc), "--out", str(tmp_path)])
    raw = (tmp_path / "still_traj.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    values = [v for line in raw.decode().splitlines()[1:] for v in line.split(",")]
    assert all(float(repr(float(v))) == float(v) for v in values)
    assert max(len(v.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) for v in values) == 17


def test_initial_on_singular_set_exits_3(tmp_path, capsys):
    doc = {"name": "mu", "family": "counterexample_mu", "n_agents": 2, "params": {},
           "initial": [0, 0, 1e-13, 0]}
    assert main(["run", _write(tmp_path, doc), "--out", str(tmp_path)]) == 3
    assert "domain" in capsys.readouterr().err


def test_malformed_json_exits_2_with_location(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x",\n  "family": se2}')
    assert main(["run", str(path)]) == 2
    assert "line 2, column 13" in capsys.readouterr().err


@pytest.mark.parametrize("patch, message", [
    ({"family": "se3"}, "unknown family"),
    ({"bogus": 1}, "unknown keys"),
    ({"n_agents": 0}, "positive integer"),
    ({"initial": [0, 0, 1]}, "2 x 2 = 4"),
    ({"params": {"lambda1": "rho2 *", "lambda2": "0", "mu1": "0", "mu2": "0"}}, "params.lambda1"),
    ({"integrator": {"scheme": "euler"}}, "scheme"),
    ({"checks": ["bracket", "magic"]}, "unknown check"),
    ({"scenario_id": "CIRCLE"}, "lives on SE2_PLANE"),
])
def test_scenario_validation(patch, message):
    with pytest.raises(ConfigError, match=message):
        parse_scenario({**ZERO_DOC, **patch})


def test_unknown_scenario_name_exits_2(capsys):
    assert main(["run", "no_such_scenario"]) == 2
    assert "no scenario" in capsys.readouterr().err


def test_verify_passes_and_fails(tmp_path):
    assert main(["verify", "A1", "--samples", "10", "--groups", "3", "--out", str(tmp_path)]) == 0
    for name in EXAMPLE_SETS["broken"]:
        assert main(["verify", name, "--samples", "10", "--groups", "3", "--out", str(tmp_path)]) == 1


def test_verify_report_is_reproducible(tmp_path):
    args = ["verify", "A3", "--samples", "8", "--groups", "2", "--seed", "5"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "A3_report.json").read_bytes()
    assert a == (tmp_path / "b" / "A3_report.json").read_bytes()
    assert json.loads(a)["seed"] == 5


def test_seed_falls_back_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("EQUIDYN_SEED", "11")
    main(["verify", "A2", "--samples", "5", "--groups", "2", "--out", str(tmp_path)])
    assert json.loads((tmp_path / "A2_report.json").read_text())["seed"] == 11
    monkeypatch.setenv("EQUIDYN_SEED", "eleven")
    assert main(["verify", "A2", "--out", str(tmp_path)]) == 2


def test_tolerance_override(tmp_path):
    args = ["verify", "A3", "--samples", "5", "--groups", "2", "--out", str(tmp_path)]
    assert main(args + ["--tol", "bracket=1e-30"]) == 1
    assert main(args + ["--tol", "bracket"]) == 2


def test_examples_circle_set(tmp_path):
    assert main(["examples", "C", "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.glob("*.svg")) == [f"C{k}.svg" for k in range(1, 5)]


@pytest.mark.slow
def test_examples_plane_set(tmp_path):
    assert main(["examples", "A", "--out", str(tmp_path)]) == 0
    assert len(list(tmp_path.glob("*.svg"))) == 12
    assert len(list(tmp_path.glob("*_traj.csv"))) == 12


def test_svg_is_self_contained_and_deterministic(tmp_path):
    main(["run", "C3", "--out", str(tmp_path / "a")])
    main(["run", "C3", "--out", str(tmp_path / "b")])
    svg = (tmp_path / "a" / "C3.svg").read_text()
    assert svg == (tmp_path / "b" / "C3.svg").read_text()
    assert re.search(r'viewBox="0 0 800 800"', svg)
    assert "xlink:href=\"http" not in svg and "<image" not in svg


def test_plane_figure_for_planar_scenario(tmp_path):
    main(["run", _write(tmp_path, ZERO_DOC), "--out", str(tmp_path)])
    assert 'viewBox="0 0 800 800"' in (tmp_path / "still.svg").read_text()


def test_outputs_can_be_disabled(tmp_path):
    doc = {**ZERO_DOC, "outputs": {"svg": False}}
    main(["run", _write(tmp_path, doc), "--out", str(tmp_path)])
    assert not (tmp_path / "still.svg").exists()
    assert (tmp_path / "still_traj.csv").exists()


def test_partial_output_on_domain_violation(tmp_path):
    doc = {**ZERO_DOC, "params": {"lambda1": "0", "lambda2": "-pow(rho2, -1)", "mu1": "0", "mu2": "0"},
           "initial": [0, 0, 0.5, 0], "integrator": {"t_end": 1.0, "dt": 0.01}}
    assert main(["run", _write(tmp_path, doc), "--out", str(tmp_path)]) == 3
    times = np.array([float(r[0]) for r in _rows(tmp_path / "still_traj.csv")[1:]])
    assert times.max() < 0.5
