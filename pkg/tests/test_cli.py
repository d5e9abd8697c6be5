import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from geoflow.cli import main, thread_count
from geoflow.io import REPORT_SCHEMA, csv_header, parse_model, read_trajectory_csv, trajectory_csv
from geoflow.flow import Trajectory
from geoflow.errors import InvariantError

from conftest import DATA, MODELS


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def sqrt3_closed_form(x0, tau):
    x1, x2, x3 = x0
    r = np.sqrt(3.0)
    e = np.exp(-tau)
    return np.stack([
        x1 * np.exp(-2 * tau),
        e * (x2 * np.cos(r * tau) - (x2 + 2 * x3) * np.sin(r * tau) / r),
        e * (x3 * np.cos(r * tau) + (2 * x2 + x3) * np.sin(r * tau) / r),
    ], axis=1)


def test_simulate_phase_damping(tmp_path, capsys):
    out = tmp_path / "pd.csv"
    code, stdout, _ = run(["simulate", "--model", MODELS / "phase_damping.json", "--x0", "1,0,0",
                           "--t-end", 2, "--out", out], capsys)
    assert code == 0 and "pauli" in stdout
    head = out.read_text().splitlines()[0]
    assert head == "tau,x_1,x_2,x_3,purity,rank,min_eig"
    t = read_trajectory_csv(out)
    np.testing.assert_allclose(t.points[:, 0], np.exp(-2 * t.times), atol=1e-8)
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["basis_convention"] == "pauli" and side["model"]["name"].startswith("phase damping")
    assert side["integrator"]["method"] == "rk4"
    jsonschema.validate(side, REPORT_SCHEMA)


def test_simulate_poisson_sigma3_drive(tmp_path, capsys):
    out = tmp_path / "r2.csv"
    x0 = (0.3, 0.5, -0.6)
    code, _, _ = run(["simulate", "--model", MODELS / "poisson_sigma3_drive.json", "--x0", ",".join(map(str, x0)),
                      "--t-end", 5, "--out", out], capsys)
    assert code == 0
    t = read_trajectory_csv(out)
    np.testing.assert_allclose(t.points, sqrt3_closed_form(x0, t.times), atol=1e-8)


def test_simulate_zero_model_constant(tmp_path, capsys):
    out = tmp_path / "z.csv"
    code, _, _ = run(["simulate", "--model", MODELS / "zero.json", "--x0", "0.1,0.2,0.3",
                      "--t-end", 1, "--out", out], capsys)
    assert code == 0
    t = read_trajectory_csv(out)
    assert np.all(t.points == t.points[0])


def test_simulate_deterministic_and_stdout(capsys):
    args = ["simulate", "--model", MODELS / "random_unitary_qutrit.json", "--seed", 4, "--t-end", 0.5]
    c1, o1, _ = run(args, capsys)
    c2, o2, _ = run(args, capsys)
    assert c1 == c2 == 0 and o1 == o2
    assert o1.splitlines()[0] == ",".join(csv_header(8))


def test_simulate_batch_threads(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GEOFLOW_THREADS", "2")
    out = tmp_path / "b.csv"
    code, _, _ = run(["simulate", "--model", MODELS / "energy_damping.json", "--x0", "0,0,-1",
                      "--x0", "0.5,0,0", "--t-end", 1, "--out", out], capsys)
    assert code == 0
    assert (tmp_path / "b_0.csv").exists() and (tmp_path / "b_1.csv").exists()
    ends = read_trajectory_csv(tmp_path / "b_0.csv").points[-1]
    np.testing.assert_allclose(ends, [0, 0, 1 - 2 * np.exp(-4)], atol=1e-9)


def test_thread_count_parsing(monkeypatch):
    monkeypatch.setenv("GEOFLOW_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("GEOFLOW_THREADS", "zero")
    from geoflow.cli import UsageError

    with pytest.raises(UsageError):
        thread_count()


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["simulate", "--model", bad], capsys)[0] == 2
    assert run(["simulate", "--model", tmp_path / "missing.json"], capsys)[0] == 2
    schema_bad = tmp_path / "s.json"
    schema_bad.write_text(json.dumps({"n": 2}))
    assert run(["decompose", "--model", schema_bad], capsys)[0] == 2
    assert run(["simulate", "--model", MODELS / "phase_damping.json", "--x0", "a,b"], capsys)[0] == 2
    assert run(["simulate", "--model", MODELS / "phase_damping.json", "--x0", "2,0,0"], capsys)[0] == 3
    code, _, err = run(["verify", "--model", DATA / "bad_V.json"], capsys)
    assert code == 3 and "positive semidefinite" in err
    with pytest.raises(SystemExit) as e:
        main(["simulate"])
    assert e.value.code == 2
    # non-finite integration is a numerical failure
    unstable = tmp_path / "u.json"
    unstable.write_text(json.dumps({"n": 2, "kraus": [{"re": [[1e3, 0], [0, 0]]}]}))
    code, _, err = run(["simulate", "--model", unstable, "--x0", "0.1,0,0", "--t-end", -30, "--allow-negative",
                        "--dt", 0.1], capsys)
    assert code == 4 and "numerical" in err


def test_decompose_json(capsys):
    code, out, _ = run(["decompose", "--model", MODELS / "phase_damping.json", "--json"], capsys)
    assert code == 0
    rep = json.loads(out)
    jsonschema.validate(rep, REPORT_SCHEMA)
    np.testing.assert_allclose(rep["fields"]["Gamma"]["linear"], np.diag([-2.0, -2.0, 0.0]), atol=1e-14)
    np.testing.assert_allclose(rep["fields"]["X"]["linear"], 0, atol=1e-15)
    np.testing.assert_allclose(rep["fields"]["Y"]["linear"], 0, atol=1e-15)
    assert rep["fixed_points"]["dimension"] == 1


def test_decompose_energy_and_identity(capsys):
    rep = json.loads(run(["decompose", "--model", MODELS / "energy_damping.json", "--json"], capsys)[1])
    assert rep["fields"]["Y"]["quadratic_norm"] > 0 and rep["fields"]["Z"]["quadratic_norm"] > 0
    assert rep["affinity"]["is_affine"]
    np.testing.assert_allclose(rep["fixed_points"]["particular"], [0, 0, 1], atol=1e-14)
    rep = json.loads(run(["decompose", "--model", MODELS / "identity_kraus.json", "--json"], capsys)[1])
    for name in ("X", "Y", "Z", "Gamma"):
        np.testing.assert_allclose(rep["fields"][name]["constant"], 0, atol=1e-15)
        np.testing.assert_allclose(rep["fields"][name]["linear"], 0, atol=1e-15)
    code, text, _ = run(["decompose", "--model", MODELS / "energy_damping.json"], capsys)
    assert code == 0 and "Gamma affine: True" in text


def test_lasalle_commands(capsys):
    rep = json.loads(run(["lasalle", "--model", MODELS / "poisson_sigma3.json", "--json"], capsys)[1])
    assert rep["certified"] and rep["E"]["operator_commutant_dimensions"] == [2]
    jsonschema.validate(rep, REPORT_SCHEMA)
    rep = json.loads(run(["lasalle", "--model", MODELS / "poisson_sigma3_drive.json", "--json"], capsys)[1])
    assert rep["s_infinity_classification"] == "singleton-maximally-mixed"
    rep = json.loads(run(["lasalle", "--model", MODELS / "gaussian_sigma3.json", "--json"], capsys)[1])
    assert rep["certified"] and rep["closed_form_max_deviation"] < 1e-10
    assert run(["lasalle", "--model", MODELS / "phase_damping.json"], capsys)[0] == 2
    code, out, _ = run(["lasalle", "--model", MODELS / "phase_damping.json", "--force", "--json"], capsys)
    assert code == 0 and json.loads(out)["certified"]
    # energy damping raises purity near the maximally mixed state
    code, _, err = run(["lasalle", "--model", MODELS / "energy_damping.json", "--force"], capsys)
    assert code == 3 and "offending sample" in err


def test_verify_command(capsys, tmp_path):
    code, out, _ = run(["verify", "--model", MODELS / "phase_damping.json", "--json",
                        "--out", tmp_path / "v.json"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert rep["negative_time"] == "not CP for tau<0"
    info = [c for c in rep["checks"] if c["informational"]]
    assert info and info[0]["value"] < 0
    assert json.loads((tmp_path / "v.json").read_text()) == rep


def test_bloch_plot(tmp_path, capsys):
    csv_path = tmp_path / "pd.csv"
    run(["simulate", "--model", MODELS / "phase_damping.json", "--x0", "0.6,0,0.8", "--t-end", 3,
         "--out", csv_path], capsys)
    svg1, svg2 = tmp_path / "a.svg", tmp_path / "b.svg"
    assert run(["bloch-plot", csv_path, "--out", svg1], capsys)[0] == 0
    assert run(["bloch-plot", csv_path, "--out", svg2], capsys)[0] == 0
    data = svg1.read_bytes()
    assert data == svg2.read_bytes()
    text = data.decode()
    assert 'version="1.1"' in text and text.count("<polyline") == 3 and text.count('class="start"') == 3
    # polyline ends on the x3 axis (x1 → 0.6 e^{-6}), drawn at the panel centre column
    assert 'class="end" x="166.' in text or 'class="end" x="165.' in text


def test_bloch_plot_constant_and_dimension(tmp_path, capsys):
    csv_path = tmp_path / "z.csv"
    run(["simulate", "--model", MODELS / "zero.json", "--x0", "0,0,0.5", "--t-end", 1, "--out", csv_path], capsys)
    svg = tmp_path / "z.svg"
    assert run(["bloch-plot", csv_path, "--out", svg], capsys)[0] == 0
    text = svg.read_text()
    assert "<polyline" not in text and text.count('class="marker"') == 3
    q = tmp_path / "q.csv"
    run(["simulate", "--model", MODELS / "random_unitary_qutrit.json", "--t-end", 0.2, "--out", q], capsys)
    assert run(["bloch-plot", q, "--out", tmp_path / "q.svg"], capsys)[0] == 3


def test_energy_damping_plot_reaches_north_pole(tmp_path, capsys):
    csv_path = tmp_path / "ed.csv"
    run(["simulate", "--model", MODELS / "energy_damping.json", "--x0", "0,0,-1", "--t-end", 4,
         "--out", csv_path], capsys)
    t = read_trajectory_csv(csv_path)
    assert t.points[-1, 2] == pytest.approx(1.0, abs=1e-6)
    assert run(["bloch-plot", csv_path], capsys)[0] == 0
    assert csv_path.with_suffix(".svg").exists()


def test_csv_round_trip(ctx):
    b, _ = ctx(2)
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(5, 3)) * 0.2
    tr = Trajectory(np.linspace(0, 1, 5), pts, 2)
    back = read_trajectory_csv(trajectory_csv(tr, b), is_text=True)
    np.testing.assert_allclose(back.points, pts, atol=1e-12, rtol=0)
    np.testing.assert_allclose(back.times, tr.times, atol=1e-12, rtol=0)


def test_model_parsing_rules():
    k = {"re": [[1, 0], [0, -1]]}
    with pytest.raises(Exception):
        parse_model({"n": 2, "kraus": [k], "semigroup": {"type": "gaussian", "vs": [k]}})
    with pytest.raises(Exception):
        parse_model({"n": 3, "basis_convention": "pauli", "kraus": [k]})
    with pytest.raises(InvariantError):
        parse_model({"n": 2, "semigroup": {"type": "poisson", "unitaries": [{"re": [[2, 0], [0, 1]]}]}})
    with pytest.raises(InvariantError):
        parse_model({"n": 2, "kraus": [k], "V": {"re": [[2, 0], [0, 1]]}})
    spec = parse_model({"n": 2, "kraus": [k], "V": {"re": [[1, 0], [0, 1]]}})
    assert spec.convention == "orthonormal"
    spec = parse_model({"n": 2, "semigroup": {"type": "weighted_poisson", "weights": [{"re": 0, "im": 1}],
                                               "unitaries": [k]}})
    assert spec.family.poisson_terms[0][0] == pytest.approx(1.0)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "geoflow.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "geoflow" in res.stdout
