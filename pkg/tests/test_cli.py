import json

import numpy as np
import pytest

from isonet import generators as gen
from isonet.cli import DEFAULT_TOL, KINDS, cmd_generate, cmd_verify, main, resolve_tol
from isonet.errors import SchemaError
from isonet.net import QuadNet
from isonet.netfile import (NetFile, ball_points, dumps, obj_text, read_netfile, write_netfile)


@pytest.fixture
def cylinder_file(tmp_path, cylinder):
    net, P = cylinder
    return write_netfile(tmp_path / "cyl.json", NetFile(net, cq=P, provenance={"kind": "cylinder"}))


# ---------------------------------------------------------------- net files


def test_json_round_trip_is_exact(tmp_path, cylinder):
    net, P = cylinder
    rng = np.random.default_rng(7)
    V = net.vertices + rng.normal(size=net.vertices.shape) * 1e-3
    nf = NetFile(QuadNet(V, a_h=net.a_h, a_v=net.a_v), cq=P, provenance={"seed": 7})
    path = write_netfile(tmp_path / "a.json", nf)
    back = read_netfile(path)
    assert np.array_equal(back.net.vertices, nf.net.vertices)
    assert np.array_equal(back.net.a_h, nf.net.a_h)
    assert np.array_equal(back.cq.coeffs, P.coeffs)
    assert dumps(back.to_dict()) == path.read_text()


def test_special_floats_survive():
    text = dumps({"x": [float("nan"), float("inf"), -float("inf"), 0.1]})
    d = json.loads(text)
    assert np.isnan(d["x"][0]) and d["x"][1] == float("inf") and d["x"][3] == 0.1


def test_bad_schema_version(tmp_path, cylinder_file):
    d = json.loads(cylinder_file.read_text())
    d["schema_version"] = 99
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    with pytest.raises(SchemaError):
        read_netfile(bad)


def test_bad_format_and_shape(cylinder_file):
    d = json.loads(cylinder_file.read_text())
    with pytest.raises(SchemaError):
        NetFile.from_dict(dict(d, format="something-else"))
    with pytest.raises(SchemaError):
        NetFile.from_dict(dict(d, shape=[1, 1]))
    d["conserved"]["order"] = 3
    with pytest.raises(SchemaError):
        NetFile.from_dict(d)


def test_invalid_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        read_netfile(p)


def test_obj_single_quad():
    net = gen.planar_grid(2, 2)
    lines = obj_text(net).splitlines()
    verts = [ln for ln in lines if ln.startswith("v ")]
    faces = [ln for ln in lines if ln.startswith("f ")]
    assert len(verts) == 4 and faces == ["f 1 3 4 2"]
    assert verts[1] == "v 0 1 0"


def test_ball_points_inside_unit_ball():
    b = gen.bryant_net(gen.dhf_linear(0.2, 5, 5, -2, -2), 0.3)
    P = ball_points(b.net.vertices, -1.0)
    assert np.all(np.linalg.norm(P, axis=-1) < 1.0)
    # points of the outer copy are inverted back into the ball
    outer = np.array([[[3.0, 0.0, 0.0]]])
    assert np.allclose(ball_points(outer, -1.0), [[[1 / 3, 0, 0]]])
    with pytest.raises(ValueError):
        ball_points(outer, 0.0)


# --------------------------------------------------------------- tolerances


def test_tolerance_precedence(monkeypatch):
    monkeypatch.delenv("ISONET_TOL", raising=False)
    assert resolve_tol(None) == DEFAULT_TOL
    assert resolve_tol(None, {"tol": 1e-6}) == 1e-6
    monkeypatch.setenv("ISONET_TOL", "1e-7")
    assert resolve_tol(None, {"tol": 1e-6}) == 1e-7
    assert resolve_tol(1e-5, {"tol": 1e-6}) == 1e-5


def test_bad_env_tolerance(monkeypatch, tmp_path, cylinder_file, capsys):
    monkeypatch.setenv("ISONET_TOL", "tight")
    with pytest.raises(SystemExit) as exc:
        main(["verify", str(cylinder_file)])
    assert exc.value.code == 2


def test_config_file(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("ISONET_TOL", raising=False)
    cfg = tmp_path / "enn.cfg"
    cfg.write_text("# small Enneper patch\nn = 5\nrows = 6\nc = 0.1  # scale\n")
    assert main(["generate", "minimal-enneper", "--config", str(cfg), "--out", str(tmp_path / "e")]) == 0
    nf = read_netfile(tmp_path / "e.json")
    assert nf.net.shape == (5, 6)
    assert (tmp_path / "e.obj").exists()
    # flags override the file
    main(["generate", "minimal-enneper", "--config", str(cfg), "--n", "7", "--out", str(tmp_path / "f"),
          "--format", "json"])
    assert read_netfile(tmp_path / "f.json").net.shape == (7, 6)
    assert not (tmp_path / "f.obj").exists()


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "x.cfg"
    cfg.write_text("wobble = 3\n")
    with pytest.raises(SystemExit) as exc:
        main(["generate", "planar-grid", "--config", str(cfg), "--out", str(tmp_path / "g")])
    assert exc.value.code == 2


# ----------------------------------------------------------------- commands


@pytest.mark.parametrize("kind", KINDS)
def test_generate_and_verify_every_kind(kind):
    nf = cmd_generate(kind, {})
    rows = cmd_verify(nf)
    assert rows
    assert all(r["status"] != "fail" for r in rows), rows


def test_unknown_kind():
    with pytest.raises(SystemExit) as exc:
        main(["generate", "klein-bottle", "--out", "x"])
    assert exc.value.code == 2


def test_verify_reports_pass(cylinder_file, capsys):
    assert main(["verify", str(cylinder_file), "--report", "json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["ok"]
    names = [r["check"] for r in rep["checks"]]
    assert {"isothermic", "moutard", "christoffel", "cq"} <= set(names)


def test_verify_perturbed_file_fails(tmp_path, cylinder, capsys):
    net, _ = cylinder
    V = net.vertices.copy()
    V[2, 3] += [0.0, 0.0, 0.05]
    path = write_netfile(tmp_path / "p.json", NetFile(QuadNet(V)))
    assert main(["verify", str(path), "--checks", "isothermic", "--report", "json"]) == 1
    row = json.loads(capsys.readouterr().out)["checks"][0]
    assert row["status"] == "fail"
    m, n = row["worst"]
    assert m in (1, 2) and n in (2, 3)


def test_verify_unknown_check(cylinder_file):
    with pytest.raises(SystemExit):
        main(["verify", str(cylinder_file), "--checks", "vibes"])


def test_transform_chain(tmp_path, cylinder_file, capsys):
    out = tmp_path / "cal.json"
    assert main(["transform", str(cylinder_file), "calapso", "--lambda", "0.2", "--out", str(out)]) == 0
    nf = read_netfile(out)
    assert nf.provenance["chain"][-1]["transform"] == "calapso"
    assert main(["verify", str(out)]) == 0
    out2 = tmp_path / "chr.json"
    assert main(["transform", str(cylinder_file), "christoffel", "--out", str(out2)]) == 0
    assert main(["verify", str(out2)]) == 0


def test_darboux_transform_needs_parameters(tmp_path, capsys):
    path = write_netfile(tmp_path / "g.json", NetFile(gen.planar_grid(4, 4)))
    with pytest.raises(SystemExit):
        main(["transform", str(path), "darboux", "--out", str(tmp_path / "d.json")])
    assert main(["transform", str(path), "darboux", "--mu", "0.3", "--fhat", "0.5,0.5,1",
                 "--out", str(tmp_path / "d.json")]) == 0
    assert main(["verify", str(tmp_path / "d.json"), "--checks", "isothermic"]) == 0


def test_export_import_verify_identical(tmp_path, cylinder_file, capsys):
    main(["verify", str(cylinder_file), "--report", "json"])
    first = capsys.readouterr().out
    copy = tmp_path / "copy.json"
    assert main(["export", str(cylinder_file), "--format", "json", "--out", str(copy)]) == 0
    main(["verify", str(copy), "--report", "json"])
    assert capsys.readouterr().out == first
    assert copy.read_text() == cylinder_file.read_text()


def test_export_obj_to_stdout(cylinder_file, capsys):
    assert main(["export", str(cylinder_file)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# isonet net 5 x 9")
    assert sum(1 for ln in out.splitlines() if ln.startswith("f ")) == 4 * 8


def test_export_poincare(tmp_path, capsys):
    main(["generate", "bryant-enneper-cousin", "--out", str(tmp_path / "b")])
    capsys.readouterr()
    assert main(["export", str(tmp_path / "b.json"), "--poincare"]) == 0
    pts = np.array([[float(x) for x in ln.split()[1:]] for ln in capsys.readouterr().out.splitlines()
                    if ln.startswith("v ")])
    assert np.all(np.linalg.norm(pts, axis=1) < 1.0)


def test_missing_file_is_an_error(tmp_path, capsys):
    assert main(["verify", str(tmp_path / "none.json")]) == 2
    assert "error" in capsys.readouterr().err
