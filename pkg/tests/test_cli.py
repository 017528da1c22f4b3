import json
import math

import numpy as np
import pytest

from scatterqual import io as sio
from scatterqual.cli import main
from scatterqual.domain import ConvexDomain
from scatterqual.errors import InputError


@pytest.fixture
def pts_csv(tmp_path):
    P = np.random.default_rng(0).uniform(size=(200, 2))
    path = tmp_path / "pts.csv"
    sio.write_points_csv(path, P)
    return path


def run(args, out):
    return main(list(args) + ["--out", str(out)])


def test_distnorm_outputs_and_manifest(tmp_path, pts_csv):
    out = tmp_path / "o"
    assert run(["distnorm", "--points", str(pts_csv), "--gamma", "2"], out) == 0
    text = (out / "distnorm.csv").read_text().splitlines()
    assert text[0] == "method,gamma,value,lower,upper"
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == 0 and man["command"] == "distnorm"
    assert man["outputs"] == [str(out / "distnorm.csv")]
    assert man["version"] == sio.VERSION


@pytest.mark.parametrize("cmd", [
    ["distnorm", "--gamma", "inf"],
    ["subset", "--h", "0.1"],
    ["cover"],
    ["approx", "--function", "sine_product", "--q", "inf"],
    ["lower", "--q", "1", "--p", "2"],
    ["lower", "--q", "inf", "--p", "2", "--sample-mesh", "0.05"],
    ["quad", "--nu", "1.5", "--qmc-log2", "10"],
])
def test_point_commands_run_and_are_reproducible(tmp_path, pts_csv, cmd):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(cmd + ["--points", str(pts_csv)], a) == 0
    assert run(cmd + ["--points", str(pts_csv)], b) == 0
    for f in a.glob("*.csv"):
        assert f.read_bytes() == (b / f.name).read_bytes()


@pytest.mark.parametrize("cmd", [
    ["random-rates", "--n", "32,64", "--trials", "3"],
    ["limit-const", "--n", "64", "--trials", "3"],
    ["hole-demo", "--n", "64,256"],
    ["equiv", "--families", "grid", "--n", "256", "--q", "1", "--p", "2"],
    ["approx", "--n", "64,256", "--family", "grid"],
])
def test_experiment_commands(tmp_path, cmd):
    out = tmp_path / "o"
    assert run(cmd, out) == 0
    csvs = list(out.glob("*.csv"))
    assert len(csvs) == 1
    text = csvs[0].read_text()
    assert "# config_hash:" in text and "# seed: 0" in text


def test_unknown_flag_exits_1(tmp_path, capsys):
    assert run(["distnorm", "--gama", "2"], tmp_path) == 1
    assert "usage" in capsys.readouterr().err


def test_no_command_exits_1(capsys):
    assert main([]) == 1


def test_missing_points_exits_1(tmp_path, capsys):
    assert run(["distnorm"], tmp_path / "o") == 1
    assert "--points" in capsys.readouterr().err
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["exit_code"] == 1 and man["diagnostics"]


def test_missing_points_file_exits_1(tmp_path):
    assert run(["distnorm", "--points", str(tmp_path / "nope.csv")], tmp_path / "o") == 1


def test_numerical_failure_exits_2(tmp_path):
    path = tmp_path / "two.csv"
    sio.write_points_csv(path, [[0.05, 0.05], [0.1, 0.05]])
    assert run(["cover", "--points", str(path), "--c", "0.25"], tmp_path / "o") == 2


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("# comment\ngammma = 2\n")
    assert run(["random-rates", "--config", str(cfg)], tmp_path / "o") == 1
    err = capsys.readouterr().err
    assert "bad.cfg:2" in err and "gammma" in err


def test_config_malformed_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("trials 3\n")
    with pytest.raises(InputError, match=":1:"):
        sio.load_config(cfg)


def test_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed = 7\ntrials = 2\nn = 32, 64\n")
    monkeypatch.setenv("SCATTERQUAL_SEED", "3")
    out = tmp_path / "env"
    assert run(["random-rates", "--n", "32,64", "--trials", "2"], out) == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 3
    out = tmp_path / "cfg"
    assert run(["random-rates", "--config", str(cfg)], out) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 7 and man["config"]["trials"] == 2
    out = tmp_path / "flag"
    assert run(["random-rates", "--config", str(cfg), "--seed", "11"], out) == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 11


def test_seed_changes_random_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(["random-rates", "--n", "32,64", "--trials", "2", "--seed", "1"], a)
    run(["random-rates", "--n", "32,64", "--trials", "2", "--seed", "2"], b)
    assert (a / "random_rates.csv").read_text() != (b / "random_rates.csv").read_text()


def test_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(["random-rates", "--n", "32,64", "--trials", "4"], a)
    run(["random-rates", "--n", "32,64", "--trials", "4", "--threads", "4"], b)
    assert (a / "random_rates.csv").read_bytes() == (b / "random_rates.csv").read_bytes()


def test_replay(tmp_path, pts_csv):
    out = tmp_path / "first"
    assert run(["distnorm", "--points", str(pts_csv)], out) == 0
    again = tmp_path / "again"
    assert main(["replay", str(out / "manifest.json"), "--out", str(again)]) == 0
    assert (out / "distnorm.csv").read_bytes() == (again / "distnorm.csv").read_bytes()
    assert main(["replay", str(tmp_path / "missing.json")]) == 1


def test_subset_header_option(tmp_path, pts_csv):
    run(["subset", "--points", str(pts_csv), "--h", "0.2"], tmp_path / "plain")
    run(["subset", "--points", str(pts_csv), "--h", "0.2", "--header"], tmp_path / "head")
    plain = (tmp_path / "plain" / "subset.csv").read_text().splitlines()
    head = (tmp_path / "head" / "subset.csv").read_text().splitlines()
    assert head[0] == "x1,x2" and head[1:] == plain
    # both forms read back
    assert sio.read_points_csv(tmp_path / "head" / "subset.csv").n == len(plain)


def test_read_points_csv_errors(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("0.1,0.2\n0.3\n")
    with pytest.raises(InputError, match="row 2"):
        sio.read_points_csv(p)
    p.write_text("x1,x2\n")
    with pytest.raises(InputError):
        sio.read_points_csv(p)


@pytest.mark.parametrize("text,dim,vol", [
    ("box(0,1)^2", 2, 1.0),
    ("box(0,1)x(0,2)", 2, 2.0),
    ("cube^3", 3, 1.0),
    ("ball(0.5)^2", 2, math.pi * 0.25),
    ("simplex^2", 2, 0.5),
])
def test_parse_domain(text, dim, vol):
    dom = sio.parse_domain(text)
    assert dom.dim == dim
    assert dom.volume() == pytest.approx(vol, rel=1e-2)


@pytest.mark.parametrize("text", ["torus^2", "box(0,1)x", "ball^2", "box[0,1]"])
def test_parse_domain_rejects(text):
    with pytest.raises(InputError):
        sio.parse_domain(text)


def test_manifest_roundtrip(tmp_path):
    m = sio.RunManifest("cover", ["cover"], {"c": 0.5}, 3)
    m.write(tmp_path / "m.json")
    assert sio.RunManifest.read(tmp_path / "m.json") == m
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(InputError):
        sio.RunManifest.read(tmp_path / "bad.json")


def test_atomic_write_leaves_no_temp(tmp_path):
    sio.atomic_write(tmp_path / "sub" / "f.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]


def test_domain_matches_constructor():
    dom = sio.parse_domain("box(-1,1)^2")
    ref = ConvexDomain.box([-1, -1], [1, 1])
    assert np.array_equal(dom.bounding_box[0], ref.bounding_box[0])
