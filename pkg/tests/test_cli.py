import json

import pytest

from fampack.cli import main
from fampack.graph import Graph, format_graph

from conftest import gnp


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, g in {"k4": Graph.complete(4), "k6": Graph.complete(6), "k7": Graph.complete(7),
                    "c5": Graph.from_edges(5, [(i, (i + 1) % 5) for i in range(5)]),
                    "g40": gnp(40, 0.5, 0)}.items():
        p = tmp_path / f"{name}.g"
        p.write_text(format_graph(g))
        paths[name] = str(p)
    paths["dir"] = tmp_path
    return paths


def test_nu_star(files, capsys):
    assert main(["nu-star", files["k4"], "-F", "K3"]) == 0
    assert "nu_star = 2" in capsys.readouterr().out
    assert main(["nu-star", files["c5"]]) == 0
    assert "nu_star = 0" in capsys.readouterr().out
    out = files["dir"] / "k7.json"
    assert main(["nu-star", files["k7"], "--exact", "--json", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert obj["value"] == "7" and obj["manifest"]["command"] == "nu-star"
    assert "wall_clock" not in obj["manifest"]


def test_nu_star_float(files, capsys):
    assert main(["nu-star", files["k4"], "--float"]) == 0
    assert "nu_star = 2" in capsys.readouterr().out


def test_nu_exact(files, capsys):
    assert main(["nu-exact", files["k7"]]) == 0
    assert "nu = 7 (optimal" in capsys.readouterr().out
    assert main(["nu-exact", files["k6"]]) == 0
    assert "nu = 4 (optimal" in capsys.readouterr().out
    assert main(["nu-exact", files["g40"], "--budget", "1"]) == 3
    assert "lower-bound" in capsys.readouterr().out


def test_pipeline_and_verify(files, capsys):
    pk = files["dir"] / "p.pk"
    rep = files["dir"] / "r.json"
    cfg = files["dir"] / "cfg.json"
    cfg.write_text(json.dumps({"m_prime": 2, "factor": 2}))
    assert main(["pipeline", files["g40"], "--config", str(cfg), "--seed", "4", "--out", str(pk), "--report", str(rep)]) == 0
    capsys.readouterr()
    assert main(["verify", files["g40"], str(pk)]) == 0
    report = json.loads(rep.read_text())
    assert report["verified"] and report["manifest"]["seed"] == 4


def test_pipeline_prints_drawn_seed(files, capsys):
    assert main(["pipeline", files["g40"]]) == 0
    assert "seed = " in capsys.readouterr().err


def test_verify_rejects_corruption(files, capsys):
    bad = files["dir"] / "bad.pk"
    bad.write_text("0: 0 1 2\n0: 0 1 3\n")
    assert main(["verify", files["k4"], str(bad)]) == 1
    assert "share edge" in capsys.readouterr().out
    wrong = files["dir"] / "wrong.pk"
    wrong.write_text("0: 0 1 2\n")
    assert main(["verify", files["c5"], str(wrong)]) == 1
    unknown = files["dir"] / "unknown.pk"
    unknown.write_text("1: 0 1 2\n")
    assert main(["verify", files["k4"], str(unknown)]) == 1


def test_usage_errors(files, capsys):
    assert main(["nu-star", str(files["dir"] / "missing.g")]) == 2
    assert main(["nu-star", files["k4"], "-F", "K2"]) == 2
    bad = files["dir"] / "bad.g"
    bad.write_text("2 1\n0 0\n")
    assert main(["nu-star", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_cap_exit_code(files):
    assert main(["nu-star", files["k7"], "--cap", "3"]) == 3


def test_experiment(files, capsys):
    spec = files["dir"] / "e.json"
    spec.write_text(json.dumps({"model": "gnp:1/2", "family": "K3", "n": [8], "seeds": [0, 1]}))
    out = files["dir"] / "e.csv"
    assert main(["experiment", str(spec), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# manifest") and lines[1].startswith("n,seed,model")
    assert len(lines) == 4
    spec.write_text(json.dumps({"model": "bogus", "family": "K3", "n": [8], "seeds": [0]}))
    assert main(["experiment", str(spec)]) == 2
