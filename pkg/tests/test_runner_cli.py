import json

import pytest

from boolperc.cli import main
from boolperc.runner import (
    EXIT_CONFIG,
    EXIT_OK,
    PLOT_HEADER,
    SERIES_FILES,
    emit_plot_data,
    run_experiment,
)


def doc(kind, process="poisson", seed=3, n=6, **params):
    return {"experiment_kind": kind, "process": {"name": process}, "master_seed": seed,
            "n_samples": n, "params": params}


def test_sample_smoke(tmp_path):
    status, res = run_experiment(doc("sample", half_width=4.0, n=2), tmp_path)
    assert status == EXIT_OK
    csvs = sorted(tmp_path.glob("points_*.csv"))
    assert csvs and csvs[0].read_text().splitlines()[0] == "x,y"
    metas = sorted(tmp_path.glob("points_*.json"))
    assert metas and "window" in json.loads(metas[0].read_text())
    assert (tmp_path / "results.json").exists() and (tmp_path / "config.resolved.json").exists()


def _strip(text):
    d = json.loads(text)
    d.pop("wall_time")
    return d


@pytest.mark.parametrize("kind,params", [
    ("percolate", {"r_values": [0.5, 0.7], "L": 6.0}),
    ("hole", {"theta": 2.0, "L_list": [1, 2], "R_list": [1.0]}),
])
def test_results_independent_of_threads(tmp_path, kind, params):
    d = doc(kind, process="gaf", n=8, **params)
    run_experiment(d, tmp_path / "a", threads=1)
    run_experiment(d, tmp_path / "b", threads=8)
    assert _strip((tmp_path / "a" / "results.json").read_text()) == \
        _strip((tmp_path / "b" / "results.json").read_text())
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_discr2_rejection_carries_constraint(tmp_path):
    status, err = run_experiment(doc("verify-discr2", theta=1.0, k=1, L=2, r=0.5), tmp_path)
    assert status == EXIT_CONFIG
    assert err["error_type"] == "precondition"
    assert any(e.get("constraint") == "r < theta/(18k)" for e in err["errors"])
    assert (tmp_path / "error.json").exists()


def test_plot_csv_headers(tmp_path):
    run_experiment(doc("percolate", r_values=[0.4, 0.8], L=5.0), tmp_path)
    files = sorted(tmp_path.glob("*.csv"))
    assert files
    for f in files:
        assert f.name in {name for name, _ in SERIES_FILES.values()}
        assert f.read_text().splitlines()[0] == ",".join(PLOT_HEADER)


@pytest.mark.parametrize("bad", [{}, None, {"experiment_kind": "rc"}])
def test_emit_plot_data_needs_results(tmp_path, bad):
    with pytest.raises(ValueError):
        emit_plot_data(bad, tmp_path)


def test_cli_ok(tmp_path, capsys):
    code = main(["percolate", "--out", str(tmp_path), "--seed", "1", "--replicas", "4"])
    # percolate needs r_values, so the defaults alone are rejected
    assert code == EXIT_CONFIG
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc("percolate", r_values=[0.6], L=5.0)))
    capsys.readouterr()
    code = main(["percolate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == EXIT_OK
    assert json.loads(capsys.readouterr().out)["status"] == "ok"


def test_cli_kind_mismatch(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc("sample")))
    assert main(["rc", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
