import json

import numpy as np
import pytest

from stackgibbs.cli import dispatch, load_forecasts, read_config

FAST = ["--draws", "1500", "--burn-in", "500"]


@pytest.fixture
def files(tmp_path):
    f = tmp_path / "forecasts.csv"
    f.write_text("component,mu,sigma\na,0,1\nb,3,1\n")
    t = tmp_path / "truth.csv"
    y = np.random.default_rng(0).normal(0.2, 1.0, size=30)
    t.write_text("y\n" + "".join(f"{v}\n" for v in y))
    return f, t


def test_fit_eqw_prints_quarters(capsys):
    assert dispatch(["fit", "--method", "eqw", "--components", "4"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["component,weight"] + [f"c{j},0.25" for j in range(1, 5)]


def test_unknown_subcommand_exits_one(capsys):
    assert dispatch(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()
    assert dispatch([]) == 1


def test_missing_file_exits_two(tmp_path):
    assert dispatch(["score", "--forecasts", str(tmp_path / "nope.csv"), "--truth", "x.csv"]) == 2


def test_validation_error_exits_one(files, capsys):
    f, t = files
    assert dispatch(["score", "--forecasts", str(f), "--truth", str(t), "--rule", "brier"]) == 1
    assert "invalid input" in capsys.readouterr().err


def test_score_closed_form_and_pool(files, tmp_path):
    f, t = files
    out = tmp_path / "s"
    assert dispatch(["score", "--forecasts", str(f), "--truth", str(t), "--rule", "crps,logs",
                     "--weights", "0.5,0.5", "--out", str(out)]) == 0
    lines = (out / "scores.csv").read_text().splitlines()
    assert len(lines) == 1 + 30 * 2 * 3
    assert (out / "score_manifest.json").exists()


def test_fit_sgp_prefers_closer_component(files, capsys):
    f, t = files
    assert dispatch(["fit", "--method", "sgp", "--forecasts", str(f), "--truth", str(t), "--eta", "15", *FAST]) == 0
    rows = dict(line.split(",") for line in capsys.readouterr().out.splitlines()[1:])
    assert float(rows["a"]) > float(rows["b"])


def test_simulate_deterministic_and_replay(tmp_path):
    args = ["simulate", "dynamic", "--replicates", "1", "--seed", "7", "--methods", "sgp,eqw",
            "--draws", "600", "--burn-in", "200", "--set", "T=6", "--threads", "1"]
    assert dispatch(args + ["--out", str(tmp_path / "a")]) == 0
    assert dispatch(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("dynamic_long.csv", "dynamic_summary.csv", "dynamic_pit_histogram.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "simulate_manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["command"] == "simulate"
    assert dispatch(["replay", str(tmp_path / "a" / "simulate_manifest.json"), "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "a" / "dynamic_long.csv").read_bytes() == (tmp_path / "c" / "dynamic_long.csv").read_bytes()


def test_config_file_and_flag_precedence(files, tmp_path):
    f, t = files
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# tuning\nforecasts = {f}\ntruth = {t}\ngrid = 1,2\nfolds = 2\ndraws = 1500\nburn_in = 500\n")
    out = tmp_path / "tune"
    assert dispatch(["tune-eta", "--config", str(cfg), "--grid", "3", "--out", str(out)]) == 0
    rows = (out / "tune_eta.csv").read_text().splitlines()
    assert rows[0] == "eta,cv_crps" and len(rows) == 2 and rows[1].startswith("3.0,")
    assert read_config(cfg)["folds"] == "2"


def test_unknown_config_key(files, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    assert dispatch(["fit", "--method", "eqw", "--components", "2", "--config", str(cfg)]) == 1


def test_hub_synthetic_outputs(tmp_path):
    out = tmp_path / "hub"
    code = dispatch(["hub", "--synthetic", "--set", "weeks=4", "--set", "n_locations=1", "--set", "n_teams=3",
                     "--methods", "eqw,avs", "--n-mc", "200", "--threads", "1", "--out", str(out)])
    assert code == 0
    for name in ("synthetic_forecasts.csv", "synthetic_truth.csv", "hub_scores.csv", "hub_weights.csv",
                 "hub_location_means.csv", "hub_week_means.csv", "hub_ranks.csv", "hub_manifest.json"):
        assert (out / name).exists(), name


def test_hub_requires_inputs():
    assert dispatch(["hub"]) == 1


def test_diagnose_needs_two_chains(files):
    f, t = files
    assert dispatch(["diagnose", "--forecasts", str(f), "--truth", str(t), "--chains", "1", *FAST]) == 1


def test_load_forecasts_layouts(tmp_path):
    p = tmp_path / "q.csv"
    p.write_text("t,component,prob,value\n1,a,0.25,-1\n1,a,0.5,0\n1,a,0.75,1\n2,a,0.25,0\n2,a,0.5,1\n2,a,0.75,2\n")
    times, names, comps = load_forecasts(p)
    assert times == ["1", "2"] and names == ["a"]
    assert comps[1][0].ppf(0.5) == pytest.approx(1.0)
    bad = tmp_path / "bad.csv"
    bad.write_text("component,foo\na,1\n")
    with pytest.raises(ValueError, match="need columns"):
        load_forecasts(bad)
