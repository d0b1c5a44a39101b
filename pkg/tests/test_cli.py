import json

import numpy as np
import pandas as pd
import pytest

from alphacoda.cli import main

FAST = {"K": {"female": 2, "male": 2}}


def run(cfg, out, *args):
    return main([args[0], "--config", str(cfg), "--out", str(out), "--jobs", "1", *args[1:]])


def test_missing_config_file(tmp_path, capsys):
    assert run(tmp_path / "nope.json", tmp_path / "o", "forecast") == 2
    assert "nope.json" in capsys.readouterr().err


@pytest.mark.parametrize("fields, field", [
    ({"colour": "blue"}, "colour"),
    ({"K": {"female": 0}}, "K"),
    ({"countries": []}, "countries"),
    ({"transforms": ["alr"]}, "transforms"),
    ({"horizon": 0}, "horizon"),
])
def test_config_errors_name_path_and_field(make_config, tmp_path, capsys, fields, field):
    cfg = make_config(**fields)
    assert run(cfg, tmp_path / "o", "forecast") == 2
    err = capsys.readouterr().err
    assert str(cfg) in err and f"'{field}'" in err


def test_auto_alpha_requires_tuning(make_config, tmp_path, capsys):
    cfg = make_config(transforms=["alpha:auto"], **FAST)
    assert run(cfg, tmp_path / "o", "forecast") == 2
    assert "tune" in capsys.readouterr().err


def test_preprocess(make_config, tmp_path):
    out = tmp_path / "o"
    assert run(make_config(countries=["SYNB"]), out, "preprocess") == 0
    lt = pd.read_csv(out / "preprocess" / "SYNB_female_lifetable.csv")
    assert lt.groupby("year").dx.sum().sub(1).abs().max() < 1e-10
    assert lt.year.min() == 1983 and lt.year.max() == 2018
    summary = pd.read_csv(out / "preprocess" / "summary.csv")
    assert list(summary.country) == ["SYNB"]


def test_forecast_then_evaluate_matches_in_run(make_config, tmp_path):
    out = tmp_path / "o"
    cfg = make_config(transforms=["clr", "alpha:0.4"], model="default", **FAST)
    assert run(cfg, out, "forecast") == 0
    files = sorted(p.name for p in (out / "forecast").glob("*.csv"))
    assert files == ["SYNA_female_alpha-0.4_default.csv", "SYNA_female_clr_default.csv",
                     "SYNC_female_alpha-0.4_default.csv", "SYNC_female_clr_default.csv"]
    df = pd.read_csv(out / "forecast" / files[0])
    assert df[df.phase == "test"].year.unique().tolist() == list(range(2011, 2019))
    assert (out / "manifest_forecast.json").is_file()

    assert run(cfg, out, "evaluate") == 0
    errs = pd.read_csv(out / "evaluation" / "errors_all_models.csv", float_precision="round_trip")
    for path in (out / "forecast").glob("*.json"):
        art = json.loads(path.read_text())
        for phase in ("train", "test"):
            row = errs[(errs.country == art["country"]) & (errs["transform"] == art["transform"])
                       & (errs.phase == phase)].iloc[0]
            assert row.rmse == art["in_run_errors"][phase]["rmse"]
            assert row.mae == art["in_run_errors"][phase]["mae"]


def test_failures_are_collected(make_config, tmp_path, capsys):
    out = tmp_path / "o"
    cfg = make_config(countries=["SYNA", "NOWHERE", "SYNC"], transforms=["clr"], model="default", **FAST)
    assert run(cfg, out, "forecast") == 1
    assert "NOWHERE female" in capsys.readouterr().err
    assert (out / "forecast" / "SYNC_female_clr_default.csv").is_file()
    man = json.loads((out / "manifest_forecast.json").read_text())
    assert [f["country"] for f in man["failures"]] == ["NOWHERE"]


def test_tune_forecast_evaluate_report(make_config, tmp_path):
    out = tmp_path / "o"
    cfg = make_config(countries=["SYNA"], **FAST)
    assert run(cfg, out, "tune") == 0
    rep = pd.read_csv(out / "tuning" / "tuning_report.csv", float_precision="round_trip")
    alpha = rep.optimal_alpha.iloc[0]
    assert 0.0 <= alpha <= 1.0

    assert run(cfg, out, "forecast") == 0
    fc = pd.read_csv(out / "forecast" / "SYNA_female_alpha-auto_default.csv", float_precision="round_trip")
    assert np.all(fc.alpha == alpha)

    assert run(cfg, out, "evaluate") == 0
    best = pd.read_csv(out / "evaluation" / "errors_by_country.csv")
    assert sorted(best["transform"]) == ["alpha:auto", "clr"]
    overall = pd.read_csv(out / "evaluation" / "errors_overall.csv")
    assert set(overall.phase) == {"train", "test"}

    assert run(cfg, out, "report") == 0
    by_year = pd.read_csv(out / "report" / "mean_errors_by_year.csv")
    by_age = pd.read_csv(out / "report" / "mean_errors_by_age.csv")
    assert {"transform", "horizon", "rmse", "mae"} <= set(by_year.columns)
    assert {"transform", "age", "rmse", "mae"} <= set(by_age.columns)
    assert sorted(by_year.horizon.unique()) == list(range(1, 9))
    for name in ("errors_by_year_female.png", "errors_by_age_female.png", "dx_SYNA_female_2018.png"):
        assert (out / "report" / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_report_needs_evaluation(make_config, tmp_path):
    assert run(make_config(), tmp_path / "o", "report") == 2
