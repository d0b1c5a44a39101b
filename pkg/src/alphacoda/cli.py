"""Command-line front end: preprocess, tune, forecast, evaluate, report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from . import batch
from .config import MODELS, load_config, validate
from .errors import CodaError, ConfigError
from .plots import dx_panel, error_panels
from .tuning import tuning_report

log = logging.getLogger("alphacoda")

VERBS = ("preprocess", "tune", "forecast", "evaluate", "report")


def write_csv(df, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n")


def read_csv(path):
    return pd.read_csv(path, float_precision="round_trip", keep_default_na=False,
                       na_values={"alpha": [""]})


def write_json(obj, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _split(s):
    return [x.strip() for x in s.split(",") if x.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="alphacoda", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        s = sub.add_parser(verb)
        s.add_argument("--config", help="JSON run config (default: built-in 31-population list)")
        s.add_argument("--countries", help="comma-separated country codes overriding the config")
        s.add_argument("--gender", choices=["female", "male", "both"])
        s.add_argument("--transform", help="comma list of clr, ilr, alpha:<value>, alpha:auto")
        s.add_argument("--model", choices=MODELS)
        s.add_argument("--horizon", type=int, default=None, help="forecast horizon (default 8)")
        s.add_argument("--jobs", type=int, default=None, help="parallel populations (default: all cores)")
        s.add_argument("--out", default="results", help="output directory")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve(args):
    cfg = load_config(args.config)
    if args.countries:
        cfg.countries = _split(args.countries)
    if args.gender:
        cfg.genders = ["female", "male"] if args.gender == "both" else [args.gender]
    if args.transform:
        cfg.transforms = _split(args.transform)
    if args.model:
        cfg.model = args.model
    if args.horizon is not None:
        cfg.horizon = args.horizon
    return validate(cfg)


def manifest(verb, cfg, jobs, failures, extra=None):
    m = {
        "alphacoda_version": __version__,
        "command": verb,
        "config": cfg.to_dict(),
        "jobs": jobs,
        "failures": [{"country": t.country, "gender": t.gender, "error": e} for t, e in failures],
    }
    m.update(extra or {})
    return m


# verbs

def do_preprocess(cfg, out, jobs):
    ok, failed = batch.run_tasks(batch.job_preprocess, cfg, batch.tasks_for(cfg), jobs)
    rows = []
    for t, res in ok:
        write_csv(res["lifetable"], out / "preprocess" / f"{t.key}_lifetable.csv")
        rows.append({"country": t.country, "gender": t.gender, "a0": res["a0"],
                     "imputed_years": " ".join(str(y) for y in res["imputed_rows"])})
    write_csv(pd.DataFrame(rows, columns=["country", "gender", "a0", "imputed_years"]),
              out / "preprocess" / "summary.csv")
    return failed, {}


def do_tune(cfg, out, jobs):
    ok, failed = batch.run_tasks(batch.job_tune, cfg, batch.tasks_for(cfg), jobs)
    rows = []
    for t, res in ok:
        rows.append(res["row"])
        write_csv(res["trace"], out / "tuning" / f"{t.key}_trace.csv")
    write_csv(tuning_report(rows), out / "tuning" / "tuning_report.csv")
    return failed, {}


def load_tuned(out):
    path = out / "tuning" / "tuning_report.csv"
    if not path.is_file():
        return None
    df = read_csv(path)
    return {(r.country, r.gender): float(r.optimal_alpha) for r in df.itertuples()}


def do_forecast(cfg, out, jobs):
    tuned = load_tuned(out)
    if any(str(t).lower() == batch.AUTO for t in cfg.transforms) and tuned is None:
        raise ConfigError(f"transform alpha:auto needs {out / 'tuning' / 'tuning_report.csv'}: run 'tune' first")
    ok, failed = batch.run_tasks(batch.job_forecast, cfg, batch.tasks_for(cfg), jobs, tuned=tuned)
    for t, items in ok:
        for item in items:
            write_csv(item["frame"], out / "forecast" / f"{item['label']}.csv")
            write_json(item["artifacts"], out / "forecast" / f"{item['label']}.json")
    return failed, {"tuned_alpha": {f"{c}_{g}": a for (c, g), a in sorted((tuned or {}).items())}}


def do_evaluate(cfg, out, jobs):
    fdir = out / "forecast"
    if not fdir.is_dir():
        raise ConfigError(f"{fdir} not found: run 'forecast' first")
    ok, failed = batch.run_tasks(batch.job_evaluate, cfg, batch.tasks_for(cfg), jobs, forecast_dir=str(fdir))
    if not ok:
        return failed, {}
    summary = pd.concat([r["summary"] for _, r in ok], ignore_index=True)
    by_year = pd.concat([r["by_year"] for _, r in ok], ignore_index=True)
    by_age = pd.concat([r["by_age"] for _, r in ok], ignore_index=True)
    best = batch.best_models(summary)
    edir = out / "evaluation"
    write_csv(summary, edir / "errors_all_models.csv")
    write_csv(best, edir / "errors_by_country.csv")
    write_csv(batch.overall_table(best), edir / "errors_overall.csv")
    write_csv(batch.restrict_to_best(by_year, best), edir / "errors_by_year.csv")
    write_csv(batch.restrict_to_best(by_age, best), edir / "errors_by_age.csv")
    return failed, {}


def job_report_dx(cfg, task, forecast_dir, best):
    pop = batch.load_population(cfg, task)
    year = int(pop.deaths.years[-1])
    row_obs = pop.deaths.values[-1]
    curves = []
    for r in best:
        path = Path(forecast_dir) / f"{task.key}_{batch.transform_label(r['transform'])}_{r['best_model']}.csv"
        df = read_csv(path)
        sub = df[(df.phase == "test") & (df.year == year)]
        if len(sub):
            curves.append((r["transform"], sub.dx.to_numpy()))
    return year, pop.deaths.ages, row_obs, curves


def do_report(cfg, out, jobs):
    edir, rdir = out / "evaluation", out / "report"
    needed = ["errors_by_country.csv", "errors_by_year.csv", "errors_by_age.csv"]
    for name in needed:
        if not (edir / name).is_file():
            raise ConfigError(f"{edir / name} not found: run 'evaluate' first")
    best = read_csv(edir / "errors_by_country.csv")
    by_year = read_csv(edir / "errors_by_year.csv")
    by_age = read_csv(edir / "errors_by_age.csv")

    # mean errors across populations, one value per transform and horizon / age
    test_year = by_year[by_year.phase == "test"]
    fig_year = (test_year.groupby(["gender", "transform", "horizon"], sort=True)
                .agg(year=("year", "min"), rmse=("rmse", "mean"), mae=("mae", "mean")).reset_index())
    fig_age = (by_age.groupby(["gender", "transform", "age"], sort=True)[["rmse", "mae"]]
               .mean().reset_index())
    write_csv(fig_year, rdir / "mean_errors_by_year.csv")
    write_csv(fig_age, rdir / "mean_errors_by_age.csv")
    for g, grp in fig_year.groupby("gender", sort=True):
        error_panels(grp, "horizon", rdir / f"errors_by_year_{g}.png", f"Mean forecast errors over years ({g})")
    for g, grp in fig_age.groupby("gender", sort=True):
        error_panels(grp, "age", rdir / f"errors_by_age_{g}.png", f"Mean forecast errors by age ({g})")

    tasks = [t for t in batch.tasks_for(cfg)
             if ((best.country == t.country) & (best.gender == t.gender)).any()]
    picks = {t.key: best[(best.country == t.country) & (best.gender == t.gender)].to_dict("records")
             for t in tasks}
    failed = []
    for t in tasks:
        ok, bad = batch.run_tasks(job_report_dx, cfg, [t], 1, forecast_dir=str(out / "forecast"),
                                  best=picks[t.key])
        failed += bad
        for _, (year, ages, obs, curves) in ok:
            dx_panel(ages, obs, curves, rdir / f"dx_{t.key}_{year}.png", f"{t.country} {t.gender}, {year}")
    return failed, {}


HANDLERS = {
    "preprocess": do_preprocess,
    "tune": do_tune,
    "forecast": do_forecast,
    "evaluate": do_evaluate,
    "report": do_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        jobs = args.jobs if args.jobs else batch.default_jobs()
        failed, extra = HANDLERS[args.verb](cfg, out, jobs)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except CodaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    write_json(manifest(args.verb, cfg, jobs, failed, extra), out / f"manifest_{args.verb}.json")
    n = len(batch.tasks_for(cfg))
    if failed:
        print(f"{args.verb}: {len(failed)} of {n} populations failed:", file=sys.stderr)
        for t, err in failed:
            print(f"  {t.country} {t.gender}: {err}", file=sys.stderr)
        return 1
    print(f"{args.verb}: {n} populations done, outputs in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
