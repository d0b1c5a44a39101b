"""Per-population jobs behind the command-line verbs.

Every job takes a config and a ``(country, gender)`` pair and returns plain
data (DataFrames, dicts); the caller does all file writing so outputs are
assembled in a fixed order whatever the completion order of the workers.
"""
from __future__ import annotations

import logging
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import arima
from .errors import CodaError, ConfigError
from .evaluation import breakdown, mae, model_select, rmse
from .hmd import build_grid, parse_hmd
from .lifetable import preprocess
from .pipeline import CodaLeeCarter, DeathMatrix, Transform, assemble
from .tuning import TuningPlan, optimize_alpha

log = logging.getLogger(__name__)

AUTO = "alpha:auto"


@dataclass(frozen=True)
class Task:
    country: str
    gender: str

    @property
    def key(self):
        return f"{self.country}_{self.gender}"


def tasks_for(cfg):
    return [Task(c, g) for c in cfg.countries for g in cfg.genders]


# running jobs

def _guard(args):
    fn, cfg, task, extra = args
    try:
        return True, fn(cfg, task, **extra)
    except (CodaError, OSError, ValueError, KeyError) as e:
        return False, f"{type(e).__name__}: {e}"


def _warm_up():
    # compile the ARIMA kernels once in the parent so forked workers inherit them
    arima.fit(np.cumsum(np.linspace(0.1, 1.0, 12) ** 2))


def run_tasks(fn, cfg, tasks, jobs=1, **extra):
    """Apply ``fn`` to every task; returns ``(ok, failures)`` in task order."""
    args = [(fn, cfg, t, extra) for t in tasks]
    jobs = max(1, min(int(jobs or 1), len(tasks) or 1))
    if jobs == 1:
        results = [_guard(a) for a in args]
    else:
        _warm_up()
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            results = list(pool.map(_guard, args))
    ok, failed = [], []
    for t, (good, res) in zip(tasks, results):
        if good:
            ok.append((t, res))
        else:
            log.error("%s %s failed: %s", t.country, t.gender, res)
            failed.append((t, res))
    return ok, failed


def default_jobs():
    return os.cpu_count() or 1


# loading

@dataclass
class Population:
    task: Task
    prep: object
    deaths: DeathMatrix
    n_train: int


def load_population(cfg, task):
    rpath, epath = cfg.paths(task.country)
    rates = parse_hmd(rpath, "rates")
    expo = parse_hmd(epath, "exposures")
    window = cfg.study_window
    grid = build_grid(rates, expo, task.gender, window, task.country)
    prep = preprocess(grid, train_last=window.train[1], fit_ages=tuple(cfg.kannisto_ages))
    return Population(task, prep, assemble(prep.tables), window.n_train)


# verbs

def job_preprocess(cfg, task):
    pop = load_population(cfg, task)
    df = pop.prep.to_frame()
    df.insert(0, "gender", task.gender)
    df.insert(0, "country", task.country)
    return {"lifetable": df, "a0": pop.prep.a0, "imputed_rows": pop.prep.imputed_rows}


def job_tune(cfg, task, plan=TuningPlan()):
    pop = load_population(cfg, task)
    train = pop.deaths.head(pop.n_train)
    res = optimize_alpha(train, cfg.K[task.gender], plan)
    trace = pd.DataFrame(res.trace, columns=["alpha", "objective"])
    return {"row": res.row(task.country, task.gender), "trace": trace,
            "per_iteration": res.per_iteration_rmse}


def resolve_transform(tag, task, tuned):
    if str(tag).lower() == AUTO:
        key = (task.country, task.gender)
        if tuned is None or key not in tuned:
            raise ConfigError(f"no tuned alpha for {task.country} {task.gender}: run 'tune' first")
        return Transform("alpha", float(tuned[key]))
    return Transform.parse(tag)


def transform_label(tag):
    return str(tag).lower().replace(":", "-")


def job_forecast(cfg, task, tuned=None, transforms=None, models=None, horizon=None):
    pop = load_population(cfg, task)
    train = pop.deaths.head(pop.n_train)
    h = cfg.horizon if horizon is None else horizon
    out = []
    for tag in transforms or cfg.transforms:
        tr = resolve_transform(tag, task, tuned)
        for model in models or cfg.models:
            m = CodaLeeCarter(tr, K=cfg.K[task.gender], model=model, clamp=True).fit(train)
            fit, fc = m.fitted(), m.forecast(h)
            frames = []
            for phase, block in (("train", fit), ("test", fc)):
                df = block.to_frame()
                df.insert(0, "phase", phase)
                frames.append(df)
            df = pd.concat(frames, ignore_index=True)
            meta = {"country": task.country, "gender": task.gender, "transform": str(tag).lower(),
                    "alpha": tr.alpha if tr.kind == "alpha" else None, "model": model}
            for k in ("model", "alpha", "transform", "gender", "country"):
                df.insert(0, k, meta[k])
            art = m.artifacts.to_dict()
            art.update(meta)
            art["n_clamped"] = {"train": int(fit.n_clamped), "test": int(fc.n_clamped)}
            art["in_run_errors"] = phase_errors(pop, df)
            out.append({"label": f"{task.key}_{transform_label(tag)}_{model}", "frame": df, "artifacts": art})
    return out


def _block(df, phase):
    sub = df[df.phase == phase]
    years = np.unique(sub.year.to_numpy())
    values = sub.dx.to_numpy().reshape(years.size, -1)
    return years, values


def _actual(pop, years):
    idx = np.searchsorted(pop.deaths.years, years)
    if np.any(pop.deaths.years[np.minimum(idx, pop.deaths.years.size - 1)] != years):
        raise ValueError(f"forecast years {years.tolist()} fall outside the data")
    return pop.deaths.values[idx]


def phase_errors(pop, df):
    out = {}
    for phase in ("train", "test"):
        years, pred = _block(df, phase)
        years = years[years <= pop.deaths.years[-1]]
        pred = pred[: years.size]
        act = _actual(pop, years)
        out[phase] = {"rmse": rmse(act, pred), "mae": mae(act, pred)}
    return out


def job_evaluate(cfg, task, forecast_dir):
    """Re-read saved forecast files for one population and score them."""
    pop = load_population(cfg, task)
    files = sorted(Path(forecast_dir).glob(f"{task.key}_*.csv"))
    if not files:
        raise FileNotFoundError(f"no forecast files for {task.key} in {forecast_dir}")
    summary, by_year, by_age = [], [], []
    for path in files:
        df = pd.read_csv(path, float_precision="round_trip", keep_default_na=False,
                         na_values={"alpha": [""]})
        tag, model, alpha = df["transform"].iloc[0], df["model"].iloc[0], df["alpha"].iloc[0]
        for phase in ("train", "test"):
            years, pred = _block(df, phase)
            keep = years <= pop.deaths.years[-1]
            years, pred = years[keep], pred[keep]
            act = _actual(pop, years)
            A = DeathMatrix(act, years)
            P = DeathMatrix(pred, years)
            row = {"country": task.country, "gender": task.gender, "transform": tag,
                   "alpha": alpha, "model": model, "phase": phase,
                   "rmse": rmse(A, P), "mae": mae(A, P)}
            summary.append(row)
            yb = breakdown(A, P, "year").reset_index()
            if phase == "test":
                yb.insert(1, "horizon", np.arange(1, len(yb) + 1))
            else:
                yb.insert(1, "horizon", years - years[-1])
            yb.insert(0, "jumpoff", years == years[-1] if phase == "train" else False)
            for k in ("phase", "model", "transform", "gender", "country"):
                yb.insert(0, k, row[k])
            by_year.append(yb)
            if phase == "test":
                ab = breakdown(A, P, "age").reset_index()
                for k in ("phase", "model", "transform", "gender", "country"):
                    ab.insert(0, k, row[k])
                by_age.append(ab)
    return {"summary": pd.DataFrame(summary), "by_year": pd.concat(by_year, ignore_index=True),
            "by_age": pd.concat(by_age, ignore_index=True)}


# aggregation across populations

def best_models(summary):
    """Pick the best model per (country, gender, transform) by test RMSE."""
    rows = []
    for (c, g, t), grp in summary.groupby(["country", "gender", "transform"], sort=True):
        test = grp[grp.phase == "test"].set_index("model")
        reports = {m: _Score(r) for m, r in test.rmse.items()}
        best = model_select(reports)
        pick = grp[grp.model == best].set_index("phase")
        rows.append({
            "country": c, "gender": g, "transform": t, "alpha": pick.alpha.iloc[0], "best_model": best,
            "train_rmse": pick.rmse["train"], "test_rmse": pick.rmse["test"],
            "train_mae": pick.mae["train"], "test_mae": pick.mae["test"],
        })
    return pd.DataFrame(rows)


@dataclass
class _Score:
    rmse: float


def overall_table(best):
    rows = []
    for (g, t), grp in best.groupby(["gender", "transform"], sort=True):
        for phase in ("train", "test"):
            rows.append({"gender": g, "transform": t, "phase": phase,
                         "rmse": grp[f"{phase}_rmse"].mean(), "mae": grp[f"{phase}_mae"].mean(),
                         "n_countries": len(grp), "weighting": "unweighted"})
    return pd.DataFrame(rows)


def restrict_to_best(long, best):
    keys = best[["country", "gender", "transform", "best_model"]].rename(columns={"best_model": "model"})
    return long.merge(keys, on=["country", "gender", "transform", "model"], how="inner")
