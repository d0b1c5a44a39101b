"""Choosing alpha by expanding-window cross-validation on the training years."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import NegativeDetectionLimit, WrongLength
from .evaluation import rmse
from .pipeline import CodaLeeCarter, Transform

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class AllPenalized(UserWarning):
    """Every evaluated alpha hit a negative detection limit."""


@dataclass(frozen=True)
class TuningPlan:
    initial_train_len: int = 15
    validation_len: int = 4
    iterations: int = 10
    search_interval: tuple = (0.0, 1.0)
    grid_points: int = 21
    tol: float = 1e-4

    @property
    def total_years(self):
        return self.initial_train_len + self.validation_len + self.iterations - 1


def expanding_windows(years, plan=TuningPlan()):
    """``(sub_train_years, validation_years)`` pairs, the training block growing by one year."""
    years = list(years)
    if len(years) != plan.total_years:
        raise WrongLength(f"expected {plan.total_years} training years, got {len(years)}")
    out = []
    for i in range(plan.iterations):
        end = plan.initial_train_len + i
        out.append((years[:end], years[end:end + plan.validation_len]))
    return out


def window_errors(alpha, data, K, plan=TuningPlan()):
    """Validation RMSE (percent) per window; raises on negative detection limits."""
    tr = Transform("alpha", float(alpha))
    errs = []
    for sub, val in expanding_windows(data.years, plan):
        n = len(sub)
        model = CodaLeeCarter(tr, K=K, model="default", clamp=False).fit(data.head(n))
        fc = model.forecast(len(val))
        errs.append(rmse(data.values[n:n + len(val)], fc.values))
    return errs


def objective(alpha, data, K, plan=TuningPlan()):
    """Mean validation RMSE in percent, +inf when any window is infeasible."""
    try:
        errs = window_errors(alpha, data, K, plan)
    except NegativeDetectionLimit:
        return math.inf
    return float(np.mean(errs))


@dataclass
class TuningResult:
    optimal_alpha: float
    avg_validation_rmse: float
    per_iteration_rmse: list
    evaluations: int
    all_penalized: bool = False
    trace: list = field(default_factory=list, repr=False)

    def row(self, country="", gender=""):
        return {
            "country": country,
            "gender": gender,
            "optimal_alpha": self.optimal_alpha,
            "avg_validation_rmse": self.avg_validation_rmse,
            "evaluations": self.evaluations,
            "all_penalized": self.all_penalized,
        }


def optimize_alpha(data, K, plan=TuningPlan()):
    """Grid search on ``grid_points`` values, then golden-section refinement.

    The golden-section search runs on the bracket formed by the grid
    neighbours of the best grid point and stops once the bracket is narrower
    than ``plan.tol``.  The best alpha seen anywhere is returned, so the
    reported score is exactly its objective value.
    """
    lo, hi = plan.search_interval
    cache = {}

    def f(a):
        a = float(a)
        if a not in cache:
            cache[a] = objective(a, data, K, plan)
        return cache[a]

    grid = np.linspace(lo, hi, plan.grid_points)
    vals = [f(a) for a in grid]
    if not np.any(np.isfinite(vals)):
        warnings.warn("every alpha on the grid was infeasible; falling back to alpha=0", AllPenalized)
        errs = window_errors(0.0, data, K, plan)
        return TuningResult(0.0, float(np.mean(errs)), errs, len(cache), True,
                            sorted(cache.items()))

    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a >= plan.tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)

    # lowest objective, ties to the smaller alpha
    best = min(cache.items(), key=lambda kv: (kv[1], kv[0]))[0]
    errs = window_errors(best, data, K, plan)
    return TuningResult(best, float(np.mean(errs)), errs, len(cache), False, sorted(cache.items()))


def tuning_report(rows):
    cols = ["country", "gender", "optimal_alpha", "avg_validation_rmse", "evaluations", "all_penalized"]
    return pd.DataFrame(list(rows), columns=cols)
