"""Point-forecast accuracy on d_x, in percent of the (unit) radix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ShapeMismatch

PCT = 100.0


def _as_array(m):
    return np.asarray(getattr(m, "values", m), dtype=float)


def _pair(actual, predicted):
    a, p = _as_array(actual), _as_array(predicted)
    if a.shape != p.shape:
        raise ShapeMismatch(f"actual {a.shape} vs predicted {p.shape}")
    for attr in ("years", "ages"):
        ya, yp = getattr(actual, attr, None), getattr(predicted, attr, None)
        if ya is not None and yp is not None and not np.array_equal(ya, yp):
            raise ShapeMismatch(f"{attr} labels differ")
    return a, p


def rmse(actual, predicted):
    a, p = _pair(actual, predicted)
    return float(np.sqrt(np.mean((PCT * (p - a)) ** 2)))


def mae(actual, predicted):
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(PCT * (p - a))))


def breakdown(actual, predicted, axis="year"):
    """Per-slice RMSE and MAE.

    ``axis`` is ``"year"`` (one row per matrix row) or ``"age"`` for a
    single pair of matrices.  For ``"country"`` pass dicts keyed by country.
    """
    if axis == "country":
        if set(actual) != set(predicted):
            raise ShapeMismatch("country sets differ")
        rows = [(c, rmse(actual[c], predicted[c]), mae(actual[c], predicted[c])) for c in sorted(actual)]
        return pd.DataFrame(rows, columns=["country", "rmse", "mae"]).set_index("country")
    a, p = _pair(actual, predicted)
    e = PCT * (p - a)
    if axis == "year":
        idx = getattr(actual, "years", np.arange(a.shape[0]))
        ax, name = 1, "year"
    elif axis == "age":
        idx = getattr(actual, "ages", np.arange(a.shape[1]))
        ax, name = 0, "age"
    else:
        raise ValueError(f"axis must be 'year', 'age' or 'country', got {axis!r}")
    df = pd.DataFrame({
        name: np.asarray(idx),
        "rmse": np.sqrt(np.mean(e**2, axis=ax)),
        "mae": np.mean(np.abs(e), axis=ax),
    })
    return df.set_index(name)


@dataclass
class ErrorReport:
    rmse: float
    mae: float
    by_year: pd.DataFrame
    by_age: pd.DataFrame
    phase: str = "test"

    @classmethod
    def build(cls, actual, predicted, phase="test"):
        by_year = breakdown(actual, predicted, "year")
        by_year.insert(0, "horizon", np.arange(1, len(by_year) + 1))
        return cls(rmse(actual, predicted), mae(actual, predicted), by_year,
                   breakdown(actual, predicted, "age"), phase)


def model_select(reports, default="default"):
    """Model id with the lowest test RMSE; exact ties go to ``default``."""
    if not reports:
        raise ValueError("no reports to choose from")
    best = min(r.rmse for r in reports.values())
    tied = [k for k, r in reports.items() if r.rmse == best]
    return default if default in tied else tied[0]


def pooled_by(frames, key):
    """Unweighted mean across countries of per-slice RMSE/MAE."""
    df = pd.concat(frames, ignore_index=True)
    return df.groupby(key, sort=True)[["rmse", "mae"]].mean().reset_index()
