"""Preprocessing of observed mortality into period life tables.

Steps per country and gender: death counts from rates and exposures,
Kannisto smoothing of old-age rates, multiplicative replacement of zero
death counts at younger ages, an infant a0 averaged over the training years,
and single-year life tables with radix 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    AllZeroRow,
    DataTooSparse,
    ExposureAllZero,
    FitDiverged,
    InvalidRate,
    MissingCell,
)
from .simplex import multiplicative_replace

AGES = np.arange(111)
OPEN_AGE = 110
SMOOTH_FROM = 80
KANNISTO_WINDOW = (80, 100)


@dataclass(frozen=True)
class MortalityGrid:
    """Year x age panel of observed rates and exposures for one population.

    Missing cells are NaN.  Ages run 0..110 with 110 the open interval.
    """

    country: str
    gender: str
    years: np.ndarray
    rates: np.ndarray
    exposures: np.ndarray
    ages: np.ndarray = field(default_factory=lambda: AGES.copy())

    def __post_init__(self):
        years = np.asarray(self.years, dtype=int)
        rates = np.asarray(self.rates, dtype=float)
        expo = np.asarray(self.exposures, dtype=float)
        shape = (years.size, np.asarray(self.ages).size)
        if rates.shape != shape or expo.shape != shape:
            raise ValueError(f"rates {rates.shape} / exposures {expo.shape} must be {shape}")
        if np.any(rates[~np.isnan(rates)] < 0) or np.any(expo[~np.isnan(expo)] < 0):
            raise ValueError("rates and exposures must be nonnegative")
        if self.gender not in ("female", "male"):
            raise ValueError(f"gender must be 'female' or 'male', got {self.gender!r}")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "exposures", expo)

    def select_years(self, first, last):
        keep = (self.years >= first) & (self.years <= last)
        return MortalityGrid(self.country, self.gender, self.years[keep],
                             self.rates[keep], self.exposures[keep], self.ages)


def derive_deaths(grid, smooth_from=SMOOTH_FROM):
    """Observed death counts ``D = M * E``; NaN marks missing old-age cells."""
    E = grid.exposures
    if np.any(np.nansum(E, axis=1) <= 0):
        bad = grid.years[np.nansum(E, axis=1) <= 0]
        raise ExposureAllZero(f"{grid.country}: zero exposure in every age for years {bad.tolist()}")
    young = grid.ages < smooth_from
    missing = np.isnan(grid.rates[:, young]) | np.isnan(E[:, young])
    if missing.any():
        t, x = np.argwhere(missing)[0]
        raise MissingCell(f"{grid.country} {grid.gender}: missing cell at year {grid.years[t]}, age {x}")
    return grid.rates * E


# Kannisto smoothing

@dataclass(frozen=True)
class KannistoFit:
    a: float
    b: float
    fit_ages: tuple
    iterations: int = 0

    def hazard(self, ages):
        z = self.a * np.exp(self.b * (np.asarray(ages, dtype=float) - 80.0))
        return z / (1.0 + z)


def _kannisto_loglik(theta, s, D, E):
    a, b = np.exp(theta)
    mu = 1.0 / (1.0 + np.exp(-(np.log(a) + b * s)))
    return np.sum(D * np.log(mu) - E * mu)


def fit_kannisto(deaths, exposures, ages, fit_ages=KANNISTO_WINDOW, max_iter=200):
    """Poisson maximum likelihood for the logistic old-age hazard.

    Newton iterations on ``(log a, log b)`` with step halving, seeded from
    a coarse grid.  Cells with missing or zero exposure are ignored.
    """
    ages = np.asarray(ages, dtype=float)
    D = np.asarray(deaths, dtype=float)
    E = np.asarray(exposures, dtype=float)
    win = (ages >= fit_ages[0]) & (ages <= fit_ages[1]) & np.isfinite(D) & np.isfinite(E) & (E > 0)
    if win.sum() < 5:
        raise DataTooSparse(f"only {int(win.sum())} ages with positive exposure in {fit_ages}")
    s, D, E = ages[win] - 80.0, D[win], E[win]

    grid_a = np.log(np.logspace(-3, 0.5, 15))
    grid_b = np.log(np.linspace(0.02, 0.3, 15))
    lls = [(_kannisto_loglik((ga, gb), s, D, E), ga, gb) for ga in grid_a for gb in grid_b]
    _, ta, tb = max(lls)
    theta = np.array([ta, tb])
    tol = 1e-10 * max(1.0, D.sum())

    ll = _kannisto_loglik(theta, s, D, E)
    for it in range(1, max_iter + 1):
        b = np.exp(theta[1])
        eta = theta[0] + b * s
        mu = 1.0 / (1.0 + np.exp(-eta))
        r = (1.0 - mu) * (D - E * mu)
        c = -mu * (1.0 - mu) * (D + E * (1.0 - 2.0 * mu))
        bs = b * s
        grad = np.array([r.sum(), (r * bs).sum()])
        if np.abs(grad).max() < tol:
            return KannistoFit(float(np.exp(theta[0])), float(b), tuple(fit_ages), it - 1)
        hess = np.array([[c.sum(), (c * bs).sum()],
                         [(c * bs).sum(), (c * bs * bs).sum() + (r * bs).sum()]])
        step = None
        if np.all(np.linalg.eigvalsh(hess) < 0):
            step = -np.linalg.solve(hess, grad)
        if step is None or step @ grad <= 0:
            # Fisher scoring: expected information is always positive definite
            w = E * mu * (1.0 - mu) ** 2
            info = np.array([[w.sum(), (w * bs).sum()], [(w * bs).sum(), (w * bs * bs).sum()]])
            step = np.linalg.solve(info, grad)
        t = 1.0
        slack = 1e-12 * abs(ll)
        while t > 1e-12:
            cand = theta + t * step
            ll_new = _kannisto_loglik(cand, s, D, E)
            if np.isfinite(ll_new) and ll_new >= ll - slack:
                break
            t *= 0.5
        else:
            # no ascent possible: already at numerical optimum
            return KannistoFit(float(np.exp(theta[0])), float(b), tuple(fit_ages), it)
        theta, ll = cand, ll_new
    raise FitDiverged(f"Kannisto fit did not converge in {max_iter} iterations")


def kannisto_smooth(grid, year, fit_ages=KANNISTO_WINDOW, smooth_from=SMOOTH_FROM):
    """Smoothed rates for ages ``smooth_from..110`` in one year, plus the fit."""
    t = int(np.flatnonzero(grid.years == year)[0])
    D = grid.rates[t] * grid.exposures[t]
    fit = fit_kannisto(D, grid.exposures[t], grid.ages, fit_ages)
    return fit.hazard(grid.ages[grid.ages >= smooth_from]), fit


# zero replacement

def impute_zeros(deaths, ages=None, below=SMOOTH_FROM, global_min=None):
    """Replace zero death counts at ages below ``below``.

    For each row with zeros, the row is closed, the zeros get
    ``delta = (m / 2) / row_total`` where ``m`` is the smallest positive
    count in the whole matrix (or ``global_min``), positive parts shrink
    multiplicatively, and the row is scaled back to its original total.
    NaN cells count as zero in totals and are left untouched.
    """
    D = np.asarray(deaths, dtype=float)
    ages = np.arange(D.shape[1]) if ages is None else np.asarray(ages)
    vals = np.nan_to_num(D, nan=0.0)
    if global_min is None:
        pos = vals[vals > 0]
        if pos.size == 0:
            raise AllZeroRow("matrix has no positive death counts")
        global_min = pos.min()
    out = D.copy()
    young = ages < below
    for t, row in enumerate(vals):
        total = row.sum()
        if total <= 0:
            raise AllZeroRow(f"row {t} has no deaths")
        zeros = young & (row == 0)
        if not zeros.any():
            continue
        delta = (global_min / 2.0) / total
        # old-age zeros are left alone: smoothing supersedes them
        keep = young | (row > 0)
        out[t, keep] = multiplicative_replace(row[keep] / total, delta) * total
    return out


# a0 and the life table

A0_TABLE = {
    "male": ((0.02300, 0.14929, -1.99545), (0.08307, 0.02832, 3.26021), (np.inf, 0.29915, 0.0)),
    "female": ((0.01724, 0.14903, -2.05527), (0.06891, 0.04667, 3.88089), (np.inf, 0.31411, 0.0)),
}


def a0_single(m0, gender):
    for upper, intercept, slope in A0_TABLE[gender]:
        if m0 < upper:
            return intercept + slope * m0
    raise ValueError(f"invalid infant rate {m0}")


def compute_a0(m0_series, gender):
    """Average of the per-year a0 formula over the training-period infant rates.

    Each year uses the formula of the m0 range it falls in, so a series that
    straddles two ranges mixes both.
    """
    m0 = np.atleast_1d(np.asarray(m0_series, dtype=float))
    if m0.size < 1 or np.any(m0 < 0) or np.any(~np.isfinite(m0)):
        raise ValueError("m0 series must be non-empty, finite and nonnegative")
    if gender not in A0_TABLE:
        raise ValueError(f"unknown gender {gender!r}")
    vals = [a0_single(m, gender) for m in m0]
    # centred sum so a constant series returns its value bit-for-bit
    return vals[0] + math.fsum(v - vals[0] for v in vals) / len(vals)


@dataclass(frozen=True)
class LifeTable:
    year: int
    mx: np.ndarray
    ax: np.ndarray
    qx: np.ndarray
    lx: np.ndarray
    dx: np.ndarray
    radix: float = 1.0

    @property
    def ages(self):
        return np.arange(self.mx.size)

    def to_frame(self):
        return pd.DataFrame({
            "year": self.year, "age": self.ages, "mx": self.mx, "ax": self.ax,
            "qx": self.qx, "lx": self.lx, "dx": self.dx,
        })


def build_lifetable(mx, a0, year=0):
    mx = np.asarray(mx, dtype=float)
    if np.any(~(mx > 0)) or np.any(~np.isfinite(mx)):
        raise InvalidRate(f"year {year}: rates must be positive and finite")
    ax = np.full(mx.size, 0.5)
    ax[0] = a0
    qx = mx / (1.0 + (1.0 - ax) * mx)
    qx[-1] = 1.0
    if np.any(~(qx > 0)) or np.any(qx > 1):
        raise InvalidRate(f"year {year}: death probabilities outside (0, 1]")
    lx = np.empty(mx.size)
    lx[0] = 1.0
    lx[1:] = np.cumprod(1.0 - qx[:-1])
    dx = lx * qx
    return LifeTable(int(year), mx, ax, qx, lx, dx)


@dataclass
class Preprocessed:
    grid: MortalityGrid
    rates: np.ndarray
    a0: float
    kannisto: list
    tables: list
    imputed_rows: list

    @property
    def dx(self):
        return np.vstack([lt.dx for lt in self.tables])

    def to_frame(self):
        return pd.concat([lt.to_frame() for lt in self.tables], ignore_index=True)


def preprocess(grid, train_last=None, fit_ages=KANNISTO_WINDOW, smooth_from=SMOOTH_FROM):
    """Smooth, impute and build one life table per year of ``grid``.

    The minimum positive death count used for zero replacement and the
    infant a0 are taken from years up to ``train_last`` only.
    """
    if train_last is None:
        train_last = int(grid.years.max())
    train = grid.years <= train_last
    if not train.any():
        raise ValueError(f"no training years up to {train_last}")
    D = derive_deaths(grid, smooth_from)
    rates = grid.rates.copy()
    old = grid.ages >= smooth_from
    fits = []
    for t, year in enumerate(grid.years):
        smoothed, fit = kannisto_smooth(grid, year, fit_ages, smooth_from)
        rates[t, old] = smoothed
        fits.append(fit)

    vals = np.nan_to_num(D, nan=0.0)
    pos = vals[train][vals[train] > 0]
    if pos.size == 0:
        raise AllZeroRow(f"{grid.country}: no positive deaths in training years")
    young = ~old
    zero_rows = [int(y) for y, row in zip(grid.years, vals) if np.any(row[young] == 0)]
    D_imp = impute_zeros(vals, grid.ages, smooth_from, global_min=pos.min())
    E_young = grid.exposures[:, young]
    if np.any(E_young <= 0):
        t, x = np.argwhere(E_young <= 0)[0]
        raise MissingCell(f"{grid.country}: zero exposure at year {grid.years[t]}, age {x}")
    rates[:, young] = D_imp[:, young] / E_young

    a0 = compute_a0(rates[train, 0], grid.gender)
    tables = [build_lifetable(rates[t], a0, year) for t, year in enumerate(grid.years)]
    return Preprocessed(grid, rates, a0, fits, tables, zero_rows)
