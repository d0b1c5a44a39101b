"""Synthetic HMD-layout populations for tests and demos.

Rates follow an infant + accident hump + logistic senescence schedule that
improves log-linearly over time; exposures come from a stationary population
of the chosen size and deaths are Poisson.  Small populations produce zero
death counts at young ages and missing cells at the oldest ages, exercising
the same preprocessing paths as real data.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .hmd import COLUMNS, HmdTable, write_hmd
from .lifetable import AGES

SEX_SHIFT = {"Female": 0.0, "Male": 0.45}


def baseline_rates(sex="Female"):
    x = AGES.astype(float)
    shift = SEX_SHIFT[sex]
    infant = 0.012 * np.exp(-1.6 * x) + 2e-4 * np.exp(-0.08 * x)
    hump = (2e-4 + 4e-4 * shift) * np.exp(-(((x - 22.0) / 7.0) ** 2))
    z = 2.2e-5 * np.exp(shift) * np.exp(0.102 * x)
    return infant + hump + 4e-5 + z / (1.0 + 0.9 * z)


def improvement(sex="Female"):
    x = AGES.astype(float)
    r = 0.032 - 0.022 * np.clip((x - 40.0) / 60.0, 0.0, 1.0)
    return r * (1.0 - 0.15 * SEX_SHIFT[sex])


def simulate_population(code, years=range(1975, 2019), size=1e6, seed=0):
    """Return ``(rates_table, exposures_table)`` as HmdTable objects."""
    rng = np.random.default_rng(seed)
    years = np.asarray(list(years))
    n_y, n_a = years.size, AGES.size
    rates = {c: np.empty((n_y, n_a)) for c in COLUMNS}
    expos = {c: np.empty((n_y, n_a)) for c in COLUMNS}
    deaths = {}
    wobble = np.cumsum(rng.normal(0.0, 0.012, n_y))
    for sex in ("Female", "Male"):
        m0 = baseline_rates(sex)
        r = improvement(sex)
        dt = (years - years[0])[:, None]
        m = m0[None, :] * np.exp(-r[None, :] * (dt + wobble[:, None] * 8.0))
        m = np.minimum(m, 0.9)
        surv = np.exp(-np.cumsum(np.r_[0.0, m0[:-1]]))
        E = np.round(size * 0.5 * surv[None, :] * (1 + 0.003 * dt), 2)
        E = np.broadcast_to(E, (n_y, n_a)).copy()
        D = rng.poisson(m * E).astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            M = np.where(E > 0, np.round(D / E, 6), np.nan)
        rates[sex], expos[sex], deaths[sex] = M, E, D
    E_t = expos["Female"] + expos["Male"]
    D_t = deaths["Female"] + deaths["Male"]
    with np.errstate(divide="ignore", invalid="ignore"):
        rates["Total"] = np.where(E_t > 0, np.round(D_t / E_t, 6), np.nan)
    expos["Total"] = E_t
    header_r = (f"{code}, Death rates (period 1x1), synthetic", "")
    header_e = (f"{code}, Exposure to risk (period 1x1), synthetic", "")
    return (HmdTable(header_r, "rates", years, AGES.copy(), rates),
            HmdTable(header_e, "exposures", years, AGES.copy(), expos))


DEFAULT_FIXTURES = {"SYNA": 2e6, "SYNB": 4e5, "SYNC": 1e5}


def write_fixtures(directory, populations=None, years=range(1975, 2019)):
    """Write ``<code>.Mx_1x1.txt`` / ``<code>.Exposures_1x1.txt`` pairs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    populations = DEFAULT_FIXTURES if populations is None else populations
    for i, (code, size) in enumerate(sorted(populations.items())):
        rt, et = simulate_population(code, years, size, seed=100 + i)
        write_hmd(rt, directory / f"{code}.Mx_1x1.txt")
        write_hmd(et, directory / f"{code}.Exposures_1x1.txt")
    return sorted(populations)
