"""Reader and writer for HMD-style 1x1 period tables (Mx_1x1, Exposures_1x1)."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedRow, MissingAgeLadder, MissingCell, WindowNotCovered
from .lifetable import AGES, OPEN_AGE, SMOOTH_FROM, MortalityGrid

log = logging.getLogger(__name__)

COLUMNS = ("Female", "Male", "Total")
GENDER_COLUMN = {"female": "Female", "male": "Male"}


@dataclass(frozen=True)
class StudyWindow:
    train: tuple = (1983, 2010)
    test: tuple = (2011, 2018)

    def __post_init__(self):
        if self.train[0] > self.train[1] or self.test[0] > self.test[1]:
            raise ValueError(f"empty window: {self}")
        if self.test[0] != self.train[1] + 1:
            raise ValueError("test period must start the year after training ends")

    @property
    def first(self):
        return self.train[0]

    @property
    def last(self):
        return self.test[1]

    @property
    def n_train(self):
        return self.train[1] - self.train[0] + 1

    @property
    def n_test(self):
        return self.test[1] - self.test[0] + 1


@dataclass(frozen=True)
class HmdTable:
    header: tuple
    kind: str
    years: np.ndarray
    ages: np.ndarray
    values: dict

    def column(self, name):
        return self.values[name]

    def year_range(self):
        return int(self.years.min()), int(self.years.max())


def _parse_value(tok, lineno, line):
    if tok == ".":
        return np.nan
    try:
        return float(tok)
    except ValueError:
        raise MalformedRow(lineno, line, f"bad number {tok!r}") from None


def parse_hmd(source, kind="rates"):
    """Parse a 1x1 table from a path, string or text stream.

    The first two lines are kept as the header; blank lines and a
    ``Year Age ...`` column line are skipped.  ``110+`` becomes age 110 and
    ``.`` becomes NaN.
    """
    if kind not in ("rates", "exposures"):
        raise ValueError(f"kind must be 'rates' or 'exposures', got {kind!r}")
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    lines = text.splitlines()
    header = tuple(lines[:2])
    years, ages, vals = [], [], []
    for lineno, line in enumerate(lines[2:], start=3):
        toks = line.split()
        if not toks or toks[0] == "Year":
            continue
        if len(toks) != 5:
            raise MalformedRow(lineno, line, f"expected 5 columns, got {len(toks)}")
        try:
            year = int(toks[0])
        except ValueError:
            raise MalformedRow(lineno, line, "bad year") from None
        age_tok = toks[1]
        if age_tok == f"{OPEN_AGE}+":
            age = OPEN_AGE
        elif age_tok.isdigit() and int(age_tok) < OPEN_AGE:
            age = int(age_tok)
        else:
            raise MalformedRow(lineno, line, f"bad age {age_tok!r}")
        row = [_parse_value(t, lineno, line) for t in toks[2:]]
        if any(v < 0 for v in row if not np.isnan(v)):
            raise MalformedRow(lineno, line, "negative value")
        years.append(year)
        ages.append(age)
        vals.append(row)
    if not years:
        raise MissingAgeLadder("table has no data rows")

    years = np.array(years)
    ages = np.array(ages)
    uniq = list(dict.fromkeys(years.tolist()))
    if uniq != list(range(uniq[0], uniq[0] + len(uniq))):
        raise MissingAgeLadder("years are not contiguous")
    n_age = AGES.size
    for y in uniq:
        got = ages[years == y]
        if got.size != n_age or np.any(got != AGES):
            absent = sorted(set(AGES.tolist()) - set(got.tolist()))
            raise MissingAgeLadder(f"year {y}: incomplete age ladder (absent {absent[:5]})")
    arr = np.array(vals).reshape(len(uniq), n_age, 3)
    values = {c: arr[:, :, i] for i, c in enumerate(COLUMNS)}
    return HmdTable(header, kind, np.array(uniq), AGES.copy(), values)


def _fmt(v):
    return "." if np.isnan(v) else repr(float(v))


def serialize_hmd(table):
    out = io.StringIO()
    h = list(table.header) + [""] * (2 - len(table.header))
    out.write(h[0] + "\n" + h[1] + "\n")
    out.write(f"{'Year':>6}{'Age':>8}{'Female':>22}{'Male':>22}{'Total':>22}\n")
    for i, year in enumerate(table.years):
        for age in table.ages:
            age_s = f"{OPEN_AGE}+" if age == OPEN_AGE else str(age)
            cells = "".join(f"{_fmt(table.values[c][i, age]):>22}" for c in COLUMNS)
            out.write(f"{year:>6}{age_s:>8}{cells}\n")
    return out.getvalue()


def write_hmd(table, path):
    Path(path).write_text(serialize_hmd(table))


def build_grid(rates, exposures, gender, window=StudyWindow(), country="", smooth_from=SMOOTH_FROM):
    """Cut the study window for one gender out of a rates/exposures pair."""
    col = GENDER_COLUMN.get(gender)
    if col is None:
        raise ValueError(f"gender must be 'female' or 'male', got {gender!r}")
    for tbl in (rates, exposures):
        lo, hi = tbl.year_range()
        if lo > window.first or hi < window.last:
            raise WindowNotCovered(
                f"{country} {tbl.kind}: data cover {lo}-{hi}, need {window.first}-{window.last}"
            )
    sel_r = (rates.years >= window.first) & (rates.years <= window.last)
    sel_e = (exposures.years >= window.first) & (exposures.years <= window.last)
    M = rates.column(col)[sel_r]
    E = exposures.column(col)[sel_e]
    young = AGES < smooth_from
    miss = np.isnan(M[:, young]) | np.isnan(E[:, young])
    if miss.any():
        t, x = np.argwhere(miss)[0]
        raise MissingCell(f"{country} {gender}: missing value at {window.first + t}, age {x}")
    n_old = int((np.isnan(M[:, ~young]) | np.isnan(E[:, ~young])).sum())
    if n_old:
        log.info("%s %s: %d missing cells at ages %d+ left for smoothing", country, gender, n_old, smooth_from)
    years = np.arange(window.first, window.last + 1)
    return MortalityGrid(country, gender, years, M, E)


def split_grid(grid, window=StudyWindow()):
    return grid.select_years(*window.train), grid.select_years(*window.test)
