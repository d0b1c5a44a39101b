import io

import numpy as np
import pytest

from alphacoda import hmd
from alphacoda.errors import MalformedRow, MissingAgeLadder, MissingCell, WindowNotCovered
from alphacoda.hmd import StudyWindow
from alphacoda.synthetic import simulate_population

HEADER = "XYZ, Death rates (period 1x1)\nLast modified: never\n\n   Year  Age  Female  Male  Total\n"


def ladder(years, override=None, skip=None):
    lines = [HEADER]
    for y in years:
        for a in range(111):
            if skip == (y, a):
                continue
            age = "110+" if a == 110 else str(a)
            row = f"{y:>6}  {age:>4}  0.001000  0.002000  0.001500\n"
            if override and (y, a) in override:
                row = override[(y, a)]
            lines.append(row)
    return "".join(lines)


def test_parse_open_age_and_missing():
    text = ladder([1990], {
        (1990, 110): "  1990  110+  0.522413  0.601245  0.549120\n",
        (1990, 45): "  1990  45  .  0.001  0.0009\n",
    })
    t = hmd.parse_hmd(io.StringIO(text), "rates")
    assert t.column("Female")[0, 110] == 0.522413
    assert np.isnan(t.column("Female")[0, 45])
    assert t.column("Male")[0, 45] == 0.001
    assert t.header[0].startswith("XYZ")


def test_parse_string_and_path(tmp_path):
    text = ladder([2000, 2001])
    p = tmp_path / "x.txt"
    p.write_text(text)
    a = hmd.parse_hmd(text)
    b = hmd.parse_hmd(p)
    c = hmd.parse_hmd(str(p))
    for t in (b, c):
        np.testing.assert_array_equal(a.column("Total"), t.column("Total"))
    assert a.year_range() == (2000, 2001)


def test_missing_age():
    with pytest.raises(MissingAgeLadder):
        hmd.parse_hmd(ladder([1990, 1991], skip=(1991, 54)))


def test_non_contiguous_years():
    with pytest.raises(MissingAgeLadder):
        hmd.parse_hmd(ladder([1990, 1992]))


@pytest.mark.parametrize("bad", [
    "  1990  45  0.1  0.2\n",
    "  1990  45  0.1  x  0.3\n",
    "  19x0  45  0.1  0.2  0.3\n",
    "  1990  111  0.1  0.2  0.3\n",
    "  1990  45  -0.1  0.2  0.3\n",
])
def test_malformed_rows(bad):
    with pytest.raises(MalformedRow) as err:
        hmd.parse_hmd(ladder([1990], {(1990, 45): bad}))
    assert "line 50" in str(err.value)


def test_kind_validated():
    with pytest.raises(ValueError):
        hmd.parse_hmd(ladder([1990]), "deaths")


def test_round_trip_synthetic(tmp_path):
    rt, et = simulate_population("RND", range(1980, 1990), 5e3, seed=1)
    for t in (rt, et):
        text = hmd.serialize_hmd(t)
        back = hmd.parse_hmd(text, t.kind)
        assert back.header == t.header
        np.testing.assert_array_equal(back.years, t.years)
        for c in hmd.COLUMNS:
            np.testing.assert_array_equal(back.column(c), t.column(c))
        assert hmd.serialize_hmd(back) == text


def test_study_window():
    w = StudyWindow()
    assert (w.n_train, w.n_test) == (28, 8)
    with pytest.raises(ValueError):
        StudyWindow((1983, 2010), (2012, 2018))


def grid_pair(first=1975, last=2019, size=1e6):
    return simulate_population("SYN", range(first, last), size, seed=2)


def test_build_grid_and_split():
    rt, et = grid_pair()
    g = hmd.build_grid(rt, et, "female", country="SYN")
    assert g.rates.shape == (36, 111)
    assert g.years[0] == 1983 and g.years[-1] == 2018
    np.testing.assert_array_equal(g.rates, rt.column("Female")[8:44])
    train, test = hmd.split_grid(g)
    assert train.years.size == 28 and test.years.size == 8


def test_build_grid_window_not_covered():
    rt, et = grid_pair(first=1990)
    with pytest.raises(WindowNotCovered):
        hmd.build_grid(rt, et, "male")


def test_build_grid_missing_young_cell():
    rt, et = grid_pair()
    rt.values["Male"][10, 30] = np.nan
    with pytest.raises(MissingCell):
        hmd.build_grid(rt, et, "male")


def test_build_grid_old_missing_allowed(caplog):
    rt, et = grid_pair()
    rt.values["Female"][10, 105] = np.nan
    with caplog.at_level("INFO"):
        g = hmd.build_grid(rt, et, "female", country="SYN")
    assert np.isnan(g.rates).sum() == 1
    assert "missing" in caplog.text


def test_build_grid_gender():
    rt, et = grid_pair()
    with pytest.raises(ValueError):
        hmd.build_grid(rt, et, "total")
