import json

import pytest

from alphacoda.synthetic import write_fixtures

_RESULTS = {}
_RANK = ["SKIP", "PASS", "FAIL"]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number and summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    if rep.skipped:
        new = "SKIP"
    elif rep.failed:
        new = "FAIL"
    elif rep.when == "call":
        new = "PASS"
    else:
        return
    # a failure anywhere (any phase, any parametrization) fails the criterion
    old = _RESULTS.get(n, ("SKIP", text))[0]
    _RESULTS[n] = (max(old, new, key=_RANK.index), text)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        status, text = _RESULTS[n]
        terminalreporter.write_line(f"{status} criterion {n}: {text}")


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthetic")
    write_fixtures(root / "data")
    return root


@pytest.fixture
def make_config(synthetic_dir, tmp_path):
    """Write a run config pointing at the synthetic data; returns its path."""
    def make(name="run.json", **fields):
        cfg = {"data_dir": str(synthetic_dir / "data"), "countries": ["SYNA", "SYNC"],
               "genders": ["female"]}
        cfg.update(fields)
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return path
    return make
