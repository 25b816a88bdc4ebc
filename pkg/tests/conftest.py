import pytest

from flatingest.store import Workspace

# (criterion number, title) -> list of (passed, detail)
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.failed and rep.when == "setup"):
        details = [str(v) for k, v in item.user_properties if k == "measured"]
        _CRITERIA.setdefault(tuple(mark.args), []).append((rep.passed, "; ".join(details)))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), results in sorted(_CRITERIA.items()):
        ok = all(passed for passed, _ in results)
        detail = "; ".join(d for _, d in results if d)
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def ws(tmp_path):
    (tmp_path / "root").mkdir()
    with Workspace(tmp_path / "root") as workspace:
        yield workspace


@pytest.fixture
def dirs(tmp_path):
    source = tmp_path / "source"
    source.mkdir()
    return source, tmp_path / "root"
