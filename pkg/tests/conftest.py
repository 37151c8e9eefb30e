import pytest

# criterion number -> list of (test name, outcome)
_CRITERIA: dict[int, list[tuple[str, str]]] = {}
_TITLES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion this test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if len(mark.args) > 1:
        _TITLES[n] = mark.args[1]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        if hasattr(rep, "wasxfail"):
            state = "xfail"
        else:
            state = rep.outcome
        _CRITERIA.setdefault(n, []).append((item.name, state))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        runs = _CRITERIA[n]
        ok = all(s == "passed" for _, s in runs)
        bad = ", ".join(f"{name}={s}" for name, s in runs if s != "passed")
        line = f"criterion {n:2d} [{'PASS' if ok else 'FAIL'}] {_TITLES.get(n, '')}"
        if bad:
            line += f"  ({bad})"
        tr.write_line(line)
