import pytest

CRITERIA = {
    1: "multiplication correctness",
    2: "homomorphism suite",
    3: "KC residuals",
    4: "QSP typing",
    5: "trajectory closed forms",
    6: "limit algebras",
    7: "baric dynamics",
    8: "commutativity criteria",
    9: "evolution-algebra dynamics",
    10: "associativity",
    11: "density",
    12: "determinism",
}

_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and (rep.when == "call" or rep.failed):
        _outcomes.setdefault(mark.args[0], []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_outcomes):
        ok = all(_outcomes[n])
        terminalreporter.write_line(f"criterion {n:2d}  {'PASS' if ok else 'FAIL'}  {CRITERIA.get(n, '')}")
