"""Shared pytest wiring: per-criterion pass/fail lines for the acceptance run."""

import pytest

_ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def criterion(label):
    """Tag an acceptance test with the requirement line it certifies."""

    def deco(fn):
        fn._criterion = label
        return fn

    return deco


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when != "call":
        return
    label = getattr(item.function, "_criterion", None)
    if label is not None:
        _ACCEPTANCE_RESULTS.append((label, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for label, passed in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}")
    _ACCEPTANCE_RESULTS.clear()
