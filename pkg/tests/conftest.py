"""Shared fixtures and the acceptance-criteria report.

Every ``RestoreReport`` produced during the session is kept so the
session-wide checks (discrepancy bound, stopping rule) see all solves.
Tests marked ``session_last`` run after everything else.
"""

import pytest

import tvsv.solver as _solver

SOLVE_LOG = []
_results = {}


class _RecordedReport(_solver.RestoreReport):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        SOLVE_LOG.append(self)


_solver.RestoreReport = _RecordedReport


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, text): acceptance criterion")
    config.addinivalue_line("markers", "session_last: run after all other tests")


def pytest_collection_modifyitems(items):
    items.sort(key=lambda item: item.get_closest_marker("session_last") is not None)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    key = (mark.args[0], mark.args[1])
    if rep.when == "call" or rep.failed:
        prev = _results.get(key, "PASS")
        _results[key] = "FAIL" if rep.failed or prev == "FAIL" else ("SKIP" if rep.skipped else prev)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for (cid, text), status in sorted(_results.items(), key=lambda kv: kv[0][0]):
        terminalreporter.write_line(f"criterion {cid:<3} {status}  {text}")
