import re
from collections import OrderedDict

_ACCEPTANCE = re.compile(r"test_acceptance\.py::test_c(\d+)_")
_outcomes: "OrderedDict[int, list]" = OrderedDict()


def pytest_runtest_logreport(report):
    m = _ACCEPTANCE.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(int(m.group(1)), []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for k in sorted(_outcomes):
        status = "PASS" if all(_outcomes[k]) else "FAIL"
        terminalreporter.write_line(f"criterion {k:2d} {status}  {CRITERIA.get(k, '')}")
