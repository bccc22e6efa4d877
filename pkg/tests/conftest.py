import sys
from collections import OrderedDict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> [text, outcomes of its tests]
_CRITERIA: "OrderedDict[int, list]" = OrderedDict()


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, text = mark.args
            _CRITERIA.setdefault(number, [text, []])
            item.user_properties.append(("criterion", number))


def pytest_runtest_logreport(report):
    number = dict(report.user_properties).get("criterion")
    if number is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA[number][1].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        text, outcomes = _CRITERIA[number]
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status:7s} {text}")
