"""Running tests with results collected as one JSON document."""

import inspect
import json
import sys
import unittest

import suite_utils.decorators as decorators

DECORATOR_CLASSES = [
    klass for _name, klass in inspect.getmembers(decorators, inspect.isclass)
    if issubclass(klass, decorators.Decorator) and klass is not decorators.Decorator
]


def area_summary(cases: list) -> dict:
    """Pass/fail counts keyed by the area part of each test number; "-" for unnumbered tests."""
    areas = {}
    for case in cases:
        area = case.get("number", "-").split(".")[0]
        counts = areas.setdefault(area, {"passed": 0, "failed": 0})
        counts["passed" if case["passed"] else "failed"] += 1
    return dict(sorted(areas.items()))


class JSONTestResult(unittest.TestResult):
    """Records one dict per finished test, shaped by the suite_utils decorators."""

    def __init__(self, cases: list) -> None:
        super().__init__()
        self.buffer = True
        self.cases = cases

    def _record(self, test, err=None) -> None:
        output = ""
        if self._stdout_buffer is not None:
            output = self._stdout_buffer.getvalue() + self._stderr_buffer.getvalue()
        case = {"name": test.shortDescription() or str(test)}
        method = getattr(test, getattr(test, "_testMethodName", ""), None)
        for dec in DECORATOR_CLASSES:
            dec.change_result(getattr(method, dec.get_attr_name(), None), case, output, err)
        self.cases.append(case)

    def addSuccess(self, test):
        super().addSuccess(test)
        self._record(test)

    def addError(self, test, err):
        super().addError(test, err)
        # keep captured output out of the JSON stream
        self._mirrorOutput = False
        self._record(test, err)

    def addFailure(self, test, err):
        super().addFailure(test, err)
        self._mirrorOutput = False
        self._record(test, err)


class JSONTestRunner:
    """Runs a suite and writes its test cases, summary and per-area counts as JSON."""

    def __init__(self, stream=sys.stdout) -> None:
        self.stream = stream

    def run(self, test) -> JSONTestResult:
        cases = []
        res = JSONTestResult(cases)
        res.startTestRun()
        try:
            test(res)
        finally:
            res.stopTestRun()
        cases.sort(key=lambda c: c["name"])
        passed = sum(1 for c in cases if c["passed"])
        document = {
            "testcases": cases,
            "summary": {"total": len(cases), "passed": passed, "failed": len(cases) - passed},
            "areas": area_summary(cases),
        }
        json.dump(document, self.stream, indent=4)
        self.stream.write("\n")
        return res
