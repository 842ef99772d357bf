"""
Test discovery filtered by @number prefix and the @slow marker.
"""

import re
import unittest


def _keep(test, task: str, include_slow: bool) -> bool:
    func = getattr(test, test._testMethodName, None)
    if func is None:
        return True
    if getattr(func, "__slow__", None) is True and not include_slow:
        return False
    if task and not re.match(rf"^{re.escape(task)}\.", getattr(func, "__number__", "") or ""):
        return False
    return True


def _prune(suite: unittest.TestSuite, task: str, include_slow: bool) -> None:
    for t in list(suite._tests):
        if isinstance(t, unittest.TestSuite):
            _prune(t, task, include_slow)
        elif "FailedTest" in str(type(t)):
            continue
        elif not _keep(t, task, include_slow):
            suite._tests.remove(t)


def load_suite(task: str = "", include_slow: bool = False, start: str = ".") -> unittest.TestSuite:
    """Every test under start, minus slow ones (unless asked) and those outside task."""
    suite = unittest.defaultTestLoader.discover(start)
    _prune(suite, task, include_slow)
    return suite
