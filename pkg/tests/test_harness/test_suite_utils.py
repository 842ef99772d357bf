import io
import json
import unittest

from suite_utils.decorators import InvalidValueException, number, slow
from suite_utils.json_test_runner import JSONTestRunner, area_summary
from suite_utils.selection import _prune


def sample_case() -> type:
    """A throwaway case built on demand so discovery never collects it."""

    class Sample(unittest.TestCase):

        @number("2.1")
        def test_passes(self):
            pass

        @number("2.2")
        def test_fails(self):
            self.fail("boom")

        @slow()
        @number("3.1")
        def test_slow(self):
            pass

    return Sample


class TestSuiteUtils(unittest.TestCase):

    def _suite(self):
        return unittest.defaultTestLoader.loadTestsFromTestCase(sample_case())

    @number("6.37")
    def test_number_format(self):
        with self.assertRaises(InvalidValueException):
            number("six")
        self.assertEqual(area_summary([{"number": "4.2", "passed": True}, {"passed": False}]),
                         {"-": {"passed": 0, "failed": 1}, "4": {"passed": 1, "failed": 0}})

    @number("6.38")
    def test_json_runner(self):
        stream = io.StringIO()
        JSONTestRunner(stream=stream).run(self._suite())
        document = json.loads(stream.getvalue())
        self.assertEqual(document["summary"], {"total": 3, "passed": 2, "failed": 1})
        self.assertEqual(document["areas"]["2"], {"passed": 1, "failed": 1})
        failed = [c for c in document["testcases"] if not c["passed"]]
        self.assertIn("boom", failed[0]["feedback"])
        self.assertTrue(any(c["name"].startswith("[SLOW] 3.1") for c in document["testcases"]))

    @number("6.39")
    def test_selection(self):
        suite = self._suite()
        _prune(suite, "", include_slow=False)
        self.assertEqual(suite.countTestCases(), 2)
        suite = self._suite()
        _prune(suite, "2", include_slow=True)
        self.assertEqual(suite.countTestCases(), 2)
        suite = self._suite()
        _prune(suite, "3", include_slow=True)
        self.assertEqual(suite.countTestCases(), 1)


if __name__ == '__main__':
    unittest.main()
