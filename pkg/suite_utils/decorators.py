import abc
import re


class InvalidValueException(Exception):
    pass


class Decorator(abc.ABC):

    def __init__(self, v) -> None:
        res = self.validate(v)
        if res:
            raise InvalidValueException(res)
        self.v = v

    def validate(self, v):
        return None

    def __call__(self, func):
        setattr(func, self.get_attr_name(), self.v)
        return func

    @classmethod
    def get_attr_name(cls):
        return f"__{cls.__name__}__"

    @classmethod
    @abc.abstractmethod
    def change_result(cls, saved_value, results: dict, output: str, err):
        """
        Apply your change to the test result.
        This method is called *regardless* of whether the decorator was applied.

        If it was not applied, saved_value will be None.
        """


class number(Decorator):
    """Test id "<area>.<k>"; the area picks the suite section (1 field synthesis ... 6 harness, 7 acceptance)."""

    PATTERN = re.compile(r"^\d+\.\d+$")

    def validate(self, v):
        if not isinstance(v, str) or not self.PATTERN.match(v):
            return "Test numbers look like '3.12'."

    @classmethod
    def change_result(cls, saved_value, results: dict, output: str, err):
        if saved_value is not None:
            results["number"] = saved_value
            results["name"] = "{}: {}".format(saved_value, results["name"])


class slow(Decorator):
    """
    Long Monte Carlo check, only collected with --slow.

    Usage: @slow()
    """

    def __init__(self) -> None:
        self.v = True

    @classmethod
    def change_result(cls, saved_value, results: dict, output: str, err):
        if saved_value is not None:
            results["name"] = "[SLOW] {}".format(results["name"])


class outcome(Decorator):
    """Always applied by the runner: records pass/fail and the failure message."""

    def __init__(self) -> None:
        self.v = True

    @classmethod
    def change_result(cls, saved_value, results: dict, output: str, err):
        failed = err is not None
        results["passed"] = not failed
        if failed:
            addition = "" if not output or output.endswith("\n") else "\n"
            output = output + addition + "Test Failed: {}\n".format(err[1])
        results["feedback"] = output
