import math
import unittest

from errors import InvalidParameterError, UnreachableSensitivityError
from suite_utils.decorators import number
from theory import required_time, sensitivity_factor, snr_and_min_noise


class TestSensitivity(unittest.TestCase):

    @number("5.1")
    def test_required_time_anchors(self):
        self.assertAlmostEqual(required_time(1e-9, 1.0, 100e-6, 50e-6, 1e-3) / 13.05, 1.0, delta=0.01)
        self.assertAlmostEqual(required_time(1e-9, 4.0, 100e-6, 50e-6, 1e-3) / 3340, 1.0, delta=0.01)
        self.assertAlmostEqual(required_time(1e-9, 35.0, 100e-6, 50e-6, 300e-9) / 9.38e5, 1.0, delta=0.01)

    @number("5.2")
    def test_snr_at_required_time(self):
        T = required_time(1e-9, 4.0, 100e-6, 50e-6, 1e-3)
        snr, sigma_min = snr_and_min_noise(4.0, 100e-6, 50e-6, 1e-3, T, sigma_B=1e-9)
        self.assertAlmostEqual(snr, 1.0, delta=1e-9)
        self.assertAlmostEqual(sigma_min / 1e-9, 1.0, delta=1e-9)
        snr, _ = snr_and_min_noise(4.0, 100e-6, 50e-6, 1e-3, 4 * T, sigma_B=1e-9)
        self.assertAlmostEqual(snr, 2.0, delta=1e-9)
        self.assertIsNone(snr_and_min_noise(4.0, 100e-6, 50e-6, 1e-3, T)[0])

    @number("5.3")
    def test_unreachable(self):
        with self.assertRaises(UnreachableSensitivityError) as ctx:
            snr_and_min_noise(1.0, 100e-6, 50e-6, 1e-3, 1e-3)
        minimal = ctx.exception.minimal_time
        self.assertAlmostEqual(minimal, 1.05e-3 * (2 * math.e) ** 2, delta=1e-12)
        _, sigma_min = snr_and_min_noise(1.0, 100e-6, 50e-6, 1e-3, 2 * minimal)
        self.assertGreater(sigma_min, 0)

    @number("5.4")
    def test_argument_checks(self):
        with self.assertRaises(InvalidParameterError):
            snr_and_min_noise(1.0, 0.0, 50e-6, 1e-3, 10.0)
        with self.assertRaises(InvalidParameterError):
            snr_and_min_noise(1.0, 100e-6, 50e-6, -1e-3, 10.0)
        with self.assertRaises(InvalidParameterError):
            required_time(0.0, 1.0, 100e-6, 50e-6, 1e-3)

    @number("5.5")
    def test_sensitivity_factor(self):
        for n in range(2, 7):
            self.assertAlmostEqual(sensitivity_factor(n), math.sqrt(n) / 2 ** (n - 1), places=15)
        self.assertAlmostEqual(sensitivity_factor(2), 1 / math.sqrt(2), places=15)
        with self.assertRaises(InvalidParameterError):
            sensitivity_factor(1)


if __name__ == '__main__':
    unittest.main()
