import unittest

import numpy as np

from errors import InvalidParameterError, UndefinedCorrelationError
from estimators import joint_cumulant, pearson, set_partitions
from suite_utils.decorators import number


class TestCumulants(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(21)
        self.a, self.b, self.c = rng.normal(size=(3, 4000))

    @number("4.13")
    def test_bell_numbers(self):
        self.assertEqual([len(set_partitions(n)) for n in range(1, 7)], [1, 2, 5, 15, 52, 203])
        for blocks in set_partitions(4):
            self.assertEqual(sorted(i for b in blocks for i in b), [0, 1, 2, 3])
        with self.assertRaises(InvalidParameterError):
            set_partitions(0)

    @number("4.14")
    def test_second_order_is_pearson(self):
        y = self.a + self.b
        estimate = joint_cumulant([self.a, y])
        self.assertEqual(estimate.order, 2)
        self.assertAlmostEqual(estimate.kappa_normalized, pearson(self.a, y).r, places=12)

    @number("4.15")
    def test_third_order(self):
        x = self.a + 1.0
        y = self.a ** 2
        z = self.b * 2 - 3.0
        centred = [v - v.mean() for v in (x, y, z)]
        expected = float(np.mean(centred[0] * centred[1] * centred[2]))
        self.assertAlmostEqual(joint_cumulant([x, y, z]).kappa, expected, places=12)

    @number("4.16")
    def test_fourth_order_identical(self):
        x = self.a ** 3
        centred = x - x.mean()
        m2 = np.mean(centred ** 2)
        m4 = np.mean(centred ** 4)
        estimate = joint_cumulant([x] * 4)
        self.assertAlmostEqual(estimate.kappa / (m4 - 3 * m2 ** 2), 1.0, places=10)
        self.assertAlmostEqual(estimate.kappa_normalized, m4 / m2 ** 2 - 3, places=8)

    @number("4.17")
    def test_independent_lists_vanish(self):
        estimate = joint_cumulant([self.a, self.b, self.c])
        self.assertLess(abs(estimate.kappa_normalized), 5 * estimate.stderr)
        self.assertEqual(estimate.n, 4000)

    @number("4.18")
    def test_order_and_variance_checks(self):
        with self.assertRaises(InvalidParameterError):
            joint_cumulant([self.a])
        with self.assertRaises(InvalidParameterError):
            joint_cumulant([self.a] * 7)
        with self.assertRaises(InvalidParameterError):
            joint_cumulant([self.a, self.b[:10]])
        with self.assertRaises(UndefinedCorrelationError):
            joint_cumulant([self.a, np.full(4000, 2.0), self.b])


if __name__ == '__main__':
    unittest.main()
