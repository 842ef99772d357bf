import unittest

import numpy as np

from errors import CoverageError, InvalidParameterError
from field_synthesis import NoiseKind, NoiseSourceSpec, TimeGrid, empirical_psd, fit_lorentzian, synth_trace
from sensing import CONSTANTS
from spectrum import Spectrum, SpectrumConvention
from suite_utils.decorators import number, slow


class TestSpectra(unittest.TestCase):

    @number("1.11")
    def test_periodogram_power(self):
        spec = NoiseSourceSpec(NoiseKind.RANDOM_PHASE_AC, amplitude_B0=1e-6, carrier_f0=2e6, seed_stream=1)
        grid = TimeGrid(0.0, 1e-8, 200)
        psd = empirical_psd([synth_trace(spec, k, grid) for k in range(100)])
        self.assertIs(psd.convention, SpectrumConvention.FIELD)
        self.assertAlmostEqual(psd.frequencies[np.argmax(psd.values)], 2e6)
        self.assertAlmostEqual(psd.total_power() / 0.5e-12, 1.0, places=9)

    @number("1.12")
    def test_periodogram_needs_traces(self):
        grid = TimeGrid(0.0, 1e-8, 16)
        with self.assertRaises(InvalidParameterError):
            empirical_psd([synth_trace(NoiseSourceSpec(), k, grid) for k in range(10)])

    @number("1.13")
    def test_lorentzian_fit(self):
        f = np.linspace(0.0, 5e6, 2001)
        hw = 0.25e6
        values = 1e-15 / (1 + ((f - 2e6) / hw) ** 2) + 1e-15 / (1 + ((f + 2e6) / hw) ** 2)
        fit = fit_lorentzian(Spectrum(f, values))
        self.assertAlmostEqual(fit.centre / 2e6, 1.0, delta=1e-3)
        self.assertAlmostEqual(fit.fwhm / 0.5e6, 1.0, delta=1e-3)

    @number("1.14")
    def test_conventions(self):
        s = Spectrum(np.array([0.0, 1e6, 2e6]), np.array([1e-18, 2e-18, 3e-18]))
        angular = s.to_angular(CONSTANTS)
        self.assertIs(angular.convention, SpectrumConvention.ANGULAR)
        self.assertAlmostEqual(angular.values[1] / (8 * np.pi * CONSTANTS.gamma_e ** 2 * 2e-18), 1.0)
        np.testing.assert_allclose(angular.to_field(CONSTANTS).values, s.values, rtol=1e-14)
        self.assertAlmostEqual(float(s.at(1.5e6)), 2.5e-18)
        with self.assertRaises(CoverageError):
            s.at(3e6)
        with self.assertRaises(InvalidParameterError):
            Spectrum(np.array([1.0, 0.0]), np.array([1.0, 1.0]))

    @slow()
    @number("1.15")
    def test_diffused_line_width(self):
        spec = NoiseSourceSpec(NoiseKind.RANDOM_PHASE_AC, amplitude_B0=1e-6, carrier_f0=2e6,
                               phase_bandwidth=0.5e6, seed_stream=3)
        grid = TimeGrid(0.0, 1e-8, 4096)
        psd = empirical_psd([synth_trace(spec, k, grid) for k in range(400)])
        fit = fit_lorentzian(psd)
        self.assertAlmostEqual(fit.centre / 2e6, 1.0, delta=0.03)
        self.assertAlmostEqual(fit.fwhm / 0.5e6, 1.0, delta=0.15)


if __name__ == '__main__':
    unittest.main()
