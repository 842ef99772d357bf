import unittest

import numpy as np
from scipy.stats import chisquare

from errors import ConfigurationError, InvalidParameterError, SamplingError
from field_synthesis import (Broadening, NoiseKind, NoiseSourceSpec, TimeGrid, check_seed_streams,
                             compose_two_point, synth_trace)
from sources import random_phase_draws
from suite_utils.decorators import number


def tone(f0=2e6, B0=1e-6, stream=1):
    return NoiseSourceSpec(NoiseKind.RANDOM_PHASE_AC, amplitude_B0=B0, carrier_f0=f0, seed_stream=stream)


class TestSynthesis(unittest.TestCase):

    @number("1.1")
    def test_silence(self):
        trace = synth_trace(NoiseSourceSpec(), 7, TimeGrid(0.0, 1e-9, 50))
        self.assertFalse(np.any(trace.samples))
        self.assertFalse(trace.is_tone_sum)

    @number("1.2")
    def test_coherent_tone_on_grid(self):
        spec = NoiseSourceSpec(NoiseKind.COHERENT_AC, amplitude_B0=3e-6, carrier_f0=2e6)
        grid = TimeGrid(0.0, 1e-9, 100)
        trace = synth_trace(spec, 0, grid)
        expected = 3e-6 * np.cos(2 * np.pi * 2e6 * 1e-9 * np.arange(100))
        np.testing.assert_allclose(trace.samples, expected, rtol=0, atol=1e-17)
        self.assertEqual(len(trace.tones), 1)

    @number("1.3")
    def test_replayable(self):
        spec = NoiseSourceSpec(NoiseKind.RANDOM_PHASE_AC, amplitude_B0=1e-6, carrier_f0=2e6,
                               phase_bandwidth=1e6, seed_stream=4)
        grid = TimeGrid(0.0, 1e-9, 300)
        a = synth_trace(spec, 12, grid, master_seed=99)
        b = synth_trace(spec, 12, grid, master_seed=99)
        c = synth_trace(spec, 13, grid, master_seed=99)
        d = synth_trace(spec, 12, grid, master_seed=100)
        np.testing.assert_array_equal(a.samples, b.samples)
        self.assertFalse(np.array_equal(a.samples, c.samples))
        self.assertFalse(np.array_equal(a.samples, d.samples))

    @number("1.4")
    def test_coarse_grid(self):
        with self.assertRaises(SamplingError):
            synth_trace(tone(), 0, TimeGrid(0.0, 1e-7, 10))
        # silence has no bandwidth, any grid will do
        synth_trace(NoiseSourceSpec(), 0, TimeGrid(0.0, 1.0, 10))

    @number("1.5")
    def test_seed_streams(self):
        with self.assertRaises(ConfigurationError) as ctx:
            check_seed_streams({"common": tone(stream=3), "local1": tone(stream=3)})
        self.assertIn("common", str(ctx.exception))
        self.assertIn("local1", str(ctx.exception))
        check_seed_streams({"common": tone(stream=3), "local1": NoiseSourceSpec(seed_stream=3),
                            "local2": NoiseSourceSpec(seed_stream=3)})

    @number("1.6")
    def test_broadband_variance(self):
        spec = NoiseSourceSpec(NoiseKind.GAUSSIAN_BROADBAND, psd_level=1e-18, band_limit=1e6, seed_stream=2)
        grid = TimeGrid(0.0, 1e-8, 4)
        samples = np.concatenate([synth_trace(spec, k, grid).samples for k in range(4000)])
        self.assertAlmostEqual(np.mean(samples ** 2) / (1e-18 * 1e6), 1.0, delta=0.1)
        self.assertAlmostEqual(spec.tone_amplitude ** 2 * spec.n_tones / 2, 1e-12, delta=1e-24)

    @number("1.7")
    def test_sensor_field(self):
        common = NoiseSourceSpec(NoiseKind.COHERENT_AC, amplitude_B0=1e-6, carrier_f0=1e6)
        grid = TimeGrid(0.0, 1e-9, 200)
        field = compose_two_point(common, tone(stream=1), tone(f0=3e6, stream=2), couplings=(0.5, -1.0),
                                  shot_index=3, grid=grid)
        sensor1 = field.sensor_field(1)
        np.testing.assert_allclose(sensor1.samples, 0.5 * field.common.samples + field.local1.samples)
        self.assertEqual(len(sensor1.tones), 2)
        self.assertAlmostEqual(sensor1.tones[0].amplitude, 0.5e-6)
        sensor2 = field.sensor_field(2)
        np.testing.assert_allclose(sensor2.samples, -field.common.samples + field.local2.samples)
        with self.assertRaises(IndexError):
            field.sensor_field(3)

    @number("1.8")
    def test_jitter_carriers(self):
        spec = NoiseSourceSpec(NoiseKind.RANDOM_PHASE_AC, amplitude_B0=1e-6, carrier_f0=2e6,
                               phase_bandwidth=1e6, broadening=Broadening.FREQUENCY_JITTER, seed_stream=5)
        freqs, phases = random_phase_draws(spec, np.arange(20000), 0)
        lo, hi = spec.line_bounds()
        self.assertEqual((lo, hi), (0.0, 12e6))
        self.assertTrue(np.all((freqs >= lo) & (freqs <= hi)))
        self.assertTrue(np.all((phases >= 0) & (phases < 2 * np.pi)))
        hw = 0.5e6
        c_lo, c_hi = np.arctan((lo - 2e6) / hw), np.arctan((hi - 2e6) / hw)
        median = 2e6 + hw * np.tan((c_lo + c_hi) / 2)
        self.assertAlmostEqual(np.median(freqs), median, delta=25e3)

    @number("1.9")
    def test_spec_validation(self):
        with self.assertRaises(InvalidParameterError):
            NoiseSourceSpec(NoiseKind.COHERENT_AC, amplitude_B0=-1.0)
        with self.assertRaises(InvalidParameterError):
            NoiseSourceSpec(NoiseKind.GAUSSIAN_BROADBAND, psd_level=1e-18, band_limit=1e6, n_tones=10)
        with self.assertRaises(InvalidParameterError):
            NoiseSourceSpec(NoiseKind.GAUSSIAN_BROADBAND, psd_level=1e-18)
        with self.assertRaises(ValueError):
            NoiseSourceSpec("Hum")
        with self.assertRaises(InvalidParameterError):
            synth_trace(tone(), -1, TimeGrid(0.0, 1e-9, 10))

    @number("1.10")
    def test_covering_grid(self):
        grid = TimeGrid.covering(8e-6, 1e-9)
        self.assertGreaterEqual(grid.span, 8e-6)
        self.assertLess(grid.span, 8e-6 + 5e-9)
        with self.assertRaises(InvalidParameterError):
            TimeGrid(0.0, 0.0, 10)

    @number("1.16")
    def test_independent_locals(self):
        common = NoiseSourceSpec()
        local1 = NoiseSourceSpec(NoiseKind.GAUSSIAN_BROADBAND, psd_level=1e-18, band_limit=1e6, seed_stream=2)
        local2 = NoiseSourceSpec(NoiseKind.GAUSSIAN_BROADBAND, psd_level=1e-18, band_limit=1e6, seed_stream=3)
        grid = TimeGrid(0.0, 1e-8, 4)
        n = 10_000
        b1, b2 = np.empty(n), np.empty(n)
        for k in range(n):
            field = compose_two_point(common, local1, local2, shot_index=k, grid=grid)
            b1[k] = field.sensor_field(1).samples[2]
            b2[k] = field.sensor_field(2).samples[2]
        self.assertLess(abs(np.corrcoef(b1, b2)[0, 1]), 3 / np.sqrt(n))

    @number("1.17")
    def test_initial_phase_uniform(self):
        _, phases = random_phase_draws(tone(stream=6), np.arange(100_000), 0)
        counts, _ = np.histogram(phases, bins=20, range=(0.0, 2 * np.pi))
        self.assertGreater(chisquare(counts).pvalue, 0.01)


if __name__ == '__main__':
    unittest.main()
