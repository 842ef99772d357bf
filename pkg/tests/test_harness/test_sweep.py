import math
import unittest
from pathlib import Path

import numpy as np
import yaml

from config import parse_config
from errors import InvalidParameterError, StageError
from field_synthesis import NoiseKind
from suite_utils.decorators import number
from sweep import (damped_cosine, fit_oscillation, point_config, reconstruct_report, run_sweep, theory_sweep,
                   with_sweep_value, wrap_phase)
from tests.test_harness.configs import base_doc, tone, tone_doc


class TestSweepAxes(unittest.TestCase):

    def setUp(self):
        self.config = parse_config(tone_doc())

    @number("6.19")
    def test_axes(self):
        c = with_sweep_value(self.config, "tau", 200e-9)
        self.assertEqual([s.tau for s in c.sequences], [200e-9, 200e-9])
        c = with_sweep_value(self.config, "frequency", 2.5e6)
        self.assertEqual([s.tau for s in c.sequences], [2e-7, 2e-7])
        c = with_sweep_value(self.config, "t_delay", 1e-7)
        self.assertEqual([s.t_delay for s in c.sequences], [0.0, 1e-7])
        c = with_sweep_value(self.config, "B0", 3e-6)
        self.assertEqual(c.sources["common"].amplitude_B0, 3e-6)
        self.assertEqual(self.config.sources["common"].amplitude_B0, 1e-6)
        c = with_sweep_value(self.config, "sigma_R", 2.0)
        self.assertAlmostEqual(c.channels[1].fidelity, 0.75, places=12)
        self.assertEqual(with_sweep_value(self.config, "n_shots", 123.0).n_shots, 123)
        with self.assertRaises(InvalidParameterError):
            with_sweep_value(self.config, "colour", 1.0)
        with self.assertRaises(InvalidParameterError):
            with_sweep_value(self.config, "frequency", 0.0)

    @number("6.20")
    def test_point_seeds(self):
        config = parse_config(tone_doc(n_shots=1000, sweep={"axis": "t_delay", "values": [0.0, 1e-7, 2e-7]}))
        result = run_sweep(config)
        self.assertEqual([p.master_seed for p in result.points], [3, 4, 5])
        self.assertTrue(all(p.sweep is None for p in result.points))
        self.assertEqual(len(result.residuals), 3)
        self.assertTrue(all(r is not None for r in result.residuals))
        self.assertEqual(result.r.shape, (3,))
        self.assertEqual(point_config(config, 2).sequences[1].t_delay, 2e-7)
        with self.assertRaises(InvalidParameterError):
            point_config(parse_config(tone_doc()), 0)

    @number("6.21")
    def test_theory_sweep(self):
        config = parse_config(tone_doc(sweep={"axis": "B0", "values": [0.0, 5e-7, 1e-6]}))
        points = theory_sweep(config)
        self.assertEqual([v for v, _ in points], [0.0, 5e-7, 1e-6])
        r = [th.r_observed for _, th in points]
        self.assertEqual(r[0], 0.0)
        self.assertTrue(r[0] < r[1] < r[2])
        single = theory_sweep(parse_config(tone_doc()))
        self.assertEqual(single[0][0], None)
        self.assertAlmostEqual(single[0][1].r_observed, r[2], places=14)


class TestOscillationFit(unittest.TestCase):

    def setUp(self):
        self.x = np.linspace(0.0, 4e-6, 41)
        self.y = damped_cosine(self.x, 0.3, 1e6, 0.4, 2e5, 0.01)

    @number("6.22")
    def test_recovers_parameters(self):
        fit = fit_oscillation(self.x, self.y)
        self.assertAlmostEqual(fit.frequency / 1e6, 1.0, delta=0.01)
        self.assertAlmostEqual(fit.phase, 0.4, delta=0.05)
        self.assertAlmostEqual(fit.amplitude / 0.3, 1.0, delta=0.02)
        self.assertAlmostEqual(fit.decay_time / 5e-6, 1.0, delta=0.05)
        np.testing.assert_allclose(fit(self.x), self.y, atol=1e-3)

    @number("6.23")
    def test_sign_flip_shifts_phase(self):
        plain = fit_oscillation(self.x, self.y)
        flipped = fit_oscillation(self.x, -self.y)
        self.assertAlmostEqual(abs(wrap_phase(flipped.phase - plain.phase)), math.pi, delta=0.05)
        self.assertAlmostEqual(flipped.amplitude / plain.amplitude, 1.0, delta=0.02)

    @number("6.24")
    def test_fit_guards(self):
        with self.assertRaises(InvalidParameterError):
            fit_oscillation(self.x[:4], self.y[:4])
        self.assertEqual(wrap_phase(-math.pi), math.pi)
        self.assertAlmostEqual(wrap_phase(1.5 * math.pi), -0.5 * math.pi, places=12)
        undamped = fit_oscillation(self.x, damped_cosine(self.x, 0.2, 1e6, -1.0, 0.0, 0.0))
        self.assertGreater(undamped.decay_time, 1e-4)


class TestReconstruction(unittest.TestCase):

    @number("6.25")
    def test_local_tones_only(self):
        sources = {"local1": tone(stream=2), "local2": tone(f0=1.6e6, stream=3)}
        doc = base_doc(sources=sources, n_shots=20000,
                       sweep={"axis": "frequency", "values": [2.4e6, 1.6e6, 2e6]})
        config = parse_config(doc)
        self.assertIs(config.sources["common"].kind, NoiseKind.SILENCE)
        rows = reconstruct_report(run_sweep(config))
        np.testing.assert_allclose([row.frequency for row in rows], [1.6e6, 2e6, 2.4e6], rtol=1e-12)
        for row in rows:
            t = 32 * row.tau
            bound = math.pi / (2 * t) * math.asinh(5 * row.sigma_r / (row.C1 * row.C2))
            self.assertLessEqual(abs(row.S_C), bound)
            self.assertTrue(row.reliable)
        low, mid, high = rows
        self.assertGreater(mid.S_L1, 5 * abs(high.S_L1))
        self.assertGreater(low.S_L2, 5 * abs(high.S_L2))

    @number("6.26")
    def test_given_coherences(self):
        config = parse_config(tone_doc(n_shots=2000, sweep={"axis": "tau", "values": [250e-9, 260e-9]}))
        sweep = run_sweep(config)
        rows = reconstruct_report(sweep, [(1.02, 0.9), (-0.1, 0.9)])
        # overshoot above 1 is clamped; a non-positive coherence leaves the point out
        by_tau = {row.tau: row for row in rows}
        self.assertEqual(by_tau[250e-9].C1, 1.0)
        self.assertTrue(math.isnan(by_tau[260e-9].S_C))
        self.assertFalse(by_tau[260e-9].reliable)
        with self.assertRaises(StageError) as ctx:
            reconstruct_report(sweep, [(0.9, 0.9)])
        self.assertEqual(ctx.exception.stage, "theory")
        self.assertIsInstance(ctx.exception.__cause__, InvalidParameterError)


class TestDelayEnvelope(unittest.TestCase):

    @number("6.41")
    def test_phase_noise_shortens_envelope(self):
        path = Path(__file__).resolve().parents[2] / "docs" / "recipes" / "delay_oscillation.yaml"
        with open(path) as f:
            doc = yaml.safe_load(f)
        fits = []
        for bandwidth in (0.0, 1e6):
            doc["sources"]["common"]["phase_bandwidth"] = bandwidth
            config = parse_config(doc)
            r = [th.r_observed for _, th in theory_sweep(config)]
            fits.append(fit_oscillation(config.sweep.values, r))
        coherent, broadened = fits
        self.assertAlmostEqual(broadened.frequency / 3.125e6, 1.0, delta=0.02)
        self.assertLess(broadened.decay_time, 2e-6)
        self.assertGreater(coherent.decay_time, broadened.decay_time)


if __name__ == '__main__':
    unittest.main()
