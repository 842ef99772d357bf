import os
import tempfile
import unittest
from pathlib import Path

import yaml

from config import TimingSpec, dump_resolved, load_config, parse_config
from errors import ConfigurationError, ConfigurationErrors
from field_synthesis import NoiseKind
from measurement import ReadoutChannel, ReadoutMode
from sensing import SequenceKind
from suite_utils.decorators import number
from tests.test_harness.configs import base_doc, tone
from theory import expected_cos

BAD_TAU = """\
sequences:
  - kind: XY8
    tau: fast
    n_pulses: 32
  - kind: XY8
    tau: 250e-9
    n_pulses: 32
channels:
  - {}
  - {}
"""


def fields(ctx) -> list:
    return [d.field for d in ctx.exception.diagnostics]


class TestConfig(unittest.TestCase):

    @number("6.1")
    def test_minimal_document(self):
        config = parse_config(base_doc())
        self.assertEqual(config.sequences[0].kind, SequenceKind.XY8)
        self.assertEqual(config.sequences[1].tau, 250e-9)
        self.assertEqual(config.channels, (ReadoutChannel.ideal(), ReadoutChannel.ideal()))
        self.assertEqual({spec.kind for spec in config.sources.values()}, {NoiseKind.SILENCE})
        self.assertEqual(config.timing, TimingSpec())
        self.assertIsNone(config.sweep)
        self.assertEqual((config.n_shots, config.master_seed), (4000, 3))

    @number("6.2")
    def test_channel_shortcuts(self):
        doc = base_doc(channels=[{"sigma_R": 4}, {"mode": "PhotonCount", "alpha0": 0.8, "alpha1": 1.2}])
        config = parse_config(doc)
        self.assertAlmostEqual(config.channels[0].fidelity, 0.625, places=12)
        self.assertIs(config.channels[1].mode, ReadoutMode.PHOTON_COUNT)
        with self.assertRaises(ConfigurationErrors) as ctx:
            parse_config(base_doc(channels=[{"mode": "PhotonCount"}, {}]))
        self.assertIn("channels[0].alpha0", fields(ctx))

    @number("6.3")
    def test_shared_seed_stream(self):
        doc = base_doc(sources={"common": tone(stream=1), "local1": tone(f0=1.5e6, stream=1)})
        with self.assertRaises(ConfigurationErrors) as ctx:
            parse_config(doc)
        self.assertIn("sources.local1.seed_stream", fields(ctx))

    @number("6.4")
    def test_missing_and_unknown(self):
        doc = base_doc(bogus=1)
        del doc["sequences"][0]["tau"]
        doc["sequences"][1]["colour"] = "red"
        with self.assertRaises(ConfigurationErrors) as ctx:
            parse_config(doc)
        found = fields(ctx)
        self.assertIn("sequences[0].tau", found)
        self.assertIn("bogus", found)
        self.assertIn("sequences[1].colour", found)
        messages = {d.field: d.message for d in ctx.exception.diagnostics}
        self.assertEqual(messages["bogus"], "unknown key")

    @number("6.5")
    def test_collects_every_problem(self):
        doc = base_doc(n_shots=2, channels=[{"fidelity": 1.5}, {}])
        doc["sequences"][0]["n_pulses"] = 12
        with self.assertRaises(ConfigurationErrors) as ctx:
            parse_config(doc)
        self.assertEqual(set(fields(ctx)), {"n_shots", "channels[0]", "sequences[0]"})

    @number("6.6")
    def test_line_numbers(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "bad.yaml")
            with open(path, "w") as f:
                f.write(BAD_TAU)
            with self.assertRaises(ConfigurationErrors) as ctx:
                load_config(path)
            diagnostic = ctx.exception.diagnostics[0]
            self.assertEqual((diagnostic.field, diagnostic.line), ("sequences[0].tau", 3))
            self.assertIn("line 3", str(ctx.exception))
            with open(path, "w") as f:
                f.write("sequences: [unclosed\n")
            with self.assertRaises(ConfigurationError):
                load_config(path)

    @number("6.7")
    def test_sampling_checked_against_grid(self):
        doc = base_doc(sources={"common": tone(f0=2e6)}, grid={"dt": 1e-7})
        with self.assertRaises(ConfigurationErrors) as ctx:
            parse_config(doc)
        self.assertEqual(fields(ctx), ["grid.dt"])

    @number("6.8")
    def test_target_coherence(self):
        local = {"kind": "GaussianBroadband", "band_limit": 20e6, "seed_stream": 2, "target_coherence": 0.8}
        config = parse_config(base_doc(sources={"local1": local}))
        spec = config.sources["local1"]
        self.assertGreater(spec.psd_level, 0)
        self.assertAlmostEqual(expected_cos(spec, config.sequences[0]), 0.8, delta=1e-6)
        with self.assertRaises(ConfigurationErrors):
            parse_config(base_doc(sources={"local1": tone(target_coherence=0.8)}))

    @number("6.9")
    def test_resolved_dump(self):
        config = parse_config(base_doc(sources={"common": tone()}, sweep={"axis": "tau", "values": [2e-7, 3e-7]}))
        resolved = yaml.safe_load(dump_resolved(config))
        self.assertEqual(resolved["master_seed"], 3)
        self.assertEqual(resolved["sources"]["common"]["kind"], "RandomPhaseAC")
        self.assertEqual(resolved["grid"], {"dt": 1e-9})
        self.assertEqual(resolved["sweep"]["values"], [2e-7, 3e-7])
        with self.assertRaises(ConfigurationErrors) as ctx:
            parse_config(base_doc(sweep={"axis": "colour", "values": [1]}))
        self.assertEqual(fields(ctx), ["sweep"])

    @number("6.36")
    def test_recipes_validate(self):
        recipes = sorted((Path(__file__).resolve().parents[2] / "docs" / "recipes").glob("*.yaml"))
        self.assertGreaterEqual(len(recipes), 9)
        for path in recipes:
            with self.subTest(recipe=path.name):
                config = load_config(path)
                self.assertEqual(len(config.sequences), 2)

    @number("6.40")
    def test_integer_fields_stay_exact(self):
        big = 2 ** 60 + 1
        self.assertEqual(parse_config(base_doc(master_seed=big)).master_seed, big)
        self.assertEqual(parse_config(base_doc(master_seed=str(2 ** 64 - 1))).master_seed, 2 ** 64 - 1)
        self.assertEqual(parse_config(base_doc(n_shots="2000")).n_shots, 2000)
        self.assertEqual(parse_config(base_doc(n_shots=2000.0)).n_shots, 2000)
        for field, value in (("master_seed", 2 ** 64), ("master_seed", -1), ("n_shots", 2.5), ("n_shots", True)):
            with self.subTest(field=field, value=value):
                with self.assertRaises(ConfigurationErrors) as ctx:
                    parse_config(base_doc(**{field: value}))
                self.assertEqual(fields(ctx), [field])


if __name__ == '__main__':
    unittest.main()
