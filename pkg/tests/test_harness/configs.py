"""
Config documents shared by the harness tests.
"""

import copy

XY8_32 = {"kind": "XY8", "tau": 250e-9, "n_pulses": 32}


def base_doc(**top) -> dict:
    """Two XY8-32 sensors at 2 MHz with ideal readout; every source silent."""
    doc = {
        "sequences": [dict(XY8_32), dict(XY8_32)],
        "channels": [{}, {}],
        "n_shots": 4000,
        "master_seed": 3,
    }
    doc.update(copy.deepcopy(top))
    return doc


def tone(B0=1e-6, f0=2e6, stream=1, **extra) -> dict:
    return {"kind": "RandomPhaseAC", "amplitude_B0": B0, "carrier_f0": f0, "seed_stream": stream, **extra}


def tone_doc(B0=1e-6, **top) -> dict:
    """A shared random-phase tone on resonance."""
    return base_doc(sources={"common": tone(B0)}, **top)


def peak_doc(**top) -> dict:
    """Lorentzian-jittered common line at 2 MHz over moderate local decoherence, σ_R = 4 readout."""
    sources = {
        "common": {"kind": "RandomPhaseAC", "amplitude_B0": 13e-6, "carrier_f0": 2e6, "phase_bandwidth": 1e6,
                   "broadening": "FrequencyJitter", "seed_stream": 1},
        "local1": {"kind": "GaussianBroadband", "band_limit": 20e6, "target_coherence": 0.94, "seed_stream": 2},
        "local2": {"kind": "GaussianBroadband", "band_limit": 20e6, "target_coherence": 0.71, "seed_stream": 3},
    }
    top.setdefault("n_shots", 1_000_000)
    return base_doc(sources=sources, channels=[{"sigma_R": 4}, {"sigma_R": 4}], **top)
