"""
Counter-based random streams.

Every draw is addressed by (master_seed, stream, shot_index). Shots can be
generated in any order, in any chunking and on any thread with bit-identical
results, so there is no generator state to share or hand around.

Field sources use their own ``seed_stream`` (below ``MAX_SOURCE_STREAM``);
the measurement stages use the reserved streams defined here.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
MAX_SOURCE_STREAM = 1 << 32

# Reserved streams; the sensor index is added to the per-sensor ones.
PROJECTION_STREAM = 1 << 40
READOUT_STREAM = 2 << 40
TIMING_STREAM = 3 << 40
PARITY_STREAM = 4 << 40
DRIFT_STREAM = 5 << 40

# Philox4x64 produces four 64-bit words per counter step.
BLOCK_WIDTH = 4


def stream_key(master_seed: int, stream: int) -> np.ndarray:
    return np.array([master_seed & MASK64, stream & MASK64], dtype=np.uint64)


def shot_generator(master_seed: int, stream: int, shot_index: int) -> np.random.Generator:
    """Generator for the variable-length draws of one shot.

    The shot index sits in the top counter word, so the draws of one shot can
    never run into those of another.
    """
    if shot_index < 0:
        raise ValueError(f"shot_index must be non-negative, got {shot_index}")
    counter = np.array([0, 0, 0, shot_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, stream), counter=counter))


def shot_uniforms(master_seed: int, stream: int, shots, width: int = BLOCK_WIDTH) -> np.ndarray:
    """``width`` uniforms on [0, 1) per shot, each shot owning whole Philox blocks.

    Row k depends only on (master_seed, stream, width, shots[k]).
    """
    shots = np.atleast_1d(np.asarray(shots, dtype=np.int64))
    out = np.empty((shots.size, width))
    if shots.size == 0:
        return out
    if shots.min() < 0:
        raise ValueError("shot indices must be non-negative")
    key = stream_key(master_seed, stream)
    blocks = -(-width // BLOCK_WIDTH)
    span = blocks * BLOCK_WIDTH
    # contiguous runs read consecutive blocks in one call
    breaks = np.flatnonzero(np.diff(shots) != 1) + 1
    for run in np.split(np.arange(shots.size), breaks):
        first = int(shots[run[0]])
        gen = np.random.Generator(np.random.Philox(key=key, counter=first * blocks))
        out[run] = gen.random(span * run.size).reshape(run.size, span)[:, :width]
    return out


def open_unit(u: np.ndarray) -> np.ndarray:
    """Map [0, 1) uniforms onto the open interval (0, 1) for inverse CDFs."""
    return np.maximum(u, 2.0 ** -60)
