"""
All noise-source kinds are defined here.

Every kind provides two views of the same draws: ``synthesize`` returns the
sampled trace of one shot (plus its exact tone list when it has one), and the
attached phase kernel returns ∫y(t)B(t)dt for a batch of shots against a set
of sensor windows. Both read the per-shot counter-based generator in the same
order, so a kernel result always matches the trace it stands for.
"""

from __future__ import annotations

import numpy as np

from field_synthesis import TWO_PI, Broadening, Tone, cycles
from rng import shot_generator, shot_uniforms
from source_util import bandwidth, deterministic, phase_kernel, register

# shots per block of grid-sampled rows
GRID_ROWS = 256


def _empty(shots, windows) -> np.ndarray:
    return np.zeros((len(shots), len(windows)))


def _tone_integrals(amplitudes, frequencies, phases, starts, windows) -> np.ndarray:
    """Exact integrals of tone sums; parameter arrays are (shots, tones)."""
    ref = np.exp(1j * (TWO_PI * cycles(frequencies, starts[:, None]) + phases)) * amplitudes
    out = np.empty((len(starts), len(windows)))
    for k, window in enumerate(windows):
        out[:, k] = np.real(ref * window.response(frequencies)).sum(axis=1)
    return out


# --- Silence ---------------------------------------------------------------

def silence_integrals(spec, shots, starts, windows, master_seed, dt, n_samples):
    return _empty(shots, windows)


@register("Silence")
@phase_kernel(silence_integrals)
@bandwidth(lambda spec: 0.0)
@deterministic
def silence(spec, shot_index, grid, master_seed):
    return np.zeros(grid.n_samples), ()


# --- CoherentAC ------------------------------------------------------------

def coherent_integrals(spec, shots, starts, windows, master_seed, dt, n_samples):
    if spec.amplitude_B0 == 0:
        return _empty(shots, windows)
    shape = (len(shots), 1)
    return _tone_integrals(np.full(shape, spec.amplitude_B0), np.full(shape, spec.carrier_f0),
                           np.zeros(shape), np.asarray(starts, dtype=float), windows)


@register("CoherentAC")
@phase_kernel(coherent_integrals)
@bandwidth(lambda spec: spec.carrier_f0)
@deterministic
def coherent_ac(spec, shot_index, grid, master_seed):
    tone = Tone(spec.amplitude_B0, spec.carrier_f0, 0.0)
    return tone.samples(grid), (tone,)


# --- RandomPhaseAC ---------------------------------------------------------

def _jitter_frequency(spec, u):
    """Inverse CDF of the Lorentzian line truncated to the carrier window."""
    half_width = spec.phase_bandwidth / 2.0
    lo, hi = spec.line_bounds()
    c_lo = np.arctan((lo - spec.carrier_f0) / half_width)
    c_hi = np.arctan((hi - spec.carrier_f0) / half_width)
    return spec.carrier_f0 + half_width * np.tan(c_lo + u * (c_hi - c_lo))


def _is_pure_tone(spec) -> bool:
    return spec.phase_bandwidth == 0 or spec.broadening is Broadening.FREQUENCY_JITTER


def random_phase_draws(spec, shots, master_seed) -> tuple[np.ndarray, np.ndarray]:
    """Per-shot (carrier, initial phase) of a pure or jittered random-phase tone.

    Both come from one counter block per shot: column 0 the phase, column 1
    the carrier within the line.
    """
    u = shot_uniforms(master_seed, spec.seed_stream, shots)
    if spec.phase_bandwidth > 0:
        freqs = _jitter_frequency(spec, u[:, 1])
    else:
        freqs = np.full(len(u), float(spec.carrier_f0))
    return freqs, TWO_PI * u[:, 0]


def _diffusion_rows(spec, shots, starts, master_seed, dt, n_samples) -> np.ndarray:
    """Sampled fields B0·cos(2πf0·t + ψ0 + ψ(t)) with ψ a Wiener walk, D = π·Δf."""
    step = np.sqrt(2.0 * np.pi * spec.phase_bandwidth * dt)
    rows = np.empty((len(shots), n_samples))
    for k, shot in enumerate(shots):
        rng = shot_generator(master_seed, spec.seed_stream, int(shot))
        rows[k, 0] = TWO_PI * rng.random()
        rows[k, 1:] = step * rng.standard_normal(n_samples - 1)
    np.cumsum(rows, axis=1, out=rows)
    rel = dt * np.arange(n_samples)
    carrier = cycles(spec.carrier_f0, np.asarray(starts, dtype=float))[:, None] + spec.carrier_f0 * rel
    return spec.amplitude_B0 * np.cos(TWO_PI * carrier + rows)


def random_phase_integrals(spec, shots, starts, windows, master_seed, dt, n_samples):
    if spec.amplitude_B0 == 0:
        return _empty(shots, windows)
    starts = np.asarray(starts, dtype=float)
    if _is_pure_tone(spec):
        freqs, phases = random_phase_draws(spec, shots, master_seed)
        return _tone_integrals(np.full((len(freqs), 1), spec.amplitude_B0), freqs[:, None], phases[:, None],
                               starts, windows)
    weights = np.column_stack([w.weights for w in windows])
    out = np.empty((len(shots), len(windows)))
    for lo in range(0, len(shots), GRID_ROWS):
        block = slice(lo, lo + GRID_ROWS)
        out[block] = _diffusion_rows(spec, shots[block], starts[block], master_seed, dt, n_samples) @ weights
    return out


def _random_phase_fmax(spec):
    if spec.phase_bandwidth == 0:
        return spec.carrier_f0
    if spec.broadening is Broadening.FREQUENCY_JITTER:
        return spec.line_bounds()[1]
    return spec.carrier_f0 + 5.0 * spec.phase_bandwidth


@register("RandomPhaseAC")
@phase_kernel(random_phase_integrals)
@bandwidth(_random_phase_fmax)
def random_phase_ac(spec, shot_index, grid, master_seed):
    if _is_pure_tone(spec):
        freqs, phases = random_phase_draws(spec, shot_index, master_seed)
        tone = Tone(spec.amplitude_B0, float(freqs[0]), float(phases[0]))
        return tone.samples(grid), (tone,)
    rows = _diffusion_rows(spec, np.array([shot_index]), np.array([grid.t_start]),
                           master_seed, grid.dt, grid.n_samples)
    return rows[0], ()


# --- GaussianBroadband -----------------------------------------------------

def broadband_draws(spec, shots, master_seed) -> tuple[np.ndarray, np.ndarray]:
    """(frequencies, phases), each (shots, n_tones), from one counter row per shot."""
    u = shot_uniforms(master_seed, spec.seed_stream, shots, 2 * spec.n_tones)
    return spec.band_limit * u[:, :spec.n_tones], TWO_PI * u[:, spec.n_tones:]


def broadband_integrals(spec, shots, starts, windows, master_seed, dt, n_samples):
    if spec.psd_level == 0:
        return _empty(shots, windows)
    freqs, phases = broadband_draws(spec, shots, master_seed)
    return _tone_integrals(np.full(freqs.shape, spec.tone_amplitude), freqs, phases,
                           np.asarray(starts, dtype=float), windows)


@register("GaussianBroadband")
@phase_kernel(broadband_integrals)
@bandwidth(lambda spec: spec.band_limit)
def gaussian_broadband(spec, shot_index, grid, master_seed):
    if spec.psd_level == 0:
        return np.zeros(grid.n_samples), ()
    freqs, phases = (row[0] for row in broadband_draws(spec, shot_index, master_seed))
    tones = tuple(Tone(spec.tone_amplitude, f, p) for f, p in zip(freqs, phases))
    t = grid.relative_times()
    arg = TWO_PI * (cycles(freqs, grid.t_start)[:, None] + freqs[:, None] * t) + phases[:, None]
    return spec.tone_amplitude * np.cos(arg).sum(axis=0), tones
