"""
Parameter sweeps over one config axis, oscillation fits and spectral reports.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from config import SWEEP_AXES, ExperimentConfig
from errors import InvalidParameterError
from estimators import CorrelationEstimate
from field_synthesis import TWO_PI
from measurement import readout_efficiency, symmetric_for_noise
from pipeline import CHUNK_SHOTS, matched_theory, run, simulate_coherence, stage, theory_coherence
from theory import TheoryPrediction, local_spectrum, reconstruct_correlated_spectrum

logger = logging.getLogger(__name__)


def with_sweep_value(config: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    """The config with one sweep axis set to value.

    tau and frequency act on both sequences (frequency sets τ = 1/(2f)),
    t_delay on the second sequence only, B0 on the common source and sigma_R
    replaces both channels by symmetric thresholds of that readout noise.
    """
    seq1, seq2 = config.sequences
    if axis == "tau":
        return config.with_(sequences=(seq1.with_(tau=value), seq2.with_(tau=value)))
    if axis == "frequency":
        if not value > 0:
            raise InvalidParameterError(f"sweep frequency must be positive, got {value}")
        tau = 1.0 / (2.0 * value)
        return config.with_(sequences=(seq1.with_(tau=tau), seq2.with_(tau=tau)))
    if axis == "t_delay":
        return config.with_(sequences=(seq1, seq2.with_(t_delay=value)))
    if axis == "B0":
        sources = dict(config.sources)
        sources["common"] = sources["common"].with_amplitude(value)
        return config.with_(sources=sources)
    if axis == "sigma_R":
        channel = symmetric_for_noise(value)
        return config.with_(channels=(channel, channel))
    if axis == "n_shots":
        return config.with_(n_shots=int(value))
    raise InvalidParameterError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")


def point_config(config: ExperimentConfig, index: int) -> ExperimentConfig:
    """Config of sweep point `index`; each point runs on seed master_seed + index."""
    if config.sweep is None:
        raise InvalidParameterError("config has no sweep section")
    value = config.sweep.values[index]
    point = with_sweep_value(config, config.sweep.axis, value)
    return point.with_(master_seed=config.master_seed + index, sweep=None)


@dataclass
class SweepResult:

    axis: str
    values: list[float]
    estimates: list[CorrelationEstimate]
    theories: list[TheoryPrediction | None]
    points: list[ExperimentConfig] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not len(self.values) == len(self.estimates) == len(self.theories):
            raise InvalidParameterError("sweep columns differ in length")

    @property
    def residuals(self) -> list[float | None]:
        """(r_sim - r_theory)/ς_r per point; None where no theory applies."""
        return [None if th is None else (est.r - th.r_observed) / est.sigma_r
                for est, th in zip(self.estimates, self.theories)]

    @property
    def r(self) -> np.ndarray:
        return np.array([est.r for est in self.estimates])

    @property
    def sigma_r(self) -> np.ndarray:
        return np.array([est.sigma_r for est in self.estimates])


def run_sweep(config: ExperimentConfig, threads: int = 1, chunk: int = CHUNK_SHOTS) -> SweepResult:
    """Independent seeded runs, one per sweep value, in value order."""
    if config.sweep is None:
        raise InvalidParameterError("config has no sweep section")
    axis, values = config.sweep.axis, list(config.sweep.values)
    estimates, theories, points = [], [], []
    for i, value in enumerate(values):
        point = point_config(config, i)
        _, report = run(point, threads, chunk)
        logger.info("%s = %.6g: r = %.5f ± %.5f", axis, value, report.estimate.r, report.estimate.sigma_r)
        estimates.append(report.estimate)
        theories.append(report.theory)
        points.append(point)
    return SweepResult(axis, values, estimates, theories, points)


def theory_sweep(config: ExperimentConfig) -> list[tuple[float | None, TheoryPrediction | None]]:
    """Matched theory per sweep point, or for the config itself when there is no sweep."""
    if config.sweep is None:
        with stage("theory"):
            return [(None, matched_theory(config))]
    out = []
    for i, value in enumerate(config.sweep.values):
        with stage("theory"):
            out.append((value, matched_theory(point_config(config, i))))
    return out


# --- oscillation fits ------------------------------------------------------

@dataclass(frozen=True)
class OscillationFit:

    amplitude: float
    frequency: float
    phase: float
    decay_rate: float
    offset: float

    @property
    def decay_time(self) -> float:
        """1/e time of the envelope; inf for an undamped fit."""
        return math.inf if self.decay_rate <= 0 else 1.0 / self.decay_rate

    def __call__(self, x):
        return damped_cosine(np.asarray(x, dtype=float), self.amplitude, self.frequency, self.phase,
                             self.decay_rate, self.offset)


def damped_cosine(x, amplitude, frequency, phase, decay_rate, offset):
    return amplitude * np.exp(-decay_rate * x) * np.cos(TWO_PI * frequency * x + phase) + offset


def wrap_phase(phase: float) -> float:
    """Phase folded into (-π, π]."""
    wrapped = math.remainder(phase, TWO_PI)
    return math.pi if wrapped == -math.pi else wrapped


def _frequency_guess(x: np.ndarray, y: np.ndarray) -> float:
    span = x[-1] - x[0]
    trial = np.linspace(0.5 / span, 0.5 * (len(x) - 1) / span, 64 * len(x))
    power = np.abs(np.exp(-1j * TWO_PI * np.outer(trial, x)) @ (y - y.mean()))
    return float(trial[np.argmax(power)])


def fit_oscillation(x, r, sigma=None, frequency_guess: float | None = None) -> OscillationFit:
    """Least-squares fit of A·e^{-γx}·cos(2πfx + θ) + c to a correlation trace.

    A and γ are constrained non-negative so that a sign flip of the trace
    shows up as a phase shift of π.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(r, dtype=float)
    if x.shape != y.shape or x.size < 5:
        raise InvalidParameterError("need at least five matching points to fit an oscillation")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)[order]
    f0 = frequency_guess if frequency_guess is not None else _frequency_guess(x, y)
    z = np.exp(-1j * TWO_PI * f0 * x) @ (y - y.mean())
    p0 = (max(2.0 * abs(z) / x.size, 1e-12), f0, float(np.angle(z)), 0.0, float(y.mean()))
    lower = (0.0, 0.0, -np.inf, 0.0, -np.inf)
    try:
        params, _ = curve_fit(damped_cosine, x, y, p0=p0, sigma=sigma, bounds=(lower, np.inf), maxfev=20000)
    except RuntimeError as e:
        raise InvalidParameterError(f"oscillation fit did not converge: {e}") from e
    amplitude, frequency, phase, decay_rate, offset = (float(p) for p in params)
    fit = OscillationFit(amplitude, frequency, wrap_phase(phase), decay_rate, offset)
    logger.debug("oscillation fit: %s", fit)
    return fit


# --- spectral decomposition ------------------------------------------------

@dataclass(frozen=True)
class SpectralRow:

    frequency: float
    tau: float
    r: float
    sigma_r: float
    C1: float
    C2: float
    S_C: float
    S_L1: float
    S_L2: float
    reliable: bool

    COLUMNS = ("frequency", "tau", "r", "sigma_r", "C1", "C2", "S_C", "S_L1", "S_L2", "reliable")


def sweep_coherences(sweep: SweepResult, coherence_inputs="theory", threads: int = 1) -> list[tuple[float, float]]:
    """Per-point (C₁, C₂): closed form ("theory"), measured ("simulated") or given pairs."""
    if coherence_inputs == "theory":
        return [(theory_coherence(p, 1), theory_coherence(p, 2)) for p in sweep.points]
    if coherence_inputs == "simulated":
        return [(simulate_coherence(p, 1, threads), simulate_coherence(p, 2, threads)) for p in sweep.points]
    pairs = [tuple(float(c) for c in pair) for pair in coherence_inputs]
    if len(pairs) != len(sweep.values) or any(len(p) != 2 for p in pairs):
        raise InvalidParameterError("need one (C1, C2) pair per sweep point")
    return pairs


def _spectral_row(point: ExperimentConfig, estimate: CorrelationEstimate, c1: float, c2: float) -> SpectralRow:
    seq = point.sequences[0]
    sigma_product = 1.0 / (readout_efficiency(point.channels[0]) * readout_efficiency(point.channels[1]))
    if min(c1, c2) <= 0:
        logger.warning("non-positive coherence (%.3g, %.3g) at %.4g Hz; point left out", c1, c2, seq.resonance)
        return SpectralRow(seq.resonance, seq.tau, estimate.r, estimate.sigma_r, c1, c2,
                           math.nan, math.nan, math.nan, False)
    # Monte Carlo coherences may overshoot 1 by their sampling error
    c1, c2 = min(c1, 1.0), min(c2, 1.0)
    point_spec = reconstruct_correlated_spectrum(estimate.r, c1, c2, sigma_product, seq.tau, seq.n_pulses)
    t = seq.duration
    return SpectralRow(point_spec.frequency, seq.tau, estimate.r, estimate.sigma_r, c1, c2, point_spec.S_C,
                       local_spectrum(c1, point_spec.S_C, t), local_spectrum(c2, point_spec.S_C, t),
                       point_spec.reliable)


def reconstruct_report(sweep: SweepResult, coherence_inputs="theory", threads: int = 1) -> list[SpectralRow]:
    """
    S_C, S_L1 and S_L2 (angular convention) at f = 1/(2τ) of every sweep point.

    :param coherence_inputs: "theory", "simulated" or a list of (C₁, C₂) pairs.
    """
    if not sweep.points:
        raise InvalidParameterError("sweep carries no point configs")
    with stage("theory"):
        coherences = sweep_coherences(sweep, coherence_inputs, threads)
        rows = [_spectral_row(p, est, c1, c2)
                for p, est, (c1, c2) in zip(sweep.points, sweep.estimates, coherences)]
    rows.sort(key=lambda row: row.frequency)
    return rows
