"""
Closed-form predictions.

Covers the ideal and readout-degraded correlation, the sensitivity law, the
coherence/spectrum relations of the delta-filter approximation, and the
phase-statistics expectations that the harness matches against simulation.

Conventions: gyromagnetic ratios are linear (Hz/T). Accumulated phases are
φ = 2π·γ_e·∫y·B dt. The sensitivity law takes γ_e as it stands.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import comb, j0

from errors import InvalidParameterError, UnreachableSensitivityError
from field_synthesis import Broadening, NoiseKind, NoiseSourceSpec
from measurement import ReadoutChannel, readout_efficiency
from sensing import CONSTANTS, GyromagneticConstants, SequenceSpec, filter_weight, tone_response
from spectrum import Spectrum, SpectrumConvention

__all__ = [
    "DecoherenceModel", "TheoryPrediction", "Spectrum", "SpectrumConvention",
    "r_ideal_general", "r_ideal_gaussian", "r_ideal_bessel", "apply_readout_penalty",
    "snr_and_min_noise", "required_time", "coherence_from_psd", "reconstruct_correlated_spectrum",
    "forward_correlation", "local_spectrum", "cumulant_prediction", "sensitivity_factor",
]

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
COHERENCE_FLOOR = 1e-3
ASINH_SERIES_BELOW = 1e-4
# Gauss-Legendre layout of line averages: panels x nodes per panel
LINE_PANELS = 64
PANEL_NODES = 16
DIFFUSION_SPAN = 50.0


@dataclass(frozen=True)
class DecoherenceModel:
    """
    Local decoherence exponents χ̃₁, χ̃₂ and the common one χ_C at one
    sequence time. T2, when given, is the exponential shortcut χ = t/T2.
    """

    chi_local_1: float = 0.0
    chi_local_2: float = 0.0
    chi_common: float = 0.0
    T2: float | None = None

    def __post_init__(self):
        for name in ("chi_local_1", "chi_local_2", "chi_common"):
            if not getattr(self, name) >= 0:
                raise InvalidParameterError(f"{name} must be non-negative")
        if self.T2 is not None and not self.T2 > 0:
            raise InvalidParameterError("T2 must be positive")

    @classmethod
    def from_coherences(cls, c1: float, c2: float, chi_common: float = 0.0) -> DecoherenceModel:
        for c in (c1, c2):
            if not 0 < c <= 1:
                raise InvalidParameterError(f"coherence must lie in (0, 1], got {c}")
        return cls(-math.log(c1), -math.log(c2), chi_common)

    @classmethod
    def exponential(cls, T2: float, t: float) -> DecoherenceModel:
        return cls(t / T2, t / T2, 0.0, T2)

    @property
    def coherence1(self) -> float:
        return math.exp(-self.chi_local_1)

    @property
    def coherence2(self) -> float:
        return math.exp(-self.chi_local_2)

    @property
    def local_factor(self) -> float:
        return math.exp(-(self.chi_local_1 + self.chi_local_2))


@dataclass(frozen=True)
class TheoryPrediction:

    r_ideal: float
    r_observed: float
    snr: float | None = None
    label: str = ""
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not abs(self.r_observed) <= abs(self.r_ideal) + 1e-15 or abs(self.r_ideal) > 1 + 1e-12:
            raise InvalidParameterError(
                f"inconsistent prediction: r_ideal={self.r_ideal}, r_observed={self.r_observed}")

    def as_dict(self) -> dict:
        return {"r_ideal": self.r_ideal, "r_observed": self.r_observed, "snr": self.snr,
                "label": self.label, **self.inputs}


# --- correlation forms -----------------------------------------------------

def r_ideal_general(chi1: float, chi2: float, sin_sin_expect: float) -> float:
    """r_ideal = e^{-(χ̃₁+χ̃₂)}·⟨sin φ_C1 sin φ_C2⟩."""
    if abs(sin_sin_expect) > 1:
        raise InvalidParameterError(f"|⟨sin φ1 sin φ2⟩| cannot exceed 1, got {sin_sin_expect}")
    return math.exp(-(chi1 + chi2)) * sin_sin_expect


def r_ideal_gaussian(chi1: float, chi2: float, sigma_phiC_sq: float) -> float:
    """Identical Gaussian correlated phases: ½e^{-(χ̃₁+χ̃₂)}(1 - e^{-2σ²})."""
    if sigma_phiC_sq < 0:
        raise InvalidParameterError("phase variance must be non-negative")
    return 0.5 * math.exp(-(chi1 + chi2)) * -math.expm1(-2.0 * sigma_phiC_sq)


def bessel_argument(B0, f, tau, n_pulses, consts: GyromagneticConstants = CONSTANTS):
    """2a, twice the phase amplitude a = 2π·γ_e·B₀·|W̄|·t of a random-phase tone."""
    t = n_pulses * tau
    return 2.0 * TWO_PI * consts.gamma_e * B0 * np.abs(filter_weight(f, tau, n_pulses)) * t


def r_ideal_bessel(chi1: float, chi2: float, B0: float, f, tau: float, n_pulses: int,
                   consts: GyromagneticConstants = CONSTANTS, weights=None) -> float:
    """½e^{-(χ̃₁+χ̃₂)}[1 - J₀(2a)] for a random-phase tone seen by both sensors.

    With an array of frequencies and matching weights the bracket is averaged
    over the line, e.g. the nodes of ``lorentzian_line``.
    """
    f = np.atleast_1d(np.asarray(f, dtype=float))
    w = np.full(f.shape, 1.0 / f.size) if weights is None else np.asarray(weights, dtype=float)
    bracket = float(w @ (1.0 - j0(bessel_argument(B0, f, tau, n_pulses, consts))) / w.sum())
    return 0.5 * math.exp(-(chi1 + chi2)) * bracket


def apply_readout_penalty(r_ideal: float, channel1: ReadoutChannel, channel2: ReadoutChannel) -> float:
    """r = r_ideal/(σ_R1·σ_R2), failure events included; two factors, one per sensor.

    :raises ZeroContrastError: if a channel produces a constant signal.
    """
    return r_ideal * readout_efficiency(channel1) * readout_efficiency(channel2)


# --- sensitivity -----------------------------------------------------------

def _penalty(sigma_R: float, T2: float, t: float) -> float:
    return 2.0 * sigma_R ** 2 * math.exp(2.0 * t / T2)


def _detect_fraction(sigma_B: float, t: float, consts: GyromagneticConstants) -> float:
    return -math.expm1(-4.0 * consts.gamma_e ** 2 * t * sigma_B ** 2 / math.pi)


def snr_and_min_noise(sigma_R: float, T2: float, t: float, t_R: float, T_total: float,
                      consts: GyromagneticConstants = CONSTANTS, sigma_B: float | None = None):
    """
    (SNR at sigma_B, smallest detectable σ_B) for Gaussian noise after a total time T_total.

    SNR = √(T/(t+t_R))·(1 - e^{-4γ²tσ_B²/π})/(2σ_R²e^{2t/T2}); σ_B,min is where
    SNR = 1. The SNR is None when sigma_B is not given.

    :raises UnreachableSensitivityError: if no field reaches SNR = 1 in T_total.
    """
    for name, value in (("sigma_R", sigma_R), ("T2", T2), ("t", t), ("T_total", T_total)):
        if not value > 0:
            raise InvalidParameterError(f"{name} must be positive, got {value}")
    if t_R < 0:
        raise InvalidParameterError("t_R must be non-negative")
    shots = T_total / (t + t_R)
    ratio = _penalty(sigma_R, T2, t) / math.sqrt(shots)
    snr = None
    if sigma_B is not None:
        snr = math.sqrt(shots) * _detect_fraction(sigma_B, t, consts) / _penalty(sigma_R, T2, t)
    if ratio >= 1:
        minimal = (t + t_R) * _penalty(sigma_R, T2, t) ** 2
        raise UnreachableSensitivityError(
            f"unreachable in {T_total:g} s; needs at least {minimal:g} s", minimal)
    sigma_sq = -math.pi / (4.0 * consts.gamma_e ** 2 * t) * math.log1p(-ratio)
    return snr, math.sqrt(sigma_sq)


def required_time(sigma_B: float, sigma_R: float, T2: float, t: float, t_R: float,
                  consts: GyromagneticConstants = CONSTANTS) -> float:
    """Total time T at which σ_B is detected with SNR = 1."""
    if not sigma_B > 0:
        raise InvalidParameterError("sigma_B must be positive")
    return (t + t_R) * (_penalty(sigma_R, T2, t) / _detect_fraction(sigma_B, t, consts)) ** 2


# --- spectra ---------------------------------------------------------------

def _resonance(tau: float, n_pulses: int) -> tuple[float, float]:
    if n_pulses < 1:
        raise InvalidParameterError("the delta-filter relations need at least one π pulse")
    return 1.0 / (2.0 * tau), n_pulses * tau


def coherence_from_psd(spectrum: Spectrum, tau: float, n_pulses: int,
                       consts: GyromagneticConstants = CONSTANTS) -> float:
    """C = exp(-t·S(ω)/π) with S read at f = 1/(2τ).

    :raises CoverageError: if the spectrum does not reach 1/(2τ).
    """
    f, t = _resonance(tau, n_pulses)
    chi = t * float(spectrum.to_angular(consts).at(f)) / math.pi
    return math.exp(-chi)


def _stable_asinh(x: float) -> float:
    if abs(x) < ASINH_SERIES_BELOW:
        return x - x ** 3 / 6.0 + 3.0 * x ** 5 / 40.0
    return math.asinh(x)


def forward_correlation(S_C: float, C1: float, C2: float, sigma_R_product: float, t: float) -> float:
    """r = C₁C₂·sinh(2tS_C/π)/σ_R²."""
    return C1 * C2 * math.sinh(2.0 * t * S_C / math.pi) / sigma_R_product


@dataclass(frozen=True)
class SpectralPoint:
    frequency: float
    S_C: float
    reliable: bool


def reconstruct_correlated_spectrum(r: float, C1: float, C2: float, sigma_R_product: float,
                                    tau: float, n_pulses: int,
                                    floor: float = COHERENCE_FLOOR) -> SpectralPoint:
    """S_C = (π/2t)·asinh(σ_R²·r/(C₁C₂)) at f = 1/(2τ), t = nτ.

    Points with C₁C₂ below the floor are flagged unreliable and still returned.
    """
    for c in (C1, C2):
        if not 0 < c <= 1:
            raise InvalidParameterError(f"coherence must lie in (0, 1], got {c}")
    if not math.isfinite(r):
        raise InvalidParameterError("r must be finite")
    f, t = _resonance(tau, n_pulses)
    reliable = C1 * C2 >= floor
    if not reliable:
        logger.warning("C1*C2 = %.3g below %.3g at %.4g Hz; S_C unreliable", C1 * C2, floor, f)
    S_C = math.pi / (2.0 * t) * _stable_asinh(sigma_R_product * r / (C1 * C2))
    return SpectralPoint(f, S_C, reliable)


def local_spectrum(C: float, S_C: float, t: float) -> float:
    """S_L = S - S_C with the single-sensor S = -(π/t)·ln C."""
    if not 0 < C <= 1:
        raise InvalidParameterError(f"coherence must lie in (0, 1], got {C}")
    return -math.pi / t * math.log(C) - S_C


# --- cumulants -------------------------------------------------------------

def gaussian_characteristic(sigma_sq: float) -> Callable[[int], float]:
    return lambda m: math.exp(-m * m * sigma_sq / 2.0)


def tone_characteristic(amplitude: float) -> Callable[[int], float]:
    """φ = a·cos ψ with ψ uniform."""
    return lambda m: float(j0(m * amplitude))


def sin_power_expectation(order: int, characteristic: Callable[[int], float]) -> float:
    """⟨sin^N φ⟩ of a symmetric phase distribution from E[e^{imφ}] (real)."""
    total = 0.0
    for k in range(order + 1):
        total += comb(order, k, exact=True) * (-1) ** (order - k) * characteristic(2 * k - order)
    # (2i)^N; odd orders vanish for symmetric distributions
    if order % 2:
        return 0.0
    return total / (2 ** order * (-1) ** (order // 2))


def sensitivity_factor(order: int) -> float:
    """√N/2^{N-1}, the N-sensor sensitivity relative to one sensor."""
    if order < 2:
        raise InvalidParameterError("order must be at least 2")
    return math.sqrt(order) / 2 ** (order - 1)


@dataclass(frozen=True)
class CumulantPrediction:
    order: int
    kappa_normalized: float
    sensitivity_factor: float


def cumulant_prediction(order: int, distribution: str = "gaussian", sigma_sq: float | None = None,
                        amplitude: float | None = None, moments: dict | None = None) -> CumulantPrediction:
    """κ̃_N = ⟨sin^N φ⟩ for a named distribution or from supplied moments {N: ⟨sin^N φ⟩}."""
    if order < 2:
        raise InvalidParameterError("order must be at least 2")
    if moments is not None:
        value = float(moments[order])
    elif distribution == "gaussian":
        if sigma_sq is None:
            raise InvalidParameterError("gaussian phases need sigma_sq")
        value = sin_power_expectation(order, gaussian_characteristic(sigma_sq))
    elif distribution == "tone":
        if amplitude is None:
            raise InvalidParameterError("tone phases need an amplitude")
        value = sin_power_expectation(order, tone_characteristic(amplitude))
    else:
        raise InvalidParameterError(f"unknown phase distribution {distribution!r}")
    return CumulantPrediction(order, value, sensitivity_factor(order))


# --- phase statistics of the synthesized sources ---------------------------

def composite_gauss_legendre(lo: float, hi: float, panels: int = LINE_PANELS,
                             nodes: int = PANEL_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a panelled Gauss-Legendre rule on [lo, hi]."""
    if not hi > lo:
        raise InvalidParameterError(f"empty interval [{lo}, {hi}]")
    x, w = leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges)[:, None] / 2.0
    mid = (edges[:-1] + edges[1:])[:, None] / 2.0
    return (mid + half * x).ravel(), (half * w).ravel()


def lorentzian(f, centre: float, fwhm: float):
    hw = fwhm / 2.0
    return hw / np.pi / ((np.asarray(f) - centre) ** 2 + hw * hw)


def lorentzian_line(centre: float, fwhm: float, lo: float, hi: float,
                    panels: int = LINE_PANELS, nodes: int = PANEL_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies and normalized weights of a Lorentzian line truncated to [lo, hi]."""
    f, w = composite_gauss_legendre(lo, hi, panels, nodes)
    w = w * lorentzian(f, centre, fwhm)
    return f, w / w.sum()


@dataclass(frozen=True)
class ToneEnsemble:
    """n_tones independent random-phase tones with frequencies drawn from a weighted table."""
    frequencies: np.ndarray
    weights: np.ndarray
    amplitude: float
    n_tones: int = 1


@dataclass(frozen=True)
class DiffusedLine:
    """Wiener phase-diffused tone: one-sided field PSD (B0²/2)·L(f - f0)."""
    frequencies: np.ndarray
    weights: np.ndarray
    power: float


def _filter_nodes(lo: float, hi: float, seqs) -> tuple[np.ndarray, np.ndarray]:
    """Panel count high enough to resolve the narrowest filter passband."""
    t = min(s.duration for s in seqs)
    panels = int(min(max(LINE_PANELS, 4.0 * (hi - lo) * t), 8192))
    return composite_gauss_legendre(lo, hi, panels, PANEL_NODES)


def source_statistics(spec: NoiseSourceSpec, seqs=()):
    """Phase-relevant description of a source, or None for a silent one."""
    if spec.kind is NoiseKind.SILENCE or (spec.amplitude_B0 == 0 and spec.psd_level == 0):
        return None
    one = np.ones(1)
    if spec.kind is NoiseKind.COHERENT_AC or (
            spec.kind is NoiseKind.RANDOM_PHASE_AC and spec.phase_bandwidth == 0):
        return ToneEnsemble(np.array([spec.carrier_f0]), one, spec.amplitude_B0)
    if spec.kind is NoiseKind.RANDOM_PHASE_AC and spec.broadening is Broadening.FREQUENCY_JITTER:
        lo, hi = spec.line_bounds()
        f, w = _filter_nodes(lo, hi, seqs)
        w = w * lorentzian(f, spec.carrier_f0, spec.phase_bandwidth)
        return ToneEnsemble(f, w / w.sum(), spec.amplitude_B0)
    if spec.kind is NoiseKind.RANDOM_PHASE_AC:
        span = DIFFUSION_SPAN * spec.phase_bandwidth
        f, w = _filter_nodes(max(spec.carrier_f0 - span, 0.0), spec.carrier_f0 + span, seqs)
        return DiffusedLine(f, w * lorentzian(f, spec.carrier_f0, spec.phase_bandwidth),
                            spec.amplitude_B0 ** 2 / 2.0)
    if spec.psd_level == 0:
        return None
    f, w = _filter_nodes(0.0, spec.band_limit, seqs)
    return ToneEnsemble(f, w / spec.band_limit, spec.tone_amplitude, spec.n_tones)


def phase_amplitudes(frequencies, seq: SequenceSpec, coupling: float,
                     consts: GyromagneticConstants = CONSTANTS) -> np.ndarray:
    """Complex phase per unit field amplitude: φ = Re[A·B·e^{iψ}] for a tone B·cos(2πft + ψ)."""
    return TWO_PI * consts.gamma_e * coupling * seq.sign_factor * tone_response(seq, frequencies)


def expected_cos(spec: NoiseSourceSpec, seq: SequenceSpec, coupling: float = 1.0,
                 consts: GyromagneticConstants = CONSTANTS) -> float:
    """⟨cos φ⟩ of the phase this source puts on one sensor."""
    stats = source_statistics(spec, (seq,))
    if stats is None or coupling == 0:
        return 1.0
    A = phase_amplitudes(stats.frequencies, seq, coupling, consts)
    if isinstance(stats, DiffusedLine):
        return math.exp(-stats.power * float(stats.weights @ np.abs(A) ** 2) / 2.0)
    return float(stats.weights @ j0(stats.amplitude * np.abs(A))) ** stats.n_tones


def expected_sin_sin(spec: NoiseSourceSpec, seq1: SequenceSpec, seq2: SequenceSpec,
                     couplings=(1.0, 1.0), consts: GyromagneticConstants = CONSTANTS) -> float:
    """⟨sin φ₁ sin φ₂⟩ for the phases a shared source puts on two sensors.

    Exact for random-phase tone ensembles: ½(M₋ᴷ - M₊ᴷ) with
    M± = Σw·J₀(|A₁ ± A₂|). Diffused lines use the Gaussian form
    e^{-(v₁+v₂)/2}·sinh(c).
    """
    stats = source_statistics(spec, (seq1, seq2))
    if stats is None:
        return 0.0
    A1 = phase_amplitudes(stats.frequencies, seq1, couplings[0], consts)
    A2 = phase_amplitudes(stats.frequencies, seq2, couplings[1], consts)
    if isinstance(stats, DiffusedLine):
        v1 = stats.power * float(stats.weights @ np.abs(A1) ** 2)
        v2 = stats.power * float(stats.weights @ np.abs(A2) ** 2)
        c = stats.power * float(stats.weights @ np.real(A1 * np.conj(A2)))
        return math.exp(-(v1 + v2) / 2.0) * math.sinh(c)
    minus = float(stats.weights @ j0(stats.amplitude * np.abs(A1 - A2)))
    plus = float(stats.weights @ j0(stats.amplitude * np.abs(A1 + A2)))
    return 0.5 * (minus ** stats.n_tones - plus ** stats.n_tones)

