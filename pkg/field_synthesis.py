"""
Per-shot magnetic field traces for the common source and each sensor's
local source.

A trace is a deterministic function of (spec, shot_index, grid, master_seed).
Times on a grid are absolute (seconds since the first shot); tone phases are
referenced to that clock, so a phase-coherent tone is only randomised across
shots by the shot timing itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import curve_fit

from errors import ConfigurationError, InvalidParameterError, SamplingError
from source_util import get_source
from spectrum import Spectrum, SpectrumConvention

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
DEFAULT_DT = 1e-9
GAUSS = 1e-4
MIN_TONES = 64
# samples per period of the highest frequency a grid must carry
OVERSAMPLING = 20


class NoiseKind(str, Enum):
    RANDOM_PHASE_AC = "RandomPhaseAC"
    GAUSSIAN_BROADBAND = "GaussianBroadband"
    COHERENT_AC = "CoherentAC"
    SILENCE = "Silence"


class Broadening(str, Enum):
    DIFFUSION = "Diffusion"
    FREQUENCY_JITTER = "FrequencyJitter"


def cycles(f, t):
    """Fractional part of f·t, kept small before it meets a trig function."""
    return np.mod(np.multiply(f, t), 1.0)


@dataclass(frozen=True)
class TimeGrid:

    t_start: float = 0.0
    dt: float = DEFAULT_DT
    n_samples: int = 2

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameterError(f"grid dt must be positive, got {self.dt}")
        if self.n_samples < 2:
            raise InvalidParameterError(f"grid needs at least 2 samples, got {self.n_samples}")

    @classmethod
    def covering(cls, duration: float, dt: float = DEFAULT_DT, t_start: float = 0.0,
                 margin: int = 2) -> TimeGrid:
        """Smallest grid spanning [t_start, t_start + duration] plus a few spare samples."""
        n = int(math.ceil(duration / dt - 1e-9)) + 1 + margin
        return cls(t_start, dt, max(n, 2))

    @property
    def span(self) -> float:
        return (self.n_samples - 1) * self.dt

    def relative_times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_samples)

    def times(self) -> np.ndarray:
        return self.t_start + self.relative_times()

    def same_shape(self, other: TimeGrid) -> bool:
        return self.n_samples == other.n_samples and math.isclose(self.dt, other.dt, rel_tol=1e-12)


@dataclass(frozen=True)
class NoiseSourceSpec:

    kind: NoiseKind = NoiseKind.SILENCE
    amplitude_B0: float = 0.0
    carrier_f0: float = 0.0
    phase_bandwidth: float = 0.0
    psd_level: float = 0.0
    band_limit: float = 0.0
    seed_stream: int = 0
    broadening: Broadening = Broadening.DIFFUSION
    n_tones: int = MIN_TONES
    line_window: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        object.__setattr__(self, "broadening", Broadening(self.broadening))
        for name in ("amplitude_B0", "carrier_f0", "phase_bandwidth", "psd_level", "band_limit"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise InvalidParameterError(f"{name} must be finite and non-negative, got {value}")
        if self.seed_stream < 0:
            raise InvalidParameterError(f"seed_stream must be non-negative, got {self.seed_stream}")
        if self.n_tones < MIN_TONES:
            raise InvalidParameterError(f"n_tones must be at least {MIN_TONES}, got {self.n_tones}")
        if self.line_window is not None and self.line_window < 0:
            raise InvalidParameterError("line_window must be non-negative")
        if self.kind is NoiseKind.SILENCE:
            for name in ("amplitude_B0", "psd_level"):
                object.__setattr__(self, name, 0.0)
        if self.kind is NoiseKind.GAUSSIAN_BROADBAND and self.psd_level > 0 and self.band_limit <= 0:
            raise InvalidParameterError("GaussianBroadband needs a positive band_limit")

    @property
    def draws_random(self) -> bool:
        return get_source(self.kind).draws_random

    @property
    def half_window(self) -> float:
        """Half width of the FrequencyJitter carrier window."""
        if self.line_window is not None:
            return self.line_window
        return 10.0 * self.phase_bandwidth

    def line_bounds(self) -> tuple[float, float]:
        return max(self.carrier_f0 - self.half_window, 0.0), self.carrier_f0 + self.half_window

    @property
    def tone_amplitude(self) -> float:
        """Amplitude of each broadband tone: n_tones·A²/2 = psd_level·band_limit."""
        if self.band_limit == 0:
            return 0.0
        return math.sqrt(2.0 * self.psd_level * self.band_limit / self.n_tones)

    def max_frequency(self) -> float:
        fmax = get_source(self.kind).max_frequency
        return float(fmax(self)) if fmax is not None else 0.0

    def with_amplitude(self, amplitude_B0: float) -> NoiseSourceSpec:
        return replace(self, amplitude_B0=amplitude_B0)


@dataclass(frozen=True)
class Tone:
    """B(t) = amplitude·cos(2π·frequency·t + phase) on the absolute clock."""

    amplitude: float
    frequency: float
    phase: float

    def samples(self, grid: TimeGrid) -> np.ndarray:
        arg = TWO_PI * (cycles(self.frequency, grid.t_start) + self.frequency * grid.relative_times())
        return self.amplitude * np.cos(arg + self.phase)

    def phasor(self, t_start: float) -> complex:
        """Complex amplitude referenced to t_start."""
        return self.amplitude * np.exp(1j * (TWO_PI * cycles(self.frequency, t_start) + self.phase))

    def scaled(self, factor: float) -> Tone:
        return Tone(self.amplitude * factor, self.frequency, self.phase)


@dataclass(frozen=True)
class FieldTrace:

    grid: TimeGrid
    samples: np.ndarray
    source_id: str
    tones: tuple[Tone, ...] = ()

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.shape != (self.grid.n_samples,):
            raise InvalidParameterError(
                f"trace {self.source_id} has {samples.shape} samples for a {self.grid.n_samples}-sample grid")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameterError(f"trace {self.source_id} has non-finite samples")
        object.__setattr__(self, "samples", samples)

    @property
    def is_tone_sum(self) -> bool:
        return len(self.tones) > 0

    def scaled(self, factor: float) -> FieldTrace:
        return FieldTrace(self.grid, factor * self.samples, self.source_id,
                          tuple(t.scaled(factor) for t in self.tones))

    def __add__(self, other: FieldTrace) -> FieldTrace:
        if self.grid != other.grid:
            raise InvalidParameterError("cannot add traces on different grids")
        # exact tone lists only survive when every nonzero side is a tone sum
        if not self.is_tone_sum and not np.any(self.samples):
            tones = other.tones
        elif not other.is_tone_sum and not np.any(other.samples):
            tones = self.tones
        elif self.is_tone_sum and other.is_tone_sum:
            tones = self.tones + other.tones
        else:
            tones = ()
        return FieldTrace(self.grid, self.samples + other.samples,
                          f"{self.source_id}+{other.source_id}", tones)


@dataclass(frozen=True)
class TwoPointField:

    common: FieldTrace
    local1: FieldTrace
    local2: FieldTrace
    coupling1: float = 1.0
    coupling2: float = 1.0

    def __post_init__(self):
        if not (self.common.grid == self.local1.grid == self.local2.grid):
            raise InvalidParameterError("common and local traces must share one grid")

    @property
    def grid(self) -> TimeGrid:
        return self.common.grid

    def sensor_field(self, sensor: int) -> FieldTrace:
        """coupling_i·common + local_i for sensor 1 or 2."""
        if sensor == 1:
            return self.common.scaled(self.coupling1) + self.local1
        if sensor == 2:
            return self.common.scaled(self.coupling2) + self.local2
        raise IndexError(f"sensor must be 1 or 2, got {sensor}")


def check_sampling(spec: NoiseSourceSpec, dt: float) -> None:
    fmax = spec.max_frequency()
    if fmax > 0 and dt > 1.0 / (OVERSAMPLING * fmax):
        raise SamplingError(
            f"{spec.kind.value} source reaches {fmax:g} Hz; dt={dt:g} s exceeds 1/({OVERSAMPLING}·fmax)")


def synth_trace(spec: NoiseSourceSpec, shot_index: int, grid: TimeGrid, master_seed: int = 0) -> FieldTrace:
    """Field trace of one source for one shot.

    :raises SamplingError: if the grid is too coarse for the source.
    """
    if shot_index < 0:
        raise InvalidParameterError(f"shot_index must be non-negative, got {shot_index}")
    check_sampling(spec, grid.dt)
    samples, tones = get_source(spec.kind).synthesize(spec, shot_index, grid, master_seed)
    return FieldTrace(grid, samples, f"{spec.kind.value}:{spec.seed_stream}", tuple(tones))


def check_seed_streams(named_specs: dict[str, NoiseSourceSpec]) -> None:
    """Sources that draw random numbers must not share a seed stream."""
    seen: dict[int, str] = {}
    for name, spec in named_specs.items():
        if spec.kind is NoiseKind.SILENCE:
            continue
        if spec.seed_stream in seen:
            raise ConfigurationError(
                f"seed_stream {spec.seed_stream} is shared by {seen[spec.seed_stream]} and {name}",
                field=f"sources.{name}.seed_stream")
        seen[spec.seed_stream] = name


def compose_two_point(common_spec: NoiseSourceSpec, local1_spec: NoiseSourceSpec,
                      local2_spec: NoiseSourceSpec, couplings=(1.0, 1.0), shot_index: int = 0,
                      grid: TimeGrid | None = None, master_seed: int = 0) -> TwoPointField:
    """Three independent draws, common and one local per sensor."""
    check_seed_streams({"common": common_spec, "local1": local1_spec, "local2": local2_spec})
    grid = grid or TimeGrid()
    return TwoPointField(
        synth_trace(common_spec, shot_index, grid, master_seed),
        synth_trace(local1_spec, shot_index, grid, master_seed),
        synth_trace(local2_spec, shot_index, grid, master_seed),
        float(couplings[0]), float(couplings[1]),
    )


def empirical_psd(traces: list[FieldTrace]) -> Spectrum:
    """One-sided periodogram (T²/Hz) averaged over traces of one grid shape.

    Traces from different shots start at different times, so only dt and the
    sample count have to agree.
    """
    if len(traces) < 100:
        raise InvalidParameterError(f"need at least 100 traces, got {len(traces)}")
    grid = traces[0].grid
    for trace in traces[1:]:
        if not trace.grid.same_shape(grid):
            raise InvalidParameterError("traces do not share a grid")
    n, dt = grid.n_samples, grid.dt
    data = np.stack([trace.samples for trace in traces])
    power = np.abs(np.fft.rfft(data, axis=1)) ** 2 * (2.0 * dt / n)
    power[:, 0] /= 2.0
    if n % 2 == 0:
        power[:, -1] /= 2.0
    return Spectrum(np.fft.rfftfreq(n, dt), power.mean(axis=0), SpectrumConvention.FIELD)


def _folded_lorentzian(f, height, centre, half_width, floor):
    return (height / (1.0 + ((f - centre) / half_width) ** 2)
            + height / (1.0 + ((f + centre) / half_width) ** 2) + floor)


@dataclass(frozen=True)
class LineFit:
    centre: float
    fwhm: float
    height: float
    floor: float = field(default=0.0)


def fit_lorentzian(spectrum: Spectrum, centre_guess: float | None = None,
                   width_guess: float | None = None) -> LineFit:
    """Fit a Lorentzian line (with its negative-frequency image) to a field spectrum."""
    f, v = spectrum.frequencies, spectrum.values
    peak = int(np.argmax(v))
    centre_guess = f[peak] if centre_guess is None else centre_guess
    if width_guess is None:
        above = f[v > v[peak] / 2.0]
        width_guess = max(above.max() - above.min(), 2.0 * spectrum.resolution)
    p0 = (v[peak], centre_guess, width_guess / 2.0, 0.0)
    popt, _ = curve_fit(_folded_lorentzian, f, v, p0=p0, maxfev=20000)
    height, centre, half_width, floor = popt
    logger.debug("Lorentzian fit: centre %.6g Hz, FWHM %.6g Hz", centre, 2 * abs(half_width))
    return LineFit(float(centre), float(2.0 * abs(half_width)), float(height), float(floor))
