"""
Pulse sequences and phase accumulation.

Times inside a SequenceSpec are measured from the origin of the grid the
sequence is integrated on, i.e. from the start of the shot. π pulses are
instantaneous and sit at t_delay + (k - 1/2)·tau.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from errors import CoverageError, InvalidParameterError
from field_synthesis import TWO_PI, FieldTrace, TimeGrid, cycles

logger = logging.getLogger(__name__)

# grid positions closer than this (in samples) to an integer are on the grid
SNAP = 1e-6


class SequenceKind(str, Enum):
    XY8 = "XY8"
    CP = "CP"
    RAMSEY = "Ramsey"


class InitParity(str, Enum):
    PARALLEL = "Parallel"
    ANTIPARALLEL = "Antiparallel"


@dataclass(frozen=True)
class GyromagneticConstants:
    """Linear-frequency gyromagnetic ratios (Hz/T)."""

    gamma_e: float = 28.024e9
    gamma_n15: float = -4.3e6

    def __post_init__(self):
        if not self.gamma_e > 0:
            raise InvalidParameterError("gamma_e must be positive")


CONSTANTS = GyromagneticConstants()


@dataclass(frozen=True)
class SequenceSpec:

    kind: SequenceKind
    tau: float
    n_pulses: int
    t_delay: float = 0.0
    final_pulse_phase: float = np.pi / 2
    init_parity: InitParity = InitParity.PARALLEL
    transition_sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", SequenceKind(self.kind))
        object.__setattr__(self, "init_parity", InitParity(self.init_parity))
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if self.n_pulses < 0:
            raise InvalidParameterError(f"n_pulses must be non-negative, got {self.n_pulses}")
        if self.kind is SequenceKind.XY8 and self.n_pulses % 8 != 0:
            raise InvalidParameterError(f"XY8 needs a multiple of 8 pulses, got {self.n_pulses}")
        if self.kind is SequenceKind.XY8 and self.n_pulses == 0:
            raise InvalidParameterError("XY8 needs at least 8 pulses")
        if self.kind is SequenceKind.RAMSEY and self.n_pulses != 0:
            raise InvalidParameterError("Ramsey sequences carry no π pulses")
        if self.t_delay < 0:
            raise InvalidParameterError(f"t_delay must be non-negative, got {self.t_delay}")
        if self.transition_sign not in (1, -1):
            raise InvalidParameterError(f"transition_sign must be +1 or -1, got {self.transition_sign}")

    @property
    def duration(self) -> float:
        """Phase integration time t; a Ramsey sequence integrates for tau."""
        return self.n_pulses * self.tau if self.n_pulses else self.tau

    @property
    def end(self) -> float:
        return self.t_delay + self.duration

    @property
    def pulse_times(self) -> np.ndarray:
        return self.t_delay + (np.arange(1, self.n_pulses + 1) - 0.5) * self.tau

    @property
    def sign_factor(self) -> int:
        """Transition sign, negated for an antiparallel start."""
        parity = -1 if self.init_parity is InitParity.ANTIPARALLEL else 1
        return self.transition_sign * parity

    @property
    def resonance(self) -> float:
        return 1.0 / (2.0 * self.tau)

    def with_(self, **changes) -> SequenceSpec:
        return replace(self, **changes)


@dataclass(frozen=True)
class TogglingProfile:

    switch_times: tuple[float, ...]
    initial_sign: int
    start: float
    stop: float

    def __post_init__(self):
        times = np.asarray(self.switch_times)
        if times.size and (np.any(np.diff(times) <= 0) or times[0] < self.start or times[-1] > self.stop):
            raise InvalidParameterError("switch times must increase strictly inside the window")

    def segments(self) -> list[tuple[float, float, int]]:
        """(start, stop, sign) of each constant-sign stretch."""
        edges = (self.start, *self.switch_times, self.stop)
        sign = self.initial_sign
        out = []
        for a, b in zip(edges[:-1], edges[1:]):
            out.append((a, b, sign))
            sign = -sign
        return out


def build_sequence(kind, tau: float, n_pulses: int, t_delay: float = 0.0,
                   init_parity=InitParity.PARALLEL, transition_sign: int = 1,
                   final_pulse_phase: float = np.pi / 2) -> SequenceSpec:
    return SequenceSpec(kind, tau, n_pulses, t_delay, final_pulse_phase, init_parity, transition_sign)


def toggling_profile(seq: SequenceSpec) -> TogglingProfile:
    return TogglingProfile(tuple(seq.pulse_times), 1, seq.t_delay, seq.end)


def toggling(seq: SequenceSpec, t):
    """Toggling sign at time(s) t: 0 outside the window, +1 at the start, flipping at each pulse."""
    t = np.asarray(t, dtype=float)
    flips = np.searchsorted(seq.pulse_times, t, side="right")
    sign = np.where(flips % 2 == 0, 1, -1)
    inside = (t >= seq.t_delay) & (t <= seq.end)
    out = np.where(inside, sign, 0)
    return int(out) if out.ndim == 0 else out


def tone_response(seq: SequenceSpec, f) -> np.ndarray:
    """Y(f) = ∫ y(t)·exp(2πi f t) dt over the sequence window (seconds).

    The n - 1 full intervals between pulses form a geometric series in
    q = -exp(2πi f tau). With u = f·tau + 1/2 = m + d it sums to
    exp(iπnd)·(n - 1)·sinc((n - 1)d)/sinc(d), which has no poles since
    |d| <= 1/2. The two half intervals at the ends are added directly.
    """
    f = np.asarray(f, dtype=float)
    tau, n = seq.tau, seq.n_pulses
    if n == 0:
        out = tau * np.exp(1j * TWO_PI * cycles(f, tau / 2.0)) * np.sinc(f * tau)
    else:
        u = f * tau + 0.5
        d = u - np.round(u)
        series = np.exp(1j * np.pi * n * d) * (n - 1) * np.sinc((n - 1) * d) / np.sinc(d)
        ends = np.exp(1j * TWO_PI * cycles(f, tau / 4.0))
        ends += (-1.0) ** n * np.exp(1j * TWO_PI * cycles(f, (n - 0.25) * tau))
        out = tau * np.sinc(f * tau) * series + 0.5 * tau * np.sinc(0.5 * f * tau) * ends
    if seq.t_delay:
        out = out * np.exp(1j * TWO_PI * cycles(f, seq.t_delay))
    return out


def _snap(u: float) -> float:
    r = round(u)
    return float(r) if abs(u - r) < SNAP else u


def _partial(w: np.ndarray, j: int, u0: float, u1: float, scale: float) -> None:
    """Integral of the linear interpolant over [j + u0, j + u1] in grid units."""
    w[j] += scale * ((u1 - u0) - (u1 * u1 - u0 * u0) / 2.0)
    w[j + 1] += scale * (u1 * u1 - u0 * u0) / 2.0


def _end_slope(w: np.ndarray, g: int, scale: float) -> None:
    """Add scale·h·B'(t_g), central where both neighbours exist."""
    n = w.size
    if 0 < g < n - 1:
        w[g + 1] += scale / 2.0
        w[g - 1] -= scale / 2.0
    elif g == 0:
        w[1] += scale
        w[0] -= scale
    else:
        w[g] += scale
        w[g - 1] -= scale


@lru_cache(maxsize=256)
def _weights_cached(seq: SequenceSpec, dt: float, n_samples: int) -> np.ndarray:
    w = np.zeros(n_samples)
    if seq.t_delay < -SNAP * dt or seq.end > (n_samples - 1) * dt * (1 + 1e-12):
        raise CoverageError(
            f"sequence window [{seq.t_delay:g}, {seq.end:g}] s is not covered by a "
            f"{n_samples}-sample grid with dt={dt:g} s")
    for a, b, s in toggling_profile(seq).segments():
        ua, ub = _snap(a / dt), _snap(b / dt)
        ga, gb = int(math.ceil(ua)), int(math.floor(ub))
        scale = s * dt
        if gb < ga:
            j = int(math.floor(ua))
            _partial(w, j, ua - j, ub - j, scale)
            continue
        if ua < ga:
            _partial(w, ga - 1, ua - (ga - 1), 1.0, scale)
        if ub > gb:
            _partial(w, gb, 0.0, ub - gb, scale)
        if gb > ga:
            w[ga:gb + 1] += scale
            w[ga] -= scale / 2.0
            w[gb] -= scale / 2.0
            # Gregory end correction: -(h²/12)·[B'(t_gb) - B'(t_ga)]
            _end_slope(w, gb, -scale / 12.0)
            _end_slope(w, ga, scale / 12.0)
    w.flags.writeable = False
    return w


def integration_weights(seq: SequenceSpec, grid: TimeGrid) -> np.ndarray:
    """Weights w with ∫ y(t)·B(t) dt ≈ w · samples on the grid.

    Trapezoid rule on each constant-sign segment with end corrections;
    switch instants between samples are integrated on the linear interpolant.

    :raises CoverageError: if the grid does not span the sequence window.
    """
    return _weights_cached(seq, float(grid.dt), int(grid.n_samples))


class IntegrationWindow:
    """One sensor's sequence on a fixed per-shot grid shape, as used by the phase kernels."""

    def __init__(self, seq: SequenceSpec, dt: float, n_samples: int) -> None:
        self.seq = seq
        self.dt = dt
        self.n_samples = n_samples

    @property
    def weights(self) -> np.ndarray:
        return _weights_cached(self.seq, float(self.dt), int(self.n_samples))

    def response(self, f) -> np.ndarray:
        return tone_response(self.seq, f)


def field_integral(field: FieldTrace, seq: SequenceSpec, numeric: bool = False) -> float:
    """∫ y(t)·B(t) dt in T·s, exact for tone sums unless numeric is set."""
    weights = integration_weights(seq, field.grid)
    if field.is_tone_sum and not numeric:
        freqs = np.array([t.frequency for t in field.tones])
        phasors = np.array([t.phasor(field.grid.t_start) for t in field.tones])
        return float(np.real(phasors * tone_response(seq, freqs)).sum())
    return float(weights @ field.samples)


def accumulate_phase(field: FieldTrace, seq: SequenceSpec,
                     consts: GyromagneticConstants = CONSTANTS, numeric: bool = False) -> float:
    """φ = 2π·γ_e·∫B·y dt, times the transition sign, negated for an antiparallel start.

    :raises CoverageError: if the field grid does not span the sequence.
    """
    return TWO_PI * consts.gamma_e * seq.sign_factor * field_integral(field, seq, numeric)


def _sinc(x):
    return np.sinc(x / np.pi)


def filter_weight(f, tau: float, n_pulses: int):
    """W̄ = sinc(πfnτ)·[1 - sec(πfτ)], with the sec poles taken as limits.

    At even pulse counts the pole is removable and |W̄| = 2/π at resonance.
    Odd counts and n = 0 diverge there and return inf.
    """
    x = np.pi * np.asarray(f, dtype=float) * tau
    n = n_pulses
    cos_x = np.cos(x)
    pole = np.abs(cos_x) < 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        regular = _sinc(n * x) * (1.0 - 1.0 / cos_x)
        # sin(nx)/cos(x) -> -n·cos(nx)/sin(x) at the pole
        limit = (1.0 - cos_x) * np.cos(n * x) / (x * np.sin(x))
    if n % 2 or n == 0:
        limit = np.full_like(x, np.inf)
    out = np.where(pole, limit, regular)
    return float(out) if out.ndim == 0 else out


def hyperfine_harmonic(B0_static: float, k: int, consts: GyromagneticConstants = CONSTANTS) -> float:
    """f_k = (2·γ_N·B0 + 3.05 MHz)/(2k), where the 15N hyperfine signal shows up."""
    if k < 1:
        raise InvalidParameterError(f"harmonic index must be at least 1, got {k}")
    return (2.0 * consts.gamma_n15 * B0_static + 3.05e6) / (2.0 * k)


def write_toggling_csv(seq: SequenceSpec, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start", "stop", "sign"])
        for a, b, s in toggling_profile(seq).segments():
            writer.writerow([repr(a), repr(b), s])
    logger.debug("wrote %d toggling segments to %s", seq.n_pulses + 1, path)
