"""
Quantum projection and readout.

Phases become spin states through a Bernoulli draw, and spin states become
signals through a readout channel: Poissonian photon counts with
state-dependent means, or thresholded assignments with fixed probabilities.
All draws are fixed-width per-shot uniforms from the reserved streams in
``rng``, so any shot can be replayed alone.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.special import ndtri
from scipy.stats import poisson

from errors import InvalidParameterError, UnsupportedModeError, ZeroContrastError
from rng import (DRIFT_STREAM, PARITY_STREAM, PROJECTION_STREAM, READOUT_STREAM, TIMING_STREAM,
                 open_unit, shot_uniforms)

logger = logging.getLogger(__name__)

QUARTER_TURN = np.pi / 2


class ReadoutMode(str, Enum):
    PHOTON_COUNT = "PhotonCount"
    THRESHOLD = "Threshold"


def _probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class ReadoutChannel:
    """
    A readout model for one sensor.

    PhotonCount channels draw Poisson counts with mean alpha0 or alpha1.
    Threshold channels report 1 with probability p_1_given_0 or p_1_given_1.
    With probability p_fail a shot ignores the spin: the count is drawn with
    mean alpha_background, or the bit is a fair coin.

    Zero-contrast channels are valid; only their readout noise is undefined.
    """

    mode: ReadoutMode
    alpha0: float = 0.0
    alpha1: float = 0.0
    p_1_given_0: float = 0.0
    p_1_given_1: float = 1.0
    p_fail: float = 0.0
    alpha_background: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", ReadoutMode(self.mode))
        if self.mode is ReadoutMode.PHOTON_COUNT:
            for name in ("alpha0", "alpha1"):
                value = getattr(self, name)
                if not (value >= 0 and math.isfinite(value)):
                    raise InvalidParameterError(f"{name} must be finite and non-negative, got {value}")
            if self.alpha_background is None:
                object.__setattr__(self, "alpha_background", (self.alpha0 + self.alpha1) / 2.0)
            elif not self.alpha_background >= 0:
                raise InvalidParameterError("alpha_background must be non-negative")
        else:
            _probability("p_1_given_0", self.p_1_given_0)
            _probability("p_1_given_1", self.p_1_given_1)
        if not 0.0 <= self.p_fail < 1.0:
            raise InvalidParameterError(f"p_fail must lie in [0, 1), got {self.p_fail}")

    @classmethod
    def photon_count(cls, alpha0: float, alpha1: float, p_fail: float = 0.0,
                     alpha_background: float | None = None) -> ReadoutChannel:
        return cls(ReadoutMode.PHOTON_COUNT, alpha0, alpha1, p_fail=p_fail,
                   alpha_background=alpha_background)

    @classmethod
    def threshold(cls, p_1_given_0: float, p_1_given_1: float, p_fail: float = 0.0) -> ReadoutChannel:
        return cls(ReadoutMode.THRESHOLD, p_1_given_0=p_1_given_0, p_1_given_1=p_1_given_1, p_fail=p_fail)

    @classmethod
    def symmetric_threshold(cls, fidelity: float) -> ReadoutChannel:
        return cls.threshold(1.0 - fidelity, fidelity)

    @classmethod
    def ideal(cls) -> ReadoutChannel:
        return cls.threshold(0.0, 1.0)

    @property
    def contrast(self) -> float:
        """Mean signal difference between spin 1 and spin 0."""
        if self.mode is ReadoutMode.PHOTON_COUNT:
            return self.alpha1 - self.alpha0
        return self.p_1_given_1 - self.p_1_given_0

    @property
    def is_symmetric(self) -> bool:
        return self.mode is ReadoutMode.THRESHOLD and math.isclose(
            self.p_1_given_0, 1.0 - self.p_1_given_1, abs_tol=1e-15)

    @property
    def fidelity(self) -> float:
        if not self.is_symmetric:
            raise UnsupportedModeError("fidelity is only defined for symmetric threshold channels")
        return self.p_1_given_1

    def with_readout_noise(self, sigma_R: float) -> ReadoutChannel:
        """The symmetric threshold channel with this readout noise."""
        return symmetric_for_noise(sigma_R)

    def with_failure(self, p_fail: float) -> ReadoutChannel:
        return replace(self, p_fail=p_fail)


def symmetric_for_noise(sigma_R: float) -> ReadoutChannel:
    """Symmetric threshold channel with F = (1 + 1/σ_R)/2."""
    if not sigma_R >= 1.0:
        raise InvalidParameterError(f"readout noise must be at least 1, got {sigma_R}")
    return ReadoutChannel.symmetric_threshold(0.5 * (1.0 + 1.0 / sigma_R))


def readout_noise(channel: ReadoutChannel) -> float:
    """σ_R of the channel's spin-dependent signal, ignoring failure events.

    :raises ZeroContrastError: if the channel cannot tell the states apart.
    """
    delta = channel.contrast
    if delta == 0:
        raise ZeroContrastError(f"{channel.mode.value} channel has zero contrast")
    if channel.mode is ReadoutMode.PHOTON_COUNT:
        spread = channel.alpha0 + channel.alpha1
    else:
        p0, p1 = channel.p_1_given_0, channel.p_1_given_1
        spread = p0 * (1.0 - p0) + p1 * (1.0 - p1)
    return math.sqrt(1.0 + 2.0 * spread / delta ** 2)


def _signal_variance(channel: ReadoutChannel) -> float:
    """Variance of one signal when the spin is a fair coin."""
    p = channel.p_fail
    if channel.mode is ReadoutMode.PHOTON_COUNT:
        mean = (channel.alpha0 + channel.alpha1) / 2.0
        spin_part = channel.contrast ** 2 / 4.0 + mean
        bg = channel.alpha_background
        return (1.0 - p) * spin_part + p * bg + p * (1.0 - p) * (mean - bg) ** 2
    m = (1.0 - p) * (channel.p_1_given_0 + channel.p_1_given_1) / 2.0 + p / 2.0
    return m * (1.0 - m)


def readout_efficiency(channel: ReadoutChannel) -> float:
    """η = 1/σ_R including failure events; zero for a zero-contrast channel.

    :raises ZeroContrastError: if the signal never varies at all.
    """
    variance = _signal_variance(channel)
    if variance <= 0:
        raise ZeroContrastError(f"{channel.mode.value} channel produces a constant signal")
    return (1.0 - channel.p_fail) * abs(channel.contrast) / 2.0 / math.sqrt(variance)


def effective_readout_noise(channel: ReadoutChannel) -> float:
    """σ_R including failure events."""
    eta = readout_efficiency(channel)
    if eta == 0:
        raise ZeroContrastError(f"{channel.mode.value} channel has zero contrast")
    return 1.0 / eta


@dataclass(frozen=True)
class DriftSpec:

    enabled: bool = False
    frequency: float = 0.0
    relative_amplitude: float = 0.0
    shared: bool = True

    def __post_init__(self):
        if not 0.0 <= self.relative_amplitude <= 0.5:
            raise InvalidParameterError(
                f"relative_amplitude must lie in [0, 0.5], got {self.relative_amplitude}")
        if self.frequency < 0:
            raise InvalidParameterError("drift frequency must be non-negative")

    @property
    def active(self) -> bool:
        return self.enabled and self.relative_amplitude > 0


@dataclass(frozen=True)
class ShotTable:
    """Columns of one run, in shot order. Sensor columns are (phase, spin, signal)."""

    shot: np.ndarray
    t_stamp: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    spin1: np.ndarray
    spin2: np.ndarray
    sig1: np.ndarray
    sig2: np.ndarray
    channels: tuple[ReadoutChannel, ReadoutChannel] | None = None
    seeds: dict = field(default_factory=dict)

    COLUMNS = ("shot", "t_stamp", "phi1", "phi2", "spin1", "spin2", "sig1", "sig2")

    def __post_init__(self):
        n = len(self.shot)
        for name in self.COLUMNS:
            column = np.asarray(getattr(self, name))
            if column.shape != (n,):
                raise InvalidParameterError(f"column {name} has shape {column.shape}, expected ({n},)")
            object.__setattr__(self, name, column)
        for name in ("spin1", "spin2"):
            if np.any((getattr(self, name) != 0) & (getattr(self, name) != 1)):
                raise InvalidParameterError(f"{name} must hold only 0 and 1")
        if np.any(self.sig1 < 0) or np.any(self.sig2 < 0):
            raise InvalidParameterError("signals must be non-negative")

    @property
    def n_shots(self) -> int:
        return len(self.shot)

    def phases(self, sensor: int) -> np.ndarray:
        return self.phi1 if sensor == 1 else self.phi2

    def spins(self, sensor: int) -> np.ndarray:
        return self.spin1 if sensor == 1 else self.spin2

    def signals(self, sensor: int) -> np.ndarray:
        return self.sig1 if sensor == 1 else self.sig2

    def with_signals(self, sig1, sig2) -> ShotTable:
        return replace(self, sig1=np.asarray(sig1), sig2=np.asarray(sig2))

    @classmethod
    def concat(cls, tables: list[ShotTable]) -> ShotTable:
        """Join chunk tables in the order given."""
        if not tables:
            raise InvalidParameterError("nothing to concatenate")
        columns = {name: np.concatenate([getattr(t, name) for t in tables]) for name in cls.COLUMNS}
        return cls(**columns, channels=tables[0].channels, seeds=dict(tables[0].seeds))


def projection_probability(phi, final_pulse_phase: float = QUARTER_TURN):
    """P(m_s = 1) = sin²((φ + final)/2)."""
    return 0.5 * (1.0 - np.cos(np.asarray(phi, dtype=float) + final_pulse_phase))


def project_spin(phi, shot_index, sensor_id: int, master_seed: int = 0,
                 final_pulse_phase: float = QUARTER_TURN):
    """Sampled spin state(s) for phase(s) phi; one draw per (seed, shot, sensor).

    A scalar phi applies to every shot in shot_index.
    """
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise InvalidParameterError("phases must be finite")
    u = shot_uniforms(master_seed, PROJECTION_STREAM + sensor_id, shot_index)[:, 0]
    p = np.broadcast_to(projection_probability(phi, final_pulse_phase).reshape(-1), u.shape)
    spins = (u < p).astype(np.int8)
    return int(spins[0]) if phi.ndim == 0 and np.ndim(shot_index) == 0 else spins


def _poisson(u, mu):
    positive = mu > 0
    counts = poisson.ppf(open_unit(u), np.where(positive, mu, 1.0))
    return np.where(positive, counts, 0.0).astype(np.int64)


def read_signal(spin, channel: ReadoutChannel, shot_index, sensor_id: int, master_seed: int = 0,
                scale=None):
    """Readout signal(s) for spin state(s).

    ``scale`` multiplies every photon mean shot by shot (the drift model).
    Uniform columns: 0 the signal draw, 1 the failure event, 2 the
    spin-independent draw of a failed shot.
    """
    spin = np.asarray(spin)
    u = shot_uniforms(master_seed, READOUT_STREAM + sensor_id, shot_index)
    spin_flat = spin.reshape(-1)
    failed = u[:, 1] < channel.p_fail
    if channel.mode is ReadoutMode.PHOTON_COUNT:
        scale = np.ones(len(u)) if scale is None else np.asarray(scale, dtype=float).reshape(-1)
        mu = np.where(spin_flat == 1, channel.alpha1, channel.alpha0) * scale
        signal = np.where(failed, _poisson(u[:, 2], channel.alpha_background * scale), _poisson(u[:, 0], mu))
    else:
        if scale is not None:
            raise UnsupportedModeError("threshold channels have no photon means to modulate")
        p = np.where(spin_flat == 1, channel.p_1_given_1, channel.p_1_given_0)
        signal = np.where(failed, u[:, 2] < 0.5, u[:, 0] < p).astype(np.int64)
    return int(signal[0]) if spin.ndim == 0 and np.ndim(shot_index) == 0 else signal


def drift_phase(drift: DriftSpec, sensor_id: int, master_seed: int) -> float:
    stream = DRIFT_STREAM if drift.shared else DRIFT_STREAM + sensor_id
    return float(2.0 * np.pi * shot_uniforms(master_seed, stream, 0)[0, 0])


def drift_factor(drift: DriftSpec, t_stamp, sensor_id: int, master_seed: int) -> np.ndarray:
    """1 + a·sin(2πf·t + ϑ); ϑ is shared across sensors when drift.shared is set."""
    theta = drift_phase(drift, sensor_id, master_seed)
    arg = 2.0 * np.pi * np.mod(drift.frequency * np.asarray(t_stamp, dtype=float), 1.0) + theta
    return 1.0 + drift.relative_amplitude * np.sin(arg)


def apply_drift(table: ShotTable, drift: DriftSpec, master_seed: int | None = None) -> ShotTable:
    """Redraw both signal columns with drift-modulated photon means.

    The readout uniforms are reused, so a zero-amplitude drift leaves the
    table exactly as it was.

    :raises UnsupportedModeError: for threshold channels.
    """
    if table.channels is None:
        raise InvalidParameterError("the shot table carries no readout channels")
    if any(ch.mode is not ReadoutMode.PHOTON_COUNT for ch in table.channels):
        raise UnsupportedModeError("drift modulates photon means; threshold channels have none")
    if not drift.active:
        return table
    seed = table.seeds.get("master_seed", 0) if master_seed is None else master_seed
    signals = []
    for sensor, channel in zip((1, 2), table.channels):
        factor = drift_factor(drift, table.t_stamp, sensor, seed)
        signals.append(read_signal(table.spins(sensor), channel, table.shot, sensor, seed, scale=factor))
    logger.debug("applied %.3g Hz drift (a=%.3g, shared=%s)", drift.frequency,
                 drift.relative_amplitude, drift.shared)
    return table.with_signals(*signals)


def shot_timestamps(shots, shot_duration: float, jitter: float = 0.0, master_seed: int = 0) -> np.ndarray:
    """t_i = i·shot_duration + jitter·ξ_i, ξ_i standard normal per shot."""
    shots = np.asarray(shots, dtype=np.int64)
    t = shots * shot_duration
    if jitter > 0:
        t = t + jitter * ndtri(open_unit(shot_uniforms(master_seed, TIMING_STREAM, shots)[:, 0]))
    return t


def independence_parities(n_sensors: int, shots, master_seed: int = 0) -> np.ndarray:
    """Per-shot ±1 initialization parities, shape (shots, n_sensors).

    The first n_sensors - 1 columns are independent fair signs and the last
    is their product, so every proper subset of columns multiplies to a fair
    random sign while the full product is always +1.
    """
    if n_sensors < 2:
        raise InvalidParameterError("need at least two sensors")
    free = n_sensors - 1
    if free > 52:
        raise InvalidParameterError("too many sensors for one uniform per shot")
    u = shot_uniforms(master_seed, PARITY_STREAM, shots)[:, 0]
    bits = np.floor(u * (1 << free)).astype(np.int64)
    signs = np.empty((len(u), n_sensors), dtype=np.int8)
    for k in range(free):
        signs[:, k] = 1 - 2 * ((bits >> k) & 1)
    signs[:, -1] = np.prod(signs[:, :free], axis=1)
    return signs
