"""
Correlation estimators on per-shot signal lists.

Everything here works on plain 1-D arrays so it can be pointed at any
column of a ShotTable (signals, spins or phases).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from data_structures.sensor_set import SensorSet
from errors import InvalidParameterError, UndefinedCorrelationError
from measurement import ReadoutChannel, ReadoutMode

logger = logging.getLogger(__name__)

DEFAULT_BLOCK = 1000
ACCUMULATOR_CHUNK = 1 << 16
MAX_CUMULANT_ORDER = 6


@dataclass(frozen=True)
class DetrendSpec:

    block_size: int = DEFAULT_BLOCK
    enabled: bool = True

    def __post_init__(self):
        if self.block_size < 2:
            raise InvalidParameterError(f"block_size must be at least 2, got {self.block_size}")


NO_DETREND = DetrendSpec(enabled=False)


@dataclass(frozen=True)
class CorrelationEstimate:

    r: float
    sigma_r: float
    n_effective: int
    detrend: DetrendSpec = NO_DETREND

    def __post_init__(self):
        if abs(self.r) > 1.0:
            raise InvalidParameterError(f"|r| exceeds 1: {self.r}")
        if not self.sigma_r > 0:
            raise InvalidParameterError("sigma_r must be positive")

    @property
    def significance(self) -> float:
        return self.r / self.sigma_r


@dataclass(frozen=True)
class LagPoint:
    lag: int
    r: float
    sigma_r: float


@dataclass(frozen=True)
class CumulantEstimate:

    order: int
    kappa: float
    kappa_normalized: float
    stderr: float
    n: int


def fisher_sigma(n: int) -> float:
    """ς_r = tanh(1/√(N - 3)), close to 1/√N for large N."""
    if n < 4:
        raise InvalidParameterError(f"need at least 4 shots, got {n}")
    return math.tanh(1.0 / math.sqrt(n - 3))


def default_detrend(channel: ReadoutChannel | None) -> DetrendSpec:
    """Block detrending for photon counts, none for bits or raw spins."""
    if channel is not None and channel.mode is ReadoutMode.PHOTON_COUNT:
        return DetrendSpec()
    return NO_DETREND


def block_detrend(x, block_size: int = DEFAULT_BLOCK) -> np.ndarray:
    """Subtract consecutive block means; the trailing partial block uses its own mean."""
    if block_size < 2:
        raise InvalidParameterError(f"block_size must be at least 2, got {block_size}")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    full = (x.size // block_size) * block_size
    if full:
        blocks = x[:full].reshape(-1, block_size)
        out[:full] = (blocks - blocks.mean(axis=1, keepdims=True)).reshape(-1)
    if full < x.size:
        tail = x[full:]
        out[full:] = tail - tail.mean()
    return out


def _prepared(x, detrend: DetrendSpec | None) -> np.ndarray:
    if detrend is not None and detrend.enabled:
        return block_detrend(x, detrend.block_size)
    return np.asarray(x, dtype=float)


class CovarianceAccumulator:
    """
    Single-pass covariance of two streams.

    Each chunk is reduced with centred sums and merged into the running state
    with the pairwise update of Chan et al., so adding chunks in a fixed order
    is deterministic and free of large-mean cancellation.
    """

    def __init__(self) -> None:
        self.n = 0
        self.mean_x = 0.0
        self.mean_y = 0.0
        self.m2x = 0.0
        self.m2y = 0.0
        self.cxy = 0.0

    def update(self, x, y) -> CovarianceAccumulator:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape:
            raise InvalidParameterError("signal chunks differ in length")
        if x.size == 0:
            return self
        other = CovarianceAccumulator()
        other.n = x.size
        other.mean_x = float(x.mean())
        other.mean_y = float(y.mean())
        dx = x - other.mean_x
        dy = y - other.mean_y
        other.m2x = float(dx @ dx)
        other.m2y = float(dy @ dy)
        other.cxy = float(dx @ dy)
        return self.merge(other)

    def merge(self, other: CovarianceAccumulator) -> CovarianceAccumulator:
        if other.n == 0:
            return self
        if self.n == 0:
            self.__dict__.update(other.__dict__)
            return self
        n = self.n + other.n
        dx = other.mean_x - self.mean_x
        dy = other.mean_y - self.mean_y
        w = self.n * other.n / n
        self.m2x += other.m2x + dx * dx * w
        self.m2y += other.m2y + dy * dy * w
        self.cxy += other.cxy + dx * dy * w
        self.mean_x += dx * other.n / n
        self.mean_y += dy * other.n / n
        self.n = n
        return self

    def covariance(self) -> float:
        """Population covariance."""
        return self.cxy / self.n

    def correlation(self) -> float:
        if self.m2x <= 0 or self.m2y <= 0:
            raise UndefinedCorrelationError("a signal list has zero variance")
        r = self.cxy / math.sqrt(self.m2x * self.m2y)
        return min(1.0, max(-1.0, r))


def pearson(signals1, signals2, detrend: DetrendSpec | None = None,
            chunk: int = ACCUMULATOR_CHUNK) -> CorrelationEstimate:
    """
    Pearson correlation of two shot lists, optionally block-detrended.

    :raises UndefinedCorrelationError: if either (detrended) list is constant.
    """
    x = np.asarray(signals1)
    y = np.asarray(signals2)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidParameterError("signal lists must be 1-D and of equal length")
    sigma = fisher_sigma(x.size)
    x, y = _prepared(x, detrend), _prepared(y, detrend)
    acc = CovarianceAccumulator()
    for lo in range(0, x.size, chunk):
        acc.update(x[lo:lo + chunk], y[lo:lo + chunk])
    return CorrelationEstimate(acc.correlation(), sigma, x.size, detrend or NO_DETREND)


def lag_correlation(signals1, signals2, max_lag: int, detrend: DetrendSpec | None = None) -> list[LagPoint]:
    """r(s) = Cov[S1(i), S2(i+s)]/(σ1σ2) for s = 0..max_lag.

    Every lag uses the full-sample means and standard deviations; r(0) is the
    Pearson estimate of the same lists.
    """
    x = np.asarray(signals1)
    y = np.asarray(signals2)
    n = x.size
    if max_lag < 0 or max_lag >= n / 10:
        raise InvalidParameterError(f"max_lag must lie in [0, N/10) = [0, {n / 10:g}), got {max_lag}")
    zero = pearson(x, y, detrend)
    x, y = _prepared(x, detrend), _prepared(y, detrend)
    x = x - x.mean()
    y = y - y.mean()
    norm = math.sqrt((x @ x) / n * (y @ y) / n)
    points = [LagPoint(0, zero.r, zero.sigma_r)]
    for s in range(1, max_lag + 1):
        r = float(x[:n - s] @ y[s:]) / (n - s) / norm
        points.append(LagPoint(s, r, fisher_sigma(n - s)))
    return points


@lru_cache(maxsize=None)
def set_partitions(n: int) -> tuple[tuple[SensorSet, ...], ...]:
    """All partitions of sensors 0..n-1; the count is the Bell number B_n."""
    if n < 1:
        raise InvalidParameterError("need at least one sensor")
    partitions: list[list[SensorSet]] = [[SensorSet([0])]]
    for item in range(1, n):
        grown = []
        for blocks in partitions:
            for k in range(len(blocks)):
                grown.append(blocks[:k] + [blocks[k].with_item(item)] + blocks[k + 1:])
            grown.append(blocks + [SensorSet([item])])
        partitions = grown
    return tuple(tuple(p) for p in partitions)


def _centred_columns(signal_lists) -> np.ndarray:
    columns = [np.asarray(s, dtype=float) for s in signal_lists]
    if len({c.shape for c in columns}) != 1 or columns[0].ndim != 1:
        raise InvalidParameterError("signal lists must be 1-D and of equal length")
    data = np.stack(columns)
    return data - data.mean(axis=1, keepdims=True)


def partition_sum(centred: np.ndarray) -> float:
    """Joint cumulant of centred columns as a sum over set partitions.

    Partitions with a singleton block vanish for centred data and are skipped.
    """
    order = centred.shape[0]
    moments: dict[SensorSet, float] = {}
    kappa = 0.0
    for blocks in set_partitions(order):
        if any(len(b) == 1 for b in blocks):
            continue
        term = 1.0
        for b in blocks:
            if b not in moments:
                moments[b] = float(np.prod(centred[list(b)], axis=0).mean())
            term *= moments[b]
        k = len(blocks)
        kappa += math.factorial(k - 1) * (-1) ** (k - 1) * term
    return kappa


def joint_cumulant(signal_lists) -> CumulantEstimate:
    """Nth-order joint cumulant of N signal lists and its normalization by Πσ_i.

    :raises UndefinedCorrelationError: if a list has zero variance.
    """
    order = len(signal_lists)
    if not 2 <= order <= MAX_CUMULANT_ORDER:
        raise InvalidParameterError(f"cumulant order must lie in [2, {MAX_CUMULANT_ORDER}], got {order}")
    centred = _centred_columns(signal_lists)
    stds = np.sqrt((centred ** 2).mean(axis=1))
    if np.any(stds == 0):
        raise UndefinedCorrelationError("a signal list has zero variance")
    norm = float(np.prod(stds))
    kappa = partition_sum(centred)
    n = centred.shape[1]
    stderr = float(np.prod(centred, axis=0).std()) / math.sqrt(n) / norm
    return CumulantEstimate(order, kappa, kappa / norm, stderr, n)
