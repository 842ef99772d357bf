"""
The end-to-end shot pipeline: fields -> phases -> spins -> signals -> estimates.

Shots are cut into fixed chunks. Each chunk depends only on its shot indices
and the config, so chunks may run on any number of threads and are joined in
chunk order.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

import numpy as np

from config import SOURCE_NAMES, ExperimentConfig
from errors import CovmagError, StageError, UnsupportedModeError
from estimators import (CorrelationEstimate, CumulantEstimate, DetrendSpec, LagPoint, default_detrend,
                        joint_cumulant, lag_correlation, pearson)
from field_synthesis import TWO_PI, TimeGrid, check_sampling
from measurement import (QUARTER_TURN, ReadoutMode, ShotTable, drift_factor, project_spin, read_signal,
                         shot_timestamps)
from sensing import CONSTANTS, IntegrationWindow
from source_util import get_source
from theory import (DiffusedLine, TheoryPrediction, apply_readout_penalty, expected_cos, expected_sin_sin,
                    r_ideal_general, source_statistics)

logger = logging.getLogger(__name__)

CHUNK_SHOTS = 8192


@contextmanager
def stage(name: str):
    """Re-raise any failure inside the block as a StageError naming the stage."""
    try:
        yield
    except StageError:
        raise
    except (CovmagError, ArithmeticError, ValueError) as e:
        raise StageError(name, e) from e


@dataclass(frozen=True)
class ShotPlan:
    """Shot-independent quantities shared by every chunk of one run."""

    config: ExperimentConfig
    grid_samples: int
    shot_duration: float
    windows: tuple[IntegrationWindow, IntegrationWindow]

    @classmethod
    def for_config(cls, config: ExperimentConfig) -> ShotPlan:
        t_max = max(seq.end for seq in config.sequences)
        grid = TimeGrid.covering(t_max, config.dt)
        windows = tuple(IntegrationWindow(seq, config.dt, grid.n_samples) for seq in config.sequences)
        duration = t_max + config.timing.readout_time + config.timing.duration_offset
        return cls(config, grid.n_samples, duration, windows)


@dataclass
class CorrelationReport:

    estimate: CorrelationEstimate
    detrend: DetrendSpec
    seeds: dict
    n_shots: int
    theory: TheoryPrediction | None = None
    lags: list[LagPoint] = field(default_factory=list)
    cumulant: CumulantEstimate | None = None
    wall_clock: float | None = None
    shots_per_second: float | None = None

    @property
    def residual(self) -> float | None:
        if self.theory is None:
            return None
        return (self.estimate.r - self.theory.r_observed) / self.estimate.sigma_r


def seed_metadata(config: ExperimentConfig) -> dict:
    return {"master_seed": config.master_seed,
            "seed_streams": {name: config.sources[name].seed_stream for name in SOURCE_NAMES}}


def shot_phases(plan: ShotPlan, shots: np.ndarray, t_stamp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Accumulated phases of both sensors for a block of shots."""
    config = plan.config
    seed, dt, n = config.master_seed, config.dt, plan.grid_samples
    integrals = np.zeros((len(shots), 2))
    common = config.sources["common"]
    kernel = get_source(common.kind).kernel
    integrals += kernel(common, shots, t_stamp, plan.windows, seed, dt, n) * np.asarray(config.couplings)
    for i, name in enumerate(("local1", "local2")):
        spec = config.sources[name]
        local = get_source(spec.kind).kernel(spec, shots, t_stamp, plan.windows[i:i + 1], seed, dt, n)
        integrals[:, i] += local[:, 0]
    signs = np.array([seq.sign_factor for seq in config.sequences])
    phases = TWO_PI * CONSTANTS.gamma_e * signs * integrals
    return phases[:, 0], phases[:, 1]


def run_chunk(plan: ShotPlan, lo: int, hi: int) -> ShotTable:
    config = plan.config
    seed = config.master_seed
    shots = np.arange(lo, hi, dtype=np.int64)
    with stage("field-synthesis"):
        t_stamp = shot_timestamps(shots, plan.shot_duration, config.timing.jitter, seed)
        phi1, phi2 = shot_phases(plan, shots, t_stamp)
    with stage("measurement"):
        spins = [project_spin(phi, shots, sensor, seed, seq.final_pulse_phase)
                 for sensor, phi, seq in zip((1, 2), (phi1, phi2), config.sequences)]
        signals = []
        for sensor, channel in zip((1, 2), config.channels):
            scale = None
            if config.drift.active:
                if channel.mode is not ReadoutMode.PHOTON_COUNT:
                    raise UnsupportedModeError("drift modulates photon means; threshold channels have none")
                scale = drift_factor(config.drift, t_stamp, sensor, seed)
            signals.append(read_signal(spins[sensor - 1], channel, shots, sensor, seed, scale=scale))
    return ShotTable(shots, t_stamp, phi1, phi2, spins[0], spins[1], signals[0], signals[1],
                     channels=tuple(config.channels), seeds=seed_metadata(config))


def simulate(config: ExperimentConfig, threads: int = 1, chunk: int = CHUNK_SHOTS) -> ShotTable:
    """Every shot of the run, assembled in shot order."""
    with stage("field-synthesis"):
        for spec in config.sources.values():
            check_sampling(spec, config.dt)
        plan = ShotPlan.for_config(config)
    bounds = [(lo, min(lo + chunk, config.n_shots)) for lo in range(0, config.n_shots, chunk)]
    logger.info("simulating %d shots in %d chunks on %d thread(s)", config.n_shots, len(bounds), threads)
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tables = list(pool.map(lambda b: run_chunk(plan, *b), bounds))
    else:
        tables = [run_chunk(plan, lo, hi) for lo, hi in bounds]
    return ShotTable.concat(tables)


def _sensor_coherence(config: ExperimentConfig, i: int) -> float:
    if config.decoherence is not None:
        return (config.decoherence.coherence1, config.decoherence.coherence2)[i]
    return expected_cos(config.sources[f"local{i + 1}"], config.sequences[i], 1.0)


def matched_theory(config: ExperimentConfig) -> TheoryPrediction | None:
    """Closed-form r for the configured sources, sequences and channels.

    None when the readout is not taken at quadrature (final pulse phase other
    than π/2), where the correlation is not a product of the terms below.
    """
    if any(abs(seq.final_pulse_phase - QUARTER_TURN) > 1e-12 for seq in config.sequences):
        return None
    common = config.sources["common"]
    seq1, seq2 = config.sequences
    sin_sin = expected_sin_sin(common, seq1, seq2, config.couplings)
    c1, c2 = _sensor_coherence(config, 0), _sensor_coherence(config, 1)
    if config.decoherence is not None:
        model = config.decoherence
        r_ideal = r_ideal_general(model.chi_local_1, model.chi_local_2, sin_sin)
    else:
        # local tones can drive ⟨cos φ⟩ negative, so no exponent form here
        r_ideal = c1 * c2 * sin_sin
    r_observed = apply_readout_penalty(r_ideal, *config.channels)
    stats = source_statistics(common, (seq1, seq2))
    label = "silent" if stats is None else ("gaussian" if isinstance(stats, DiffusedLine) else "tone_ensemble")
    inputs = {"sin_sin": sin_sin, "coherence1": c1, "coherence2": c2}
    return TheoryPrediction(r_ideal, r_observed, label=label, inputs=inputs)


def detrend_for(config: ExperimentConfig) -> DetrendSpec:
    if config.estimator is not None:
        return config.estimator
    spec1, spec2 = (default_detrend(ch) for ch in config.channels)
    return spec1 if spec1 == spec2 else DetrendSpec(enabled=False)


def analyse(config: ExperimentConfig, table: ShotTable) -> CorrelationReport:
    detrend = detrend_for(config)
    with stage("estimators"):
        estimate = pearson(table.sig1, table.sig2, detrend)
        lags = []
        if config.analysis.max_lag:
            lags = lag_correlation(table.sig1, table.sig2, config.analysis.max_lag, detrend)
        cumulant = joint_cumulant([table.sig1, table.sig2]) if config.analysis.cumulants else None
    with stage("theory"):
        theory = matched_theory(config)
    return CorrelationReport(estimate, detrend, seed_metadata(config), table.n_shots, theory, lags, cumulant)


def run(config: ExperimentConfig, threads: int = 1, chunk: int = CHUNK_SHOTS) -> tuple[ShotTable, CorrelationReport]:
    """
    Execute the whole chain for one config.

    :raises StageError: naming the stage that failed.
    """
    start = time.perf_counter()
    table = simulate(config, threads, chunk)
    report = analyse(config, table)
    elapsed = time.perf_counter() - start
    report.wall_clock = elapsed
    report.shots_per_second = table.n_shots / elapsed if elapsed > 0 else None
    logger.info("r = %.5f ± %.5f over %d shots (%.0f shots/s)", report.estimate.r, report.estimate.sigma_r,
                table.n_shots, report.shots_per_second or 0.0)
    return table, report


def simulate_coherence(config: ExperimentConfig, sensor: int, threads: int = 1) -> float:
    """Single-sensor C = ⟨cos φ⟩ from a run read out along the phase axis.

    With the final pulse in phase, P(1) = (1 - cos φ)/2, so C = 1 - 2·⟨spin⟩.
    """
    sequences = list(config.sequences)
    sequences[sensor - 1] = replace(sequences[sensor - 1], final_pulse_phase=0.0)
    table = simulate(config.with_(sequences=tuple(sequences)), threads)
    return float(1.0 - 2.0 * table.spins(sensor).mean())


def theory_coherence(config: ExperimentConfig, sensor: int) -> float:
    """⟨cos φ⟩ of one sensor, common and local sources together."""
    i = sensor - 1
    seq = config.sequences[i]
    common = expected_cos(config.sources["common"], seq, config.couplings[i])
    return common * expected_cos(config.sources[f"local{sensor}"], seq, 1.0)
