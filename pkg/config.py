"""
Experiment configuration files.

One YAML document describes a full run: the three field sources, both pulse
sequences and readout channels, timing, estimator and analysis options, and
an optional sweep. Every diagnostic carries the dotted field path and, when
known, the line it came from.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields, is_dataclass, replace
from enum import Enum
from pathlib import Path

import yaml
from scipy.optimize import brentq

from errors import ConfigurationError, ConfigurationErrors, InvalidParameterError
from estimators import DetrendSpec
from field_synthesis import DEFAULT_DT, GAUSS, NoiseKind, NoiseSourceSpec, check_sampling, check_seed_streams
from measurement import DriftSpec, ReadoutChannel, ReadoutMode, symmetric_for_noise
from rng import MASK64, MAX_SOURCE_STREAM
from sensing import CONSTANTS, SequenceKind, SequenceSpec
from theory import DecoherenceModel, expected_cos

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SOURCE_NAMES = ("common", "local1", "local2")
SWEEP_AXES = ("tau", "t_delay", "B0", "frequency", "sigma_R", "n_shots")


@dataclass(frozen=True)
class TimingSpec:
    """Per-shot readout time, constant duration offset and timestamp jitter (seconds)."""

    readout_time: float = 1e-6
    duration_offset: float = 0.0
    jitter: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) >= 0:
                raise InvalidParameterError(f"{f.name} must be non-negative")


@dataclass(frozen=True)
class AnalysisSpec:

    max_lag: int = 0
    cumulants: bool = False

    def __post_init__(self):
        if self.max_lag < 0:
            raise InvalidParameterError("max_lag must be non-negative")


@dataclass(frozen=True)
class SensitivityCase:
    label: str
    sigma_R: float
    t_R: float


@dataclass(frozen=True)
class SensitivitySpec:

    sigma_B: float = 1e-9
    T2: float = 100e-6
    t: float = 50e-6
    T_total: float | None = None
    cases: tuple[SensitivityCase, ...] = ()


@dataclass(frozen=True)
class SweepSpec:

    axis: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise InvalidParameterError(f"sweep axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if not self.values:
            raise InvalidParameterError("a sweep needs at least one value")


@dataclass(frozen=True)
class ExperimentConfig:

    sources: dict[str, NoiseSourceSpec]
    sequences: tuple[SequenceSpec, SequenceSpec]
    channels: tuple[ReadoutChannel, ReadoutChannel]
    couplings: tuple[float, float] = (1.0, 1.0)
    dt: float = DEFAULT_DT
    timing: TimingSpec = TimingSpec()
    drift: DriftSpec = DriftSpec()
    estimator: DetrendSpec | None = None
    analysis: AnalysisSpec = AnalysisSpec()
    decoherence: DecoherenceModel | None = None
    sensitivity: SensitivitySpec | None = None
    sweep: SweepSpec | None = None
    n_shots: int = 100_000
    master_seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def source(self, name: str) -> NoiseSourceSpec:
        return self.sources[name]

    def with_(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)


class _Reader:
    """Walks a parsed document, collecting diagnostics instead of stopping at the first."""

    def __init__(self, lines: dict[str, int]) -> None:
        self.lines = lines
        self.errors: list[ConfigurationError] = []

    def error(self, path: str, message: str) -> None:
        self.errors.append(ConfigurationError(message, field=path, line=self.lines.get(path)))

    def section(self, data, path: str, allowed) -> dict:
        if data is None:
            return {}
        if not isinstance(data, dict):
            self.error(path, "expected a mapping")
            return {}
        for key in data:
            if key not in allowed:
                self.error(f"{path}.{key}" if path else str(key), "unknown key")
        return data

    def number(self, data: dict, key: str, path: str, default=None, required=False, kind=float):
        where = f"{path}.{key}" if path else key
        if key not in data or data[key] is None:
            if required:
                self.error(where, "required field is missing")
            return default
        return self.coerce(data[key], where, default, kind)

    def coerce(self, value, where: str, default=None, kind=float):
        try:
            if isinstance(value, bool):
                raise ValueError
            if kind is int:
                return self._integer(value)
            # numeric strings such as "250e-9" are accepted
            number = float(value)
            if not math.isfinite(number):
                raise ValueError
            return number
        except (TypeError, ValueError, OverflowError):
            self.error(where, f"expected a {kind.__name__}, got {value!r}")
            return default

    @staticmethod
    def _integer(value) -> int:
        # ints stay exact; seeds may exceed 2**53
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            try:
                return int(value.strip())
            except ValueError:
                pass
        number = float(value)
        if number != int(number):
            raise ValueError
        return int(number)

    def flag(self, data: dict, key: str, path: str, default: bool) -> bool:
        value = data.get(key, default)
        if not isinstance(value, bool):
            self.error(f"{path}.{key}", f"expected true or false, got {value!r}")
            return default
        return value

    def build(self, path: str, factory, *args, **kwargs):
        try:
            return factory(*args, **kwargs)
        except (InvalidParameterError, ValueError) as e:
            self.error(path, str(e))
            return None


def _line_map(node, path: str = "", out: dict | None = None) -> dict[str, int]:
    """Dotted paths of a composed YAML tree mapped to 1-based line numbers."""
    out = {} if out is None else out
    if node is None:
        return out
    if path:
        out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            child = f"{path}.{key_node.value}" if path else str(key_node.value)
            out[child] = key_node.start_mark.line + 1
            _line_map(value_node, child, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_map(item, f"{path}[{i}]", out)
    return out


SOURCE_KEYS = {"kind", "amplitude_B0", "amplitude_B0_gauss", "carrier_f0", "phase_bandwidth", "psd_level",
               "band_limit", "seed_stream", "broadening", "n_tones", "line_window", "target_coherence"}
SEQUENCE_KEYS = {"kind", "tau", "n_pulses", "t_delay", "final_pulse_phase", "init_parity", "transition_sign"}
CHANNEL_KEYS = {"mode", "alpha0", "alpha1", "p_1_given_0", "p_1_given_1", "fidelity", "sigma_R",
                "p_fail", "alpha_background"}
TOP_KEYS = {"schema_version", "sources", "couplings", "sequences", "channels", "grid", "timing", "drift",
            "estimator", "analysis", "theory", "sensitivity", "sweep", "n_shots", "master_seed"}


def _enum(reader: _Reader, enum, value, path: str, default):
    if value is None:
        return default
    try:
        return enum(value)
    except ValueError:
        reader.error(path, f"expected one of {[e.value for e in enum]}, got {value!r}")
        return default


def _source(reader: _Reader, data, path: str):
    data = reader.section(data, path, SOURCE_KEYS)
    kind = _enum(reader, NoiseKind, data.get("kind"), f"{path}.kind", NoiseKind.SILENCE)
    amplitude = reader.number(data, "amplitude_B0", path, 0.0)
    if "amplitude_B0_gauss" in data:
        if "amplitude_B0" in data:
            reader.error(f"{path}.amplitude_B0_gauss", "give the amplitude in tesla or in gauss, not both")
        amplitude = reader.number(data, "amplitude_B0_gauss", path, 0.0) * GAUSS
    kwargs = dict(
        kind=kind,
        amplitude_B0=amplitude,
        carrier_f0=reader.number(data, "carrier_f0", path, 0.0),
        phase_bandwidth=reader.number(data, "phase_bandwidth", path, 0.0),
        psd_level=reader.number(data, "psd_level", path, 0.0),
        band_limit=reader.number(data, "band_limit", path, 0.0),
        seed_stream=reader.number(data, "seed_stream", path, 0, kind=int),
        broadening=data.get("broadening", "Diffusion"),
        n_tones=reader.number(data, "n_tones", path, 64, kind=int),
        line_window=reader.number(data, "line_window", path, None),
    )
    if kwargs["seed_stream"] >= MAX_SOURCE_STREAM:
        reader.error(f"{path}.seed_stream", f"must be below {MAX_SOURCE_STREAM}")
    target = reader.number(data, "target_coherence", path, None)
    if target is not None:
        if kind is not NoiseKind.GAUSSIAN_BROADBAND:
            reader.error(f"{path}.target_coherence", "only GaussianBroadband sources can target a coherence")
        elif not 0 < target < 1:
            reader.error(f"{path}.target_coherence", "must lie in (0, 1)")
    return reader.build(path, NoiseSourceSpec, **kwargs), target


def _sequence(reader: _Reader, data, path: str):
    data = reader.section(data, path, SEQUENCE_KEYS)
    kind = _enum(reader, SequenceKind, data.get("kind"), f"{path}.kind", None)
    if kind is None:
        reader.error(f"{path}.kind", "required field is missing")
        return None
    n_default = 0 if kind is SequenceKind.RAMSEY else None
    kwargs = dict(
        kind=kind,
        tau=reader.number(data, "tau", path, required=True),
        n_pulses=reader.number(data, "n_pulses", path, n_default, required=n_default is None, kind=int),
        t_delay=reader.number(data, "t_delay", path, 0.0),
        final_pulse_phase=reader.number(data, "final_pulse_phase", path, math.pi / 2),
        init_parity=data.get("init_parity", "Parallel"),
        transition_sign=reader.number(data, "transition_sign", path, 1, kind=int),
    )
    if kwargs["tau"] is None or kwargs["n_pulses"] is None:
        return None
    return reader.build(path, SequenceSpec, **kwargs)


def _channel(reader: _Reader, data, path: str):
    data = reader.section(data, path, CHANNEL_KEYS)
    if "sigma_R" in data:
        return reader.build(path, symmetric_for_noise, reader.number(data, "sigma_R", path, 1.0))
    if "fidelity" in data:
        return reader.build(path, ReadoutChannel.symmetric_threshold, reader.number(data, "fidelity", path, 1.0))
    mode = _enum(reader, ReadoutMode, data.get("mode"), f"{path}.mode", ReadoutMode.THRESHOLD)
    return reader.build(
        path, ReadoutChannel, mode,
        alpha0=reader.number(data, "alpha0", path, 0.0, required=mode is ReadoutMode.PHOTON_COUNT),
        alpha1=reader.number(data, "alpha1", path, 0.0, required=mode is ReadoutMode.PHOTON_COUNT),
        p_1_given_0=reader.number(data, "p_1_given_0", path, 0.0),
        p_1_given_1=reader.number(data, "p_1_given_1", path, 1.0),
        p_fail=reader.number(data, "p_fail", path, 0.0),
        alpha_background=reader.number(data, "alpha_background", path, None),
    )


def _pair(reader: _Reader, doc: dict, key: str, parse):
    items = doc.get(key)
    if not isinstance(items, list) or len(items) != 2:
        reader.error(key, "expected a list of two entries, one per sensor")
        return None
    parsed = tuple(parse(reader, item, f"{key}[{i}]") for i, item in enumerate(items))
    return None if None in parsed else parsed


def solve_target_coherence(spec: NoiseSourceSpec, seq: SequenceSpec, target: float) -> NoiseSourceSpec:
    """The broadband spec whose psd_level gives ⟨cos φ⟩ = target on this sequence."""
    def gap(psd):
        return expected_cos(replace(spec, psd_level=psd), seq) - target

    # delta-filter estimate of the level, then widen until the root is bracketed
    hi = 4.0 * -math.log(target) / (8.0 * CONSTANTS.gamma_e ** 2 * seq.duration)
    while gap(hi) > 0:
        hi *= 2.0
    psd = brentq(gap, 0.0, hi, xtol=1e-30, rtol=1e-10)
    logger.info("psd_level %.4g T²/Hz gives coherence %.4g on tau=%.4g s", psd, target, seq.tau)
    return replace(spec, psd_level=psd)


def _decoherence(reader: _Reader, data, path: str):
    data = reader.section(data, path, {"coherence1", "coherence2", "chi_local_1", "chi_local_2", "T2"})
    if not data:
        return None
    if "coherence1" in data or "coherence2" in data:
        return reader.build(path, DecoherenceModel.from_coherences,
                            reader.number(data, "coherence1", path, 1.0),
                            reader.number(data, "coherence2", path, 1.0))
    return reader.build(path, DecoherenceModel,
                        reader.number(data, "chi_local_1", path, 0.0),
                        reader.number(data, "chi_local_2", path, 0.0),
                        0.0, reader.number(data, "T2", path, None))


def _sensitivity(reader: _Reader, data, path: str):
    data = reader.section(data, path, {"sigma_B", "T2", "t", "T_total", "cases"})
    if not data:
        return None
    cases = []
    for i, case in enumerate(data.get("cases") or []):
        case_path = f"{path}.cases[{i}]"
        case = reader.section(case, case_path, {"label", "sigma_R", "t_R"})
        cases.append(SensitivityCase(str(case.get("label", f"case{i}")),
                                     reader.number(case, "sigma_R", case_path, required=True) or 1.0,
                                     reader.number(case, "t_R", case_path, required=True) or 0.0))
    return SensitivitySpec(
        sigma_B=reader.number(data, "sigma_B", path, 1e-9),
        T2=reader.number(data, "T2", path, 100e-6),
        t=reader.number(data, "t", path, 50e-6),
        T_total=reader.number(data, "T_total", path, None),
        cases=tuple(cases),
    )


def parse_config(doc, lines: dict[str, int] | None = None) -> ExperimentConfig:
    """
    Build and cross-validate an ExperimentConfig from a parsed document.

    :raises ConfigurationErrors: listing every problem found.
    """
    reader = _Reader(lines or {})
    doc = reader.section(doc, "", TOP_KEYS)
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        reader.error("schema_version", f"unsupported schema version {version!r}")

    sources, targets = {}, {}
    source_section = reader.section(doc.get("sources"), "sources", set(SOURCE_NAMES))
    for name in SOURCE_NAMES:
        spec, target = _source(reader, source_section.get(name), f"sources.{name}")
        sources[name] = spec
        targets[name] = target
    sequences = _pair(reader, doc, "sequences", _sequence)
    channels = _pair(reader, doc, "channels", _channel)

    couplings = doc.get("couplings", [1.0, 1.0])
    if not isinstance(couplings, list) or len(couplings) != 2:
        reader.error("couplings", "expected two numbers")
        couplings = (1.0, 1.0)
    else:
        couplings = tuple(reader.coerce(c, f"couplings[{i}]", 1.0) for i, c in enumerate(couplings))

    grid = reader.section(doc.get("grid"), "grid", {"dt"})
    dt = reader.number(grid, "dt", "grid", DEFAULT_DT)
    timing = reader.section(doc.get("timing"), "timing", {"readout_time", "duration_offset", "jitter"})
    timing = reader.build("timing", TimingSpec,
                          reader.number(timing, "readout_time", "timing", 1e-6),
                          reader.number(timing, "duration_offset", "timing", 0.0),
                          reader.number(timing, "jitter", "timing", 0.0))
    drift = reader.section(doc.get("drift"), "drift", {"enabled", "frequency", "relative_amplitude", "shared"})
    drift = reader.build("drift", DriftSpec,
                         reader.flag(drift, "enabled", "drift", bool(drift)),
                         reader.number(drift, "frequency", "drift", 0.0),
                         reader.number(drift, "relative_amplitude", "drift", 0.0),
                         reader.flag(drift, "shared", "drift", True))
    estimator = None
    if doc.get("estimator") is not None:
        est = reader.section(doc.get("estimator"), "estimator", {"block_size", "enabled"})
        estimator = reader.build("estimator", DetrendSpec,
                                 reader.number(est, "block_size", "estimator", 1000, kind=int),
                                 reader.flag(est, "enabled", "estimator", True))
    analysis = reader.section(doc.get("analysis"), "analysis", {"max_lag", "cumulants"})
    analysis = reader.build("analysis", AnalysisSpec,
                            reader.number(analysis, "max_lag", "analysis", 0, kind=int),
                            reader.flag(analysis, "cumulants", "analysis", False))
    theory = reader.section(doc.get("theory"), "theory", {"decoherence"})
    decoherence = _decoherence(reader, theory.get("decoherence"), "theory.decoherence")
    sensitivity = _sensitivity(reader, doc.get("sensitivity"), "sensitivity")
    sweep = None
    if doc.get("sweep") is not None:
        sw = reader.section(doc.get("sweep"), "sweep", {"axis", "values"})
        values = sw.get("values") or []
        values = tuple(reader.coerce(v, f"sweep.values[{i}]", 0.0) for i, v in enumerate(values))
        sweep = reader.build("sweep", SweepSpec, sw.get("axis"), values)
    n_shots = reader.number(doc, "n_shots", "", 100_000, kind=int)
    if n_shots is not None and n_shots < 4:
        reader.error("n_shots", "need at least 4 shots")
    master_seed = reader.number(doc, "master_seed", "", 0, kind=int)
    if master_seed is not None and not 0 <= master_seed <= MASK64:
        reader.error("master_seed", "must lie in [0, 2**64)")

    if not reader.errors:
        try:
            check_seed_streams(sources)
        except ConfigurationError as e:
            reader.errors.append(ConfigurationError(e.message, e.field, reader.lines.get(e.field)))
        for name, spec in sources.items():
            try:
                check_sampling(spec, dt)
            except InvalidParameterError as e:
                reader.error("grid.dt", f"{name}: {e}")
    if reader.errors:
        raise ConfigurationErrors(reader.errors)

    for i, name in enumerate(("local1", "local2")):
        if targets[name] is not None:
            sources[name] = solve_target_coherence(sources[name], sequences[i], targets[name])
    return ExperimentConfig(sources, sequences, channels, couplings, dt, timing, drift, estimator, analysis,
                            decoherence, sensitivity, sweep, n_shots, master_seed)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
        lines = _line_map(yaml.compose(text))
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigurationErrors([ConfigurationError(str(e), line=mark.line + 1 if mark else None)]) from e
    logger.debug("loaded %s", path)
    return parse_config(doc, lines)


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, float):
        return float(value)
    return value


def resolved_mapping(config: ExperimentConfig) -> dict:
    """The fully defaulted config as plain data."""
    out = _plain(config)
    out["grid"] = {"dt": out.pop("dt")}
    out["theory"] = {"decoherence": out.pop("decoherence")}
    return out


def dump_resolved(config: ExperimentConfig) -> str:
    return yaml.safe_dump(resolved_mapping(config), sort_keys=False)
