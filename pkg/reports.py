"""
Persistence of shot tables, correlation reports, sweeps and theory tables.

Tabular outputs are CSV (or JSON-lines on request); reports are JSON-lines.
Nothing time-dependent is written unless asked for, so a replay of the same
config and seed writes byte-identical files.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from config import SensitivitySpec
from errors import UnreachableSensitivityError
from measurement import ShotTable
from pipeline import CorrelationReport
from sweep import SpectralRow, SweepResult
from theory import TheoryPrediction, required_time, snr_and_min_noise

logger = logging.getLogger(__name__)

FORMATS = ("csv", "jsonl")
SHOT_HEADER = ("shot", "t_stamp", "phi1", "phi2", "s1_spin", "s2_spin", "s1_sig", "s2_sig")
SWEEP_FIELDS = ("value", "r", "sigma_r", "n_shots", "r_ideal", "r_theory", "residual")
SECONDS_PER_HOUR = 3600.0


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_rows(path: Path, rows: Iterable[dict[str, Any]], fieldnames, fmt: str = "csv") -> Path:
    """Write dict rows as CSV (with header) or as one JSON object per line."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path).with_suffix("." + fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        if fmt == "csv":
            w = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: _jsonable(row.get(k, "")) for k in fieldnames})
        else:
            for row in rows:
                f.write(json.dumps(_jsonable(row), sort_keys=True) + "\n")
    logger.info("wrote %s", path)
    return path


# --- shot tables -----------------------------------------------------------

def write_shot_table(table: ShotTable, path, fmt: str = "csv") -> Path:
    """
    Persist every shot. CSV files open with one `# {seed metadata}` comment
    line; JSON-lines files open with a `{"seeds": ...}` object.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path).with_suffix("." + fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = [getattr(table, name).tolist() for name in ShotTable.COLUMNS]
    seeds = json.dumps(table.seeds, sort_keys=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        if fmt == "csv":
            f.write(f"# {seeds}\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(SHOT_HEADER)
            w.writerows(zip(*columns))
        else:
            f.write(json.dumps({"seeds": table.seeds}, sort_keys=True) + "\n")
            for values in zip(*columns):
                f.write(json.dumps(dict(zip(SHOT_HEADER, values))) + "\n")
    logger.info("wrote %d shots to %s", table.n_shots, path)
    return path


def read_shot_table(path) -> ShotTable:
    """Load a table written by write_shot_table; the format follows the suffix."""
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        if path.suffix == ".jsonl":
            seeds = json.loads(f.readline()).get("seeds", {})
            records = [json.loads(line) for line in f if line.strip()]
            rows = [[rec[k] for k in SHOT_HEADER] for rec in records]
        else:
            first = f.readline()
            seeds = json.loads(first[1:]) if first.startswith("#") else {}
            reader = csv.reader(f)
            header = next(reader) if seeds else first.strip().split(",")
            if tuple(header) != SHOT_HEADER:
                raise ValueError(f"unexpected shot table header {header}")
            rows = list(reader)
    data = np.array(rows, dtype=float).reshape(-1, len(SHOT_HEADER))
    shot, t_stamp, phi1, phi2, s1, s2, sig1, sig2 = data.T
    return ShotTable(shot.astype(np.int64), t_stamp, phi1, phi2, s1.astype(np.int8), s2.astype(np.int8),
                     sig1, sig2, seeds=seeds)


# --- correlation reports ---------------------------------------------------

def report_records(report: CorrelationReport, include_timing: bool = False) -> list[dict]:
    """The report as JSON-lines records: one summary, then one per lag."""
    summary = {
        "record": "correlation",
        "r": report.estimate.r,
        "sigma_r": report.estimate.sigma_r,
        "n_shots": report.n_shots,
        "detrend": {"enabled": report.detrend.enabled, "block_size": report.detrend.block_size},
        "seeds": report.seeds,
        "theory": None if report.theory is None else report.theory.as_dict(),
        "residual": report.residual,
    }
    if report.cumulant is not None:
        c = report.cumulant
        summary["cumulant"] = {"order": c.order, "kappa": c.kappa, "kappa_normalized": c.kappa_normalized,
                               "stderr": c.stderr}
    if include_timing:
        summary["wall_clock"] = report.wall_clock
        summary["shots_per_second"] = report.shots_per_second
    records = [summary]
    records += [{"record": "lag", "lag": p.lag, "r": p.r, "sigma_r": p.sigma_r} for p in report.lags]
    return records


def write_report(report: CorrelationReport, path, include_timing: bool = False) -> Path:
    path = Path(path).with_suffix(".jsonl")
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(_jsonable(rec), sort_keys=True) for rec in report_records(report, include_timing)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


# --- sweeps and theory -----------------------------------------------------

def sweep_rows(sweep: SweepResult) -> list[dict]:
    rows = []
    for value, est, theory, residual in zip(sweep.values, sweep.estimates, sweep.theories, sweep.residuals):
        rows.append({
            "value": value, "r": est.r, "sigma_r": est.sigma_r, "n_shots": est.n_effective,
            "r_ideal": None if theory is None else theory.r_ideal,
            "r_theory": None if theory is None else theory.r_observed,
            "residual": residual,
        })
    return rows


def write_sweep(sweep: SweepResult, path, fmt: str = "csv") -> Path:
    fieldnames = (sweep.axis,) + SWEEP_FIELDS[1:]
    rows = [{sweep.axis: row.pop("value"), **row} for row in sweep_rows(sweep)]
    return write_rows(path, rows, fieldnames, fmt)


def theory_rows(axis: str | None, points: list[tuple[float | None, TheoryPrediction | None]]) -> list[dict]:
    rows = []
    for value, theory in points:
        row = {axis or "point": value if value is not None else 0}
        if theory is not None:
            row.update(theory.as_dict())
        rows.append(row)
    return rows


def write_theory(axis: str | None, points, path, fmt: str = "csv") -> Path:
    rows = theory_rows(axis, points)
    fieldnames = []
    for row in rows:
        fieldnames += [k for k in row if k not in fieldnames]
    return write_rows(path, rows, fieldnames, fmt)


def write_spectrum(rows: list[SpectralRow], path, fmt: str = "csv") -> Path:
    dict_rows = [{name: getattr(row, name) for name in SpectralRow.COLUMNS} for row in rows]
    return write_rows(path, dict_rows, SpectralRow.COLUMNS, fmt)


SENSITIVITY_FIELDS = ("label", "sigma_R", "t_R", "required_time_s", "required_time_h", "snr", "sigma_B_min",
                      "minimal_time_s")


def sensitivity_rows(spec: SensitivitySpec) -> list[dict]:
    """Required total time per readout case and, given T_total, SNR and σ_B,min."""
    rows = []
    for case in spec.cases:
        needed = required_time(spec.sigma_B, case.sigma_R, spec.T2, spec.t, case.t_R)
        row = {"label": case.label, "sigma_R": case.sigma_R, "t_R": case.t_R,
               "required_time_s": needed, "required_time_h": needed / SECONDS_PER_HOUR,
               "snr": None, "sigma_B_min": None, "minimal_time_s": None}
        if spec.T_total is not None:
            try:
                row["snr"], row["sigma_B_min"] = snr_and_min_noise(case.sigma_R, spec.T2, spec.t, case.t_R,
                                                                   spec.T_total, sigma_B=spec.sigma_B)
            except UnreachableSensitivityError as e:
                logger.warning("%s: %s", case.label, e)
                row["minimal_time_s"] = e.minimal_time
        rows.append(row)
    return rows


def write_sensitivity(spec: SensitivitySpec, path, fmt: str = "csv") -> Path:
    return write_rows(path, sensitivity_rows(spec), SENSITIVITY_FIELDS, fmt)
