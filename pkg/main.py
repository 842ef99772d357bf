"""
Command-line entry point.

    python main.py simulate --config docs/recipes/correlation_peak.yaml --out out/peak
    python main.py sweep --config docs/recipes/delay_oscillation.yaml --fit
    python main.py theory --config docs/recipes/sensitivity.yaml
    python main.py validate --config my.yaml
    python main.py selftest --slow

Exit codes: 0 success, 1 runtime error, 2 configuration error, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from config import ExperimentConfig, dump_resolved, load_config
from errors import ConfigurationError, CovmagError
from pipeline import run
from reports import (FORMATS, write_report, write_sensitivity, write_shot_table, write_spectrum, write_sweep,
                     write_theory)
from sweep import fit_oscillation, reconstruct_report, run_sweep, theory_sweep

logger = logging.getLogger("covmag")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_SELFTEST = 3
THREADS_ENV = "COVMAG_THREADS"


def _threads(value: int | None) -> int:
    if value is None:
        value = int(os.environ.get(THREADS_ENV, "1"))
    if value < 1:
        raise ConfigurationError("thread count must be at least 1", "--threads")
    return value


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigurationError("--config is required for this command", "--config")
    try:
        config = load_config(args.config)
    except OSError as e:
        raise ConfigurationError(f"cannot read config: {e}", "--config") from e
    if args.seed is not None:
        config = config.with_(master_seed=args.seed)
    return config


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _provenance(config: ExperimentConfig, out: Path) -> None:
    (out / "config.resolved.yaml").write_text(dump_resolved(config), encoding="utf-8")


def cmd_simulate(args) -> int:
    config = _config(args)
    out = _out(args)
    table, report = run(config, _threads(args.threads))
    _provenance(config, out)
    write_shot_table(table, out / "shots", args.format)
    write_report(report, out / "report", args.include_timing)
    line = f"r = {report.estimate.r:.6f} ± {report.estimate.sigma_r:.6f} (N = {report.n_shots})"
    if report.theory is not None:
        line += f"; theory {report.theory.r_observed:.6f}, residual {report.residual:+.2f}"
    print(line)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config(args)
    out = _out(args)
    sweep = run_sweep(config, _threads(args.threads))
    _provenance(config, out)
    write_sweep(sweep, out / "sweep", args.format)
    if args.fit:
        fit = fit_oscillation(sweep.values, sweep.r, sweep.sigma_r)
        payload = {"amplitude": fit.amplitude, "frequency": fit.frequency, "phase": fit.phase,
                   "decay_rate": fit.decay_rate, "offset": fit.offset}
        (out / "fit.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"fitted oscillation: f = {fit.frequency:.6g} Hz, phase = {fit.phase:+.4f} rad, "
              f"1/e time = {fit.decay_time:.4g} s")
    residuals = [r for r in sweep.residuals if r is not None]
    if residuals:
        within = sum(abs(r) < 3 for r in residuals)
        print(f"{within}/{len(residuals)} points within 3 sigma of theory")
    return EXIT_OK


def cmd_theory(args) -> int:
    config = _config(args)
    out = _out(args)
    axis = config.sweep.axis if config.sweep is not None else None
    points = theory_sweep(config)
    write_theory(axis, points, out / "theory", args.format)
    if config.sensitivity is not None and config.sensitivity.cases:
        write_sensitivity(config.sensitivity, out / "sensitivity", args.format)
    for value, theory in points:
        if theory is not None:
            prefix = "" if value is None else f"{axis} = {value:.6g}: "
            print(f"{prefix}r_ideal = {theory.r_ideal:.6g}, r = {theory.r_observed:.6g}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    config = _config(args)
    out = _out(args)
    threads = _threads(args.threads)
    sweep = run_sweep(config, threads)
    _provenance(config, out)
    write_sweep(sweep, out / "sweep", args.format)
    rows = reconstruct_report(sweep, args.coherence, threads)
    write_spectrum(rows, out / "spectrum", args.format)
    unreliable = sum(not row.reliable for row in rows)
    if unreliable:
        logger.warning("%d of %d spectral points unreliable", unreliable, len(rows))
    return EXIT_OK


def cmd_validate(args) -> int:
    print(dump_resolved(_config(args)), end="")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from suite_utils.json_test_runner import JSONTestRunner
    from suite_utils.selection import load_suite

    root = Path(__file__).resolve().parent
    suite = load_suite("", args.slow, str(root))
    if args.out:
        out = _out(args)
        with (out / "selftest.json").open("w", encoding="utf-8") as f:
            result = JSONTestRunner(stream=f).run(suite)
    else:
        result = JSONTestRunner(stream=sys.stdout).run(suite)
    return EXIT_OK if result.wasSuccessful() else EXIT_SELFTEST


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "theory": cmd_theory,
    "reconstruct": cmd_reconstruct,
    "validate": cmd_validate,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description="Covariance magnetometry simulator.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=str, default="", help="Experiment config (YAML).")
    p.add_argument("--out", type=str, default="out", help="Output directory.")
    p.add_argument("--seed", type=int, default=None, help="Override master_seed.")
    p.add_argument("--threads", type=int, default=None,
                   help=f"Worker threads (default: ${THREADS_ENV}, then 1).")
    p.add_argument("--format", choices=FORMATS, default="csv", help="Format of tabular outputs.")
    p.add_argument("--coherence", choices=("theory", "simulated"), default="theory",
                   help="Where reconstruct takes single-sensor coherences from.")
    p.add_argument("--fit", action="store_true", help="Fit a damped oscillation to a sweep.")
    p.add_argument("--slow", action="store_true", help="Include the long Monte Carlo tests in selftest.")
    p.add_argument("--include-timing", action="store_true",
                   help="Write wall-clock and throughput into reports (breaks byte-identical replays).")
    verbosity = p.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        logger.error("configuration error:\n%s", e)
        return EXIT_CONFIG
    except (OSError, CovmagError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
