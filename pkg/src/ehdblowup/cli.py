"""Command line entry point: verify, coercivity and simulate subcommands.

Output directory precedence: --out, then $EHDBLOWUP_OUTDIR, then ./ehdblowup_output.
Every file written depends only on the configuration, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .coercivity import CoercivityReport, measure_coercivity
from .config import Config, ConfigError, parse_config
from .dynamics import SimulationReport, run_decay_experiment
from .verify import VerificationSuiteResult, run_suite

OUTDIR_ENV = "EHDBLOWUP_OUTDIR"
DEFAULT_OUTDIR = "ehdblowup_output"


def load_config(path: str | None) -> Config:
    if path is None:
        return Config()
    return parse_config(Path(path).read_text())


def output_dir(cli_value: str | None) -> Path:
    out = Path(cli_value or os.environ.get(OUTDIR_ENV) or DEFAULT_OUTDIR)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_series(report: SimulationReport, path: Path) -> None:
    np.savetxt(path, report.table(), fmt="%.17g", delimiter=",", header=",".join(report.COLUMNS), comments="")


def simulation_checks(report: SimulationReport) -> dict:
    """Pass/fail flags for a decay run. A zero-energy run only has to stay at zero."""
    if report.energy[0] == 0.0:
        return {"status_ok": report.status == "ok", "energy_zero": bool(np.all(report.energy == 0.0))}
    return {
        "status_ok": report.status == "ok",
        "kappa_positive": bool(report.kappa > 0.0),
        "fit_residual_below_0.1": bool(report.fit_residual < 0.1),
        "monotone_after_transient": report.monotone_after_transient,
        "differential_inequality": report.inequality_holds,
    }


def simulation_summary(report: SimulationReport) -> str:
    lines = [
        f"status={report.status}",
        f"message={report.message}",
        f"kappa={report.kappa:.17g}",
        f"fit_residual={report.fit_residual:.17g}",
        f"log_rms={report.extras.get('log_rms', float('nan')):.17g}",
        f"c_meas={report.c_meas:.17g}",
        f"C_meas={report.C_meas:.17g}",
        f"max_abs_LK0={float(np.max(np.abs(report.LK0))):.17g}",
        f"max_eps_norm={float(np.max(report.eps_norm)):.17g}",
    ]
    lines += [f"{name}={'PASS' if ok else 'FAIL'}" for name, ok in simulation_checks(report).items()]
    return "\n".join(lines) + "\n"


def cmd_verify(config: Config) -> VerificationSuiteResult:
    return run_suite(config.parameters(), config.grid(), config.seed)


def cmd_coercivity(config: Config, samples: int = 100) -> CoercivityReport:
    return measure_coercivity(config.grid(), config.parameters(), samples, config.seed)


def cmd_simulate(config: Config, out: Path, progress=None) -> SimulationReport:
    report = run_decay_experiment(config, progress)
    write_series(report, out / "series.csv")
    (out / "config.txt").write_text(config.echo() + "\n")
    (out / "summary.txt").write_text(simulation_summary(report))
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ehdblowup", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the identity and convergence suite")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--out", help="directory for verify.txt and verify.csv")

    p = sub.add_parser("coercivity", help="Monte-Carlo pairing ratios of M_G")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--samples", type=int, default=100, help="number of random test fields (default 100)")

    p = sub.add_parser("simulate", help="run the energy decay experiment")
    p.add_argument("--config", required=True, help="key=value configuration file")
    p.add_argument("--out", help="directory for series.csv, summary.txt and config.txt")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("# effective configuration")
    print("\n".join("# " + line for line in config.echo().splitlines()))

    if args.command == "verify":
        result = cmd_verify(config)
        out = output_dir(args.out)
        (out / "verify.txt").write_text(result.table() + "\n")
        (out / "verify.csv").write_text(result.csv())
        print(result.table())
        return 0 if result.passed else 1

    if args.command == "coercivity":
        if args.samples < 1:
            print("error: --samples must be >= 1", file=sys.stderr)
            return 2
        report = cmd_coercivity(config, args.samples)
        print(report.summary())
        return 0 if report.passed else 1

    def progress(n, total, row):
        if n % 50 == 0 or n == total:
            logging.info("step %d/%d s=%.3f E=%.4e", n, total, row[0], row[3])

    try:
        report = cmd_simulate(config, output_dir(args.out), progress)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(simulation_summary(report), end="")
    print(f"runtime={report.runtime:.1f}s")
    return 0 if all(simulation_checks(report).values()) else 1
