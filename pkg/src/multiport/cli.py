"""Command line interface.

Subcommands:

- ``run``: execute a scenario described by a JSON file and write CSV
  outputs plus the resolved effective configuration.
- ``dump-impedance``: print or save the impedance matrix of a uniform
  circular dipole array.
- ``kde``: compute a Gaussian kernel density estimate from a one-column
  CSV of samples.

Exit codes: 0 on success, 2 for configuration or input errors, 3 when
a simulation aborts because too many realizations failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .em_arrays import array_impedance_matrix, uniform_circular_array, write_impedance_csv
from .montecarlo import (
    ConfigError,
    ScenarioResult,
    SimulationAbort,
    config_from_dict,
    config_to_dict,
    gaussian_kde,
    run_scenario,
)

OUTPUT_DIR_ENV = "MULTIPORT_OUTDIR"
RATE_COLUMNS = {
    "cap": "C_erg",
    "recip": "R_erg_recip",
    "hyp": "R_erg_hyp",
    "cap_lin": "R_erg_lin",
    "recip_lin": "R_erg_recip_lin",
    "hyp_lin": "R_erg_hyp_lin",
}
EMIT_CHOICES = ("rates_csv", "alpha_csv", "streams_csv", "kde_csv")


def _write_rates_csv(path: str, result: ScenarioResult) -> None:
    strategies = result.config.strategies
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["P_dBW"] + [RATE_COLUMNS[s] for s in strategies])
        for j, p_dbw in enumerate(result.power_grid_dbw):
            writer.writerow(
                [repr(float(p_dbw))]
                + [repr(float(result.ergodic_rates[s][j])) for s in strategies]
            )


def _write_alpha_csv(path: str, result: ScenarioResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["P_dBW", "realization", "alpha"])
        for j, p_dbw in enumerate(result.power_grid_dbw):
            for r in range(result.alpha_samples.shape[0]):
                writer.writerow(
                    [
                        repr(float(p_dbw)),
                        r,
                        repr(float(result.alpha_samples[r, j])),
                    ]
                )


def _write_streams_csv(path: str, result: ScenarioResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["P_dBW", "strategy", "mean_active_streams"])
        for j, p_dbw in enumerate(result.power_grid_dbw):
            for s in result.config.strategies:
                writer.writerow(
                    [
                        repr(float(p_dbw)),
                        s,
                        repr(float(result.mean_active_streams[s][j])),
                    ]
                )


def _write_kde_csv(path: str, result: ScenarioResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["P_dBW", "alpha", "density"])
        for j, p_dbw in enumerate(result.power_grid_dbw):
            grid, density = result.alpha_kde[j]
            for g, d in zip(grid, density):
                writer.writerow([repr(float(p_dbw)), repr(float(g)), repr(float(d))])


_EMIT_WRITERS = {
    "rates_csv": ("rates.csv", _write_rates_csv),
    "alpha_csv": ("alpha.csv", _write_alpha_csv),
    "streams_csv": ("streams.csv", _write_streams_csv),
    "kde_csv": ("kde.csv", _write_kde_csv),
}


def _load_run_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "scenario" not in data:
        raise ConfigError('config must be a JSON object with a "scenario" block')
    unknown = set(data) - {"scenario", "emit", "output_dir", "n_workers"}
    if unknown:
        raise ConfigError(f"unknown run-config fields: {sorted(unknown)}")
    return data


def cmd_run(args: argparse.Namespace) -> int:
    data = _load_run_config(args.config)
    config = config_from_dict(data["scenario"])
    has_alpha = ("hyp" in config.strategies and config.is_single_user) or (
        "hyp_lin" in config.strategies
    )
    emit = data.get("emit")
    if emit is None:
        emit = ["rates_csv", "streams_csv"] + (
            ["alpha_csv", "kde_csv"] if has_alpha else []
        )
    if not emit or not isinstance(emit, list):
        raise ConfigError("emit must be a nonempty list")
    for item in emit:
        if item not in EMIT_CHOICES:
            raise ConfigError(f"unknown emit target {item!r}")
    if len(set(emit)) != len(emit):
        raise ConfigError("emit targets must be unique")
    if not has_alpha and ("alpha_csv" in emit or "kde_csv" in emit):
        raise ConfigError(
            "alpha outputs need a naive strategy (hyp or hyp_lin) in the scenario"
        )
    n_workers = int(args.workers if args.workers is not None else data.get("n_workers", 1))
    if n_workers < 1:
        raise ConfigError("n_workers must be at least 1")
    out_dir = (
        args.output_dir
        or data.get("output_dir")
        or os.environ.get(OUTPUT_DIR_ENV)
        or "."
    )
    os.makedirs(out_dir, exist_ok=True)

    result = run_scenario(config, n_workers=n_workers)

    written = []
    for item in emit:
        suffix, writer = _EMIT_WRITERS[item]
        path = os.path.join(out_dir, f"{config.name}_{suffix}")
        writer(path, result)
        written.append(path)
    effective = {
        "scenario": config_to_dict(config),
        "emit": list(emit),
        "n_workers": n_workers,
        "output_dir": os.path.abspath(out_dir),
    }
    effective_path = os.path.join(out_dir, f"{config.name}_effective_config.json")
    with open(effective_path, "w") as fh:
        json.dump(effective, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(effective_path)
    for path in written:
        print(path)
    print(f"failures: {result.n_failures}")
    return 0


def cmd_dump_impedance(args: argparse.Namespace) -> int:
    if args.n < 1:
        raise ConfigError("--n must be at least 1")
    if not args.d > 0.0:
        raise ConfigError("--d must be positive")
    geometry = uniform_circular_array(args.n, args.d)
    matrix = array_impedance_matrix(geometry)
    if args.out:
        write_impedance_csv(args.out, matrix)
        print(args.out)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(["i", "j", "re_ohm", "im_ohm"])
        for i in range(matrix.shape[0]):
            for j in range(matrix.shape[1]):
                writer.writerow(
                    [i, j, repr(float(matrix[i, j].real)), repr(float(matrix[i, j].imag))]
                )
    return 0


def cmd_kde(args: argparse.Namespace) -> int:
    samples = []
    try:
        with open(args.input, newline="") as fh:
            reader = csv.reader(fh)
            for row in reader:
                if not row:
                    continue
                try:
                    samples.append(float(row[0]))
                except ValueError:
                    continue  # header or stray text row
    except FileNotFoundError as exc:
        raise ConfigError(f"input file not found: {args.input}") from exc
    try:
        grid, density = gaussian_kde(np.array(samples))
    except ValueError as exc:
        raise ConfigError(f"cannot estimate density: {exc}") from exc
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "density"])
        for g, d in zip(grid, density):
            writer.writerow([repr(float(g)), repr(float(d))])
    print(args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiport",
        description="Physically consistent MIMO link simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario from a JSON config")
    p_run.add_argument("config", help="path to the JSON run configuration")
    p_run.add_argument("--output-dir", default=None, help="directory for CSV outputs")
    p_run.add_argument(
        "--workers", type=int, default=None, help="worker processes (default from config)"
    )
    p_run.set_defaults(func=cmd_run)

    p_dump = sub.add_parser(
        "dump-impedance", help="impedance matrix of a uniform circular dipole array"
    )
    p_dump.add_argument("--n", type=int, required=True, help="number of elements")
    p_dump.add_argument(
        "--d", type=float, default=0.5, help="adjacent spacing in wavelengths"
    )
    p_dump.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p_dump.set_defaults(func=cmd_dump_impedance)

    p_kde = sub.add_parser(
        "kde", help="Gaussian kernel density estimate of a one-column CSV"
    )
    p_kde.add_argument("input", help="CSV file, samples in the first column")
    p_kde.add_argument("output", help="CSV file for (value, density) rows")
    p_kde.set_defaults(func=cmd_kde)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SimulationAbort as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
