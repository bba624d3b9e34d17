#!/usr/bin/env python3
"""Run the bundled simulation configs and print rate summaries.

Examples:
    python3 scripts/run_experiments.py --all
    python3 scripts/run_experiments.py configs/su_miso_n33_d04.json --workers 4
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from multiport.cli import main as cli_main

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = REPO_ROOT / "configs"


def summarize(rates_csv: Path) -> None:
    with open(rates_csv, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    widths = [max(len(h), 12) for h in header]
    print("  " + "  ".join(h.rjust(w) for h, w in zip(header, widths)))
    for row in body:
        cells = [f"{float(v):.4f}".rjust(w) for v, w in zip(row, widths)]
        print("  " + "  ".join(cells))


def run_one(config_path: Path, output_dir: Path, workers: int) -> int:
    print(f"== {config_path.name}")
    code = cli_main(
        [
            "run",
            str(config_path),
            "--output-dir",
            str(output_dir),
            "--workers",
            str(workers),
        ]
    )
    if code != 0:
        print(f"run failed with exit code {code}", file=sys.stderr)
        return code
    name = json.loads(config_path.read_text())["scenario"]["name"]
    summarize(output_dir / f"{name}_rates.csv")
    return 0


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "configs", nargs="*", type=Path, help="run-config JSON files to execute"
    )
    parser.add_argument(
        "--all", action="store_true", help="run every config bundled under configs/"
    )
    parser.add_argument(
        "--output-dir", type=Path, default=REPO_ROOT / "results", help="output directory"
    )
    parser.add_argument("--workers", type=int, default=1, help="worker processes")
    args = parser.parse_args()

    targets = list(args.configs)
    if args.all:
        targets.extend(sorted(CONFIG_DIR.glob("*.json")))
    if not targets:
        parser.error("give config paths or --all")
    args.output_dir.mkdir(parents=True, exist_ok=True)
    for path in targets:
        code = run_one(path, args.output_dir, args.workers)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
