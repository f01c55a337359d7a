#!/usr/bin/env python3
"""Summarize benchmark HEALTH events from a pqm log file."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

# Ensure project root is importable when running as:
# python scripts/bench_summary.py
PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from diagnostics import default_log_file, parse_health_events, summarize_health_events


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Summarize HEALTH events from a pqm log.")
    parser.add_argument(
        "--log-file",
        type=Path,
        default=default_log_file(),
        help="Path to the log written with pqm --log-file",
    )
    parser.add_argument(
        "--limit",
        type=int,
        default=5000,
        help="Maximum number of health events to parse",
    )
    parser.add_argument(
        "--json",
        action="store_true",
        help="Output JSON only",
    )
    args = parser.parse_args(argv)

    events = parse_health_events(args.log_file, limit=args.limit)
    summary = summarize_health_events(events)

    if args.json:
        print(json.dumps(summary, ensure_ascii=False, indent=2))
        return 0

    print(f"log_file: {args.log_file}")
    print(f"health_events: {summary['health_events']}")
    print(f"benches_started: {summary['benches_started']}")
    print(f"benches_completed: {summary['benches_completed']}")
    print(f"benches_failed: {summary['benches_failed']}")
    print(f"bench_success_rate: {summary['bench_success_rate']}%")
    print(f"folds_completed: {summary['folds_completed']}")
    print(f"tuning_runs: {summary['tuning_runs']} (avg gain {summary['avg_tuning_gain']})")
    print(f"avg_bench_ms: {summary['avg_bench_ms']}")
    for model, mean in summary["mean_accuracy_by_model"].items():
        print(f"mean_accuracy[{model}]: {mean}")
    if summary["table4_max_abs_error"] is not None:
        print(f"table4_max_abs_error: {summary['table4_max_abs_error']}")
    print(f"error_code_counts: {summary['error_code_counts']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
