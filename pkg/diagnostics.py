"""Diagnostics helpers for HEALTH events: emitting, parsing, summaries and snapshots."""

from __future__ import annotations

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any

HEALTH_PREFIX = "HEALTH "


def default_diagnostics_dir() -> Path:
    return Path.home() / ".cache" / "pqm" / "diagnostics"


def default_log_file() -> Path:
    return Path.home() / ".cache" / "pqm" / "pqm.log"


def log_health(logger: logging.Logger, event: str, **fields: Any) -> None:
    payload: dict[str, Any] = {"event": event, **fields}
    logger.info("HEALTH %s", json.dumps(payload, ensure_ascii=False, sort_keys=True, default=str))


def parse_health_events(log_file: Path, limit: int = 200) -> list[dict[str, Any]]:
    if limit <= 0 or not log_file.exists():
        return []

    events: list[dict[str, Any]] = []
    try:
        with log_file.open("r", encoding="utf-8", errors="replace") as fh:
            for raw_line in fh:
                marker = raw_line.find(HEALTH_PREFIX)
                if marker < 0:
                    continue
                payload = raw_line[marker + len(HEALTH_PREFIX):].strip()
                if not payload:
                    continue
                try:
                    data = json.loads(payload)
                except json.JSONDecodeError:
                    continue
                if isinstance(data, dict):
                    events.append(data)
    except OSError:
        return []

    if len(events) > limit:
        return events[-limit:]
    return events


def summarize_health_events(events: list[dict[str, Any]]) -> dict[str, Any]:
    started = 0
    completed = 0
    failed = 0
    folds = 0
    tunings = 0
    tuning_gains: list[float] = []
    elapsed: list[int] = []
    model_means: dict[str, list[float]] = {}
    error_code_counts: dict[str, int] = {}
    table4_max_error: float | None = None

    for event in events:
        event_name = str(event.get("event", ""))
        if event_name == "bench_started":
            started += 1
        elif event_name == "bench_completed":
            completed += 1
            mean = event.get("mean")
            if isinstance(mean, (int, float)):
                model_means.setdefault(str(event.get("model", "?")), []).append(float(mean))
            cost = event.get("elapsed_ms")
            if isinstance(cost, int):
                elapsed.append(cost)
        elif event_name == "bench_failed":
            failed += 1
            code = str(event.get("error_code", "UNKNOWN"))
            error_code_counts[code] = error_code_counts.get(code, 0) + 1
        elif event_name == "fold_completed":
            folds += 1
        elif event_name == "tuning_completed":
            tunings += 1
            before, after = event.get("accuracy_before"), event.get("accuracy_after")
            if isinstance(before, (int, float)) and isinstance(after, (int, float)):
                tuning_gains.append(float(after) - float(before))
        elif event_name == "table4_completed":
            value = event.get("max_abs_error")
            if isinstance(value, (int, float)):
                table4_max_error = float(value)

    success_rate = (completed / started * 100.0) if started > 0 else 0.0
    avg_gain = sum(tuning_gains) / len(tuning_gains) if tuning_gains else 0.0

    return {
        "health_events": len(events),
        "benches_started": started,
        "benches_completed": completed,
        "benches_failed": failed,
        "bench_success_rate": round(success_rate, 2),
        "folds_completed": folds,
        "tuning_runs": tunings,
        "avg_tuning_gain": round(avg_gain, 6),
        "avg_bench_ms": int(sum(elapsed) / len(elapsed)) if elapsed else 0,
        "mean_accuracy_by_model": {
            model: round(sum(values) / len(values), 6) for model, values in sorted(model_means.items())
        },
        "table4_max_abs_error": table4_max_error,
        "error_code_counts": error_code_counts,
    }


def export_diagnostic_snapshot(
    log_file: Path,
    reason: str = "manual_export",
    run_config: dict[str, Any] | None = None,
    max_health_events: int = 200,
) -> Path:
    diagnostics_dir = default_diagnostics_dir()
    diagnostics_dir.mkdir(parents=True, exist_ok=True)

    health_events = parse_health_events(log_file, limit=max_health_events)
    summary = summarize_health_events(health_events)

    payload = {
        "generated_at": datetime.now().isoformat(timespec="seconds"),
        "reason": reason,
        "log_file": str(log_file),
        "run_config": run_config or {},
        "health_summary": summary,
        "health_events": health_events,
    }

    filename = f"diagnostic_{datetime.now().strftime('%Y%m%d_%H%M%S')}.json"
    output_path = diagnostics_dir / filename
    output_path.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
    return output_path
