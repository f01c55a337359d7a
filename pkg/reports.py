"""Report writers: JSON and CSV outputs plus a markdown run history."""

from __future__ import annotations

import csv
import io
import json
import threading
from datetime import datetime
from pathlib import Path
from typing import Any


def _fieldnames(rows: list[dict[str, Any]]) -> list[str]:
    """Union of row keys in first-seen order."""
    names: list[str] = []
    for row in rows:
        for key in row:
            if key not in names:
                names.append(key)
    return names


class FileReportSink:
    def write_json(self, path: Path, payload: dict[str, Any]) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def write_csv(self, path: Path, rows: list[dict[str, Any]]) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=_fieldnames(rows), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        return path


def rows_to_csv_text(rows: list[dict[str, Any]]) -> str:
    if not rows:
        return ""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=_fieldnames(rows), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


class MarkdownRunHistory:
    """Appends one entry per CLI run to a dated markdown file."""

    def __init__(self, base_dir: Path | None = None) -> None:
        self._base_dir = base_dir or Path.home() / ".cache" / "pqm" / "history"
        self._base_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append_record(
        self,
        *,
        command: str,
        config: dict[str, Any],
        summary: str,
        exit_code: int,
        event_time: datetime | None = None,
    ) -> Path:
        ts = event_time or datetime.now()
        file_path = self._base_dir / f"runs_{ts.strftime('%Y-%m-%d')}.md"

        lines = [
            f"### {ts.strftime('%H:%M:%S')} {command}",
            f"exit: {exit_code}",
            "#### config",
            "```json",
            json.dumps(config, ensure_ascii=False, sort_keys=True),
            "```",
            "#### result",
            summary.strip() or "(no output)",
            "",
        ]
        payload = "\n".join(lines) + "\n"

        with self._lock:
            with file_path.open("a", encoding="utf-8") as f:
                f.write(payload)
        return file_path
