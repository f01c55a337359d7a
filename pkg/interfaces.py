"""Protocol interfaces used by cross validation and the CLI."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Protocol, Sequence

from models import BitPattern


class Model(Protocol):
    name: str

    def fit(
        self,
        train: Sequence[tuple[BitPattern, str]],
        eval_set: Sequence[tuple[BitPattern, str]] | None = None,
    ) -> None: ...

    def predict(self, patterns: Sequence[BitPattern]) -> list[str]: ...

    def fitted_params(self) -> dict[str, object]: ...


class ReportSink(Protocol):
    def write_json(self, path: Path, payload: dict[str, Any]) -> Path: ...

    def write_csv(self, path: Path, rows: list[dict[str, Any]]) -> Path: ...


class ConfigStore(Protocol):
    def get_seed(self) -> int: ...

    def get_shots(self) -> int: ...

    def get_folds(self) -> int: ...

    def get_grid(self) -> str: ...
