"""JSON config store for run defaults with environment and .env fallback."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

log = logging.getLogger(__name__)

DEFAULT_SEED = 20190101
DEFAULT_SHOTS = 8192
DEFAULT_FOLDS = 10
DEFAULT_GRID = "uniform:15"

_ENV_KEYS = {
    "seed": "PQM_SEED",
    "shots": "PQM_SHOTS",
    "folds": "PQM_FOLDS",
    "grid": "PQM_GRID",
}


def _load_dotenv(dotenv_path: Path | None = None) -> dict[str, str]:
    """Read a .env file and return key-value pairs."""
    result: dict[str, str] = {}
    candidates = [
        dotenv_path,
        Path.cwd() / ".env",
        Path(__file__).parent / ".env",
    ]
    for p in candidates:
        if p and p.is_file():
            for line in p.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if not line or line.startswith("#") or "=" not in line:
                    continue
                key, _, value = line.partition("=")
                result[key.strip()] = value.strip().strip('"').strip("'")
            break
    return result


def default_config_path() -> Path:
    return Path.home() / ".config" / "pqm" / "config.json"


class JsonConfigStore:
    def __init__(self, path: Path | None = None) -> None:
        self._path = path or default_config_path()
        self._dotenv = _load_dotenv()

    @property
    def path(self) -> Path:
        return self._path

    def _lookup(self, key: str) -> str | None:
        # Priority: config.json > env var > .env file
        data = self._read_all()
        if key in data and data[key] not in ("", None):
            return str(data[key])
        env_key = _ENV_KEYS[key]
        value = os.environ.get(env_key, "")
        if value:
            return value
        return self._dotenv.get(env_key) or None

    def _get_int(self, key: str, default: int) -> int:
        raw = self._lookup(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            log.warning("ignoring non-integer %s=%r, using %d", key, raw, default)
            return default

    def get_seed(self) -> int:
        return self._get_int("seed", DEFAULT_SEED)

    def get_shots(self) -> int:
        return self._get_int("shots", DEFAULT_SHOTS)

    def get_folds(self) -> int:
        return self._get_int("folds", DEFAULT_FOLDS)

    def get_grid(self) -> str:
        return self._lookup("grid") or DEFAULT_GRID

    def set_value(self, key: str, value: int | str) -> None:
        if key not in _ENV_KEYS:
            raise KeyError(key)
        data = self._read_all()
        data[key] = value
        self._write_all(data)

    def _read_all(self) -> dict:
        if not self._path.exists():
            return {}
        try:
            data = json.loads(self._path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError, OSError):
            return {}
        return data if isinstance(data, dict) else {}

    def _write_all(self, data: dict) -> None:
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._path.write_text(json.dumps(data, ensure_ascii=False, indent=2), encoding="utf-8")
