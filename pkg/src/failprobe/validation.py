"""Input validation helpers used by loaders and estimators."""
from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataValidationError

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"


def require_file(path: str | Path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataValidationError(f"file not found: {p}")
    return p


def require_columns(fieldnames: Sequence[str] | None, required: Iterable[str], path: str | Path) -> None:
    have = set(fieldnames or [])
    missing = [c for c in required if c not in have]
    if missing:
        raise DataValidationError(f"{path}: missing column(s) {', '.join(missing)}")


def parse_utc_timestamp(value: str, *, path: str | Path = "<input>", row: int | None = None) -> datetime:
    """Parse 'YYYY-MM-DD HH:MM:SS' as a UTC timestamp, reporting the row on failure."""
    try:
        return datetime.strptime(value.strip(), TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
    except ValueError:
        where = f"{path}, row {row}" if row is not None else str(path)
        raise DataValidationError(f"{where}: unparseable timestamp {value!r}") from None


def parse_int(value: str, field: str, *, path: str | Path = "<input>", row: int | None = None) -> int:
    try:
        return int(value)
    except ValueError:
        where = f"{path}, row {row}" if row is not None else str(path)
        raise DataValidationError(f"{where}: {field} is not an integer: {value!r}") from None


def check_feature_matrix(X, *, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_binary_labels(y, n_rows: int, *, name: str = "y") -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64).ravel()
    if arr.shape[0] != n_rows:
        raise ValueError(f"{name} has {arr.shape[0]} entries, expected {n_rows}")
    if arr.size and not np.all(np.isin(arr, (0.0, 1.0))):
        raise ValueError(f"{name} must contain only 0/1 labels")
    return arr


def check_vector(x, dim: int, *, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.shape[0] != dim:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {dim}")
    return arr
