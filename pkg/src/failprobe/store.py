"""Binary embedding store (EHRE v1), the deterministic stub embedder, and
per-horizon feature assembly.

EHRE v1 layout, little-endian throughout:

    bytes 0-3   magic, ASCII "EHRE"
    u16         version = 1
    u16         reserved = 0
    u32         dim
    u64         record count
    records     u64 hadm_id, u8 category code, u8 day, u16 padding = 0,
                dim x f32 values

Records are sorted by (hadm_id, category, day); duplicate keys are a format
error. The round trip is bit-exact for every finite f32, including signed
zeros and subnormals.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .bucketing import BucketGrid, Fill, CATEGORIES
from .errors import MissingEmbeddingError, StoreFormatError

MAGIC = b"EHRE"
VERSION = 1
_HEADER = struct.Struct("<4sHHIQ")
_RECORD_PREFIX = struct.Struct("<QBBH")

StoreKey = tuple[int, int, int]  # (hadm_id, category code, day)


@dataclass
class EmbeddingStore:
    """Immutable-after-load map (hadm_id, category code, day) -> f32 vector."""

    dim: int
    entries: dict[StoreKey, np.ndarray]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: StoreKey) -> bool:
        return key in self.entries

    def get(self, key: StoreKey) -> np.ndarray | None:
        return self.entries.get(key)


def write_store(entries: Mapping[StoreKey, np.ndarray], dim: int, path: str | Path) -> None:
    if dim < 1:
        raise StoreFormatError(f"dim must be >= 1, got {dim}")
    keys = sorted(entries)
    payload = bytearray(_HEADER.pack(MAGIC, VERSION, 0, dim, len(keys)))
    for key in keys:
        hadm_id, category, day = key
        vec = np.asarray(entries[key], dtype="<f4").ravel()
        if vec.shape[0] != dim:
            raise StoreFormatError(f"entry {key} has length {vec.shape[0]}, store dim is {dim}")
        if not np.all(np.isfinite(vec)):
            raise StoreFormatError(f"entry {key} contains non-finite values")
        payload += _RECORD_PREFIX.pack(hadm_id, category, day, 0)
        payload += vec.tobytes()
    with open(path, "wb") as fh:
        fh.write(payload)


def read_store(path: str | Path) -> EmbeddingStore:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise StoreFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, reserved, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise StoreFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    if reserved != 0:
        raise StoreFormatError(f"{path}: reserved field must be 0, got {reserved}")
    if dim < 1:
        raise StoreFormatError(f"{path}: dim must be >= 1, got {dim}")

    record_size = _RECORD_PREFIX.size + 4 * dim
    expected = _HEADER.size + count * record_size
    if len(data) < expected:
        raise StoreFormatError(
            f"{path}: truncated file, expected {expected} bytes for {count} records, got {len(data)}"
        )
    if len(data) > expected:
        raise StoreFormatError(f"{path}: {len(data) - expected} trailing bytes after {count} records")

    entries: dict[StoreKey, np.ndarray] = {}
    prev: StoreKey | None = None
    offset = _HEADER.size
    for _ in range(count):
        hadm_id, category, day, padding = _RECORD_PREFIX.unpack_from(data, offset)
        if padding != 0:
            raise StoreFormatError(f"{path}: record padding must be 0, got {padding}")
        key = (hadm_id, category, day)
        if prev is not None:
            if key == prev:
                raise StoreFormatError(f"{path}: duplicate key {key}")
            if key < prev:
                raise StoreFormatError(f"{path}: records out of order at {key}")
        prev = key
        offset += _RECORD_PREFIX.size
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        if not np.all(np.isfinite(vec)):
            raise StoreFormatError(f"{path}: entry {key} contains non-finite values")
        entries[key] = vec
        offset += 4 * dim
    return EmbeddingStore(dim=dim, entries=entries)


def validate_store(path: str | Path) -> dict:
    """Full-format validation pass; returns a small summary on success."""
    store = read_store(path)
    return {"dim": store.dim, "records": len(store)}


def stub_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic stand-in embedding: unit-norm f32 vector from (seed, text).

    A 64-bit digest of the seed and text bytes seeds the generator, so the same
    text always maps to the same vector and distinct texts are near-orthogonal
    at realistic dims.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF))
    h.update(text.encode("utf-8"))
    rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
    vec = rng.standard_normal(dim)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        vec[0] = 1.0
        norm = 1.0
    return (vec / norm).astype(np.float32)


class StubTextEmbedder(TransformerMixin, BaseEstimator):
    """Sklearn-style transformer over the stub embedder: texts in, row-stacked
    unit vectors out. Stateless; fit is a no-op."""

    def __init__(self, dim: int = 768, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return np.vstack([stub_embed(text, self.dim, self.seed) for text in X])


@dataclass(frozen=True)
class FeatureVector:
    hadm_id: int
    horizon: int
    values: np.ndarray  # length horizon * 5 * dim, f32


def assemble_features(grid: BucketGrid, store: EmbeddingStore, n: int) -> FeatureVector:
    """Concatenate day 1..n embeddings for one admission, day-major then by
    category code.

    Original cells read their own key, copied cells the source day's key, and
    empty cells contribute zeros. An original cell without a store entry means
    the extraction run was incomplete and raises MissingEmbeddingError.
    """
    if not 1 <= n <= grid.horizon:
        raise ValueError(f"horizon {n} outside 1..{grid.horizon}")
    dim = store.dim
    out = np.zeros(n * len(CATEGORIES) * dim, dtype=np.float32)
    pos = 0
    for day in range(1, n + 1):
        for category in CATEGORIES:
            cell = grid.cells[(category, day)]
            if cell.fill is not Fill.EMPTY:
                source_day = day if cell.fill is Fill.ORIGINAL else cell.source_day
                key = (grid.hadm_id, int(category), int(source_day))
                vec = store.get(key)
                if vec is None:
                    raise MissingEmbeddingError(
                        f"no store entry for hadm {key[0]}, category {key[1]}, day {key[2]}"
                    )
                out[pos : pos + dim] = vec
            pos += dim
    return FeatureVector(hadm_id=grid.hadm_id, horizon=n, values=out)
