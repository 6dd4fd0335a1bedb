"""Day-resolution text buckets per admission and category, with forward-fill
imputation: an empty day inherits the previous day's bucket, and leading empty
days stay empty."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Sequence

from .cohort import AdmissionRecord
from .errors import DataValidationError
from .validation import parse_int, parse_utc_timestamp, require_columns, require_file

DEFAULT_HORIZON = 8
BUCKET_SEPARATOR = "\n\n"
SECONDS_PER_DAY = 86400.0


class NoteCategory(IntEnum):
    """The five note categories; integer codes are stable and used on disk."""

    ECHO = 0
    ECG = 1
    NURSING = 2
    RADIOLOGY = 3
    NURSING_OTHER = 4


CATEGORY_LABELS: dict[str, NoteCategory] = {
    "Echo": NoteCategory.ECHO,
    "ECG": NoteCategory.ECG,
    "Nursing": NoteCategory.NURSING,
    "Radiology": NoteCategory.RADIOLOGY,
    "Nursing/other": NoteCategory.NURSING_OTHER,
}

CANONICAL_LABELS: dict[NoteCategory, str] = {v: k for k, v in CATEGORY_LABELS.items()}

CATEGORIES: tuple[NoteCategory, ...] = tuple(NoteCategory)


class Fill(str, Enum):
    ORIGINAL = "original"
    COPIED = "copied"
    EMPTY = "empty"


@dataclass(frozen=True)
class NoteRecord:
    subject_id: int
    hadm_id: int
    category: NoteCategory
    chart_time: datetime
    text: str


@dataclass(frozen=True)
class BucketCell:
    """One (category, day) bucket: its text, how it was filled, and the day the
    text originally came from (None for empty cells)."""

    text: str
    fill: Fill
    source_day: int | None


_EMPTY_CELL = BucketCell(text="", fill=Fill.EMPTY, source_day=None)


@dataclass
class BucketGrid:
    hadm_id: int
    subject_id: int
    horizon: int = DEFAULT_HORIZON
    cells: dict[tuple[NoteCategory, int], BucketCell] = field(default_factory=dict)
    out_of_window: int = 0

    def cell(self, category: NoteCategory, day: int) -> BucketCell:
        return self.cells[(category, day)]

    def original_count(self) -> int:
        return sum(1 for c in self.cells.values() if c.fill is Fill.ORIGINAL)


def load_notes(notes_csv: str | Path) -> tuple[list[NoteRecord], dict[str, int]]:
    """Read the notes table; unknown categories and blank texts are dropped and
    counted rather than treated as errors."""
    path = require_file(notes_csv)
    notes: list[NoteRecord] = []
    counters = {"unknown_category": 0, "blank_text": 0}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        require_columns(reader.fieldnames, ("subject_id", "hadm_id", "category", "charttime", "text"), path)
        for row_no, row in enumerate(reader, start=2):
            category = CATEGORY_LABELS.get((row["category"] or "").strip())
            if category is None:
                counters["unknown_category"] += 1
                continue
            text = row["text"] or ""
            if not text.strip():
                counters["blank_text"] += 1
                continue
            notes.append(
                NoteRecord(
                    subject_id=parse_int(row["subject_id"], "subject_id", path=path, row=row_no),
                    hadm_id=parse_int(row["hadm_id"], "hadm_id", path=path, row=row_no),
                    category=category,
                    chart_time=parse_utc_timestamp(row["charttime"], path=path, row=row_no),
                    text=text,
                )
            )
    return notes, counters


def assign_day(chart_time: datetime, admit_time: datetime, horizon: int = DEFAULT_HORIZON) -> int | None:
    """Map a chart time to a 1-based stay day, or None when outside the window.

    Day d covers [admit + (d-1)*24h, admit + d*24h); boundaries are offsets from
    the admission time, not calendar midnights.
    """
    delta = (chart_time - admit_time).total_seconds()
    if delta < 0 or delta >= horizon * SECONDS_PER_DAY:
        return None
    return int(delta // SECONDS_PER_DAY) + 1


def build_grid(
    notes: Iterable[NoteRecord],
    admission: AdmissionRecord,
    horizon: int = DEFAULT_HORIZON,
) -> BucketGrid:
    """Place notes into (category, day) buckets for one admission.

    Notes sharing a bucket are concatenated in chart-time order with a blank
    line between them. Out-of-window notes are dropped and counted. The result
    has only original and empty cells; apply forward_fill() for imputation.
    """
    grouped: dict[tuple[NoteCategory, int], list[NoteRecord]] = {}
    dropped = 0
    for note in notes:
        if note.hadm_id != admission.hadm_id:
            raise DataValidationError(
                f"note hadm_id {note.hadm_id} does not match admission {admission.hadm_id}"
            )
        day = assign_day(note.chart_time, admission.admit_time, horizon)
        if day is None:
            dropped += 1
            continue
        grouped.setdefault((note.category, day), []).append(note)

    cells: dict[tuple[NoteCategory, int], BucketCell] = {}
    for category in CATEGORIES:
        for day in range(1, horizon + 1):
            bucket = grouped.get((category, day))
            if bucket:
                bucket.sort(key=lambda n: n.chart_time)
                text = BUCKET_SEPARATOR.join(n.text for n in bucket)
                cells[(category, day)] = BucketCell(text=text, fill=Fill.ORIGINAL, source_day=day)
            else:
                cells[(category, day)] = _EMPTY_CELL
    return BucketGrid(
        hadm_id=admission.hadm_id,
        subject_id=admission.subject_id,
        horizon=horizon,
        cells=cells,
        out_of_window=dropped,
    )


def forward_fill(grid: BucketGrid) -> BucketGrid:
    """Copy each category's most recent non-empty bucket into later empty days.

    Leading empty days stay empty. Copied cells keep the source day of the
    original bucket they carry, so chains of copies point at the original.
    Idempotent.
    """
    cells: dict[tuple[NoteCategory, int], BucketCell] = {}
    for category in CATEGORIES:
        carry: BucketCell | None = None
        for day in range(1, grid.horizon + 1):
            cell = grid.cells[(category, day)]
            if cell.fill is not Fill.EMPTY:
                carry = cell
            elif carry is not None:
                cell = BucketCell(text=carry.text, fill=Fill.COPIED, source_day=carry.source_day)
            cells[(category, day)] = cell
    return replace(grid, cells=cells)


@dataclass(frozen=True)
class BucketLine:
    """One exported original bucket, as serialized to the bucket JSONL feed."""

    hadm_id: int
    subject_id: int
    category: NoteCategory
    day: int
    text: str


def export_buckets(grids: Iterable[BucketGrid], fh) -> int:
    """Write one JSON line per original cell, ordered by (hadm_id, category, day).

    Copied cells are not exported (they reuse the source cell's embedding) and
    empty cells embed as zero, so originals are all an extractor needs.
    """
    count = 0
    for grid in sorted(grids, key=lambda g: g.hadm_id):
        for category in CATEGORIES:
            for day in range(1, grid.horizon + 1):
                cell = grid.cells[(category, day)]
                if cell.fill is not Fill.ORIGINAL:
                    continue
                obj = {
                    "hadm_id": grid.hadm_id,
                    "subject_id": grid.subject_id,
                    "category": CANONICAL_LABELS[category],
                    "day": day,
                    "text": cell.text,
                }
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
                count += 1
    return count


def read_bucket_export(path: str | Path) -> list[BucketLine]:
    """Read a bucket JSONL feed; duplicate (hadm, category, day) keys are rejected."""
    lines: list[BucketLine] = []
    seen: set[tuple[int, int, int]] = set()
    with open(require_file(path), encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"{path}, line {line_no}: invalid JSON ({exc})") from None
            try:
                category = CATEGORY_LABELS[obj["category"]]
                entry = BucketLine(
                    hadm_id=int(obj["hadm_id"]),
                    subject_id=int(obj["subject_id"]),
                    category=category,
                    day=int(obj["day"]),
                    text=str(obj["text"]),
                )
            except KeyError as exc:
                raise DataValidationError(f"{path}, line {line_no}: missing or unknown field {exc}") from None
            key = (entry.hadm_id, int(entry.category), entry.day)
            if key in seen:
                raise DataValidationError(f"{path}, line {line_no}: duplicate bucket key {key}")
            seen.add(key)
            lines.append(entry)
    return lines


def grids_from_bucket_lines(lines: Iterable[BucketLine], horizon: int = DEFAULT_HORIZON) -> dict[int, BucketGrid]:
    """Rebuild unfilled grids (original/empty cells only) from an exported feed."""
    by_hadm: dict[int, list[BucketLine]] = {}
    subjects: dict[int, int] = {}
    for line in lines:
        if not 1 <= line.day <= horizon:
            raise DataValidationError(f"bucket day {line.day} outside horizon 1..{horizon}")
        by_hadm.setdefault(line.hadm_id, []).append(line)
        subjects[line.hadm_id] = line.subject_id
    grids: dict[int, BucketGrid] = {}
    for hadm_id, entries in by_hadm.items():
        cells: dict[tuple[NoteCategory, int], BucketCell] = {
            (category, day): _EMPTY_CELL for category in CATEGORIES for day in range(1, horizon + 1)
        }
        for e in entries:
            cells[(e.category, e.day)] = BucketCell(text=e.text, fill=Fill.ORIGINAL, source_day=e.day)
        grids[hadm_id] = BucketGrid(
            hadm_id=hadm_id, subject_id=subjects[hadm_id], horizon=horizon, cells=cells
        )
    return grids


def empty_grid(hadm_id: int, subject_id: int, horizon: int = DEFAULT_HORIZON) -> BucketGrid:
    cells = {(category, day): _EMPTY_CELL for category in CATEGORIES for day in range(1, horizon + 1)}
    return BucketGrid(hadm_id=hadm_id, subject_id=subject_id, horizon=horizon, cells=cells)


def provenance_to_dict(grids: Sequence[BucketGrid], counters: dict[str, int] | None = None) -> dict:
    """Fill-provenance sidecar: per admission and category, the fill state and
    source day of every cell, plus drop counters from loading and placement."""
    admissions = []
    for grid in sorted(grids, key=lambda g: g.hadm_id):
        categories = {}
        for category in CATEGORIES:
            row = []
            for day in range(1, grid.horizon + 1):
                cell = grid.cells[(category, day)]
                entry: dict = {"fill": cell.fill.value}
                if cell.fill is Fill.COPIED:
                    entry["source_day"] = cell.source_day
                row.append(entry)
            categories[CANONICAL_LABELS[category]] = row
        admissions.append(
            {
                "hadm_id": grid.hadm_id,
                "subject_id": grid.subject_id,
                "out_of_window": grid.out_of_window,
                "categories": categories,
            }
        )
    doc = {"horizon": grids[0].horizon if grids else DEFAULT_HORIZON, "admissions": admissions}
    if counters:
        doc["dropped"] = dict(sorted(counters.items()))
    return doc


def write_provenance(grids: Sequence[BucketGrid], path: str | Path, counters: dict[str, int] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(provenance_to_dict(grids, counters), fh, indent=2)
        fh.write("\n")
