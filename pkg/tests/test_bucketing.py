"""Bucket grid construction, forward fill, and export tests."""
from __future__ import annotations

import io
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from failprobe.bucketing import (
    CATEGORIES,
    BucketCell,
    BucketGrid,
    Fill,
    NoteCategory,
    NoteRecord,
    assign_day,
    build_grid,
    empty_grid,
    export_buckets,
    forward_fill,
    grids_from_bucket_lines,
    load_notes,
    provenance_to_dict,
    read_bucket_export,
)
from failprobe.errors import DataValidationError

from conftest import ts

ADMIT = datetime(2130, 1, 1, tzinfo=timezone.utc)


def note(hadm_id=1, category=NoteCategory.ECG, hours=1.0, text="text", subject_id=1):
    return NoteRecord(
        subject_id=subject_id,
        hadm_id=hadm_id,
        category=category,
        chart_time=ADMIT + timedelta(hours=hours),
        text=text,
    )


def random_grid(rng: np.random.Generator, hadm_id: int = 1, horizon: int = 8) -> BucketGrid:
    """Grid with a random Original/Empty pattern, as build_grid would produce."""
    cells = {}
    for category in CATEGORIES:
        for day in range(1, horizon + 1):
            if rng.random() < 0.4:
                cells[(category, day)] = BucketCell(
                    text=f"{category.name}-{day}", fill=Fill.ORIGINAL, source_day=day
                )
            else:
                cells[(category, day)] = BucketCell(text="", fill=Fill.EMPTY, source_day=None)
    return BucketGrid(hadm_id=hadm_id, subject_id=hadm_id, horizon=horizon, cells=cells)


class TestAssignDay:
    def test_admit_instant_is_day_one(self):
        assert assign_day(ADMIT, ADMIT) == 1

    def test_exact_24h_boundary_is_day_two(self):
        assert assign_day(ADMIT + timedelta(hours=24), ADMIT) == 2

    def test_pre_admission_out_of_window(self):
        assert assign_day(ADMIT - timedelta(seconds=1), ADMIT) is None

    def test_past_horizon_out_of_window(self):
        assert assign_day(ADMIT + timedelta(hours=8 * 24), ADMIT) is None
        assert assign_day(ADMIT + timedelta(hours=8 * 24) - timedelta(seconds=1), ADMIT) == 8

    @pytest.mark.parametrize("hours,day", [(0.5, 1), (25, 2), (47.9, 2), (48, 3), (167, 7)])
    def test_interior_days(self, hours, day):
        assert assign_day(ADMIT + timedelta(hours=hours), ADMIT) == day


class TestLoadNotes:
    def test_unknown_category_dropped_and_counted(self, tables):
        _, _, notes_csv = tables(
            [],
            notes=[(1, 1, "Discharge summary", ts(0, 1), "gone"), (1, 1, "ECG", ts(0, 1), "kept")],
        )
        notes, counters = load_notes(notes_csv)
        assert [n.category for n in notes] == [NoteCategory.ECG]
        assert counters["unknown_category"] == 1

    def test_blank_text_dropped_and_counted(self, tables):
        _, _, notes_csv = tables([], notes=[(1, 1, "ECG", ts(0, 1), "   ")])
        notes, counters = load_notes(notes_csv)
        assert notes == []
        assert counters["blank_text"] == 1

    def test_canonical_labels_map(self, tables):
        rows = [
            (1, 1, "Echo", ts(0, 1), "a"),
            (1, 1, "ECG", ts(0, 2), "b"),
            (1, 1, "Nursing", ts(0, 3), "c"),
            (1, 1, "Radiology", ts(0, 4), "d"),
            (1, 1, "Nursing/other", ts(0, 5), "e"),
        ]
        _, _, notes_csv = tables([], notes=rows)
        notes, _ = load_notes(notes_csv)
        assert [int(n.category) for n in notes] == [0, 1, 2, 3, 4]


class TestBuildGrid:
    def test_no_notes_all_empty(self, admission):
        grid = build_grid([], admission())
        assert len(grid.cells) == 5 * 8
        assert all(cell.fill is Fill.EMPTY for cell in grid.cells.values())

    def test_same_bucket_concatenated_in_time_order(self, admission):
        notes = [
            note(hours=5, text="second"),
            note(hours=1, text="first"),
        ]
        grid = build_grid(notes, admission())
        assert grid.cells[(NoteCategory.ECG, 1)].text == "first\n\nsecond"

    def test_single_note_day_three(self, admission):
        grid = build_grid([note(category=NoteCategory.NURSING, hours=2 * 24 + 3)], admission())
        for day in range(1, 9):
            cell = grid.cells[(NoteCategory.NURSING, day)]
            assert cell.fill is (Fill.ORIGINAL if day == 3 else Fill.EMPTY)

    def test_mismatched_hadm_rejected(self, admission):
        with pytest.raises(DataValidationError, match="hadm_id 2"):
            build_grid([note(hadm_id=2)], admission(hadm_id=1))

    def test_out_of_window_counted(self, admission):
        notes = [note(hours=-2), note(hours=1), note(hours=9 * 24)]
        grid = build_grid(notes, admission())
        assert grid.out_of_window == 2
        assert grid.original_count() == 1

    def test_note_count_conservation(self, admission):
        rng = np.random.default_rng(3)
        adm = admission()
        for _ in range(50):
            n = int(rng.integers(0, 40))
            notes = [
                note(
                    category=CATEGORIES[int(rng.integers(0, 5))],
                    hours=float(rng.uniform(-48, 12 * 24)),
                    text="x",
                )
                for _ in range(n)
            ]
            grid = build_grid(notes, adm)
            placed = sum(
                len(cell.text.split("\n\n")) for cell in grid.cells.values() if cell.fill is Fill.ORIGINAL
            )
            assert placed + grid.out_of_window == n


class TestForwardFill:
    def test_day_one_original_copies_forward(self, admission):
        grid = forward_fill(build_grid([note(hours=1, text="base")], admission()))
        for day in range(2, 9):
            cell = grid.cells[(NoteCategory.ECG, day)]
            assert cell.fill is Fill.COPIED
            assert cell.source_day == 1
            assert cell.text == "base"

    def test_leading_empty_days_stay_empty(self, admission):
        grid = forward_fill(build_grid([note(hours=2 * 24 + 1)], admission()))
        assert grid.cells[(NoteCategory.ECG, 1)].fill is Fill.EMPTY
        assert grid.cells[(NoteCategory.ECG, 2)].fill is Fill.EMPTY
        for day in range(4, 9):
            assert grid.cells[(NoteCategory.ECG, day)].source_day == 3

    def test_all_original_is_fixpoint(self, admission):
        notes = [note(hours=24.0 * d + 1, text=f"d{d}") for d in range(8)]
        grid = build_grid(notes, admission())
        assert forward_fill(grid) == grid

    def test_idempotent_on_random_grids(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            filled = forward_fill(random_grid(rng))
            assert forward_fill(filled) == filled

    def test_original_count_preserved(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            grid = random_grid(rng)
            assert forward_fill(grid).original_count() == grid.original_count()

    def test_cell_invariants_after_fill(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            filled = forward_fill(random_grid(rng))
            for category in CATEGORIES:
                seen_original = False
                seen_content = False
                for day in range(1, filled.horizon + 1):
                    cell = filled.cells[(category, day)]
                    if cell.fill is Fill.ORIGINAL:
                        assert cell.source_day == day
                        seen_original = True
                        seen_content = True
                    elif cell.fill is Fill.COPIED:
                        assert seen_original, "copy without an earlier original"
                        assert cell.source_day < day
                        assert cell.text
                        seen_content = True
                    else:
                        assert not seen_content, "empty cell after content"
                        assert cell.source_day is None
                        assert cell.text == ""


class TestExport:
    def test_single_original_single_line(self, admission):
        grid = build_grid([note(hours=1)], admission())
        buf = io.StringIO()
        assert export_buckets([grid], buf) == 1
        assert len(buf.getvalue().splitlines()) == 1

    def test_fully_empty_no_lines(self):
        buf = io.StringIO()
        assert export_buckets([empty_grid(1, 1)], buf) == 0
        assert buf.getvalue() == ""

    def test_multi_grid_key_order(self, admission):
        g1 = build_grid([note(hadm_id=3, hours=1), note(hadm_id=3, category=NoteCategory.ECHO, hours=30)], admission(hadm_id=3))
        g2 = empty_grid(2, 2)
        g3 = build_grid([note(hadm_id=1, category=NoteCategory.NURSING, hours=1)], admission(hadm_id=1))
        buf = io.StringIO()
        assert export_buckets([g1, g2, g3], buf) == 3
        import json

        keys = [
            (obj["hadm_id"], obj["category"], obj["day"])
            for obj in map(json.loads, buf.getvalue().splitlines())
        ]
        assert keys == [(1, "Nursing", 1), (3, "Echo", 2), (3, "ECG", 1)]

    def test_round_trip_preserves_originals(self, tmp_path):
        rng = np.random.default_rng(12)
        grids = [random_grid(rng, hadm_id=h) for h in range(1, 6)]
        path = tmp_path / "buckets.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            export_buckets(grids, fh)
        rebuilt = grids_from_bucket_lines(read_bucket_export(path))
        for grid in grids:
            if grid.original_count() == 0:
                assert grid.hadm_id not in rebuilt
                continue
            other = rebuilt[grid.hadm_id]
            assert other == grid

    def test_duplicate_key_rejected(self, tmp_path):
        line = '{"hadm_id": 1, "subject_id": 1, "category": "ECG", "day": 1, "text": "x"}\n'
        path = tmp_path / "dup.jsonl"
        path.write_text(line + line)
        with pytest.raises(DataValidationError, match="line 2"):
            read_bucket_export(path)

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"hadm_id": 1, "subject_id": 1, "category": "ECG", "day": 1, "text": "x"}\nnot json\n')
        with pytest.raises(DataValidationError, match="line 2"):
            read_bucket_export(path)

    def test_unknown_category_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"hadm_id": 1, "subject_id": 1, "category": "Consult", "day": 1, "text": "x"}\n')
        with pytest.raises(DataValidationError, match="line 1"):
            read_bucket_export(path)

    def test_day_outside_horizon_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"hadm_id": 1, "subject_id": 1, "category": "ECG", "day": 9, "text": "x"}\n')
        with pytest.raises(DataValidationError, match="day 9"):
            grids_from_bucket_lines(read_bucket_export(path))


def test_provenance_structure(admission):
    grid = forward_fill(build_grid([note(hours=1, text="base")], admission()))
    doc = provenance_to_dict([grid], {"unknown_category": 2})
    assert doc["horizon"] == 8
    assert doc["dropped"] == {"unknown_category": 2}
    (entry,) = doc["admissions"]
    ecg = entry["categories"]["ECG"]
    assert ecg[0] == {"fill": "original"}
    assert ecg[1] == {"fill": "copied", "source_day": 1}
    assert all(cell == {"fill": "empty"} for cell in entry["categories"]["Echo"])
