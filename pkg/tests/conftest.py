"""Shared fixtures: tiny CSV tables and admission records used across the suite."""
from __future__ import annotations

import csv
from datetime import datetime, timezone

import pytest

from failprobe.cohort import AdmissionRecord

ADMISSIONS_HEADER = ("subject_id", "hadm_id", "admittime", "dischtime", "hospital_expire_flag")
DIAGNOSES_HEADER = ("subject_id", "hadm_id", "icd9_code")
NOTES_HEADER = ("subject_id", "hadm_id", "category", "charttime", "text")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def ts(day: float, hour: float = 0.0) -> str:
    """Timestamp `day` days and `hour` hours after 2130-01-01 00:00:00."""
    base = datetime(2130, 1, 1, tzinfo=timezone.utc).timestamp()
    stamp = datetime.fromtimestamp(base + day * 86400 + hour * 3600, tz=timezone.utc)
    return stamp.strftime("%Y-%m-%d %H:%M:%S")


@pytest.fixture
def tables(tmp_path):
    """Write admissions/diagnoses/notes CSVs into tmp_path and return the paths."""

    def build(admissions, diagnoses=(), notes=()):
        return (
            write_csv(tmp_path / "admissions.csv", ADMISSIONS_HEADER, admissions),
            write_csv(tmp_path / "diagnoses.csv", DIAGNOSES_HEADER, diagnoses),
            write_csv(tmp_path / "notes.csv", NOTES_HEADER, notes),
        )

    return build


@pytest.fixture
def admission():
    """Build an AdmissionRecord with compact day-offset timestamps."""

    def build(hadm_id=1, subject_id=1, admit_day=0.0, discharge_day=10.0, death=False, icd=("410.71",)):
        base = datetime(2130, 1, 1, tzinfo=timezone.utc)
        epoch = base.timestamp()
        return AdmissionRecord(
            subject_id=subject_id,
            hadm_id=hadm_id,
            admit_time=datetime.fromtimestamp(epoch + admit_day * 86400, tz=timezone.utc),
            discharge_time=datetime.fromtimestamp(epoch + discharge_day * 86400, tz=timezone.utc),
            death_in_hospital=death,
            icd_codes=frozenset(icd),
        )

    return build
