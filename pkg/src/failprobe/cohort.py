"""Cohort construction: admission ingestion, selection by ICD code and length of
stay, outcome labels, and readmission features from each subject's history."""
from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataValidationError
from .validation import (
    TIMESTAMP_FORMAT,
    parse_int,
    parse_utc_timestamp,
    require_columns,
    require_file,
)

SECONDS_PER_DAY = 86400.0
READMIT_WINDOW = timedelta(hours=30 * 24)

ADMISSIONS_COLUMNS = ("subject_id", "hadm_id", "admittime", "dischtime", "hospital_expire_flag")
DIAGNOSES_COLUMNS = ("subject_id", "hadm_id", "icd9_code")


class Label(str, Enum):
    SURVIVAL = "survival"
    DEATH = "death"


@dataclass(frozen=True)
class AdmissionRecord:
    """One hospital stay; the unit of classification."""

    subject_id: int
    hadm_id: int
    admit_time: datetime
    discharge_time: datetime
    death_in_hospital: bool
    icd_codes: frozenset[str]

    @property
    def los_days(self) -> float:
        return (self.discharge_time - self.admit_time).total_seconds() / SECONDS_PER_DAY


@dataclass(frozen=True)
class ReadmissionFeatures:
    is_readmission: bool
    future_readmission_count: int
    readmitted_within_30d: bool


@dataclass(frozen=True)
class CohortMember:
    admission: AdmissionRecord
    los_days: float
    label: Label
    readmission: ReadmissionFeatures

    @property
    def hadm_id(self) -> int:
        return self.admission.hadm_id


def load_admissions(admissions_csv: str | Path, diagnoses_csv: str | Path) -> list[AdmissionRecord]:
    """Read the admissions and diagnoses tables into one record per hadm_id.

    Diagnosis codes are merged per admission as a set of verbatim strings.
    Rows with unparseable timestamps or a discharge before the admission are
    rejected with the offending row number.
    """
    adm_path = require_file(admissions_csv)
    dx_path = require_file(diagnoses_csv)

    codes: dict[int, set[str]] = {}
    with open(dx_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        require_columns(reader.fieldnames, DIAGNOSES_COLUMNS, dx_path)
        for row_no, row in enumerate(reader, start=2):
            hadm = parse_int(row["hadm_id"], "hadm_id", path=dx_path, row=row_no)
            code = (row["icd9_code"] or "").strip()
            if code:
                codes.setdefault(hadm, set()).add(code)

    records: list[AdmissionRecord] = []
    seen: set[int] = set()
    with open(adm_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        require_columns(reader.fieldnames, ADMISSIONS_COLUMNS, adm_path)
        for row_no, row in enumerate(reader, start=2):
            hadm = parse_int(row["hadm_id"], "hadm_id", path=adm_path, row=row_no)
            if hadm in seen:
                raise DataValidationError(f"{adm_path}, row {row_no}: duplicate hadm_id {hadm}")
            seen.add(hadm)
            admit = parse_utc_timestamp(row["admittime"], path=adm_path, row=row_no)
            disch = parse_utc_timestamp(row["dischtime"], path=adm_path, row=row_no)
            if disch <= admit:
                raise DataValidationError(
                    f"{adm_path}, row {row_no}: discharge_time {row['dischtime']!r} "
                    f"is not after admit_time {row['admittime']!r}"
                )
            records.append(
                AdmissionRecord(
                    subject_id=parse_int(row["subject_id"], "subject_id", path=adm_path, row=row_no),
                    hadm_id=hadm,
                    admit_time=admit,
                    discharge_time=disch,
                    death_in_hospital=row["hospital_expire_flag"].strip() == "1",
                    icd_codes=frozenset(codes.get(hadm, set())),
                )
            )
    return records


def median_los(values: Iterable[float]) -> float:
    """Median with the even-count convention of averaging the central pair."""
    vals = list(values)
    if not vals:
        raise DataValidationError("median of an empty sequence")
    return float(statistics.median(vals))


def resolve_cutoff(admissions: Sequence[AdmissionRecord], icd_code: str, cutoff_days: float | None) -> float:
    """Cutoff in days: given explicitly, or the median stay of ICD-matched admissions."""
    if cutoff_days is not None:
        return float(cutoff_days)
    matched = [a.los_days for a in admissions if icd_code in a.icd_codes]
    if not matched:
        raise DataValidationError(f"no admission carries ICD code {icd_code!r}")
    return median_los(matched)


def readmission_features(history: Sequence[AdmissionRecord], index_hadm_id: int) -> ReadmissionFeatures:
    """Readmission features of one admission against the subject's full history.

    History order does not matter; a canonical sort by admit time is applied.
    The 30-day window runs from discharge to the next admission start, inclusive.
    """
    ordered = sorted(history, key=lambda a: (a.admit_time, a.hadm_id))
    index = next((a for a in ordered if a.hadm_id == index_hadm_id), None)
    if index is None:
        raise DataValidationError(f"hadm_id {index_hadm_id} not present in history")
    prior = any(a.admit_time < index.admit_time for a in ordered)
    future = [a for a in ordered if a.admit_time > index.discharge_time]
    within_30d = bool(future) and (future[0].admit_time - index.discharge_time) <= READMIT_WINDOW
    return ReadmissionFeatures(
        is_readmission=prior,
        future_readmission_count=len(future),
        readmitted_within_30d=within_30d,
    )


def select_cohort(
    admissions: Sequence[AdmissionRecord],
    icd_code: str,
    cutoff_days: float | None = None,
) -> list[CohortMember]:
    """Select admissions carrying `icd_code` whose stay is strictly above the cutoff.

    With `cutoff_days=None` the cutoff is the median stay over exactly the
    ICD-matched admissions. Readmission features are computed against the
    subject's complete admission history, including non-cohort admissions.
    """
    matched = [a for a in admissions if icd_code in a.icd_codes]
    if not matched:
        raise DataValidationError(f"no admission carries ICD code {icd_code!r}")
    cutoff = resolve_cutoff(admissions, icd_code, cutoff_days)

    by_subject: dict[int, list[AdmissionRecord]] = {}
    for a in admissions:
        by_subject.setdefault(a.subject_id, []).append(a)

    members = []
    for a in sorted(matched, key=lambda a: a.hadm_id):
        if a.los_days > cutoff:
            members.append(
                CohortMember(
                    admission=a,
                    los_days=a.los_days,
                    label=Label.DEATH if a.death_in_hospital else Label.SURVIVAL,
                    readmission=readmission_features(by_subject[a.subject_id], a.hadm_id),
                )
            )
    return members


def _format_ts(ts: datetime) -> str:
    return ts.strftime(TIMESTAMP_FORMAT)


def cohort_to_dict(members: Sequence[CohortMember], icd_code: str, cutoff: float) -> dict:
    survival = sum(1 for m in members if m.label is Label.SURVIVAL)
    return {
        "icd_code": icd_code,
        "cutoff_days": cutoff,
        "counts": {"members": len(members), "survival": survival, "death": len(members) - survival},
        "members": [
            {
                "subject_id": m.admission.subject_id,
                "hadm_id": m.admission.hadm_id,
                "admit_time": _format_ts(m.admission.admit_time),
                "discharge_time": _format_ts(m.admission.discharge_time),
                "death_in_hospital": m.admission.death_in_hospital,
                "icd_codes": sorted(m.admission.icd_codes),
                "los_days": m.los_days,
                "label": m.label.value,
                "readmission": {
                    "is_readmission": m.readmission.is_readmission,
                    "future_readmission_count": m.readmission.future_readmission_count,
                    "readmitted_within_30d": m.readmission.readmitted_within_30d,
                },
            }
            for m in members
        ],
    }


def write_cohort(members: Sequence[CohortMember], icd_code: str, cutoff: float, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cohort_to_dict(members, icd_code, cutoff), fh, indent=2)
        fh.write("\n")


def read_cohort(path: str | Path) -> tuple[dict, list[CohortMember]]:
    """Load a cohort JSON document back into members plus its header fields."""
    with open(require_file(path), encoding="utf-8") as fh:
        doc = json.load(fh)
    members = []
    for m in doc["members"]:
        admission = AdmissionRecord(
            subject_id=int(m["subject_id"]),
            hadm_id=int(m["hadm_id"]),
            admit_time=parse_utc_timestamp(m["admit_time"], path=path),
            discharge_time=parse_utc_timestamp(m["discharge_time"], path=path),
            death_in_hospital=bool(m["death_in_hospital"]),
            icd_codes=frozenset(m["icd_codes"]),
        )
        members.append(
            CohortMember(
                admission=admission,
                los_days=float(m["los_days"]),
                label=Label(m["label"]),
                readmission=ReadmissionFeatures(
                    is_readmission=bool(m["readmission"]["is_readmission"]),
                    future_readmission_count=int(m["readmission"]["future_readmission_count"]),
                    readmitted_within_30d=bool(m["readmission"]["readmitted_within_30d"]),
                ),
            )
        )
    meta = {k: doc[k] for k in ("icd_code", "cutoff_days", "counts")}
    return meta, members
