"""Post-hoc failure analysis of the prediction log: per-admission correct
rates, class-conditional histograms, extraction of the consistently
misclassified survivor subgroup, and confounder ratio statistics."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bucketing import CANONICAL_LABELS, CATEGORIES, BucketGrid, Fill, NoteCategory
from .cohort import CohortMember, Label
from .errors import DataValidationError
from .harness import PredictionRecord
from .store import EmbeddingStore

HISTOGRAM_BINS = 10


@dataclass(frozen=True)
class PatientProfile:
    """How one admission fared across its test-set appearances."""

    hadm_id: int
    true_label: Label
    appearances: int
    correct: int
    mean_p_death: float

    @property
    def correct_rate(self) -> float:
        return self.correct / self.appearances


@dataclass(frozen=True)
class HistogramBin:
    low: float
    high: float
    count: int
    percent: float


@dataclass(frozen=True)
class ClassHistogram:
    label: Label
    class_count: int
    bins: tuple[HistogramBin, ...]


@dataclass(frozen=True)
class DistinctnessResult:
    subgroup_mean: float | None
    complement_mean: float | None
    excluded_subgroup: int
    excluded_complement: int


@dataclass
class SubgroupReport:
    subgroup_size: int
    subgroup_fraction_of_class: float
    ratio_is_readmission: float | None
    ratio_future_readmissions: float | None
    ratio_readmit_30d: float | None
    ratio_los: float | None
    group_stats: dict
    note_counts: dict
    nursing_distinctness: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "subgroup_size": self.subgroup_size,
            "subgroup_fraction_of_class": self.subgroup_fraction_of_class,
            "ratio_is_readmission": self.ratio_is_readmission,
            "ratio_future_readmissions": self.ratio_future_readmissions,
            "ratio_readmit_30d": self.ratio_readmit_30d,
            "ratio_los": self.ratio_los,
            "group_stats": self.group_stats,
            "note_counts": self.note_counts,
            "nursing_distinctness": self.nursing_distinctness,
        }


def build_profiles(records: Iterable[PredictionRecord], horizon: int) -> list[PatientProfile]:
    """Per-admission appearance/correct counts and mean death probability at one
    horizon. Admissions never drawn into a test set simply do not appear."""
    appearances: dict[int, int] = {}
    correct: dict[int, int] = {}
    p_sum: dict[int, float] = {}
    labels: dict[int, Label] = {}
    for r in records:
        if r.horizon != horizon:
            continue
        h = r.hadm_id
        if h in labels and labels[h] is not r.true_label:
            raise DataValidationError(f"hadm {h} appears with conflicting true labels")
        labels[h] = r.true_label
        appearances[h] = appearances.get(h, 0) + 1
        correct[h] = correct.get(h, 0) + (1 if r.pred_label is r.true_label else 0)
        p_sum[h] = p_sum.get(h, 0.0) + r.p_death
    if not labels:
        raise ValueError(f"no records at horizon {horizon}")
    return [
        PatientProfile(
            hadm_id=h,
            true_label=labels[h],
            appearances=appearances[h],
            correct=correct[h],
            mean_p_death=p_sum[h] / appearances[h],
        )
        for h in sorted(labels)
    ]


def _bin_index(profile: PatientProfile) -> int:
    # Integer arithmetic: bin b covers [b/10, (b+1)/10), last bin closed at 1.
    return min(HISTOGRAM_BINS * profile.correct // profile.appearances, HISTOGRAM_BINS - 1)


def histogram(profiles: Sequence[PatientProfile], label: Label) -> ClassHistogram:
    """Ten width-0.1 bins over correct rates, as percentages of the class."""
    of_class = [p for p in profiles if p.true_label is label]
    if not of_class:
        raise ValueError(f"no profiles with label {label.value}")
    counts = [0] * HISTOGRAM_BINS
    for p in of_class:
        counts[_bin_index(p)] += 1
    n = len(of_class)
    bins = tuple(
        HistogramBin(low=b / 10, high=(b + 1) / 10, count=counts[b], percent=100.0 * counts[b] / n)
        for b in range(HISTOGRAM_BINS)
    )
    return ClassHistogram(label=label, class_count=n, bins=bins)


def failure_subgroup(
    profiles: Sequence[PatientProfile],
    label: Label = Label.SURVIVAL,
    max_rate: float = 0.1,
    min_appearances: int = 5,
) -> list[int]:
    """Admissions of the class whose correct rate stays below `max_rate` over at
    least `min_appearances` test appearances; sorted hadm ids."""
    return sorted(
        p.hadm_id
        for p in profiles
        if p.true_label is label and p.appearances >= min_appearances and p.correct_rate < max_rate
    )


def _rate_ratio(subgroup_value: float, complement_value: float) -> float | None:
    return None if complement_value == 0 else subgroup_value / complement_value


def _group_stats(members: Sequence[CohortMember]) -> dict:
    n = len(members)
    return {
        "size": n,
        "is_readmission_rate": sum(m.readmission.is_readmission for m in members) / n,
        "future_readmissions_mean": sum(m.readmission.future_readmission_count for m in members) / n,
        "readmit_30d_rate": sum(m.readmission.readmitted_within_30d for m in members) / n,
        "los_mean": sum(m.los_days for m in members) / n,
    }


def _original_counts(grid: BucketGrid | None, category: NoteCategory, days: Sequence[int]) -> int:
    if grid is None:
        return 0
    return sum(1 for d in days if grid.cells[(category, d)].fill is Fill.ORIGINAL)


def subgroup_ratios(
    subgroup_ids: Sequence[int],
    complement_ids: Sequence[int],
    members: Mapping[int, CohortMember],
    grids: Mapping[int, BucketGrid],
    phases: Mapping[str, Sequence[int]],
    class_size: int | None = None,
) -> SubgroupReport:
    """Confounder ratios of the failure subgroup against the rest of the cohort.

    Readmission flags are compared as rates, future readmissions and length of
    stay as means; per category and stay phase, the mean number of days with
    original notes. Ratios with a zero complement side are None.
    """
    if not subgroup_ids or not complement_ids:
        raise DataValidationError("subgroup and complement must both be non-empty")
    sub = [members[h] for h in subgroup_ids]
    comp = [members[h] for h in complement_ids]
    sub_stats = _group_stats(sub)
    comp_stats = _group_stats(comp)

    note_counts: dict = {}
    for phase_name, days in phases.items():
        per_category = {}
        for category in CATEGORIES:
            sub_mean = sum(_original_counts(grids.get(h), category, days) for h in subgroup_ids) / len(sub)
            comp_mean = sum(_original_counts(grids.get(h), category, days) for h in complement_ids) / len(comp)
            per_category[CANONICAL_LABELS[category]] = {
                "subgroup_mean": sub_mean,
                "complement_mean": comp_mean,
                "ratio": _rate_ratio(sub_mean, comp_mean),
            }
        note_counts[phase_name] = per_category

    return SubgroupReport(
        subgroup_size=len(sub),
        subgroup_fraction_of_class=len(sub) / class_size if class_size else float("nan"),
        ratio_is_readmission=_rate_ratio(sub_stats["is_readmission_rate"], comp_stats["is_readmission_rate"]),
        ratio_future_readmissions=_rate_ratio(
            sub_stats["future_readmissions_mean"], comp_stats["future_readmissions_mean"]
        ),
        ratio_readmit_30d=_rate_ratio(sub_stats["readmit_30d_rate"], comp_stats["readmit_30d_rate"]),
        ratio_los=_rate_ratio(sub_stats["los_mean"], comp_stats["los_mean"]),
        group_stats={"subgroup": sub_stats, "complement": comp_stats},
        note_counts=note_counts,
    )


def _nursing_vectors(
    hadm_id: int,
    grids: Mapping[int, BucketGrid],
    store: EmbeddingStore,
    phase_days: Sequence[int],
) -> list[np.ndarray]:
    grid = grids.get(hadm_id)
    if grid is None:
        return []
    vectors = []
    for day in phase_days:
        if grid.cells[(NoteCategory.NURSING, day)].fill is Fill.ORIGINAL:
            vec = store.get((hadm_id, int(NoteCategory.NURSING), day))
            if vec is not None:
                vectors.append(np.asarray(vec, dtype=np.float64))
    return vectors


def _mean_cosine_distance(vectors: Sequence[np.ndarray], centroid: np.ndarray) -> float | None:
    c_norm = np.linalg.norm(centroid)
    distances = []
    for v in vectors:
        v_norm = np.linalg.norm(v)
        if v_norm == 0.0 or c_norm == 0.0:
            continue
        distances.append(1.0 - float(v @ centroid) / (v_norm * c_norm))
    if not distances:
        return None
    return float(np.mean(distances))


def nursing_distinctness(
    subgroup_ids: Sequence[int],
    complement_ids: Sequence[int],
    labels: Mapping[int, Label],
    store: EmbeddingStore,
    grids: Mapping[int, BucketGrid],
    phase_days: Sequence[int],
) -> DistinctnessResult:
    """Mean cosine distance of each group's original nursing bucket embeddings
    to the survivor nursing centroid over the given stay days.

    Admissions without original nursing buckets in the phase are excluded and
    counted. Raises if the phase has no original nursing buckets at all.
    """
    survivor_ids = sorted(h for h, lab in labels.items() if lab is Label.SURVIVAL)
    centroid_vectors = []
    for h in survivor_ids:
        centroid_vectors.extend(_nursing_vectors(h, grids, store, phase_days))
    if not centroid_vectors:
        raise DataValidationError(f"no original nursing buckets on days {list(phase_days)}")
    centroid = np.mean(np.stack(centroid_vectors), axis=0)

    def group_mean(ids: Sequence[int]) -> tuple[float | None, int]:
        per_admission = []
        excluded = 0
        for h in sorted(ids):
            mean_dist = _mean_cosine_distance(_nursing_vectors(h, grids, store, phase_days), centroid)
            if mean_dist is None:
                excluded += 1
            else:
                per_admission.append(mean_dist)
        return (float(np.mean(per_admission)) if per_admission else None), excluded

    sub_mean, sub_excluded = group_mean(subgroup_ids)
    comp_mean, comp_excluded = group_mean(complement_ids)
    return DistinctnessResult(
        subgroup_mean=sub_mean,
        complement_mean=comp_mean,
        excluded_subgroup=sub_excluded,
        excluded_complement=comp_excluded,
    )


def stay_phases(phase_split: int, horizon: int) -> dict[str, list[int]]:
    """Early/late day ranges split after `phase_split` (early 1..split)."""
    if not 1 <= phase_split < horizon:
        raise ValueError(f"phase split {phase_split} outside 1..{horizon - 1}")
    return {
        "early": list(range(1, phase_split + 1)),
        "late": list(range(phase_split + 1, horizon + 1)),
    }


def _histogram_dict(h: ClassHistogram) -> list[dict]:
    return [
        {"low": b.low, "high": b.high, "count": b.count, "percent": b.percent} for b in h.bins
    ]


def build_analysis(
    records: Sequence[PredictionRecord],
    horizon: int,
    members: Mapping[int, CohortMember],
    grids: Mapping[int, BucketGrid],
    store: EmbeddingStore,
    max_rate: float = 0.1,
    min_appearances: int = 5,
    phase_split: int = 4,
    grid_horizon: int = 8,
    all_horizons: bool = False,
) -> dict:
    """Assemble the full analysis document: histograms, subgroup membership,
    and the confounder report with nursing distinctness per stay phase."""
    profiles = build_profiles(records, horizon)
    profiled = {p.hadm_id for p in profiles}
    excluded = sorted(set(members) - profiled)

    histograms: dict = {}
    for label in (Label.SURVIVAL, Label.DEATH):
        if any(p.true_label is label for p in profiles):
            histograms[label.value] = _histogram_dict(histogram(profiles, label))

    subgroup = failure_subgroup(profiles, Label.SURVIVAL, max_rate, min_appearances)
    complement = sorted(set(members) - set(subgroup))
    class_size = sum(1 for m in members.values() if m.label is Label.SURVIVAL)

    doc: dict = {
        "horizon": horizon,
        "profiles": {"count": len(profiles), "excluded_never_tested": excluded},
        "histograms": histograms,
        "subgroup": {
            "class": Label.SURVIVAL.value,
            "max_rate": max_rate,
            "min_appearances": min_appearances,
            "size": len(subgroup),
            "hadm_ids": subgroup,
        },
    }

    if subgroup and complement:
        phases = stay_phases(phase_split, grid_horizon)
        report = subgroup_ratios(subgroup, complement, members, grids, phases, class_size)
        labels = {h: m.label for h, m in members.items()}
        for phase_name, days in phases.items():
            try:
                d = nursing_distinctness(subgroup, complement, labels, store, grids, days)
            except DataValidationError:
                report.nursing_distinctness[phase_name] = None
                continue
            report.nursing_distinctness[phase_name] = {
                "subgroup_mean": d.subgroup_mean,
                "complement_mean": d.complement_mean,
                "excluded": {"subgroup": d.excluded_subgroup, "complement": d.excluded_complement},
            }
        doc["report"] = report.as_dict()
    else:
        doc["report"] = None

    if all_horizons:
        per_horizon: dict = {}
        for h in sorted({r.horizon for r in records}):
            h_profiles = build_profiles(records, h)
            per_horizon[str(h)] = {
                label.value: _histogram_dict(histogram(h_profiles, label))
                for label in (Label.SURVIVAL, Label.DEATH)
                if any(p.true_label is label for p in h_profiles)
            }
        doc["histograms_by_horizon"] = per_horizon
    return doc


def write_analysis(doc: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_histogram_csv(doc: dict, path: str | Path) -> None:
    """Flat per-class bin rows for plotting: class,bin_low,bin_high,percent."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class", "bin_low", "bin_high", "percent"])
        for label in (Label.SURVIVAL.value, Label.DEATH.value):
            for b in doc["histograms"].get(label, []):
                writer.writerow([label, b["low"], b["high"], f"{b['percent']:.9g}"])
