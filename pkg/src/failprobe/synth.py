"""Synthetic benchmark generator with planted confounders.

Emits admissions/diagnoses/notes CSVs, an embedding store from a generative
cluster model, and a manifest of ground truth. A chosen fraction of survivors
is planted with death-like embedding signal plus elevated readmission features
(10x readmission rate, 8x 30-day readmission rate, 1.5x future readmissions,
1.35x stay length against the rest of the cohort), so a correct pipeline must
rediscover them as the consistently misclassified subgroup.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .bucketing import CANONICAL_LABELS, CATEGORIES, NoteCategory
from .store import write_store
from .validation import TIMESTAMP_FORMAT

BASE_ADMIT = datetime(2130, 1, 1, 12, 0, 0, tzinfo=timezone.utc)
INDEX_HADM_BASE = 100000
EXTRA_HADM_BASE = 500000
EXTRA_ICD = "428.0"
POOL_SIZE = 15

# Group rates chosen so subgroup-vs-rest ratios land on the planted targets.
RATE_PRIOR = {"planted": 0.50, "rest": 0.05}
RATE_30D = {"planted": 0.24, "rest": 0.03}
FUTURE_MEAN = {"planted": 0.60, "rest": 0.40}
LOS_RANGE_DAYS = (9.0, 16.0)
LOS_PLANTED_FACTOR = 1.35

NOISE_SCALE = 0.4
NURSING_SHIFT = 0.8
NURSING_LATE_START = 5
P_NOTE = 0.5
P_NURSING_LATE_PLANTED = 0.9
P_NURSING_LATE_OTHER = 0.4
P_SECOND_NOTE = 0.2

_WORDS = (
    "stable improving guarded labile afebrile tachycardic hypotensive alert oriented "
    "drowsy edema effusion infiltrate consolidation ischemia perfusion rhythm sinus "
    "ectopy murmur gallop rales wheezing diminished bilateral proximal distal acute "
    "chronic resolving worsening baseline elevated depressed irregular regular faint "
    "pronounced intermittent persistent transient"
).split()


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SynthConfig:
    size: int = 400
    death_fraction: float = 0.15
    planted_fraction: float = 0.25
    dim: int = 16
    horizon: int = 8
    seed: int = 0
    icd_code: str = "410.71"

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"size must be >= 2, got {self.size}")
        if not 0.0 <= self.death_fraction < 1.0:
            raise ValueError(f"death_fraction must be in [0, 1), got {self.death_fraction}")
        if not 0.0 <= self.planted_fraction <= 1.0:
            raise ValueError(f"planted_fraction must be in [0, 1], got {self.planted_fraction}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")


@dataclass
class _Member:
    index: int
    subject_id: int
    hadm_id: int
    role: str  # "death", "planted", "normal"
    admit: datetime
    los_days: float

    @property
    def discharge(self) -> datetime:
        return self.admit + timedelta(seconds=round(self.los_days * 86400))

    @property
    def deathlike(self) -> bool:
        return self.role in ("death", "planted")


def _quota_pick(indices: list[int], rate: float, rng: np.random.Generator) -> set[int]:
    """Exactly round(rate * n) members, chosen by seeded shuffle. Exact quotas
    keep the planted ratios deterministic instead of Bernoulli-noisy."""
    k = round_half_up(rate * len(indices))
    order = rng.permutation(len(indices))
    return {indices[j] for j in order[:k]}


def _future_counts(
    indices: list[int], mean: float, within_30d: set[int], rng: np.random.Generator
) -> dict[int, int]:
    """Per-member future admission counts hitting the group mean exactly, with
    every 30-day readmission owning at least one future admission."""
    counts = {i: (1 if i in within_30d else 0) for i in indices}
    remaining = round_half_up(mean * len(indices)) - sum(counts.values())
    order = [indices[j] for j in rng.permutation(len(indices))]
    for i in [i for i in order if counts[i] == 0]:
        if remaining <= 0:
            break
        counts[i] = 1
        remaining -= 1
    pos = 0
    while remaining > 0 and order:
        counts[order[pos % len(order)]] += 1
        remaining -= 1
        pos += 1
    return counts


def _text_pools(rng: np.random.Generator) -> dict[tuple[bool, NoteCategory], list[str]]:
    pools: dict[tuple[bool, NoteCategory], list[str]] = {}
    for deathlike in (False, True):
        for category in CATEGORIES:
            style = "pattern-b" if deathlike else "pattern-a"
            pool = []
            for j in range(POOL_SIZE):
                words = " ".join(rng.choice(_WORDS, size=8))
                pool.append(f"{CANONICAL_LABELS[category]} {style} {j}: patient {words}.")
            pools[(deathlike, category)] = pool
    return pools


def _fmt(ts: datetime) -> str:
    return ts.strftime(TIMESTAMP_FORMAT)


def generate(config: SynthConfig, out_dir: str | Path) -> dict:
    """Write the benchmark files into out_dir and return the manifest.

    Byte-for-byte reproducible for a given config: one seeded generator is
    consumed in a fixed member/category/day order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)

    n_death = round_half_up(config.size * config.death_fraction)
    n_surv = config.size - n_death
    n_planted = round_half_up(config.planted_fraction * n_surv)

    order = rng.permutation(config.size)
    roles = ["normal"] * config.size
    for j in order[:n_death]:
        roles[j] = "death"
    for j in order[n_death : n_death + n_planted]:
        roles[j] = "planted"

    members: list[_Member] = []
    for i in range(config.size):
        lo, hi = LOS_RANGE_DAYS
        los = float(rng.uniform(lo, hi))
        if roles[i] == "planted":
            los *= LOS_PLANTED_FACTOR
        members.append(
            _Member(
                index=i,
                subject_id=1000 + i,
                hadm_id=INDEX_HADM_BASE + i,
                role=roles[i],
                admit=BASE_ADMIT + timedelta(days=i, hours=int(rng.integers(0, 24))),
                los_days=los,
            )
        )

    planted_idx = [m.index for m in members if m.role == "planted"]
    rest_idx = [m.index for m in members if m.role != "planted"]
    prior_set: set[int] = set()
    within_30d: set[int] = set()
    future_counts: dict[int, int] = {}
    quotas: dict[str, dict[str, int]] = {}
    for group, indices in (("planted", planted_idx), ("rest", rest_idx)):
        if not indices:
            quotas[group] = {"size": 0, "is_readmission": 0, "readmit_30d": 0, "future_total": 0}
            continue
        picked_prior = _quota_pick(indices, RATE_PRIOR[group], rng)
        picked_30d = _quota_pick(indices, RATE_30D[group], rng)
        counts = _future_counts(indices, FUTURE_MEAN[group], picked_30d, rng)
        prior_set |= picked_prior
        within_30d |= picked_30d
        future_counts.update(counts)
        quotas[group] = {
            "size": len(indices),
            "is_readmission": len(picked_prior),
            "readmit_30d": len(picked_30d),
            "future_total": sum(counts.values()),
        }

    # Extra (non-cohort) admissions realizing the readmission structure.
    admissions_rows: list[tuple[int, int, str, str, int]] = []
    diagnoses_rows: list[tuple[int, int, str]] = []
    extra_counter = 0
    for m in members:
        admissions_rows.append((m.subject_id, m.hadm_id, _fmt(m.admit), _fmt(m.discharge), 1 if m.role == "death" else 0))
        diagnoses_rows.append((m.subject_id, m.hadm_id, config.icd_code))
        extras: list[tuple[datetime, float]] = []
        if m.index in prior_set:
            gap = timedelta(seconds=int(rng.uniform(40, 90) * 86400))
            extras.append((m.admit - gap, float(rng.uniform(2, 5))))
        n_future = future_counts.get(m.index, 0)
        offset = timedelta(0)
        for k in range(n_future):
            if k == 0 and m.index in within_30d:
                offset = timedelta(seconds=int(rng.uniform(2, 28) * 86400))
            else:
                offset += timedelta(seconds=int(rng.uniform(35, 90) * 86400))
            extras.append((m.discharge + offset, float(rng.uniform(2, 5))))
        for admit, los in extras:
            hadm = EXTRA_HADM_BASE + extra_counter
            extra_counter += 1
            discharge = admit + timedelta(seconds=round(los * 86400))
            admissions_rows.append((m.subject_id, hadm, _fmt(admit), _fmt(discharge), 0))
            diagnoses_rows.append((m.subject_id, hadm, EXTRA_ICD))

    # Note placement shared by notes.csv and the store, so original buckets and
    # store keys coincide exactly.
    pools = _text_pools(rng)
    presence: dict[int, list[tuple[NoteCategory, int]]] = {}
    for m in members:
        cells = []
        for category in CATEGORIES:
            for day in range(1, config.horizon + 1):
                if day == 1:
                    present = True
                elif category is NoteCategory.NURSING and day >= NURSING_LATE_START:
                    p = P_NURSING_LATE_PLANTED if m.role == "planted" else P_NURSING_LATE_OTHER
                    present = rng.random() < p
                else:
                    present = rng.random() < P_NOTE
                if present:
                    cells.append((category, day))
        presence[m.index] = cells

    notes_rows: list[tuple[int, int, str, str, str]] = []
    for m in members:
        for category, day in presence[m.index]:
            n_notes = 2 if rng.random() < P_SECOND_NOTE else 1
            hours = np.sort(rng.uniform(0.5, 23.5, size=n_notes))
            pool = pools[(m.deathlike, category)]
            for h in hours:
                chart = m.admit + timedelta(days=day - 1) + timedelta(seconds=int(h * 3600))
                text = pool[int(rng.integers(0, POOL_SIZE))]
                notes_rows.append((m.subject_id, m.hadm_id, CANONICAL_LABELS[category], _fmt(chart), text))

    # Cluster model: orthonormal survival/death centroids plus a third
    # direction that shifts planted late-stay nursing buckets away from both.
    basis, _ = np.linalg.qr(rng.standard_normal((config.dim, 3))) if config.dim >= 3 else (None, None)
    if basis is None:
        raw = rng.standard_normal((config.dim, 3))
        basis = raw / np.linalg.norm(raw, axis=0)
    mu_surv, mu_death, shift_dir = basis[:, 0], basis[:, 1], basis[:, 2]
    entries = {}
    for m in members:
        for category, day in presence[m.index]:
            center = mu_death if m.deathlike else mu_surv
            if m.role == "planted" and category is NoteCategory.NURSING and day >= NURSING_LATE_START:
                center = center + NURSING_SHIFT * shift_dir
            noise = rng.standard_normal(config.dim) * (NOISE_SCALE / math.sqrt(config.dim))
            entries[(m.hadm_id, int(category), day)] = (center + noise).astype(np.float32)

    _write_csv(out / "admissions.csv", ("subject_id", "hadm_id", "admittime", "dischtime", "hospital_expire_flag"), sorted(admissions_rows, key=lambda r: r[1]))
    _write_csv(out / "diagnoses.csv", ("subject_id", "hadm_id", "icd9_code"), sorted(diagnoses_rows, key=lambda r: (r[1], r[2])))
    _write_csv(out / "notes.csv", ("subject_id", "hadm_id", "category", "charttime", "text"), notes_rows)
    write_store(entries, config.dim, out / "store.ehre")

    manifest = {
        "generator": {
            "size": config.size,
            "death_fraction": config.death_fraction,
            "planted_fraction": config.planted_fraction,
            "dim": config.dim,
            "horizon": config.horizon,
            "seed": config.seed,
            "icd_code": config.icd_code,
        },
        "counts": {
            "members": config.size,
            "death": n_death,
            "survival": n_surv,
            "planted": n_planted,
        },
        "planted_hadm_ids": sorted(INDEX_HADM_BASE + i for i in planted_idx),
        "quotas": quotas,
        "target_ratios": {
            "is_readmission": 10.0,
            "readmit_30d": 8.0,
            "future_readmissions": 1.5,
            "los": LOS_PLANTED_FACTOR,
        },
        "recommended_cohort": {"icd_code": config.icd_code, "los_cutoff_days": 8.0},
        "files": {
            "admissions": "admissions.csv",
            "diagnoses": "diagnoses.csv",
            "notes": "notes.csv",
            "store": "store.ehre",
        },
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def _write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
