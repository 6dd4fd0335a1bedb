"""Repeated-holdout protocol: per repetition one unstratified split shared by
every horizon, 1:1 balanced training, and aggregation of all test predictions
into per-horizon confusion matrices."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cohort import Label
from .errors import DataValidationError, MissingClassError
from .head import TrainConfig, init_head, sigmoid, train
from .validation import require_file

log = logging.getLogger(__name__)

PREDICTION_LOG_HEADER = ("rep", "horizon", "hadm_id", "true_label", "p_death", "pred_label")

_MAX_SPLIT_REDRAWS = 1000


def mix64(*parts: int) -> int:
    """Stable 64-bit mix of integer parts; identical on every platform and run,
    so derived seeds never depend on execution order."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(struct.pack("<Q", part & 0xFFFFFFFFFFFFFFFF))
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class ExperimentConfig:
    repetitions: int = 100
    test_fraction: float = 0.25
    horizons: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    balance: str = "undersample"  # "undersample" or "oversample"
    train: TrainConfig = field(default_factory=TrainConfig)
    master_seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ValueError(f"horizons must be a non-empty set of days >= 1, got {self.horizons}")
        if self.balance not in ("undersample", "oversample"):
            raise ValueError(f"balance must be 'undersample' or 'oversample', got {self.balance!r}")


@dataclass(frozen=True)
class PredictionRecord:
    rep: int
    horizon: int
    hadm_id: int
    true_label: Label
    p_death: float
    pred_label: Label


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts keyed predicted class then true class, death being positive."""

    pred_survival_true_survival: int = 0
    pred_survival_true_death: int = 0
    pred_death_true_survival: int = 0
    pred_death_true_death: int = 0

    @property
    def total(self) -> int:
        return (
            self.pred_survival_true_survival
            + self.pred_survival_true_death
            + self.pred_death_true_survival
            + self.pred_death_true_death
        )

    @property
    def true_survival_total(self) -> int:
        return self.pred_survival_true_survival + self.pred_death_true_survival

    @property
    def true_death_total(self) -> int:
        return self.pred_survival_true_death + self.pred_death_true_death

    def as_dict(self) -> dict:
        return {
            "pred_survival_true_survival": self.pred_survival_true_survival,
            "pred_survival_true_death": self.pred_survival_true_death,
            "pred_death_true_survival": self.pred_death_true_survival,
            "pred_death_true_death": self.pred_death_true_death,
        }


def split(n_members: int, test_fraction: float, rep_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform unstratified holdout of ceil(test_fraction * n) members.

    Returns sorted (train, test) index arrays; deterministic given rep_seed.
    """
    if n_members < 1:
        raise ValueError("empty cohort")
    n_test = math.ceil(test_fraction * n_members)
    if n_test == 0 or n_test == n_members:
        raise ValueError(
            f"test size {n_test} of {n_members} leaves no usable split at fraction {test_fraction}"
        )
    rng = np.random.default_rng(rep_seed)
    test = np.sort(rng.choice(n_members, size=n_test, replace=False))
    mask = np.ones(n_members, dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask), test


def balance_train(train_idx: np.ndarray, y: np.ndarray, rep_seed: int, mode: str = "undersample") -> np.ndarray:
    """Equalize class counts: undersample the majority without replacement, or
    oversample the minority with replacement. Deterministic given rep_seed."""
    train_idx = np.asarray(train_idx)
    zeros = train_idx[y[train_idx] == 0]
    ones = train_idx[y[train_idx] == 1]
    if len(zeros) == 0 or len(ones) == 0:
        raise MissingClassError("train split contains a single outcome class")
    minority, majority = (zeros, ones) if len(zeros) <= len(ones) else (ones, zeros)
    rng = np.random.default_rng(rep_seed)
    if mode == "undersample":
        kept = rng.choice(majority, size=len(minority), replace=False)
        balanced = np.concatenate([minority, kept])
    elif mode == "oversample":
        drawn = rng.choice(minority, size=len(majority), replace=True)
        balanced = np.concatenate([majority, drawn])
    else:
        raise ValueError(f"unknown balance mode {mode!r}")
    return np.sort(balanced)


def _draw_split(n_members: int, y: np.ndarray, config: ExperimentConfig, rep_seed: int):
    """Split plus balanced train set, redrawing with seed offsets if a class is
    missing from the train side."""
    for offset in range(_MAX_SPLIT_REDRAWS):
        seed = rep_seed + offset
        train_idx, test_idx = split(n_members, config.test_fraction, seed)
        try:
            balanced = balance_train(train_idx, y, seed, config.balance)
        except MissingClassError:
            log.warning("redrawing split (seed offset %d): one class missing from train", offset + 1)
            continue
        return train_idx, test_idx, balanced
    raise MissingClassError(f"no usable split after {_MAX_SPLIT_REDRAWS} redraws")


def run_repetition(
    rep_id: int,
    hadm_ids: Sequence[int],
    y: np.ndarray,
    X_full: np.ndarray,
    day_block: int,
    config: ExperimentConfig,
) -> list[PredictionRecord]:
    """One repetition: a single split shared across horizons, then per horizon a
    balanced train run and predictions over every test member."""
    rep_seed = mix64(config.master_seed, rep_id)
    _, test_idx, balanced = _draw_split(len(hadm_ids), y, config, rep_seed)

    records: list[PredictionRecord] = []
    y_bal = y[balanced]
    for horizon in config.horizons:
        cols = horizon * day_block
        if cols > X_full.shape[1]:
            raise ValueError(f"horizon {horizon} needs {cols} feature columns, have {X_full.shape[1]}")
        head_config = replace(config.train, seed=mix64(config.master_seed, rep_id, horizon))
        head = init_head(cols, head_config)
        head, _ = train(head, X_full[balanced, :cols].astype(np.float64), y_bal, head_config)
        p = sigmoid(X_full[test_idx, :cols].astype(np.float64) @ head.weights + head.bias)
        for i, idx in enumerate(test_idx):
            p_death = float(p[i])
            records.append(
                PredictionRecord(
                    rep=rep_id,
                    horizon=horizon,
                    hadm_id=int(hadm_ids[idx]),
                    true_label=Label.DEATH if y[idx] == 1 else Label.SURVIVAL,
                    p_death=p_death,
                    pred_label=Label.DEATH if p_death >= 0.5 else Label.SURVIVAL,
                )
            )
    return records


def run_experiment(
    hadm_ids: Sequence[int],
    y: np.ndarray,
    X_full: np.ndarray,
    day_block: int,
    config: ExperimentConfig,
    threads: int = 1,
) -> list[PredictionRecord]:
    """All repetitions, optionally across worker threads.

    Each repetition owns PRNG state derived from (master_seed, rep_id) and the
    log is merged in repetition order, so the output does not depend on
    scheduling or on `threads`.
    """
    y = np.asarray(y, dtype=np.float64)
    reps = range(config.repetitions)
    run = lambda rep: run_repetition(rep, hadm_ids, y, X_full, day_block, config)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(run, reps))
    else:
        per_rep = [run(rep) for rep in reps]
    records: list[PredictionRecord] = []
    for chunk in per_rep:
        records.extend(chunk)
    return records


def aggregate(records: Iterable[PredictionRecord], horizon: int) -> ConfusionMatrix:
    """Confusion counts over all repetitions at one horizon."""
    cells = {
        (Label.SURVIVAL, Label.SURVIVAL): 0,
        (Label.SURVIVAL, Label.DEATH): 0,
        (Label.DEATH, Label.SURVIVAL): 0,
        (Label.DEATH, Label.DEATH): 0,
    }
    seen = False
    for r in records:
        if r.horizon != horizon:
            continue
        seen = True
        cells[(r.pred_label, r.true_label)] += 1
    if not seen:
        raise ValueError(f"no records at horizon {horizon}")
    return ConfusionMatrix(
        pred_survival_true_survival=cells[(Label.SURVIVAL, Label.SURVIVAL)],
        pred_survival_true_death=cells[(Label.SURVIVAL, Label.DEATH)],
        pred_death_true_survival=cells[(Label.DEATH, Label.SURVIVAL)],
        pred_death_true_death=cells[(Label.DEATH, Label.DEATH)],
    )


def metrics(cm: ConfusionMatrix) -> dict:
    """Accuracy, sensitivity, specificity with death as the positive class.

    A zero denominator yields None rather than an error.
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    tp, fn = cm.pred_death_true_death, cm.pred_survival_true_death
    tn, fp = cm.pred_survival_true_survival, cm.pred_death_true_survival
    return {
        "accuracy": (tp + tn) / cm.total,
        "sensitivity": tp / (tp + fn) if tp + fn else None,
        "specificity": tn / (tn + fp) if tn + fp else None,
    }


def write_prediction_log(records: Sequence[PredictionRecord], path: str | Path) -> None:
    """CSV log with probabilities at 9 significant digits; rows ordered by
    (rep, horizon, hadm_id) so reruns are byte-identical."""
    ordered = sorted(records, key=lambda r: (r.rep, r.horizon, r.hadm_id))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTION_LOG_HEADER)
        for r in ordered:
            writer.writerow(
                [r.rep, r.horizon, r.hadm_id, r.true_label.value, f"{r.p_death:.9g}", r.pred_label.value]
            )


def read_prediction_log(path: str | Path) -> list[PredictionRecord]:
    records: list[PredictionRecord] = []
    with open(require_file(path), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != PREDICTION_LOG_HEADER:
            raise DataValidationError(f"{path}: unexpected prediction log header {reader.fieldnames}")
        for row in reader:
            records.append(
                PredictionRecord(
                    rep=int(row["rep"]),
                    horizon=int(row["horizon"]),
                    hadm_id=int(row["hadm_id"]),
                    true_label=Label(row["true_label"]),
                    p_death=float(row["p_death"]),
                    pred_label=Label(row["pred_label"]),
                )
            )
    return records


def confusion_report(records: Sequence[PredictionRecord]) -> dict:
    """Per-horizon confusion cells and metrics for every horizon in the log."""
    horizons = sorted({r.horizon for r in records})
    if not horizons:
        raise DataValidationError("prediction log is empty")
    report = []
    for h in horizons:
        cm = aggregate(records, h)
        report.append(
            {
                "horizon": h,
                "cells": cm.as_dict(),
                "total": cm.total,
                "true_class_totals": {"survival": cm.true_survival_total, "death": cm.true_death_total},
                "metrics": metrics(cm),
            }
        )
    return {"horizons": report}


def write_confusion_report(records: Sequence[PredictionRecord], path: str | Path) -> dict:
    doc = confusion_report(records)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return doc
