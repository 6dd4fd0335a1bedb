"""Command-line interface over the pipeline stages.

Commands: cohort, buckets, embed-stub, train, report, analyze, synthbench.
Every command accepts --config pointing at a flat JSON object whose keys are
long option names (hyphens or underscores); explicit flags win over the file.
Exit codes: 0 success, 1 usage, 2 data validation, 3 missing embeddings.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from .analysis import build_analysis, write_analysis, write_histogram_csv
from .bucketing import (
    DEFAULT_HORIZON,
    build_grid,
    empty_grid,
    export_buckets,
    forward_fill,
    grids_from_bucket_lines,
    load_notes,
    read_bucket_export,
    write_provenance,
)
from .cohort import Label, load_admissions, read_cohort, resolve_cutoff, select_cohort, write_cohort
from .errors import DataValidationError, FailprobeError, MissingEmbeddingError
from .harness import (
    ExperimentConfig,
    aggregate,
    metrics,
    read_prediction_log,
    run_experiment,
    write_confusion_report,
    write_prediction_log,
)
from .head import TrainConfig
from .store import assemble_features, read_store, stub_embed, write_store
from .synth import SynthConfig, generate
from .validation import require_file

N_CATEGORIES = 5


class UsageError(Exception):
    """Bad flags or config keys; mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for data validation here.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise SystemExit(f"{self.prog}: error: {message}") from None


def _parse_horizons(raw: str) -> tuple[int, ...]:
    """Accept a comma list, ranges, or both: "1-8", "1,2,4,8", "1-3,8"."""
    out: list[int] = []
    for part in str(raw).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo_s, hi_s = part.split("-", 1)
            lo, hi = int(lo_s), int(hi_s)
            if hi < lo:
                raise UsageError(f"bad horizon range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty horizon list {raw!r}")
    return tuple(dict.fromkeys(out))


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        if value < 1:
            raise UsageError(f"--threads must be >= 1, got {value}")
        return value
    raw = os.environ.get("FAILPROBE_THREADS")
    if raw is None:
        return 1
    try:
        parsed = int(raw)
    except ValueError:
        raise UsageError(f"FAILPROBE_THREADS must be an integer, got {raw!r}") from None
    if parsed < 1:
        raise UsageError(f"FAILPROBE_THREADS must be >= 1, got {parsed}")
    return parsed


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="failprobe", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    by_name: dict[str, _Parser] = {}

    def command(name: str, help_text: str) -> _Parser:
        sub = subs.add_parser(name, help=help_text)
        sub.add_argument("--config", help="flat JSON config file; flags override its values")
        by_name[name] = sub
        return sub

    p = command("cohort", "select the study cohort from admissions and diagnoses tables")
    p.add_argument("--admissions", required=True, help="admissions CSV path")
    p.add_argument("--diagnoses", required=True, help="diagnoses CSV path")
    p.add_argument("--icd", default="410.71", help="ICD-9 code defining the cohort")
    p.add_argument("--cutoff-days", type=float, default=None, help="length-of-stay cutoff; default is the ICD-matched median")
    p.add_argument("--out", required=True, help="cohort JSON output path")

    p = command("buckets", "bucket notes per (admission, category, day) and export originals")
    p.add_argument("--cohort", required=True, help="cohort JSON path")
    p.add_argument("--notes", required=True, help="notes CSV path")
    p.add_argument("--days", type=int, default=DEFAULT_HORIZON, help="bucketed stay days")
    p.add_argument("--out", required=True, help="bucket JSONL output path")
    p.add_argument("--provenance", default=None, help="optional fill-provenance sidecar JSON path")

    p = command("embed-stub", "embed exported buckets with the deterministic stub provider")
    p.add_argument("--buckets", required=True, help="bucket JSONL path")
    p.add_argument("--dim", type=int, default=768, help="embedding width")
    p.add_argument("--seed", type=int, default=0, help="stub embedding seed")
    p.add_argument("--out", required=True, help="embedding store output path")

    p = command("train", "run the repeated split/balance/train/predict experiment")
    p.add_argument("--cohort", required=True, help="cohort JSON path")
    p.add_argument("--buckets", required=True, help="bucket JSONL path")
    p.add_argument("--store", required=True, help="embedding store path")
    p.add_argument("--horizons", default="1-8", help="observation horizons, e.g. 1-8 or 1,2,4,8")
    p.add_argument("--days", type=int, default=DEFAULT_HORIZON, help="bucketed stay days in the export")
    p.add_argument("--reps", type=int, default=100, help="number of repetitions")
    p.add_argument("--test-frac", type=float, default=0.25, help="held-out fraction per repetition")
    p.add_argument("--balance", choices=("undersample", "oversample"), default="undersample", help="training-set class balancing mode")
    p.add_argument("--epochs", type=int, default=100, help="gradient descent epochs")
    p.add_argument("--learning-rate", type=float, default=1e-5, help="gradient descent step size")
    p.add_argument("--init", choices=("uniform", "zeros"), default="uniform", help="head initialization scheme")
    p.add_argument("--init-scale", type=float, default=0.01, help="half-width of the uniform init")
    p.add_argument("--seed", type=int, default=0, help="master seed for splits, balancing, and init")
    p.add_argument("--threads", type=int, default=None, help="worker threads over repetitions (default: FAILPROBE_THREADS or 1)")
    p.add_argument("--out", required=True, help="prediction log CSV output path")

    p = command("report", "aggregate a prediction log into per-horizon confusion matrices")
    p.add_argument("--predictions", required=True, help="prediction log CSV path")
    p.add_argument("--out", required=True, help="confusion report JSON output path")

    p = command("analyze", "profile per-admission accuracy and characterize the failure subgroup")
    p.add_argument("--predictions", required=True, help="prediction log CSV path")
    p.add_argument("--cohort", required=True, help="cohort JSON path")
    p.add_argument("--buckets", required=True, help="bucket JSONL path")
    p.add_argument("--store", required=True, help="embedding store path")
    p.add_argument("--horizon", type=int, default=1, help="horizon whose predictions define the subgroup")
    p.add_argument("--days", type=int, default=DEFAULT_HORIZON, help="bucketed stay days in the export")
    p.add_argument("--threshold", type=float, default=0.1, help="max per-admission accuracy for subgroup membership")
    p.add_argument("--min-appearances", type=int, default=5, help="min test appearances for subgroup membership")
    p.add_argument("--phase-split", type=int, default=4, help="last day of the early stay phase")
    p.add_argument("--all-horizons", action="store_true", help="also emit histograms for every horizon in the log")
    p.add_argument("--histogram-csv", default=None, help="optional flat histogram CSV path")
    p.add_argument("--out", required=True, help="analysis JSON output path")

    p = command("synthbench", "generate the planted-confounder synthetic benchmark")
    p.add_argument("--out-dir", required=True, help="output directory for CSVs, store, and manifest")
    p.add_argument("--size", type=int, default=400, help="number of cohort admissions")
    p.add_argument("--death-frac", type=float, default=0.15, help="fraction of admissions ending in death")
    p.add_argument("--planted-frac", type=float, default=0.25, help="fraction of survivors planted with confounders")
    p.add_argument("--dim", type=int, default=16, help="embedding width of the generated store")
    p.add_argument("--days", type=int, default=DEFAULT_HORIZON, help="stay days covered by generated notes")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--icd", default="410.71", help="ICD-9 code stamped on cohort admissions")

    return parser, by_name


def _config_actions(sub: _Parser) -> dict[str, argparse.Action]:
    actions: dict[str, argparse.Action] = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--") and opt not in ("--help", "--config"):
                actions[opt[2:]] = action
    return actions


def _load_config(path: str) -> dict:
    with open(require_file(path), encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise DataValidationError(f"{path}: config must be a JSON object")
    for key, value in doc.items():
        if isinstance(value, (dict, list)):
            raise DataValidationError(f"{path}: config key {key!r} must be a scalar")
    return doc


def _apply_config(args_config: str, command: str, by_name: dict[str, _Parser]) -> None:
    """Install config values as the active command's defaults.

    Keys are validated against the union of all commands' flags, so a single
    archived config can drive a whole pipeline; keys belonging to other
    commands are ignored for this one.
    """
    doc = _load_config(args_config)
    known_global = {key for sub in by_name.values() for key in _config_actions(sub)}
    cmd_actions = _config_actions(by_name[command])
    defaults = {}
    for raw_key, value in doc.items():
        key = raw_key.replace("_", "-")
        if key not in known_global:
            raise UsageError(f"unknown config key {raw_key!r}")
        action = cmd_actions.get(key)
        if action is None:
            continue
        if isinstance(action.const, bool):
            if not isinstance(value, bool):
                raise UsageError(f"config key {raw_key!r} must be true or false")
        elif isinstance(value, str) and action.type is not None:
            value = action.type(value)
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {raw_key!r} must be one of {sorted(action.choices)}")
        defaults[action.dest] = value
    by_name[command].set_defaults(**defaults)


def _load_filled_grids(cohort_path, buckets_path, days: int):
    """Cohort members plus forward-filled grids rebuilt from the bucket export."""
    header, members = read_cohort(cohort_path)
    lines = read_bucket_export(buckets_path)
    raw_grids = grids_from_bucket_lines(lines, horizon=days)
    grids = {}
    for m in members:
        grid = raw_grids.get(m.hadm_id)
        if grid is None:
            grid = empty_grid(m.hadm_id, m.admission.subject_id, days)
        grids[m.hadm_id] = forward_fill(grid)
    return header, members, grids


def cmd_cohort(args) -> int:
    admissions = load_admissions(args.admissions, args.diagnoses)
    cutoff = resolve_cutoff(admissions, args.icd, args.cutoff_days)
    members = select_cohort(admissions, args.icd, cutoff)
    write_cohort(members, args.icd, cutoff, args.out)
    survival = sum(1 for m in members if m.label is Label.SURVIVAL)
    print(f"cohort: {len(members)} members ({survival} survival, {len(members) - survival} death)")
    print(f"cohort: ICD {args.icd}, stay cutoff {cutoff:.6g} days, written to {args.out}")
    return 0


def cmd_buckets(args) -> int:
    _, members = read_cohort(args.cohort)
    notes, counters = load_notes(args.notes)
    member_ids = {m.hadm_id for m in members}
    by_hadm: dict[int, list] = {}
    skipped = 0
    for note in notes:
        if note.hadm_id in member_ids:
            by_hadm.setdefault(note.hadm_id, []).append(note)
        else:
            skipped += 1

    grids = [build_grid(by_hadm.get(m.hadm_id, []), m.admission, horizon=args.days) for m in members]
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        count = export_buckets(grids, fh)
    out_of_window = sum(g.out_of_window for g in grids)
    if args.provenance:
        write_provenance([forward_fill(g) for g in grids], args.provenance, {**counters, "outside_cohort": skipped})
    print(f"buckets: {count} original buckets over {len(grids)} admissions -> {args.out}")
    print(
        f"buckets: dropped {out_of_window} out-of-window notes, "
        f"{counters['unknown_category']} unknown-category, {counters['blank_text']} blank, "
        f"{skipped} outside the cohort"
    )
    return 0


def cmd_embed_stub(args) -> int:
    lines = read_bucket_export(args.buckets)
    entries = {
        (line.hadm_id, int(line.category), line.day): stub_embed(line.text, args.dim, args.seed)
        for line in lines
    }
    write_store(entries, args.dim, args.out)
    print(f"embed-stub: {len(entries)} vectors of width {args.dim} -> {args.out}")
    return 0


def cmd_train(args) -> int:
    horizons = _parse_horizons(args.horizons)
    if max(horizons) > args.days:
        raise UsageError(f"horizon {max(horizons)} exceeds --days {args.days}")
    _, members, grids = _load_filled_grids(args.cohort, args.buckets, args.days)
    if not members:
        raise DataValidationError(f"{args.cohort}: cohort has no members")
    store = read_store(args.store)

    max_h = max(horizons)
    X_full = np.vstack([assemble_features(grids[m.hadm_id], store, max_h).values for m in members])
    y = np.array([1.0 if m.label is Label.DEATH else 0.0 for m in members])
    hadm_ids = [m.hadm_id for m in members]

    config = ExperimentConfig(
        repetitions=args.reps,
        test_fraction=args.test_frac,
        horizons=horizons,
        balance=args.balance,
        train=TrainConfig(
            epochs=args.epochs,
            learning_rate=args.learning_rate,
            init=args.init,
            init_scale=args.init_scale,
            seed=args.seed,
        ),
        master_seed=args.seed,
    )
    records = run_experiment(hadm_ids, y, X_full, N_CATEGORIES * store.dim, config, threads=_resolve_threads(args.threads))
    write_prediction_log(records, args.out)
    print(f"train: {len(records)} predictions ({args.reps} reps x {len(horizons)} horizons) -> {args.out}")
    for h in horizons:
        m = metrics(aggregate(records, h))
        print(f"train: horizon {h} accuracy {m['accuracy']:.4f}")
    return 0


def cmd_report(args) -> int:
    records = read_prediction_log(args.predictions)
    doc = write_confusion_report(records, args.out)
    for entry in doc["horizons"]:
        cells = entry["cells"]
        m = entry["metrics"]
        sens = "n/a" if m["sensitivity"] is None else f"{m['sensitivity']:.4f}"
        spec = "n/a" if m["specificity"] is None else f"{m['specificity']:.4f}"
        print(
            f"report: horizon {entry['horizon']}: "
            f"[{cells['pred_survival_true_survival']} {cells['pred_survival_true_death']} / "
            f"{cells['pred_death_true_survival']} {cells['pred_death_true_death']}] "
            f"acc {m['accuracy']:.4f} sens {sens} spec {spec}"
        )
    print(f"report: written to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    records = read_prediction_log(args.predictions)
    _, members, grids = _load_filled_grids(args.cohort, args.buckets, args.days)
    store = read_store(args.store)
    doc = build_analysis(
        records,
        horizon=args.horizon,
        members={m.hadm_id: m for m in members},
        grids=grids,
        store=store,
        max_rate=args.threshold,
        min_appearances=args.min_appearances,
        phase_split=args.phase_split,
        grid_horizon=args.days,
        all_horizons=args.all_horizons,
    )
    write_analysis(doc, args.out)
    if args.histogram_csv:
        write_histogram_csv(doc, args.histogram_csv)
    sub = doc["subgroup"]
    print(
        f"analyze: horizon {args.horizon}, subgroup of {sub['size']} "
        f"(accuracy < {args.threshold:g}, >= {args.min_appearances} appearances)"
    )
    report = doc["report"]
    if report is not None:
        for key in ("ratio_is_readmission", "ratio_future_readmissions", "ratio_readmit_30d", "ratio_los"):
            value = report[key]
            print(f"analyze: {key} = " + ("n/a" if value is None else f"{value:.3f}"))
    print(f"analyze: written to {args.out}")
    return 0


def cmd_synthbench(args) -> int:
    config = SynthConfig(
        size=args.size,
        death_fraction=args.death_frac,
        planted_fraction=args.planted_frac,
        dim=args.dim,
        horizon=args.days,
        seed=args.seed,
        icd_code=args.icd,
    )
    manifest = generate(config, args.out_dir)
    counts = manifest["counts"]
    print(
        f"synthbench: {counts['members']} admissions ({counts['survival']} survival, "
        f"{counts['death']} death), {counts['planted']} planted -> {args.out_dir}"
    )
    return 0


_HANDLERS = {
    "cohort": cmd_cohort,
    "buckets": cmd_buckets,
    "embed-stub": cmd_embed_stub,
    "train": cmd_train,
    "report": cmd_report,
    "analyze": cmd_analyze,
    "synthbench": cmd_synthbench,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser, by_name = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config is not None:
            _apply_config(args.config, args.command, by_name)
            args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except SystemExit as exc:
        # argparse --help exits 0; _Parser.error carries a message, exit 1.
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MissingEmbeddingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FailprobeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
