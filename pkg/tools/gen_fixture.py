#!/usr/bin/env python3
"""Regenerate the small golden fixture (50 images, 10 classes).

The expected report is cross-checked value-by-value against the naive
reference implementations in tests/reference.py before being frozen, so the
golden bytes encode oracle-derived numbers, not engine echoes.  Run from the
repository root; outputs land in tests/data/fixture_small/ and are meant to
be committed.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from mlpc import (AnnotationStore, LabelwiseMode, PredictionDataset, evaluate,
                  gap_analysis, subgroup_export, write_annotations,
                  write_predictions)
from mlpc.plots import render_gap_svg, render_subgroup_box_svg
from reference import ref_real, ref_subgroups, ref_top1

NUM_IMAGES = 50
NUM_CLASSES = 10
DATASET_ID = "fixture-small"


def build_fixture(rng: random.Random):
    entries: dict[str, frozenset[int]] = {}
    gt_single: dict[str, frozenset[int]] = {}
    for i in range(NUM_IMAGES):
        image_id = f"fx_{i:04d}"
        if i % 17 == 0:
            entries[image_id] = frozenset()  # a few unannotated images
            continue
        size = rng.choice((1, 1, 1, 2, 2, 3, 4))
        labels = frozenset(rng.sample(range(NUM_CLASSES), size))
        entries[image_id] = labels
        gt_single[image_id] = frozenset({rng.choice(sorted(labels))})
    store = AnnotationStore(dataset_id=DATASET_ID, num_classes=NUM_CLASSES,
                            entries=entries)
    single_store = AnnotationStore(dataset_id=f"{DATASET_ID}-top1",
                                   num_classes=NUM_CLASSES, entries=gt_single)
    return store, single_store


def build_model(rng: random.Random, store: AnnotationStore, model_id: str,
                hit_rate: float) -> PredictionDataset:
    """Rank every class per image; with probability hit_rate the ground-truth
    labels are promoted to the top ranks."""
    records = {}
    for image_id, labels in store.entries.items():
        ranking = list(range(NUM_CLASSES))
        rng.shuffle(ranking)
        if labels and rng.random() < hit_rate:
            promoted = sorted(labels, key=lambda c: ranking.index(c))
            rest = [c for c in ranking if c not in labels]
            ranking = promoted + rest
        scores = [round(1.0 - 0.07 * rank, 4) for rank in range(NUM_CLASSES)]
        records[image_id] = (tuple(ranking), tuple(scores))
    return PredictionDataset(model_id=model_id, dataset_id=DATASET_ID,
                             num_classes=NUM_CLASSES, depth=NUM_CLASSES,
                             records=records)


def oracle_check(report, preds, store, gt_map):
    plain_preds = dict(preds.records)
    plain_entries = {k: set(v) for k, v in store.entries.items()}
    top1_value, top1_count = ref_top1(plain_preds, gt_map)
    assert (report.top1.value, report.top1.count) == (top1_value, top1_count)
    real_value, real_count = ref_real(plain_preds, plain_entries, "exclude")
    assert (report.real.value, report.real.count) == (real_value, real_count)
    groups, asma = ref_subgroups(plain_preds, plain_entries, NUM_CLASSES, "jaccard")
    assert {g: (s.count, s.value) for g, s in report.subgroups.per_group.items()} == groups
    assert report.subgroups.asma == asma
    print(f"  oracle agrees: top1={top1_value} real={real_value} asma={asma}")


def main() -> None:
    out = ROOT / "tests" / "data" / "fixture_small"
    golden = ROOT / "tests" / "data" / "golden"
    out.mkdir(parents=True, exist_ok=True)
    golden.mkdir(parents=True, exist_ok=True)
    rng = random.Random(174)

    store, single_store = build_fixture(rng)
    write_annotations(store, out / "annotations.jsonl")
    write_annotations(single_store, out / "gt_single.jsonl")

    models = {
        "alpha": build_model(rng, store, "alpha", hit_rate=0.8),
        "beta": build_model(rng, store, "beta", hit_rate=0.45),
        # the same two models on a second, harder prediction run
        "alpha_b": build_model(rng, store, "alpha", hit_rate=0.6),
        "beta_b": build_model(rng, store, "beta", hit_rate=0.3),
    }
    for name, preds in models.items():
        write_predictions(preds, out / f"predictions_{name}.jsonl")

    gt_map = {k: next(iter(v)) for k, v in single_store.entries.items()}
    reports = {}
    for name, preds in models.items():
        report = evaluate(preds, store, gt_map, mode=LabelwiseMode.JACCARD)
        oracle_check(report, preds, store, gt_map)
        reports[name] = report
    (out / "expected_report_alpha.json").write_text(
        reports["alpha"].canonical_json(), encoding="utf-8")

    records, _ = gap_analysis(
        [reports["alpha"].to_dict(), reports["beta"].to_dict()],
        [reports["alpha_b"].to_dict(), reports["beta_b"].to_dict()], "top1")
    render_gap_svg(records, golden / "gaps.svg")
    rows = subgroup_export([reports["alpha"].to_dict(), reports["beta"].to_dict()])
    render_subgroup_box_svg(rows, golden / "subgroups.svg")
    print(f"fixture written to {out}")


if __name__ == "__main__":
    main()
