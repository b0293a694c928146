"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
PASS lines.  Exact-rational equality is asserted wherever the engine promises
it (stronger than the stated 1e-12 tolerances).
"""

from __future__ import annotations

import itertools
import json
import os
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from mlpc import (AnnotationStore, ComposerConfig, LabelwiseMode,
                  PredictionDataset, evaluate, evaluate_many, gap_analysis,
                  generate, label_count_histogram, labelwise_accuracy,
                  load_annotations, load_predictions, rank_table,
                  render_composite, single_label_map, write_manifest)
from mlpc.composer import _SourceCache, build_pool
from conftest import make_instance
from reference import ref_labelwise, ref_real, ref_subgroups, ref_top1, ref_variable_topk
from test_composer import make_pool_manifest, make_sources

FIXTURE = Path(__file__).parent / "data" / "fixture_small"


def ok(line: str) -> None:
    print(f"\n[ACCEPT] PASS  {line}")


# ---------------------------------------------------------------------------
# C1: metric oracle equivalence on 1,000 randomized instances, < 10 s
# ---------------------------------------------------------------------------


def test_c1_metric_oracle_equivalence():
    rng = random.Random(99)
    started = time.perf_counter()
    checked = 0
    for _ in range(1000):
        preds, store, gt = make_instance(rng, max_images=200, max_classes=20)
        plain_preds = dict(preds.records)
        plain_entries = {k: set(v) for k, v in store.entries.items()}

        if gt:
            expect = ref_top1(plain_preds, gt)
            from mlpc import top1_accuracy
            got = top1_accuracy(preds, gt)
            assert (got.value, got.count) == expect

        from mlpc import real_accuracy, subgroup_breakdown, variable_topk_sets
        for policy in ("exclude", "count_as_miss"):
            if policy == "exclude" and all(not v for v in plain_entries.values()):
                continue
            expect = ref_real(plain_preds, plain_entries, policy)
            got = real_accuracy(preds, store, policy)
            assert (got.value, got.count) == expect

        ref_sets = ref_variable_topk(plain_preds, plain_entries)
        assert dict(variable_topk_sets(preds, store)) == {
            k: frozenset(v) for k, v in ref_sets.items()}

        some_id = next(iter(ref_sets))
        for mode in LabelwiseMode:
            ref_groups, ref_asma = ref_subgroups(plain_preds, plain_entries,
                                                 store.num_classes, mode.value,
                                                 pred_sets=ref_sets)
            if not ref_groups:
                continue
            b = subgroup_breakdown(preds, store, mode)
            assert {g: (s.count, s.value) for g, s in b.per_group.items()} == ref_groups
            assert b.asma == ref_asma

            # spot-check the per-image label-wise values via the public op
            assert labelwise_accuracy(plain_entries[some_id], ref_sets[some_id],
                                      store.num_classes, mode) == \
                ref_labelwise(plain_entries[some_id], ref_sets[some_id],
                              store.num_classes, mode.value)
        checked += 1
    elapsed = time.perf_counter() - started
    assert checked == 1000
    assert elapsed < 10.0, f"oracle sweep took {elapsed:.2f}s (budget 10s)"
    ok(f"C1 oracle equivalence: 1000 instances, exact match, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# C2: closed-form identities by exhaustive enumeration, C <= 8, exact
# ---------------------------------------------------------------------------


def test_c2_closed_form_identities():
    pairs = 0
    for num_classes in range(1, 9):
        universe = range(num_classes)
        for g in range(1, num_classes + 1):
            # per (C, g): all three modes are strictly decreasing in the miss
            # count m, hence induce identical orderings
            by_m: dict[int, tuple] = {}
            for gt in itertools.combinations(universe, g):
                for pred in itertools.combinations(universe, g):
                    gt_set, pred_set = set(gt), set(pred)
                    m = len(gt_set - pred_set)
                    literal = labelwise_accuracy(gt_set, pred_set, num_classes,
                                                 LabelwiseMode.LITERAL_HAMMING)
                    jaccard = labelwise_accuracy(gt_set, pred_set, num_classes,
                                                 LabelwiseMode.JACCARD)
                    recall = labelwise_accuracy(gt_set, pred_set, num_classes,
                                                LabelwiseMode.RECALL)
                    assert literal == Fraction(num_classes - 2 * m, num_classes)
                    assert jaccard == Fraction(g - m, g + m)
                    assert recall == Fraction(g - m, g)
                    values = (literal, jaccard, recall)
                    if m in by_m:
                        assert by_m[m] == values
                    else:
                        by_m[m] = values
                    pairs += 1
            ms = sorted(by_m)
            for lower, higher in zip(ms, ms[1:]):
                assert all(a > b for a, b in zip(by_m[lower], by_m[higher]))
    ok(f"C2 closed-form identities: {pairs} (gt, pred) pairs, exact equality")


# ---------------------------------------------------------------------------
# C3: golden fixture reproduces byte-identical canonical JSON
# ---------------------------------------------------------------------------


def test_c3_golden_fixture_bytes():
    store = load_annotations(FIXTURE / "annotations.jsonl")
    gt = single_label_map(load_annotations(FIXTURE / "gt_single.jsonl"))
    preds = load_predictions(FIXTURE / "predictions_alpha.jsonl")
    expected = (FIXTURE / "expected_report_alpha.json").read_bytes()
    for _ in range(2):
        report = evaluate(preds, store, gt, mode=LabelwiseMode.JACCARD)
        assert report.canonical_json().encode("utf-8") == expected
    ok("C3 golden fixture: canonical report byte-identical across runs")


# ---------------------------------------------------------------------------
# C4: published label-count histograms (optional: needs the shared files)
# ---------------------------------------------------------------------------

V1_EXPECTED = {1: 39394, 2: 5408, 3: 1319, 4: 411, 5: 161, ">5": 144}
V2_EXPECTED = {1: 5083, 2: 2385, 3: 1306, 4: 628, 5: 237, ">5": 232}


def test_c4_published_histograms():
    v1_path = os.environ.get("MLPC_REAL_LABELS")
    v2_path = os.environ.get("MLPC_V2_LABELS")
    if not v1_path or not v2_path:
        pytest.skip("set MLPC_REAL_LABELS / MLPC_V2_LABELS to the freely shared "
                    "annotation files to run the published-histogram check")
    v1 = load_annotations(v1_path, "real_adapter", num_classes=1000,
                          dataset_id="imagenetv1-real")
    buckets, _ = label_count_histogram(v1, 6)
    assert buckets == V1_EXPECTED
    v2 = load_annotations(v2_path)
    buckets, _ = label_count_histogram(v2, 6)
    assert buckets == V2_EXPECTED
    ok("C4 published histograms: exact match for both datasets")


# ---------------------------------------------------------------------------
# C5: composer determinism and invariants on a 10,000-patch pool, < 60 s
# ---------------------------------------------------------------------------


def test_c5_composer_determinism_and_invariants(tmp_path):
    started = time.perf_counter()
    rng = random.Random(123)
    sources = make_sources(tmp_path, rng, count=6, size=(400, 300))
    manifest_path = make_pool_manifest(tmp_path, rng, 10_000, num_classes=100,
                                       sources=sources)
    pool = build_pool(manifest_path, num_classes=100)
    config = ComposerConfig(seed=1)

    first = generate(config, pool, num_classes=100)
    second = generate(config, pool, num_classes=100)
    fa, fb = tmp_path / "m1.jsonl", tmp_path / "m2.jsonl"
    write_manifest(first, fa)
    write_manifest(second, fb)
    assert fa.read_bytes() == fb.read_bytes()

    expected_counts = {k: 10_000 // k for k, _ in config.configs}
    by_id = {p.patch_id: p for p in pool}
    for (k, p), stats in zip(config.configs, first.per_config):
        assert stats["composites"] == expected_counts[k]
        assert stats["patches_used"] + stats["discarded"] == 10_000
        entries = [e for e in first.entries if (e.k, e.p) == (k, p)]
        assert len(entries) == expected_counts[k]
        used = [pl.patch_id for e in entries for pl in e.placements]
        assert len(used) == len(set(used))
        for e in entries:
            assert len(e.placements) == k
            assert len({(pl.row, pl.col) for pl in e.placements}) == k
            assert set(e.labels) == {by_id[pl.patch_id].label for pl in e.placements}
            for pl in e.placements:
                pl.validate(p, config.canvas_size)

    sample = random.Random(0).sample(list(first.entries), 60)
    cache = _SourceCache()
    for entry in sample:
        pixels = np.asarray(render_composite(entry, by_id, first.canvas_size, cache))
        mask = np.zeros(pixels.shape[:2], dtype=bool)
        for pl in entry.placements:
            mask[pl.y:pl.y + pl.height, pl.x:pl.x + pl.width] = True
        assert pixels[~mask].max() == 0
        assert pixels[mask].max() > 0
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"composer criterion took {elapsed:.2f}s (budget 60s)"
    ok(f"C5 composer: byte-identical manifests, floor(10000/k) counts, "
       f"invariants on {len(first.entries)} composites, 60 rendered, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# C6: top-1 gap can be large while the variable-top-k gap is exactly zero
# ---------------------------------------------------------------------------


def test_c6_gap_shrink_demonstration():
    num_classes = 50

    def records_for(entries, argmax_flip):
        records = {}
        for image_id, labels in entries.items():
            ordered = sorted(labels, reverse=argmax_flip)
            rest = [c for c in range(num_classes) if c not in labels]
            ranking = ordered + rest
            scores = [round(1.0 - 0.01 * i, 4) for i in range(num_classes)]
            records[image_id] = (tuple(ranking), tuple(scores))
        return records

    # dataset A: single-label images, the model nails every one
    entries_a = {f"a{i:03d}": frozenset({i % num_classes}) for i in range(60)}
    store_a = AnnotationStore("set-a", num_classes, entries_a)
    gt_a = {k: min(v) for k, v in entries_a.items()}
    preds_a = PredictionDataset("demo-model", "set-a", num_classes, num_classes,
                                records_for(entries_a, argmax_flip=False))

    # dataset B: two-label images; the model ranks both valid labels on top
    # but its single best guess is the label the curator did not pick
    entries_b = {f"b{i:03d}": frozenset({2 * i % num_classes,
                                         (2 * i + 1) % num_classes})
                 for i in range(60)}
    store_b = AnnotationStore("set-b", num_classes, entries_b)
    gt_b = {k: min(v) for k, v in entries_b.items()}
    preds_b = PredictionDataset("demo-model", "set-b", num_classes, num_classes,
                                records_for(entries_b, argmax_flip=True))

    report_a = evaluate(preds_a, store_a, gt_a, mode=LabelwiseMode.JACCARD)
    report_b = evaluate(preds_b, store_b, gt_b, mode=LabelwiseMode.JACCARD)

    top1_records, _ = gap_analysis([report_a], [report_b], "top1")
    asma_records, _ = gap_analysis([report_a], [report_b], "asma")
    assert top1_records[0].difference > 0
    assert asma_records[0].difference == 0  # exact rational zero
    ok(f"C6 gap shrink: top-1 gap {float(top1_records[0].difference):.2f} > 0, "
       f"variable-top-k gap exactly 0")


# ---------------------------------------------------------------------------
# C7: published rank/delta-rank fixture is reproduced by rank_table
# ---------------------------------------------------------------------------

# (model, asma, top1, published top-1 rank, published delta-rank)
RANK_FIXTURE = [
    ("eva_large_patch14_336.in22k_ft_in1k", 74.50, 88.50, 14, 13),
    ("convnextv2_huge.fcmae_ft_in22k_in1k_512", 71.45, 88.84, 8, 6),
    ("volo_d5_448_in1k", 70.30, 87.05, 56, 53),
    ("volo_d5_512_in1k", 70.17, 87.04, 57, 53),
    ("volo_d4_448_in1k", 69.18, 86.86, 63, 58),
    ("volo_d3_448_in1k", 69.16, 86.60, 69, 63),
    ("convnextv2_huge.fcmae_ft_in22k_in1k_384", 67.92, 88.60, 10, 3),
    ("eva_large_patch14_196.in22k_ft_in1k", 67.20, 87.77, 36, 28),
    ("beitv2_large_patch16_224.in1k_ft_in1k", 67.16, 87.23, 51, 42),
    ("cait_m48_448.fb_dist_in1k", 67.11, 86.32, 81, 71),
]


def _doc(model_id, asma, top1):
    def entry(v):
        f = Fraction(v).limit_denominator(10000)
        return {"count": 1, "rational": [f.numerator, f.denominator], "value": float(v)}
    return {"model_id": model_id, "dataset_id": "rank-fixture",
            "config": {}, "population": {},
            "metrics": {"top1": entry(top1), "real": entry(top1), "asma": entry(asma)},
            "subgroups": {"mode": "jaccard", "included_groups": [], "per_group": []}}


def test_c7_rank_delta_consistency():
    # the published (top-1 rank, delta) pairs must invert to ranks 1..10
    # under the delta convention baseline_rank - primary_rank
    for position, (_, _, _, top1_rank, delta) in enumerate(RANK_FIXTURE, start=1):
        assert top1_rank - delta == position

    # rebuild an 81-model field whose top-1 ranking places the ten fixture
    # models at their published global ranks, then let rank_table recompute
    # everything from raw values
    taken = {row[3] for row in RANK_FIXTURE}
    fixture_sorted = sorted(RANK_FIXTURE, key=lambda r: -r[2])
    boundaries = []  # (rank, top1) in descending-value order
    for model, asma, top1, rank, _ in fixture_sorted:
        boundaries.append((rank, top1))
    docs = [_doc(m, asma, top1) for m, asma, top1, _, _ in RANK_FIXTURE]
    filler_index = 0
    for rank in range(1, 82):
        if rank in taken:
            continue
        above = [v for r, v in boundaries if r < rank]
        below = [v for r, v in boundaries if r > rank]
        hi = min(above) if above else 92.0
        lo = max(below) if below else 80.0
        value = lo + (hi - lo) * 0.5 + filler_index * 1e-6
        docs.append(_doc(f"filler_{rank:03d}", 10.0 + filler_index * 0.01, value))
        filler_index += 1
    assert len(docs) == 81

    table = rank_table(docs, "asma", "top1")
    top_rows = table.rows[:10]
    for position, (row, fixture) in enumerate(zip(top_rows, RANK_FIXTURE), start=1):
        model, _asma, _top1, top1_rank, delta = fixture
        assert row.model_id == model
        assert row.primary_rank == position
        assert row.baseline_rank == top1_rank
        assert row.delta_rank == delta
    ok("C7 rank fixture: ASMA ranks 1..10 in published order, "
       "baseline ranks and delta-ranks exact")


# ---------------------------------------------------------------------------
# C8: throughput and parallel scaling
# ---------------------------------------------------------------------------


def _bulk_dataset(num_images=50_000, num_classes=1000, depth=20, model_id="bulk"):
    rng = random.Random(31)
    entries = {}
    records = {}
    base_scores = tuple(round(1.0 - 0.04 * i, 4) for i in range(depth))
    for i in range(num_images):
        image_id = f"i{i:06d}"
        g = rng.choice((1, 1, 1, 1, 2, 2, 3, 4, 5, 9))
        labels = rng.sample(range(num_classes), g)
        hits = rng.randint(0, g)
        ranking = labels[:hits]
        pos = 0
        while len(ranking) < depth:
            candidate = (i * 37 + pos) % num_classes
            pos += 1
            if candidate not in labels[:hits]:
                ranking.append(candidate)
        records[image_id] = (tuple(ranking[:depth]), base_scores)
        entries[image_id] = frozenset(labels)
    store = AnnotationStore("bulk", num_classes, entries)
    gt = {k: min(v) for k, v in entries.items()}
    preds = PredictionDataset(model_id, "bulk", num_classes, depth, records)
    return preds, store, gt


def test_c8_throughput_and_scaling():
    preds, store, gt = _bulk_dataset()
    started = time.perf_counter()
    report = evaluate(preds, store, gt, mode=LabelwiseMode.JACCARD)
    single = time.perf_counter() - started
    assert report.real.count == 50_000
    assert single < 2.0, f"single-model evaluation took {single:.2f}s (budget 2s)"

    models = [
        PredictionDataset(f"bulk{i:02d}", "bulk", store.num_classes, preds.depth,
                          preds.records)
        for i in range(16)
    ]
    t0 = time.perf_counter()
    sequential = [evaluate(m, store, gt, mode=LabelwiseMode.JACCARD) for m in models]
    t_seq = time.perf_counter() - t0
    t0 = time.perf_counter()
    parallel = evaluate_many(models, store, gt, max_workers=16,
                             mode=LabelwiseMode.JACCARD)
    t_par = time.perf_counter() - t0
    assert [r.canonical_json() for r in sequential] == \
        [r.canonical_json() for r in parallel], "parallel results differ"

    cores = os.cpu_count() or 1
    if cores < 16:
        ok(f"C8 throughput: single model {single:.2f}s < 2s; parallel results "
           f"order-independent (speedup {t_seq / t_par:.1f}x on {cores} cores)")
        pytest.skip(f"16-worker >=8x speedup needs >=16 CPUs; host has {cores}")
    speedup = t_seq / t_par
    assert speedup >= 8.0, f"speedup {speedup:.1f}x below 8x at 16 workers"
    ok(f"C8 throughput: single {single:.2f}s < 2s, speedup {speedup:.1f}x >= 8x")
