"""Multi-label-aware accuracy metrics over ranked predictions.

All metrics are pure functions of a :class:`~mlpc.predictions.PredictionDataset`
and an :class:`~mlpc.annotations.AnnotationStore` (plus an optional
single-label map for top-1).  Rank order is the only prediction information
used; score magnitudes never enter the math, so rescaling scores cannot change
a result.

Accuracies are accumulated as exact rationals (integer numerators bucketed by
denominator, reduced once at the end), so results are independent of summation
order and golden files never depend on floating-point tolerance.

The variable-top-k prediction set for an image with ``k`` ground-truth labels
is the ``k`` highest-ranked classes.  Per-image agreement between that set and
the ground-truth set supports three modes:

``literal_hamming``
    Fraction of all ``C`` classes on which the indicator vectors agree,
    ``(C - |symmetric difference|) / C``.  High by construction when ``C`` is
    large.
``jaccard``
    ``|intersection| / |union|`` (1 when both sets are empty).
``recall``
    ``|intersection| / |ground truth|`` (1 when the ground-truth set is
    empty; that convention only matters when group 0 is explicitly included).

Subgroup accuracy ``A_g`` averages the per-image value over all images with
exactly ``g`` labels, and ASMA (average subgroup multi-label accuracy) is the
unweighted mean of ``A_g`` over the included groups.  Groups with no images
are skipped rather than treated as undefined; the report always lists which
groups were averaged.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

from .annotations import AnnotationStore
from .canonical import canonical_json
from .errors import InsufficientDepthError, MlpcError
from .predictions import PredictionDataset

POPULATION_POLICIES = ("intersection", "strict")
EMPTY_POLICIES = ("exclude", "count_as_miss")


class EvaluationError(MlpcError):
    """Inconsistent inputs or an empty evaluation population."""


class LabelwiseMode(str, Enum):
    LITERAL_HAMMING = "literal_hamming"
    JACCARD = "jaccard"
    RECALL = "recall"


class MetricValue(NamedTuple):
    """An exact accuracy plus the number of images it was computed over."""

    value: Fraction
    count: int

    def as_float(self) -> float:
        return float(self.value)


class GroupStat(NamedTuple):
    count: int
    value: Fraction


@dataclass(frozen=True)
class SubgroupBreakdown:
    """Per-label-count accuracies and their unweighted mean (ASMA)."""

    per_group: dict[int, GroupStat]
    asma: Fraction
    mode: LabelwiseMode
    included_groups: tuple[int, ...]

    @property
    def total_images(self) -> int:
        return sum(stat.count for stat in self.per_group.values())


@dataclass(frozen=True)
class MetricReport:
    """One model's metric bundle against one annotated dataset."""

    model_id: str
    dataset_id: str
    config: dict
    population: dict
    top1: MetricValue | None
    real: MetricValue
    subgroups: SubgroupBreakdown
    provenance: dict | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        """Canonical-JSON-ready structure (schema ``mlpc-report-v1``)."""
        def acc(mv: MetricValue | None) -> dict | None:
            if mv is None:
                return None
            return {"count": mv.count, "rational": mv.value, "value": float(mv.value)}

        doc = {
            "schema": "mlpc-report-v1",
            "model_id": self.model_id,
            "dataset_id": self.dataset_id,
            "config": dict(self.config),
            "population": dict(self.population),
            "metrics": {
                "top1": acc(self.top1),
                "real": acc(self.real),
                "asma": {
                    "count": self.subgroups.total_images,
                    "rational": self.subgroups.asma,
                    "value": float(self.subgroups.asma),
                },
            },
            "subgroups": {
                "mode": self.subgroups.mode.value,
                "included_groups": list(self.subgroups.included_groups),
                "per_group": [
                    {"g": g, "count": stat.count, "rational": stat.value,
                     "value": float(stat.value)}
                    for g, stat in sorted(self.subgroups.per_group.items())
                ],
            },
        }
        if self.provenance is not None:
            doc["provenance"] = self.provenance
        return doc

    def canonical_json(self) -> str:
        return canonical_json(self.to_dict(), indent=2) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.canonical_json(), encoding="utf-8")


def _check_population_policy(policy: str) -> None:
    if policy not in POPULATION_POLICIES:
        raise ValueError(f"unknown population policy {policy!r}")


def _strict_mismatch(preds_ids, other_ids, what: str) -> None:
    missing = sorted(other_ids - preds_ids)[:3]
    extra = sorted(preds_ids - other_ids)[:3]
    raise EvaluationError(
        f"strict population check failed: predictions and {what} cover different "
        f"images (e.g. missing from predictions: {missing}, "
        f"missing from {what}: {extra})")


def top1_accuracy(preds: PredictionDataset, gt: dict[str, int], *,
                  population: str = "intersection") -> MetricValue:
    """Share of images whose highest-ranked class equals the single label."""
    _check_population_policy(population)
    if population == "strict" and preds.records.keys() != gt.keys():
        _strict_mismatch(preds.records.keys(), gt.keys(), "single-label ground truth")
    hits = 0
    count = 0
    for image_id, record in preds.records.items():
        label = gt.get(image_id)
        if label is None:
            continue
        count += 1
        if record[0][0] == label:
            hits += 1
    if count == 0:
        raise EvaluationError("empty evaluation population for top-1 accuracy")
    return MetricValue(Fraction(hits, count), count)


def real_accuracy(preds: PredictionDataset, store: AnnotationStore,
                  empty_policy: str = "exclude", *,
                  population: str = "intersection") -> MetricValue:
    """Share of images whose highest-ranked class is any plausible label.

    Images with an empty plausible set are dropped (``empty_policy="exclude"``)
    or kept as guaranteed misses (``"count_as_miss"``).
    """
    _check_population_policy(population)
    if empty_policy not in EMPTY_POLICIES:
        raise ValueError(f"unknown empty policy {empty_policy!r}")
    if population == "strict" and preds.records.keys() != store.entries.keys():
        _strict_mismatch(preds.records.keys(), store.entries.keys(), "annotations")
    hits = 0
    count = 0
    for image_id, record in preds.records.items():
        labels = store.entries.get(image_id)
        if labels is None:
            continue
        if not labels and empty_policy == "exclude":
            continue
        count += 1
        if record[0][0] in labels:
            hits += 1
    if count == 0:
        raise EvaluationError("empty evaluation population for plausible-set accuracy")
    return MetricValue(Fraction(hits, count), count)


def variable_topk_sets(preds: PredictionDataset, store: AnnotationStore, *,
                       population: str = "intersection") -> dict[str, frozenset[int]]:
    """Per image, the set of its ``k`` highest-ranked classes, ``k`` = label count.

    Images with zero ground-truth labels map to the empty set.  Raises
    :class:`InsufficientDepthError` (naming the image) when any required ``k``
    exceeds the stored ranking depth.
    """
    _check_population_policy(population)
    if population == "strict" and preds.records.keys() != store.entries.keys():
        _strict_mismatch(preds.records.keys(), store.entries.keys(), "annotations")
    out: dict[str, frozenset[int]] = {}
    for image_id, (classes, _scores) in preds.records.items():
        labels = store.entries.get(image_id)
        if labels is None:
            continue
        k = len(labels)
        if k == 0:
            out[image_id] = frozenset()
            continue
        if k > len(classes):
            raise InsufficientDepthError(required=k, available=len(classes),
                                         image_id=image_id)
        out[image_id] = frozenset(classes[:k])
    return out


def labelwise_accuracy(gt_set, pred_set, num_classes: int,
                       mode: LabelwiseMode) -> Fraction:
    """Agreement between a ground-truth set and a predicted set (see module doc)."""
    gt = frozenset(gt_set)
    pred = frozenset(pred_set)
    for label in gt | pred:
        if not 0 <= label < num_classes:
            raise ValueError(f"class id {label} out of range [0, {num_classes})")
    mode = LabelwiseMode(mode)
    if mode is LabelwiseMode.LITERAL_HAMMING:
        return Fraction(num_classes - len(gt ^ pred), num_classes)
    inter = len(gt & pred)
    if mode is LabelwiseMode.JACCARD:
        union = len(gt | pred)
        return Fraction(inter, union) if union else Fraction(1)
    if not gt:
        return Fraction(1)
    return Fraction(inter, len(gt))


def _group_sums(preds: PredictionDataset, store: AnnotationStore, mode: LabelwiseMode,
                min_group: int, max_group: int | None):
    """Accumulate integer numerators per (group, denominator).

    Exploits ``|pred| = k = |gt|`` for variable top-k sets: with ``m`` labels
    missed, the per-image value is ``(C - 2m)/C`` (literal), ``(k-m)/(k+m)``
    (jaccard) or ``(k-m)/k`` (recall), so only the intersection size is needed.
    """
    num_classes = preds.num_classes
    entries = store.entries
    sums: dict[int, dict[int, int]] = {}
    counts: dict[int, int] = {}
    for image_id, (classes, _scores) in preds.records.items():
        labels = entries.get(image_id)
        if labels is None:
            continue
        g = len(labels)
        if g < min_group or (max_group is not None and g > max_group):
            continue
        if g > len(classes):
            raise InsufficientDepthError(required=g, available=len(classes),
                                         image_id=image_id)
        inter = 0
        for c in classes[:g]:
            if c in labels:
                inter += 1
        if mode is LabelwiseMode.LITERAL_HAMMING:
            num, den = num_classes - 2 * (g - inter), num_classes
        elif mode is LabelwiseMode.JACCARD:
            num, den = (inter, 2 * g - inter) if g else (1, 1)
        else:
            num, den = (inter, g) if g else (1, 1)
        bucket = sums.setdefault(g, {})
        bucket[den] = bucket.get(den, 0) + num
        counts[g] = counts.get(g, 0) + 1
    return sums, counts


def subgroup_breakdown(preds: PredictionDataset, store: AnnotationStore,
                       mode: LabelwiseMode = LabelwiseMode.LITERAL_HAMMING, *,
                       min_group: int = 1, max_group: int | None = None,
                       population: str = "intersection") -> SubgroupBreakdown:
    """Per-label-count accuracy ``A_g`` and their unweighted mean (ASMA).

    Only non-empty groups inside ``[min_group, max_group]`` enter the average;
    ``included_groups`` records exactly which, so the group count is auditable.
    """
    _check_population_policy(population)
    mode = LabelwiseMode(mode)
    if min_group < 0:
        raise ValueError("min_group must be >= 0")
    if max_group is not None and max_group < min_group:
        raise ValueError("max_group must be >= min_group")
    if population == "strict" and preds.records.keys() != store.entries.keys():
        _strict_mismatch(preds.records.keys(), store.entries.keys(), "annotations")
    sums, counts = _group_sums(preds, store, mode, min_group, max_group)
    if not counts:
        raise EvaluationError(
            f"no non-empty label-count groups in range [{min_group}, {max_group}]")
    per_group: dict[int, GroupStat] = {}
    for g in sorted(counts):
        total = sum(Fraction(num, den) for den, num in sorted(sums[g].items()))
        per_group[g] = GroupStat(counts[g], total / counts[g])
    included = tuple(sorted(per_group))
    asma = sum(per_group[g].value for g in included) / len(included)
    return SubgroupBreakdown(per_group=per_group, asma=asma, mode=mode,
                             included_groups=included)


def evaluate(preds: PredictionDataset, store: AnnotationStore,
             single_label_gt: dict[str, int] | None = None, *,
             mode: LabelwiseMode = LabelwiseMode.LITERAL_HAMMING,
             empty_policy: str = "exclude",
             population: str = "intersection",
             min_group: int = 1, max_group: int | None = None,
             allow_dataset_mismatch: bool = False) -> MetricReport:
    """Bundle top-1 (when a single-label map is given), plausible-set accuracy
    and the subgroup breakdown into one deterministic report.

    Identical inputs produce byte-identical canonical JSON.
    """
    if preds.dataset_id != store.dataset_id and not allow_dataset_mismatch:
        raise EvaluationError(
            f"prediction dataset_id '{preds.dataset_id}' does not match annotation "
            f"dataset_id '{store.dataset_id}' (pass allow_dataset_mismatch to override)")
    if preds.num_classes != store.num_classes:
        raise EvaluationError(
            f"num_classes mismatch: predictions declare {preds.num_classes}, "
            f"annotations declare {store.num_classes}")
    if single_label_gt is not None:
        for image_id, label in single_label_gt.items():
            if not 0 <= label < store.num_classes:
                raise EvaluationError(
                    f"single-label ground truth for '{image_id}' out of range: {label}")
    top1 = None
    if single_label_gt is not None:
        top1 = top1_accuracy(preds, single_label_gt, population=population)
    real = real_accuracy(preds, store, empty_policy, population=population)
    subgroups = subgroup_breakdown(preds, store, mode, min_group=min_group,
                                   max_group=max_group, population=population)
    config = {
        "labelwise_mode": LabelwiseMode(mode).value,
        "empty_policy": empty_policy,
        "population_policy": population,
        "min_group": min_group,
        "max_group": max_group,
        "depth": preds.depth,
        "num_classes": preds.num_classes,
    }
    pop = {
        "predictions": len(preds.records),
        "annotations": len(store.entries),
        "evaluated": {
            "top1": top1.count if top1 is not None else None,
            "real": real.count,
            "subgroups": subgroups.total_images,
        },
    }
    return MetricReport(model_id=preds.model_id, dataset_id=preds.dataset_id,
                        config=config, population=pop, top1=top1, real=real,
                        subgroups=subgroups)


def single_label_map(store: AnnotationStore) -> dict[str, int]:
    """Convert a store whose entries are all singletons into an id -> class map."""
    out: dict[str, int] = {}
    for image_id, labels in store.entries.items():
        if len(labels) != 1:
            raise EvaluationError(
                f"single-label ground truth requires exactly one label per image; "
                f"'{image_id}' has {len(labels)}")
        (out[image_id],) = labels
    return out


# ---------------------------------------------------------------------------
# Parallel evaluation of many models against one annotation store.
# ---------------------------------------------------------------------------

_SHARED: dict = {}


def max_workers_from_env(requested: int | None = None) -> int:
    """Worker count, capped by the MLPC_THREADS environment variable."""
    cap = os.environ.get("MLPC_THREADS")
    workers = requested if requested is not None else (os.cpu_count() or 1)
    if cap is not None:
        workers = min(workers, max(1, int(cap)))
    return max(1, workers)


def _evaluate_shared(index: int) -> MetricReport:
    job = _SHARED
    return evaluate(job["preds"][index], job["store"], job["single_label_gt"],
                    **job["kwargs"])


def evaluate_many(preds_list: list[PredictionDataset], store: AnnotationStore,
                  single_label_gt: dict[str, int] | None = None, *,
                  max_workers: int | None = None, **kwargs) -> list[MetricReport]:
    """Evaluate several models against one store, in input order.

    Uses process workers (fork when available) because the metric loops are
    CPU-bound; each report is independent so results are identical to the
    sequential path regardless of scheduling.
    """
    workers = max_workers_from_env(max_workers)
    if workers == 1 or len(preds_list) <= 1:
        return [evaluate(p, store, single_label_gt, **kwargs) for p in preds_list]
    global _SHARED
    _SHARED = {"preds": preds_list, "store": store,
               "single_label_gt": single_label_gt, "kwargs": kwargs}
    try:
        import multiprocessing

        try:
            ctx = multiprocessing.get_context("fork")
        except ValueError:  # pragma: no cover - non-fork platforms
            ctx = multiprocessing.get_context()
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            return list(pool.map(_evaluate_shared, range(len(preds_list))))
    finally:
        _SHARED = {}
