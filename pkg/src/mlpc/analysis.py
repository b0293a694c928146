"""Cross-model, cross-dataset report analysis.

All functions here consume report documents — the parsed form of the
canonical report JSON (``MetricReport.to_dict()`` or ``load_report``).
Accuracy values are read back as exact rationals, so differences, ranks and
means are computed without floating-point drift; notably a zero gap is an
exact zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import MlpcError

METRIC_NAMES = ("top1", "real", "asma")


class AnalysisError(MlpcError):
    """Missing metrics, empty intersections, or inconsistent report sets."""


def load_report(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _as_doc(report) -> dict:
    if hasattr(report, "to_dict"):
        return report.to_dict()
    return report


def _fraction_of(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    num, den = value
    return Fraction(num, den)


def metric_fraction(report: dict, metric: str) -> Fraction:
    """Exact value of a named metric from a report document."""
    if metric not in METRIC_NAMES:
        raise AnalysisError(f"unknown metric {metric!r}; expected one of {METRIC_NAMES}")
    entry = _as_doc(report).get("metrics", {}).get(metric)
    if entry is None:
        raise AnalysisError(
            f"metric '{metric}' missing from report for "
            f"'{_as_doc(report).get('model_id', '?')}'")
    return _fraction_of(entry["rational"])


def _by_model(reports) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for report in reports:
        doc = _as_doc(report)
        model_id = doc["model_id"]
        if model_id in out:
            raise AnalysisError(f"duplicate report for model '{model_id}'; "
                                f"aggregate seeds first")
        out[model_id] = doc
    return out


# ---------------------------------------------------------------------------
# Accuracy gaps between two datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GapRecord:
    model_id: str
    metric: str
    value_a: Fraction
    value_b: Fraction

    @property
    def difference(self) -> Fraction:
        # always recomputed from the stored values, never trusted from input
        return self.value_a - self.value_b


@dataclass(frozen=True)
class GapSummary:
    count: int
    min_difference: Fraction
    max_difference: Fraction
    count_below_1pct: int


def gap_analysis(reports_a, reports_b, metric: str) -> tuple[list[GapRecord], GapSummary]:
    """Per-model accuracy difference (a minus b) for one metric.

    Only models present in both report sets are compared; records are ordered
    by value on the first set (descending, id tiebreak) to match model-sorted
    plots.
    """
    docs_a = _by_model(reports_a)
    docs_b = _by_model(reports_b)
    common = sorted(docs_a.keys() & docs_b.keys())
    if not common:
        raise AnalysisError("no models in common between the two report sets")
    records = [
        GapRecord(model_id=m, metric=metric,
                  value_a=metric_fraction(docs_a[m], metric),
                  value_b=metric_fraction(docs_b[m], metric))
        for m in common
    ]
    records.sort(key=lambda r: (-r.value_a, r.model_id))
    diffs = [r.difference for r in records]
    summary = GapSummary(
        count=len(records),
        min_difference=min(diffs),
        max_difference=max(diffs),
        count_below_1pct=sum(1 for d in diffs if abs(d) < Fraction(1, 100)),
    )
    return records, summary


def gap_document(records: list[GapRecord], summary: GapSummary) -> dict:
    """Canonical-JSON-ready gap analysis artifact."""
    return {
        "schema": "mlpc-gaps-v1",
        "metric": records[0].metric if records else None,
        "records": [{
            "model_id": r.model_id,
            "value_a": r.value_a, "value_b": r.value_b,
            "difference": r.difference,
            "difference_value": float(r.difference),
        } for r in records],
        "summary": {
            "count": summary.count,
            "min_difference": summary.min_difference,
            "max_difference": summary.max_difference,
            "count_below_1pct": summary.count_below_1pct,
        },
    }


# ---------------------------------------------------------------------------
# Rankings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankRow:
    model_id: str
    primary_value: Fraction
    primary_rank: int
    baseline_value: Fraction
    baseline_rank: int

    @property
    def delta_rank(self) -> int:
        # positive when the model improves under the primary metric
        return self.baseline_rank - self.primary_rank


@dataclass(frozen=True)
class RankTable:
    primary_metric: str
    baseline_metric: str
    rows: tuple[RankRow, ...]

    def to_dict(self) -> dict:
        return {
            "schema": "mlpc-ranks-v1",
            "primary_metric": self.primary_metric,
            "baseline_metric": self.baseline_metric,
            "rows": [{
                "model_id": r.model_id,
                "primary_value": r.primary_value, "primary_rank": r.primary_rank,
                "baseline_value": r.baseline_value, "baseline_rank": r.baseline_rank,
                "delta_rank": r.delta_rank,
            } for r in self.rows],
        }

    def to_csv_text(self) -> str:
        lines = ["model_id,primary_metric,primary_value,primary_rank,"
                 "baseline_metric,baseline_value,baseline_rank,delta_rank"]
        for r in self.rows:
            lines.append(
                f"{r.model_id},{self.primary_metric},{float(r.primary_value):.6f},"
                f"{r.primary_rank},{self.baseline_metric},"
                f"{float(r.baseline_value):.6f},{r.baseline_rank},{r.delta_rank}")
        return "\n".join(lines) + "\n"


def _competition_ranks(values: dict[str, Fraction]) -> dict[str, int]:
    """1-based ranks, descending by value; equal values share the lower rank."""
    ordered = sorted(values.items(), key=lambda kv: (-kv[1], kv[0]))
    ranks: dict[str, int] = {}
    for position, (model_id, value) in enumerate(ordered, start=1):
        prev = ordered[position - 2] if position > 1 else None
        if prev is not None and prev[1] == value:
            ranks[model_id] = ranks[prev[0]]
        else:
            ranks[model_id] = position
    return ranks


def rank_table(reports, primary: str, baseline: str) -> RankTable:
    """Rank models by ``primary`` (descending) with their ``baseline`` ranks.

    ``delta_rank = baseline_rank - primary_rank``: +13 means the model sits 13
    places higher under the primary metric than under the baseline.
    """
    docs = _by_model(reports)
    if len(docs) < 2:
        raise AnalysisError("ranking requires at least two models")
    primary_values = {m: metric_fraction(d, primary) for m, d in docs.items()}
    baseline_values = {m: metric_fraction(d, baseline) for m, d in docs.items()}
    primary_ranks = _competition_ranks(primary_values)
    baseline_ranks = _competition_ranks(baseline_values)
    order = sorted(docs, key=lambda m: (-primary_values[m], m))
    rows = tuple(
        RankRow(model_id=m,
                primary_value=primary_values[m], primary_rank=primary_ranks[m],
                baseline_value=baseline_values[m], baseline_rank=baseline_ranks[m])
        for m in order)
    return RankTable(primary_metric=primary, baseline_metric=baseline, rows=rows)


# ---------------------------------------------------------------------------
# Subgroup exports and multi-seed aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubgroupRow:
    model_id: str
    dataset_id: str
    label_count: int
    accuracy: Fraction
    mode: str


def subgroup_export(reports, *, min_label_count: int | None = None,
                    max_label_count: int | None = None) -> list[SubgroupRow]:
    """Long-form (model, dataset, label count, accuracy) rows for plotting."""
    rows: list[SubgroupRow] = []
    for report in reports:
        doc = _as_doc(report)
        sub = doc["subgroups"]
        dataset_id = doc.get("dataset_id") or "+".join(doc.get("dataset_ids", []))
        for group in sub["per_group"]:
            g = group["g"]
            if min_label_count is not None and g < min_label_count:
                continue
            if max_label_count is not None and g > max_label_count:
                continue
            rows.append(SubgroupRow(
                model_id=doc["model_id"], dataset_id=dataset_id,
                label_count=g, accuracy=_fraction_of(group["rational"]),
                mode=sub["mode"]))
    rows.sort(key=lambda r: (r.model_id, r.dataset_id, r.label_count))
    return rows


def subgroup_csv_text(rows: list[SubgroupRow]) -> str:
    lines = ["model_id,dataset_id,label_count,accuracy,mode"]
    for r in rows:
        lines.append(f"{r.model_id},{r.dataset_id},{r.label_count},"
                     f"{float(r.accuracy):.6f},{r.mode}")
    return "\n".join(lines) + "\n"


_AGG_CONFIG_KEYS = ("labelwise_mode", "empty_policy", "population_policy",
                    "min_group", "max_group", "num_classes")


def multiseed_aggregate(reports) -> dict:
    """Average one model's reports across dataset seeds.

    Exact arithmetic means of ASMA, of top-1/plausible-set accuracy (when
    present in every seed report), and of each per-group accuracy over the
    seeds where that group occurred.  All seed reports must share the same
    model and evaluation config.
    """
    docs = [_as_doc(r) for r in reports]
    if not docs:
        raise AnalysisError("no reports to aggregate")
    model_ids = {d["model_id"] for d in docs}
    if len(model_ids) != 1:
        raise AnalysisError(f"aggregation mixes models: {sorted(model_ids)}")
    configs = {tuple((k, json.dumps(d["config"].get(k))) for k in _AGG_CONFIG_KEYS)
               for d in docs}
    if len(configs) != 1:
        raise AnalysisError("aggregation requires identical evaluation configs "
                            "across seed reports")

    def mean(fractions: list[Fraction]) -> Fraction:
        return sum(fractions, Fraction(0)) / len(fractions)

    metrics: dict = {}
    for name in METRIC_NAMES:
        entries = [d["metrics"].get(name) for d in docs]
        if any(e is None for e in entries):
            metrics[name] = None
            continue
        value = mean([_fraction_of(e["rational"]) for e in entries])
        metrics[name] = {"rational": value, "value": float(value),
                         "seed_count": len(entries)}

    group_values: dict[int, list[Fraction]] = {}
    for d in docs:
        for group in d["subgroups"]["per_group"]:
            group_values.setdefault(group["g"], []).append(_fraction_of(group["rational"]))
    per_group = [
        {"g": g, "seed_count": len(vals), "rational": mean(vals),
         "value": float(mean(vals))}
        for g, vals in sorted(group_values.items())
    ]
    return {
        "schema": "mlpc-multiseed-v1",
        "model_id": docs[0]["model_id"],
        "dataset_ids": sorted(d["dataset_id"] for d in docs),
        "seed_count": len(docs),
        "config": {k: docs[0]["config"].get(k) for k in _AGG_CONFIG_KEYS},
        "metrics": metrics,
        "subgroups": {
            "mode": docs[0]["subgroups"]["mode"],
            "included_groups": sorted(group_values),
            "per_group": per_group,
        },
    }


def aggregate_by_model(reports) -> list[dict]:
    """Group reports by model id and aggregate each group across seeds."""
    grouped: dict[str, list[dict]] = {}
    for report in reports:
        doc = _as_doc(report)
        grouped.setdefault(doc["model_id"], []).append(doc)
    return [multiseed_aggregate(group) for _, group in sorted(grouped.items())]
