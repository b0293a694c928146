"""Golden-file checks: byte-identical reports and SVG renderings."""

from pathlib import Path

from mlpc import (LabelwiseMode, evaluate, gap_analysis, load_annotations,
                  load_predictions, single_label_map, subgroup_export)
from mlpc.plots import render_gap_svg, render_subgroup_box_svg

FIXTURE = Path(__file__).parent / "data" / "fixture_small"
GOLDEN = Path(__file__).parent / "data" / "golden"


def fixture_report(name: str):
    store = load_annotations(FIXTURE / "annotations.jsonl")
    gt = single_label_map(load_annotations(FIXTURE / "gt_single.jsonl"))
    preds = load_predictions(FIXTURE / f"predictions_{name}.jsonl")
    return evaluate(preds, store, gt, mode=LabelwiseMode.JACCARD)


def test_report_bytes_match_frozen_golden():
    report = fixture_report("alpha")
    expected = (FIXTURE / "expected_report_alpha.json").read_text(encoding="utf-8")
    assert report.canonical_json() == expected


def test_report_regeneration_is_byte_stable():
    first = fixture_report("alpha").canonical_json()
    second = fixture_report("alpha").canonical_json()
    assert first == second


def test_gap_svg_matches_frozen_golden(tmp_path):
    reports_a = [fixture_report("alpha").to_dict(), fixture_report("beta").to_dict()]
    reports_b = [fixture_report("alpha_b").to_dict(), fixture_report("beta_b").to_dict()]
    records, _ = gap_analysis(reports_a, reports_b, "top1")
    out = tmp_path / "gaps.svg"
    render_gap_svg(records, out)
    assert out.read_bytes() == (GOLDEN / "gaps.svg").read_bytes()


def test_subgroup_svg_matches_frozen_golden(tmp_path):
    reports = [fixture_report("alpha").to_dict(), fixture_report("beta").to_dict()]
    rows = subgroup_export(reports)
    out = tmp_path / "subgroups.svg"
    render_subgroup_box_svg(rows, out)
    assert out.read_bytes() == (GOLDEN / "subgroups.svg").read_bytes()
