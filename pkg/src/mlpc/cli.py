"""Command-line interface.

Subcommands: ``evaluate``, ``compose``, ``compare``, ``rank``, ``subgroups``,
``convert``.  Exit codes are stable API: 0 success, 2 usage/config error,
3 data error, 4 insufficient ranking depth.  Errors are emitted as one-line
JSON on stderr.  All randomness enters through ``--seed``; there is no
wall-clock seeding, and outputs (provenance included) are byte-identical
across reruns with identical inputs and flags.  ``MLPC_THREADS`` caps worker
parallelism.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import (aggregate_by_model, gap_analysis, gap_document, load_report,
                       rank_table, subgroup_csv_text, subgroup_export)
from .annotations import load_annotations
from .canonical import canonical_json
from .composer import ComposerConfig, build_pool, generate, write_dataset
from .errors import InsufficientDepthError, MlpcError
from .metrics import (LabelwiseMode, evaluate_many, single_label_map)
from .plots import render_gap_svg, render_subgroup_box_svg
from .predictions import (load_predictions, load_predictions_binary,
                          write_predictions, write_predictions_binary)
from .provenance import build_provenance, write_sidecar

log = logging.getLogger("mlpc")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DEPTH = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlpc",
                                     description="multi-label-aware classifier "
                                                 "evaluation and dataset tooling")
    parser.add_argument("--version", action="version", version=f"mlpc {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="compute a metric report for model predictions")
    p.add_argument("--predictions", action="append", required=True,
                   help="prediction JSONL (repeatable for several models)")
    p.add_argument("--annotations", required=True)
    p.add_argument("--annotation-format", choices=("jsonl", "real_adapter"),
                   default="jsonl")
    p.add_argument("--num-classes", type=int, help="required for real_adapter input")
    p.add_argument("--dataset-id", help="required for real_adapter input")
    p.add_argument("--id-template", default="val_{index:08}")
    p.add_argument("--gt-single", help="single-label annotation JSONL for top-1")
    p.add_argument("--mode", choices=[m.value for m in LabelwiseMode],
                   default=LabelwiseMode.LITERAL_HAMMING.value)
    p.add_argument("--empty-policy", choices=("exclude", "count_as_miss"),
                   default="exclude")
    p.add_argument("--population", choices=("intersection", "strict"),
                   default="intersection")
    p.add_argument("--min-group", type=int, default=1)
    p.add_argument("--max-group", type=int, default=None)
    p.add_argument("--allow-dataset-mismatch", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True,
                   help="report file (one model) or directory (several)")

    p = sub.add_parser("compose", help="generate composite multi-label datasets")
    p.add_argument("--patches", required=True, help="patch manifest JSONL")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--configs", default="2:256,3:256,4:256,6:170,9:128",
                   help="comma-separated k:p pairs")
    p.add_argument("--canvas", type=int, default=512)
    p.add_argument("--seed", type=int, action="append", required=True,
                   help="repeatable; one dataset variant per seed")
    p.add_argument("--distinct-labels", action="store_true")
    p.add_argument("--pool-policy", choices=("fresh_per_config", "shared"),
                   default="fresh_per_config")
    p.add_argument("--num-classes", type=int, default=1000)
    p.add_argument("--dataset-prefix", default="patchml")
    p.add_argument("--manifest-only", action="store_true",
                   help="skip image rendering, write manifests only")

    p = sub.add_parser("compare", help="per-model accuracy gaps between two report sets")
    p.add_argument("--a", required=True, help="directory of report JSON files")
    p.add_argument("--b", required=True, help="directory of report JSON files")
    p.add_argument("--metric", choices=("top1", "real", "asma"), required=True)
    p.add_argument("--out", required=True, help="gap JSON output")
    p.add_argument("--svg", help="optional SVG rendering")

    p = sub.add_parser("rank", help="rank models by one metric against a baseline")
    p.add_argument("--reports", required=True, help="directory of report JSON files")
    p.add_argument("--primary", choices=("top1", "real", "asma"), required=True)
    p.add_argument("--baseline", choices=("top1", "real", "asma"), required=True)
    p.add_argument("--multiseed", action="store_true",
                   help="average reports per model across seeds first")
    p.add_argument("--out", required=True, help=".csv or .json output")

    p = sub.add_parser("subgroups", help="long-form per-label-count accuracy export")
    p.add_argument("--reports", required=True, help="directory of report JSON files")
    p.add_argument("--min-label-count", type=int, default=None)
    p.add_argument("--max-label-count", type=int, default=None)
    p.add_argument("--multiseed", action="store_true")
    p.add_argument("--out", required=True, help="CSV output")
    p.add_argument("--svg", help="optional box-plot SVG")

    p = sub.add_parser("convert", help="convert predictions between JSONL and binary")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", dest="dst", required=True)
    p.add_argument("--to", choices=("jsonl", "binary"), default=None,
                   help="target format (default: inferred from --out extension)")
    return parser


def _flags(args: argparse.Namespace) -> dict:
    # output destinations are excluded: they do not affect computed content,
    # so runs into different directories stay byte-identical
    skip = {"command", "verbose", "out", "svg", "dst"}
    out = {}
    for key, value in vars(args).items():
        if key in skip:
            continue
        out[key.replace("_", "-")] = value
    return out


def _load_reports_dir(path: str) -> list[dict]:
    directory = Path(path)
    if not directory.is_dir():
        raise MlpcError(f"not a directory of reports: {path}")
    files = sorted(directory.glob("*.json"))
    reports = [load_report(f) for f in files]
    if not reports:
        raise MlpcError(f"no report JSON files found in {path}")
    return reports


def _cmd_evaluate(args) -> int:
    store = load_annotations(args.annotations, args.annotation_format,
                             num_classes=args.num_classes, dataset_id=args.dataset_id,
                             id_template=args.id_template)
    gt = None
    if args.gt_single:
        gt = single_label_map(load_annotations(args.gt_single))
    preds_list = [load_predictions(p) for p in args.predictions]
    reports = evaluate_many(
        preds_list, store, gt, max_workers=args.workers,
        mode=LabelwiseMode(args.mode), empty_policy=args.empty_policy,
        population=args.population, min_group=args.min_group,
        max_group=args.max_group,
        allow_dataset_mismatch=args.allow_dataset_mismatch)
    out = Path(args.out)
    multi = len(reports) > 1
    if multi:
        out.mkdir(parents=True, exist_ok=True)
    for pred_path, report in zip(args.predictions, reports):
        inputs = [pred_path, args.annotations] + ([args.gt_single] if args.gt_single else [])
        prov = build_provenance("evaluate", _flags(args), inputs, __version__)
        report = dataclasses.replace(report, provenance=prov)
        target = out / f"{report.model_id}.json" if multi else out
        report.write(target)
        log.info("wrote %s", target)
    return EXIT_OK


def _parse_configs(text: str) -> tuple[tuple[int, int], ...]:
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            k_str, p_str = item.split(":")
            pairs.append((int(k_str), int(p_str)))
        except ValueError:
            raise ValueError(f"bad config entry {item!r}; expected k:p") from None
    if not pairs:
        raise ValueError("no (k, p) pairs given")
    return tuple(pairs)


def _cmd_compose(args) -> int:
    configs = _parse_configs(args.configs)
    pool = build_pool(args.patches, num_classes=args.num_classes)
    for seed in args.seed:
        config = ComposerConfig(seed=seed, configs=configs, canvas_size=args.canvas,
                                distinct_labels=args.distinct_labels,
                                pool_policy=args.pool_policy)
        dataset_id = f"{args.dataset_prefix}-seed{seed}"
        manifest = generate(config, pool, num_classes=args.num_classes,
                            dataset_id=dataset_id)
        target = Path(args.out) / dataset_id
        write_dataset(manifest, pool, target, write_images=not args.manifest_only)
        prov = build_provenance("compose", _flags(args), [args.patches], __version__)
        (target / "provenance.json").write_text(
            canonical_json(prov, indent=2) + "\n", encoding="utf-8")
        log.info("wrote %s (%d composites)", target, len(manifest.entries))
    return EXIT_OK


def _cmd_compare(args) -> int:
    records, summary = gap_analysis(_load_reports_dir(args.a),
                                    _load_reports_dir(args.b), args.metric)
    doc = gap_document(records, summary)
    doc["provenance"] = build_provenance(
        "compare", _flags(args),
        sorted(Path(args.a).glob("*.json")) + sorted(Path(args.b).glob("*.json")),
        __version__)
    Path(args.out).write_text(canonical_json(doc, indent=2) + "\n", encoding="utf-8")
    if args.svg:
        render_gap_svg(records, args.svg)
        write_sidecar(doc["provenance"], args.svg)
    return EXIT_OK


def _cmd_rank(args) -> int:
    reports = _load_reports_dir(args.reports)
    if args.multiseed:
        reports = aggregate_by_model(reports)
    table = rank_table(reports, args.primary, args.baseline)
    prov = build_provenance("rank", _flags(args),
                            sorted(Path(args.reports).glob("*.json")), __version__)
    out = Path(args.out)
    if out.suffix == ".json":
        doc = table.to_dict()
        doc["provenance"] = prov
        out.write_text(canonical_json(doc, indent=2) + "\n", encoding="utf-8")
    else:
        out.write_text(table.to_csv_text(), encoding="utf-8")
        write_sidecar(prov, out)
    return EXIT_OK


def _cmd_subgroups(args) -> int:
    reports = _load_reports_dir(args.reports)
    if args.multiseed:
        reports = aggregate_by_model(reports)
    rows = subgroup_export(reports, min_label_count=args.min_label_count,
                           max_label_count=args.max_label_count)
    prov = build_provenance("subgroups", _flags(args),
                            sorted(Path(args.reports).glob("*.json")), __version__)
    Path(args.out).write_text(subgroup_csv_text(rows), encoding="utf-8")
    write_sidecar(prov, args.out)
    if args.svg:
        render_subgroup_box_svg(rows, args.svg)
        write_sidecar(prov, args.svg)
    return EXIT_OK


def _cmd_convert(args) -> int:
    target = args.to
    if target is None:
        suffix = Path(args.dst).suffix.lower()
        if suffix == ".jsonl":
            target = "jsonl"
        elif suffix == ".mlpc":
            target = "binary"
        else:
            raise ValueError(f"cannot infer target format from {args.dst!r}; pass --to")
    src = Path(args.src)
    with open(src, "rb") as fh:
        is_binary = fh.read(5) == b"MLPC1"
    preds = load_predictions_binary(src) if is_binary else load_predictions(src)
    if target == "jsonl":
        write_predictions(preds, args.dst)
    else:
        write_predictions_binary(preds, args.dst)
    write_sidecar(build_provenance("convert", _flags(args), [args.src], __version__),
                  args.dst)
    return EXIT_OK


_COMMANDS = {
    "evaluate": _cmd_evaluate,
    "compose": _cmd_compose,
    "compare": _cmd_compare,
    "rank": _cmd_rank,
    "subgroups": _cmd_subgroups,
    "convert": _cmd_convert,
}


def _fail(code: int, exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return _COMMANDS[args.command](args)
    except InsufficientDepthError as exc:
        return _fail(EXIT_DEPTH, exc)
    except ValueError as exc:
        return _fail(EXIT_USAGE, exc)
    except MlpcError as exc:
        return _fail(EXIT_DATA, exc)
    except OSError as exc:
        return _fail(EXIT_DATA, exc)


if __name__ == "__main__":
    sys.exit(main())
