"""CLI for exporting classifier predictions over an image directory."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .export import AdapterConfig, export_predictions
from .presets import PRESETS


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlpc-adapter",
        description="run a pretrained classifier over an image directory and "
                    "export ranked top-M predictions as prediction JSONL")
    parser.add_argument("--version", action="version",
                        version=f"mlpc-adapter {__version__}")
    parser.add_argument("--model", required=True,
                        help="zoo model name, TorchScript path, or stub:<seed>")
    parser.add_argument("--images", required=True, help="input image directory")
    parser.add_argument("--out", required=True, help="prediction JSONL output")
    parser.add_argument("--dataset-id", required=True)
    parser.add_argument("--model-id", default=None,
                        help="override the model_id recorded in the header")
    parser.add_argument("--num-classes", type=int, default=None,
                        help="class count (required for stub models)")
    parser.add_argument("--depth", type=int, default=20,
                        help="ranked entries retained per image")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--preset", default="imagenet-224", choices=sorted(PRESETS))
    parser.add_argument("--id-rule", default="{stem}",
                        help="image id template over {stem} and {name}")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        config = AdapterConfig(
            model=args.model, input_dir=args.images, output_path=args.out,
            dataset_id=args.dataset_id, model_id=args.model_id,
            num_classes=args.num_classes, depth=args.depth,
            batch_size=args.batch_size, preset=args.preset, id_rule=args.id_rule)
        summary = export_predictions(config)
    except ValueError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)},
                         sort_keys=True), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - boundary: report and exit nonzero
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)},
                         sort_keys=True), file=sys.stderr)
        return 3
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
