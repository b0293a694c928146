"""Batch inference over an image directory, exported as prediction JSONL.

Output follows the evaluation engine's wire format exactly: a meta header
line, then per image the top-M class ids and softmax scores as parallel
arrays, ordered by descending score with ties broken by ascending class id.
Scores are float32.  Records are written in sorted-id order and all JSON is
compact with sorted keys, so a rerun with identical inputs and flags is
byte-identical.

Images that fail to decode are skipped with a warning; every run writes a
skip manifest (``<output>.skipped.json``) naming them, empty when none.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .models import load_model
from .presets import PRESETS, preprocess

log = logging.getLogger("mlpc_adapter")

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".webp")


@dataclass(frozen=True)
class AdapterConfig:
    model: str                      # zoo name, TorchScript path, or "stub:<seed>"
    input_dir: str
    output_path: str
    dataset_id: str
    model_id: str | None = None    # defaults to a sanitized model spec
    num_classes: int | None = None  # required for stub models
    depth: int = 20
    batch_size: int = 32
    preset: str = "imagenet-224"
    id_rule: str = "{stem}"
    extra_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; "
                             f"known: {sorted(PRESETS)}")

    def resolved_model_id(self) -> str:
        if self.model_id:
            return self.model_id
        spec = self.model
        if spec.startswith("stub:"):
            return spec.replace(":", "-")
        return Path(spec).stem if "/" in spec or "\\" in spec else spec


def _discover_images(input_dir: Path) -> list[Path]:
    files = [p for p in input_dir.iterdir()
             if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS]
    return sorted(files, key=lambda p: p.name)


def _topm(probs: np.ndarray, depth: int) -> tuple[list[int], list[float]]:
    order = np.lexsort((np.arange(probs.shape[0]), -probs))[:depth]
    classes = [int(c) for c in order]
    scores = [float(np.float32(probs[c])) for c in order]
    return classes, scores


def export_predictions(config: AdapterConfig) -> dict:
    """Run the model over the directory and write prediction JSONL.

    Returns a small summary: image counts, skips, and the output path.
    """
    input_dir = Path(config.input_dir)
    if not input_dir.is_dir():
        raise FileNotFoundError(f"input directory not found: {input_dir}")
    model, num_classes = load_model(config.model, num_classes=config.num_classes)
    depth = min(config.depth, num_classes)
    torch.set_num_threads(1)  # bit-stable reductions across runs

    files = _discover_images(input_dir)
    if not files:
        raise FileNotFoundError(f"no images ({', '.join(IMAGE_EXTENSIONS)}) "
                                f"in {input_dir}")
    skipped: list[dict] = []
    ids_to_batch: list[tuple[str, np.ndarray]] = []
    results: dict[str, tuple[list[int], list[float]]] = {}

    def flush():
        if not ids_to_batch:
            return
        batch = torch.from_numpy(np.stack([arr for _, arr in ids_to_batch]))
        with torch.no_grad():
            probs = torch.softmax(model(batch).float(), dim=-1).numpy()
        for (image_id, _), row in zip(ids_to_batch, probs):
            results[image_id] = _topm(row, depth)
        ids_to_batch.clear()

    for path in files:
        try:
            with Image.open(path) as img:
                array = preprocess(img, config.preset)
        except Exception as exc:  # undecodable input is a skip, not an abort
            log.warning("skipping undecodable image %s: %s", path.name, exc)
            skipped.append({"file": path.name, "reason": str(exc)})
            continue
        image_id = config.id_rule.format(stem=path.stem, name=path.name)
        if image_id in results or any(i == image_id for i, _ in ids_to_batch):
            raise ValueError(f"id rule maps two files to '{image_id}'")
        ids_to_batch.append((image_id, array))
        if len(ids_to_batch) >= config.batch_size:
            flush()
    flush()
    if not results:
        raise FileNotFoundError("every image in the directory failed to decode")

    output = Path(config.output_path)
    meta = {"model_id": config.resolved_model_id(),
            "dataset_id": config.dataset_id,
            "num_classes": num_classes,
            "depth": depth,
            "preset": config.preset,
            **config.extra_meta}
    with open(output, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": meta}, sort_keys=True,
                            separators=(",", ":")) + "\n")
        for image_id in sorted(results):
            classes, scores = results[image_id]
            fh.write(json.dumps({"id": image_id, "classes": classes,
                                 "scores": scores},
                                sort_keys=True, separators=(",", ":")) + "\n")
    skip_manifest = Path(str(output) + ".skipped.json")
    skip_manifest.write_text(
        json.dumps({"skipped": skipped}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    return {"images": len(results), "skipped": len(skipped),
            "output": str(output), "model_id": meta["model_id"],
            "num_classes": num_classes, "depth": depth}
