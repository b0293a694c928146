"""Ranked per-image class predictions from external inference.

A :class:`PredictionDataset` stores, per image, a truncated ranking of the
``depth`` highest-scoring classes as parallel ``(classes, scores)`` tuples,
mirroring the wire format.  Records are canonicalized at load: descending
score and, on equal scores, ascending class id.  That tie-break gives metrics
a total order, so results are reproducible no matter how the producer sorted
its output.

Scores are quantized to float32 at load.  The binary container stores float32,
and keeping a single precision everywhere makes JSONL <-> binary conversion
lossless and the canonical ranking representation-independent.  Metrics never
use score magnitudes, only the canonical order.

Wire formats:

* Prediction JSONL: header line
  ``{"meta": {"model_id":..., "dataset_id":..., "num_classes":..., "depth":...}}``
  then per image ``{"id":..., "classes": [...], "scores": [...]}`` with
  parallel arrays.
* Compact binary container (magic ``MLPC1``, little-endian): u32 header
  length + canonical JSON meta, u32 record count, then per record u16 id
  length + UTF-8 id, u16 entry count, and entry count pairs of (u32 class id,
  f32 score).  Records are ordered by id; semantics identical to the JSONL.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InsufficientDepthError

# One ranked record: parallel (class ids, scores) tuples in canonical order.
Record = tuple[tuple[int, ...], tuple[float, ...]]

BINARY_MAGIC = b"MLPC1"


@dataclass(frozen=True)
class PredictionDataset:
    """Validated, canonically ordered top-``depth`` predictions for one model."""

    model_id: str
    dataset_id: str
    num_classes: int
    depth: int
    records: dict[str, Record] = field(repr=False)
    # producer-supplied header fields beyond the required four (e.g. the
    # preprocessing preset); preserved verbatim by both writers
    extra_meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def record(self, image_id: str) -> Record:
        return self.records[image_id]

    def meta(self) -> dict:
        return {"dataset_id": self.dataset_id, "depth": self.depth,
                "model_id": self.model_id, "num_classes": self.num_classes,
                **self.extra_meta}


def canonical_order(classes, scores) -> list[int]:
    """Indices that sort entries by descending score, ascending class id."""
    return sorted(range(len(classes)), key=lambda i: (-scores[i], classes[i]))


def _canonicalize_record(classes, scores, *, num_classes: int, depth: int,
                         path: str, line: int) -> Record:
    if len(classes) != len(scores):
        raise DataFormatError(
            f"'classes' and 'scores' lengths differ ({len(classes)} vs {len(scores)})",
            path=path, line=line)
    n = len(classes)
    if n == 0:
        raise DataFormatError("record has no entries", path=path, line=line)
    if n > depth:
        raise DataFormatError(f"record has {n} entries, exceeding declared depth {depth}",
                              path=path, line=line)
    seen = set()
    for c in classes:
        if isinstance(c, bool) or not isinstance(c, int):
            raise DataFormatError(f"class id {c!r} is not an integer", path=path, line=line)
        if not 0 <= c < num_classes:
            raise DataFormatError(f"class id {c} out of range [0, {num_classes})",
                                  path=path, line=line)
        if c in seen:
            raise DataFormatError(f"duplicate class id {c} in record", path=path, line=line)
        seen.add(c)
    for s in scores:
        if isinstance(s, bool) or not isinstance(s, (int, float)) or not math.isfinite(s):
            raise DataFormatError(f"non-finite or non-numeric score {s!r}",
                                  path=path, line=line)
    # float32 quantization keeps JSONL and binary forms interchangeable.
    scores32 = np.asarray(scores, dtype=np.float32).tolist()
    order = canonical_order(classes, scores32)
    return (tuple(classes[i] for i in order), tuple(scores32[i] for i in order))


def load_predictions(path: str | Path) -> PredictionDataset:
    """Load prediction JSONL, validating and canonicalizing every record."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError("file not found", path=str(path))
    records: dict[str, Record] = {}
    meta = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"malformed JSON: {exc}", path=str(path), line=line_no)
            if line_no == 1:
                meta = _check_meta(obj.get("meta") if isinstance(obj, dict) else None,
                                   path=str(path))
                continue
            image_id = obj.get("id")
            if not isinstance(image_id, str) or not image_id:
                raise DataFormatError("missing or invalid 'id'", path=str(path), line=line_no)
            if image_id in records:
                raise DataFormatError(f"duplicate image_id '{image_id}'",
                                      path=str(path), line=line_no)
            classes = obj.get("classes")
            scores = obj.get("scores")
            if not isinstance(classes, list) or not isinstance(scores, list):
                raise DataFormatError("'classes' and 'scores' must be parallel arrays",
                                      path=str(path), line=line_no)
            records[image_id] = _canonicalize_record(
                classes, scores, num_classes=meta["num_classes"], depth=meta["depth"],
                path=str(path), line=line_no)
    if meta is None:
        raise DataFormatError("file is empty (header line required)", path=str(path))
    return PredictionDataset(model_id=meta["model_id"], dataset_id=meta["dataset_id"],
                             num_classes=meta["num_classes"], depth=meta["depth"],
                             records=records, extra_meta=meta["extra"])


def _check_meta(meta, *, path: str) -> dict:
    if not isinstance(meta, dict):
        raise DataFormatError('first line must be a {"meta": ...} header', path=path, line=1)
    model_id = meta.get("model_id")
    dataset_id = meta.get("dataset_id")
    num_classes = meta.get("num_classes")
    depth = meta.get("depth")
    if not isinstance(model_id, str) or not model_id:
        raise DataFormatError("meta.model_id must be a non-empty string", path=path, line=1)
    if not isinstance(dataset_id, str) or not dataset_id:
        raise DataFormatError("meta.dataset_id must be a non-empty string", path=path, line=1)
    if not isinstance(num_classes, int) or num_classes < 1:
        raise DataFormatError("meta.num_classes must be a positive integer", path=path, line=1)
    if not isinstance(depth, int) or depth < 1:
        raise DataFormatError("meta.depth must be a positive integer", path=path, line=1)
    extra = {k: v for k, v in meta.items()
             if k not in ("model_id", "dataset_id", "num_classes", "depth")}
    return {"model_id": model_id, "dataset_id": dataset_id,
            "num_classes": num_classes, "depth": depth, "extra": extra}


def write_predictions(preds: PredictionDataset, path: str | Path) -> None:
    """Write canonical prediction JSONL (ids sorted, records canonical).

    Scores are quantized to float32 on the way out, matching loader semantics,
    so write -> load -> write is byte-stable even for datasets built in memory.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": preds.meta()}, sort_keys=True,
                            separators=(",", ":")) + "\n")
        for image_id in sorted(preds.records):
            classes, scores = preds.records[image_id]
            scores32 = np.asarray(scores, dtype=np.float32).tolist()
            order = canonical_order(classes, scores32)
            record = {"id": image_id,
                      "classes": [classes[i] for i in order],
                      "scores": [scores32[i] for i in order]}
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def write_predictions_binary(preds: PredictionDataset, path: str | Path) -> None:
    """Write the compact binary container (see module docstring for layout)."""
    meta = json.dumps(preds.meta(), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(preds.records)))
        for image_id in sorted(preds.records):
            classes, scores = preds.records[image_id]
            scores32 = np.asarray(scores, dtype=np.float32).tolist()
            order = canonical_order(classes, scores32)
            id_bytes = image_id.encode("utf-8")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<H", len(classes)))
            for i in order:
                fh.write(struct.pack("<If", classes[i], scores32[i]))


def load_predictions_binary(path: str | Path) -> PredictionDataset:
    """Load the compact binary container; semantics match the JSONL loader."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError("file not found", path=str(path))
    data = path.read_bytes()
    if data[:5] != BINARY_MAGIC:
        raise DataFormatError("bad magic bytes (not an MLPC1 container)", path=str(path))
    off = 5

    def take(fmt: str):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(data):
            raise DataFormatError("truncated container", path=str(path))
        values = struct.unpack_from(fmt, data, off)
        off += size
        return values

    (meta_len,) = take("<I")
    try:
        meta_obj = json.loads(data[off:off + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"malformed meta block: {exc}", path=str(path))
    off += meta_len
    meta = _check_meta(meta_obj, path=str(path))
    (count,) = take("<I")
    records: dict[str, Record] = {}
    for index in range(count):
        (id_len,) = take("<H")
        image_id = data[off:off + id_len].decode("utf-8")
        off += id_len
        if image_id in records:
            raise DataFormatError(f"duplicate image_id '{image_id}'", path=str(path))
        (n,) = take("<H")
        pairs = take("<" + "If" * n)
        classes = list(pairs[0::2])
        scores = [float(np.float32(s)) for s in pairs[1::2]]
        records[image_id] = _canonicalize_record(
            classes, scores, num_classes=meta["num_classes"], depth=meta["depth"],
            path=str(path), line=index)
    if off != len(data):
        raise DataFormatError("trailing bytes after last record", path=str(path))
    return PredictionDataset(model_id=meta["model_id"], dataset_id=meta["dataset_id"],
                             num_classes=meta["num_classes"], depth=meta["depth"],
                             records=records, extra_meta=meta["extra"])


def topk_set(record: Record, k: int) -> set[int]:
    """The first ``k`` class ids of a canonical record, as a set.

    Deterministic under score ties because the record order already breaks
    them by ascending class id.  Raises :class:`InsufficientDepthError` when
    the record is shallower than ``k``; the caller must regenerate predictions
    with a larger depth rather than silently evaluating a truncated set.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    classes = record[0]
    if k > len(classes):
        raise InsufficientDepthError(required=k, available=len(classes))
    return set(classes[:k])


def argmax(record: Record) -> int:
    """Highest-ranked class id (ties already resolved to the lower id)."""
    classes = record[0]
    if not classes:
        raise ValueError("record is empty")
    return classes[0]
