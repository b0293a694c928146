"""Multi-label ground-truth annotation storage.

An :class:`AnnotationStore` maps image ids to sets of valid class ids.  Empty
label sets are legal and preserved: whether unannotated images participate in
a metric is a per-metric policy, not a storage decision.  Stores are immutable
after load and safe for concurrent readers.

On-disk format (annotation JSONL)::

    {"meta": {"dataset_id": "imagenetv1-real", "num_classes": 1000}}
    {"id": "val_00000001", "labels": [65]}
    {"id": "val_00000002", "labels": []}

The first line is a header object; every following line is one image.  The
canonical writer sorts ids lexicographically and labels ascending so output is
bit-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataFormatError

ANNOTATION_FORMATS = ("jsonl", "real_adapter")


@dataclass(frozen=True)
class AnnotationStore:
    """Validated image-id -> label-set mapping for one dataset."""

    dataset_id: str
    num_classes: int
    entries: dict[str, frozenset[int]] = field(repr=False)

    def __len__(self) -> int:
        return len(self.entries)

    def label_count(self, image_id: str) -> int:
        return len(self.entries[image_id])

    def empty_entry_count(self) -> int:
        """Number of images with an empty label set."""
        return sum(1 for labels in self.entries.values() if not labels)


@dataclass(frozen=True)
class SubgroupIndex:
    """Partition of a store's image ids by label-set cardinality.

    ``groups[g]`` holds the ids (sorted) of all images with exactly ``g``
    labels; cardinalities with no images are absent.
    """

    groups: dict[int, list[str]]
    max_label_count: int


def _check_labels(raw_labels, num_classes: int, *, path: str, line: int) -> frozenset[int]:
    labels = set()
    for value in raw_labels:
        if isinstance(value, bool) or not isinstance(value, int):
            raise DataFormatError(f"label {value!r} is not an integer", path=path, line=line)
        if not 0 <= value < num_classes:
            raise DataFormatError(
                f"class id {value} out of range [0, {num_classes})", path=path, line=line
            )
        labels.add(value)
    return frozenset(labels)


def _load_jsonl(path: Path) -> AnnotationStore:
    entries: dict[str, frozenset[int]] = {}
    dataset_id = None
    num_classes = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"malformed JSON: {exc}", path=str(path), line=line_no)
            if not isinstance(obj, dict):
                raise DataFormatError("expected a JSON object", path=str(path), line=line_no)
            if line_no == 1:
                meta = obj.get("meta")
                if not isinstance(meta, dict):
                    raise DataFormatError(
                        'first line must be a {"meta": ...} header', path=str(path), line=1
                    )
                dataset_id = meta.get("dataset_id")
                num_classes = meta.get("num_classes")
                if not isinstance(dataset_id, str) or not dataset_id:
                    raise DataFormatError("meta.dataset_id must be a non-empty string",
                                          path=str(path), line=1)
                if not isinstance(num_classes, int) or num_classes < 1:
                    raise DataFormatError("meta.num_classes must be a positive integer",
                                          path=str(path), line=1)
                continue
            image_id = obj.get("id")
            if not isinstance(image_id, str) or not image_id:
                raise DataFormatError("missing or invalid 'id'", path=str(path), line=line_no)
            if image_id in entries:
                raise DataFormatError(f"duplicate image_id '{image_id}'",
                                      path=str(path), line=line_no)
            raw = obj.get("labels")
            if not isinstance(raw, list):
                raise DataFormatError("'labels' must be a list", path=str(path), line=line_no)
            entries[image_id] = _check_labels(raw, num_classes, path=str(path), line=line_no)
    if dataset_id is None:
        raise DataFormatError("file is empty (header line required)", path=str(path))
    return AnnotationStore(dataset_id=dataset_id, num_classes=num_classes, entries=entries)


def _load_real_adapter(path: Path, *, num_classes: int, dataset_id: str,
                       id_template: str) -> AnnotationStore:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"malformed JSON: {exc}", path=str(path))
    if not isinstance(data, list):
        raise DataFormatError("adapter input must be a JSON array of label arrays",
                              path=str(path))
    entries: dict[str, frozenset[int]] = {}
    for index, raw in enumerate(data):
        if not isinstance(raw, list):
            raise DataFormatError(f"element {index} is not a label array", path=str(path))
        image_id = id_template.format(index=index)
        if image_id in entries:
            raise DataFormatError(
                f"id template produced duplicate image_id '{image_id}'", path=str(path)
            )
        entries[image_id] = _check_labels(raw, num_classes, path=str(path), line=index)
    return AnnotationStore(dataset_id=dataset_id, num_classes=num_classes, entries=entries)


def load_annotations(path: str | Path, fmt: str = "jsonl", *,
                     num_classes: int | None = None,
                     dataset_id: str | None = None,
                     id_template: str = "val_{index:08}") -> AnnotationStore:
    """Load and validate annotations from ``path``.

    ``fmt="jsonl"`` reads the native header+records format.  ``fmt="real_adapter"``
    reads a positional JSON array of label arrays (the layout used by published
    relabeling efforts) and maps index ``i`` to an id via ``id_template``; for
    that format ``num_classes`` and ``dataset_id`` must be supplied by the
    caller.  Empty label sets are preserved in both formats.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError("file not found", path=str(path))
    if fmt == "jsonl":
        return _load_jsonl(path)
    if fmt == "real_adapter":
        if num_classes is None or num_classes < 1:
            raise DataFormatError("real_adapter format requires num_classes", path=str(path))
        if dataset_id is None:
            raise DataFormatError("real_adapter format requires dataset_id", path=str(path))
        return _load_real_adapter(path, num_classes=num_classes, dataset_id=dataset_id,
                                  id_template=id_template)
    raise ValueError(f"unknown annotation format {fmt!r}; expected one of {ANNOTATION_FORMATS}")


def write_annotations(store: AnnotationStore, path: str | Path) -> None:
    """Write a store in canonical JSONL form (bit-stable for golden tests)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        header = {"meta": {"dataset_id": store.dataset_id, "num_classes": store.num_classes}}
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for image_id in sorted(store.entries):
            record = {"id": image_id, "labels": sorted(store.entries[image_id])}
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def subgroup_index(store: AnnotationStore) -> SubgroupIndex:
    """Partition image ids by their label count.

    Every image lands in exactly one group; cardinalities with no members are
    absent from the map.  Ids within a group are sorted for determinism.
    """
    groups: dict[int, list[str]] = {}
    for image_id, labels in store.entries.items():
        groups.setdefault(len(labels), []).append(image_id)
    for ids in groups.values():
        ids.sort()
    return SubgroupIndex(groups=dict(sorted(groups.items())),
                         max_label_count=max(groups) if groups else 0)


def label_count_histogram(store: AnnotationStore,
                          overflow_bucket: int) -> tuple[dict, int]:
    """Count images per label count, with an overflow bucket.

    Returns ``(buckets, zero_count)`` where ``buckets`` maps the counts
    ``1 .. overflow_bucket-1`` to image counts plus a ``">N"`` key (with
    ``N = overflow_bucket - 1``) for everything at or above the overflow, and
    ``zero_count`` reports images with empty label sets separately.
    """
    if overflow_bucket < 1:
        raise ValueError("overflow_bucket must be >= 1")
    overflow_key = f">{overflow_bucket - 1}"
    buckets: dict = {g: 0 for g in range(1, overflow_bucket)}
    buckets[overflow_key] = 0
    zero_count = 0
    for labels in store.entries.values():
        g = len(labels)
        if g == 0:
            zero_count += 1
        elif g < overflow_bucket:
            buckets[g] += 1
        else:
            buckets[overflow_key] += 1
    return buckets, zero_count
