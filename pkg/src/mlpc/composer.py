"""Synthetic multi-label composites from labeled object patches.

Builds square composite images by placing labeled patches into disjoint cells
of a grid on a black canvas.  For each configured (patch count ``k``, cell
size ``p``) pair the pool is consumed in chunks of ``k`` until fewer than
``k`` patches remain; each composite's label set is the union of its patch
labels.  All randomness (pool order and in-cell offsets) comes from per-config
substreams derived from one master seed, so a manifest is fully determined by
(seed, config, pool order).

Generation is split in two phases so rendering never touches the random
stream:

1. ``generate`` samples placements and produces a :class:`CompositeManifest`
   (pure arithmetic; patch dimensions come from the crop boxes, no pixel I/O).
2. ``render_composite`` reproduces any composite's pixels from its manifest
   entry alone.

That split keeps manifests cheap to regenerate and lets image encoding run in
any order, or not at all.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .annotations import AnnotationStore, write_annotations
from .canonical import canonical_json_line
from .errors import DataFormatError, MlpcError

DEFAULT_CANVAS = 512
DEFAULT_CONFIGS = ((2, 256), (3, 256), (4, 256), (6, 170), (9, 128))
POOL_POLICIES = ("fresh_per_config", "shared")


@dataclass(frozen=True)
class PatchRecord:
    """A labeled crop of a source image (pixels stay on disk until render)."""

    patch_id: str
    label: int
    source: str
    box: tuple[int, int, int, int]  # x, y, w, h in source-image pixels

    @property
    def width(self) -> int:
        return self.box[2]

    @property
    def height(self) -> int:
        return self.box[3]


@dataclass(frozen=True)
class ComposerConfig:
    seed: int
    configs: tuple[tuple[int, int], ...] = DEFAULT_CONFIGS
    canvas_size: int = DEFAULT_CANVAS
    distinct_labels: bool = False
    pool_policy: str = "fresh_per_config"

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.canvas_size < 1:
            raise ValueError("canvas_size must be positive")
        if not self.configs:
            raise ValueError("at least one (k, p) pair is required")
        if self.pool_policy not in POOL_POLICIES:
            raise ValueError(f"unknown pool policy {self.pool_policy!r}")
        for k, p in self.configs:
            if p < 1 or p > self.canvas_size:
                raise ValueError(f"cell size {p} must be in [1, {self.canvas_size}]")
            cells = (self.canvas_size // p) ** 2
            if k < 1 or k > cells:
                raise ValueError(
                    f"patch count {k} does not fit the {self.canvas_size // p}x"
                    f"{self.canvas_size // p} grid of cell size {p} ({cells} cells)")


@dataclass(frozen=True)
class PlacementRecord:
    patch_id: str
    row: int
    col: int
    width: int
    height: int
    x_off: int
    y_off: int
    x: int
    y: int

    def validate(self, p: int, canvas_size: int) -> None:
        """Check all geometric invariants; raises ``ValueError`` on violation."""
        if self.x != self.col * p + self.x_off or self.y != self.row * p + self.y_off:
            raise ValueError(f"{self.patch_id}: absolute position inconsistent with cell")
        if not (0 <= self.x_off <= p - self.width):
            raise ValueError(f"{self.patch_id}: x_off {self.x_off} outside [0, {p - self.width}]")
        if not (0 <= self.y_off <= p - self.height):
            raise ValueError(f"{self.patch_id}: y_off {self.y_off} outside [0, {p - self.height}]")
        if self.x + self.width > canvas_size or self.y + self.height > canvas_size:
            raise ValueError(f"{self.patch_id}: patch exceeds canvas bounds")


@dataclass(frozen=True)
class CompositeEntry:
    image_id: str
    k: int
    p: int
    index: int
    labels: tuple[int, ...]
    placements: tuple[PlacementRecord, ...]


@dataclass(frozen=True)
class CompositeManifest:
    dataset_id: str
    seed: int
    canvas_size: int
    num_classes: int
    pool_policy: str
    distinct_labels: bool
    pool_size: int
    configs: tuple[tuple[int, int], ...]
    per_config: tuple[dict, ...]
    entries: tuple[CompositeEntry, ...] = field(repr=False)

    def annotation_store(self) -> AnnotationStore:
        """The composites' label sets as a loadable annotation store."""
        return AnnotationStore(
            dataset_id=self.dataset_id, num_classes=self.num_classes,
            entries={e.image_id: frozenset(e.labels) for e in self.entries})


def build_pool(patch_manifest: str | Path, *,
               num_classes: int | None = None) -> list[PatchRecord]:
    """Read a patch manifest (JSONL) into an ordered pool.

    Rows look like ``{"patch_id":..., "label":..., "source":..., "box":[x,y,w,h]}``.
    The pool preserves file order; shuffling happens later under seed control.
    """
    path = Path(patch_manifest)
    if not path.exists():
        raise DataFormatError("file not found", path=str(path))
    pool: list[PatchRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"malformed JSON: {exc}", path=str(path), line=line_no)
            patch_id = obj.get("patch_id")
            label = obj.get("label")
            source = obj.get("source")
            box = obj.get("box")
            if not isinstance(patch_id, str) or not patch_id:
                raise DataFormatError("missing 'patch_id'", path=str(path), line=line_no)
            if patch_id in seen:
                raise DataFormatError(f"duplicate patch_id '{patch_id}'",
                                      path=str(path), line=line_no)
            seen.add(patch_id)
            if isinstance(label, bool) or not isinstance(label, int) or label < 0:
                raise DataFormatError("'label' must be a non-negative integer",
                                      path=str(path), line=line_no)
            if num_classes is not None and label >= num_classes:
                raise DataFormatError(f"label {label} out of range [0, {num_classes})",
                                      path=str(path), line=line_no)
            if not isinstance(source, str) or not Path(source).exists():
                raise DataFormatError(f"source image not readable: {source!r}",
                                      path=str(path), line=line_no)
            if (not isinstance(box, list) or len(box) != 4
                    or any(isinstance(v, bool) or not isinstance(v, int) for v in box)):
                raise DataFormatError("'box' must be [x, y, w, h] integers",
                                      path=str(path), line=line_no)
            x, y, w, h = box
            if x < 0 or y < 0 or w < 1 or h < 1:
                raise DataFormatError(f"degenerate crop box {box}", path=str(path),
                                      line=line_no)
            pool.append(PatchRecord(patch_id=patch_id, label=label, source=source,
                                    box=(x, y, w, h)))
    return pool


def resize_dims(width: int, height: int, p: int) -> tuple[int, int]:
    """Proportional resize so the longer side equals ``p`` exactly.

    The shorter side is scaled by the same factor and rounded half-up to the
    nearest pixel (exact integer arithmetic), clamped to at least 1.
    """
    if p < 1:
        raise ValueError("cell size must be positive")
    longest = max(width, height)

    def scaled(side: int) -> int:
        if side == longest:
            return p
        return max(1, (2 * side * p + longest) // (2 * longest))

    return scaled(width), scaled(height)


def resize_proportional(patch: PatchRecord, p: int) -> tuple[int, int]:
    """Resized (width, height) of ``patch`` for cell size ``p``."""
    return resize_dims(patch.width, patch.height, p)


def place_patch_in_grid(canvas: np.ndarray, pixels: np.ndarray, row: int, col: int,
                        p: int, canvas_size: int, occupied: set[tuple[int, int]],
                        x_off: int, y_off: int) -> bool:
    """Copy ``pixels`` into grid cell (row, col) at the given in-cell offsets.

    Returns False — leaving canvas and occupancy untouched — when the cell is
    already occupied, the offsets fall outside the cell-fit range, or the
    patch would cross the canvas boundary.  On success the cell is marked
    occupied and the pixel block is written.
    """
    if (row, col) in occupied:
        return False
    h, w = pixels.shape[0], pixels.shape[1]
    if not (0 <= x_off <= p - w and 0 <= y_off <= p - h):
        return False
    x = col * p + x_off
    y = row * p + y_off
    if x + w > canvas_size or y + h > canvas_size:
        return False
    canvas[y:y + h, x:x + w] = pixels
    occupied.add((row, col))
    return True


def _substream(seed: int, k: int, p: int) -> random.Random:
    # sha256 of "seed:k:p" gives platform-stable, well-separated substreams
    digest = hashlib.sha256(f"{seed}:{k}:{p}".encode("ascii")).digest()
    return random.Random(int.from_bytes(digest, "big"))


def _take_distinct(remaining: list[PatchRecord], k: int) -> list[PatchRecord] | None:
    """Pop the first k patches with pairwise-distinct labels, keeping skipped
    patches (label already taken) in place for later composites."""
    taken: list[PatchRecord] = []
    labels: set[int] = set()
    skipped: list[PatchRecord] = []
    idx = 0
    while idx < len(remaining) and len(taken) < k:
        rec = remaining[idx]
        if rec.label in labels:
            skipped.append(rec)
        else:
            taken.append(rec)
            labels.add(rec.label)
        idx += 1
    if len(taken) < k:
        return None
    remaining[:idx] = skipped
    return taken


def generate(config: ComposerConfig, pool: list[PatchRecord], *,
             num_classes: int = 1000,
             dataset_id: str | None = None) -> CompositeManifest:
    """Sample placements for every configured (k, p) pair.

    Per pair: shuffle the working pool with the pair's substream, then consume
    chunks of ``k`` (front-to-back) while enough patches remain; for every
    patch draw the in-cell x then y offset from the same substream.  Cells are
    assigned row-major (patch ``i`` goes to cell ``(i // c, i % c)`` on the
    ``c = canvas // p`` grid).  Under the default ``fresh_per_config`` policy
    every pair works on its own full copy of the pool; under ``shared`` one
    pool is progressively consumed across pairs.
    """
    if not pool:
        raise MlpcError("patch pool is empty")
    for rec in pool:
        if rec.label >= num_classes:
            raise MlpcError(f"patch '{rec.patch_id}' label {rec.label} out of range "
                            f"[0, {num_classes})")
    F = config.canvas_size
    dataset_id = dataset_id or f"patchml-seed{config.seed}"
    entries: list[CompositeEntry] = []
    per_config: list[dict] = []
    shared_remaining = list(pool)
    for k, p in config.configs:
        rng = _substream(config.seed, k, p)
        if config.pool_policy == "fresh_per_config":
            remaining = list(pool)
        else:
            remaining = shared_remaining
        rng.shuffle(remaining)
        pool_before = len(remaining)
        cells_per_side = F // p
        index = 0
        used = 0
        while True:
            if config.distinct_labels:
                sample = _take_distinct(remaining, k)
                if sample is None:
                    break
            else:
                if len(remaining) < k:
                    break
                sample = remaining[:k]
                del remaining[:k]
            used += k
            occupied: set[tuple[int, int]] = set()
            placements: list[PlacementRecord] = []
            labels: set[int] = set()
            for i, patch in enumerate(sample):
                row, col = divmod(i, cells_per_side)
                if (row, col) in occupied:
                    continue
                w, h = resize_dims(patch.width, patch.height, p)
                x_off = rng.randint(0, p - w)
                y_off = rng.randint(0, p - h)
                x = col * p + x_off
                y = row * p + y_off
                if x + w > F or y + h > F:
                    continue
                occupied.add((row, col))
                placements.append(PlacementRecord(
                    patch_id=patch.patch_id, row=row, col=col, width=w, height=h,
                    x_off=x_off, y_off=y_off, x=x, y=y))
                labels.add(patch.label)
            entries.append(CompositeEntry(
                image_id=f"patchml_{k}_{p}_{index}_seed_{config.seed}",
                k=k, p=p, index=index, labels=tuple(sorted(labels)),
                placements=tuple(placements)))
            index += 1
        pool_after = len(remaining)
        per_config.append({
            "k": k, "p": p, "composites": index, "patches_used": used,
            "pool_before": pool_before, "pool_after": pool_after,
            "discarded": pool_after if config.pool_policy == "fresh_per_config" else 0,
        })
        if config.pool_policy == "shared":
            shared_remaining = remaining
    return CompositeManifest(
        dataset_id=dataset_id, seed=config.seed, canvas_size=F,
        num_classes=num_classes, pool_policy=config.pool_policy,
        distinct_labels=config.distinct_labels, pool_size=len(pool),
        configs=tuple(config.configs), per_config=tuple(per_config),
        entries=tuple(entries))


# ---------------------------------------------------------------------------
# Rendering and serialization
# ---------------------------------------------------------------------------


class _SourceCache:
    """Decoded source images, keyed by path (kept small: sources are shared)."""

    def __init__(self):
        self._images: dict[str, Image.Image] = {}

    def get(self, path: str) -> Image.Image:
        img = self._images.get(path)
        if img is None:
            img = Image.open(path).convert("RGB")
            self._images[path] = img
        return img


def render_composite(entry: CompositeEntry, pool_by_id: dict[str, PatchRecord],
                     canvas_size: int, cache: _SourceCache | None = None) -> Image.Image:
    """Reproduce a composite's pixels from its manifest entry.

    Pure function of the entry and the patch sources; the random stream is
    not consulted, so rendering can happen in any order (or in parallel).
    """
    cache = cache or _SourceCache()
    canvas = np.zeros((canvas_size, canvas_size, 3), dtype=np.uint8)
    occupied: set[tuple[int, int]] = set()
    for pl in entry.placements:
        patch = pool_by_id[pl.patch_id]
        x, y, w, h = patch.box
        crop = cache.get(patch.source).crop((x, y, x + w, y + h))
        resized = crop.resize((pl.width, pl.height), Image.BILINEAR)
        ok = place_patch_in_grid(canvas, np.asarray(resized), pl.row, pl.col,
                                 entry.p, canvas_size, occupied, pl.x_off, pl.y_off)
        if not ok:
            raise MlpcError(f"manifest placement for '{pl.patch_id}' in "
                            f"'{entry.image_id}' is not renderable")
    return Image.fromarray(canvas)


def write_manifest(manifest: CompositeManifest, path: str | Path) -> None:
    """Write the composite manifest as canonical JSONL (header + entries)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json_line({"meta": {
            "dataset_id": manifest.dataset_id,
            "seed": manifest.seed,
            "canvas_size": manifest.canvas_size,
            "num_classes": manifest.num_classes,
            "pool_policy": manifest.pool_policy,
            "distinct_labels": manifest.distinct_labels,
            "pool_size": manifest.pool_size,
            "configs": [list(c) for c in manifest.configs],
            "per_config": list(manifest.per_config),
        }}))
        for entry in manifest.entries:
            fh.write(canonical_json_line({
                "id": entry.image_id, "k": entry.k, "p": entry.p,
                "index": entry.index, "labels": list(entry.labels),
                "placements": [{
                    "patch_id": pl.patch_id, "row": pl.row, "col": pl.col,
                    "width": pl.width, "height": pl.height,
                    "x_off": pl.x_off, "y_off": pl.y_off, "x": pl.x, "y": pl.y,
                } for pl in entry.placements],
            }))


def write_dataset(manifest: CompositeManifest, pool: list[PatchRecord],
                  output_dir: str | Path, *, write_images: bool = True) -> None:
    """Materialize a generated dataset: images/, manifest.jsonl, annotations.jsonl."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out / "manifest.jsonl")
    write_annotations(manifest.annotation_store(), out / "annotations.jsonl")
    if write_images:
        images_dir = out / "images"
        images_dir.mkdir(exist_ok=True)
        pool_by_id = {rec.patch_id: rec for rec in pool}
        cache = _SourceCache()
        for entry in manifest.entries:
            img = render_composite(entry, pool_by_id, manifest.canvas_size, cache)
            img.save(images_dir / f"{entry.image_id}.png", format="PNG")
