"""Shared generators for randomized test instances."""

from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mlpc import AnnotationStore, PredictionDataset


def make_instance(rng: random.Random, *, max_images=60, max_classes=12,
                  dataset_id="synthetic", model_id="model", full_depth=True,
                  empty_share=0.1):
    """A random (predictions, store, single-label map) triple.

    Predictions carry all ``C`` classes per image when ``full_depth`` so any
    ``k`` is available; scores are drawn from a small value set to provoke
    ties, which the canonical order must resolve identically everywhere.
    """
    num_classes = rng.randint(2, max_classes)
    num_images = rng.randint(1, max_images)
    entries = {}
    records = {}
    gt_single = {}
    for i in range(num_images):
        image_id = f"img_{i:05d}"
        if rng.random() < empty_share:
            labels = frozenset()
        else:
            size = rng.randint(1, num_classes)
            labels = frozenset(rng.sample(range(num_classes), size))
        entries[image_id] = labels
        depth = num_classes if full_depth else rng.randint(1, num_classes)
        classes = rng.sample(range(num_classes), depth)
        scores = [rng.choice((0.9, 0.7, 0.5, 0.5, 0.3, 0.1)) for _ in range(depth)]
        order = sorted(range(depth), key=lambda j: (-scores[j], classes[j]))
        records[image_id] = (tuple(classes[j] for j in order),
                             tuple(scores[j] for j in order))
        if labels:
            gt_single[image_id] = rng.choice(sorted(labels))
    store = AnnotationStore(dataset_id=dataset_id, num_classes=num_classes,
                            entries=entries)
    preds = PredictionDataset(model_id=model_id, dataset_id=dataset_id,
                              num_classes=num_classes, depth=num_classes,
                              records=records)
    return preds, store, gt_single


@pytest.fixture
def rng():
    return random.Random(20240817)
