"""Preprocessing presets.

Evaluation recipes differ per model family (input resolution, crop ratio,
normalization), so presets are data rather than code constants.  The chosen
preset name is recorded in the output metadata to keep reports attributable.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

PRESETS: dict[str, dict] = {
    # resize = shorter-side target before the center crop
    "imagenet-224": {"resize": 256, "crop": 224, "mean": IMAGENET_MEAN, "std": IMAGENET_STD},
    "imagenet-256": {"resize": 292, "crop": 256, "mean": IMAGENET_MEAN, "std": IMAGENET_STD},
    "imagenet-288": {"resize": 320, "crop": 288, "mean": IMAGENET_MEAN, "std": IMAGENET_STD},
    "imagenet-336": {"resize": 336, "crop": 336, "mean": IMAGENET_MEAN, "std": IMAGENET_STD},
    "imagenet-384": {"resize": 384, "crop": 384, "mean": IMAGENET_MEAN, "std": IMAGENET_STD},
    "imagenet-448": {"resize": 448, "crop": 448, "mean": IMAGENET_MEAN, "std": IMAGENET_STD},
    "imagenet-512": {"resize": 512, "crop": 512, "mean": IMAGENET_MEAN, "std": IMAGENET_STD},
    # small un-normalized input for stub/self-test models
    "stub-64": {"resize": 64, "crop": 64, "mean": (0.0, 0.0, 0.0), "std": (1.0, 1.0, 1.0)},
}


def preprocess(image: Image.Image, preset_name: str) -> np.ndarray:
    """PIL image -> float32 CHW array per the named preset."""
    preset = PRESETS[preset_name]
    image = image.convert("RGB")
    w, h = image.size
    target = preset["resize"]
    scale = target / min(w, h)
    image = image.resize((max(1, round(w * scale)), max(1, round(h * scale))),
                         Image.BILINEAR)
    crop = preset["crop"]
    w, h = image.size
    left = (w - crop) // 2
    top = (h - crop) // 2
    image = image.crop((left, top, left + crop, top + crop))
    array = np.asarray(image, dtype=np.float32) / 255.0
    mean = np.asarray(preset["mean"], dtype=np.float32)
    std = np.asarray(preset["std"], dtype=np.float32)
    array = (array - mean) / std
    return array.transpose(2, 0, 1)
