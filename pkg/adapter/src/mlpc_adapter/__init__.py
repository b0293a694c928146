"""Batch image-classifier inference exporting the mlpc prediction format."""

__version__ = "0.1.0"

from .export import AdapterConfig, export_predictions
from .models import StubClassifier, load_model
from .presets import PRESETS, preprocess

__all__ = ["AdapterConfig", "PRESETS", "StubClassifier", "export_predictions",
           "load_model", "preprocess", "__version__"]
