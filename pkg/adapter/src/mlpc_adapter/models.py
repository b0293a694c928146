"""Classifier loading: model-zoo names, local TorchScript files, or stubs.

The ``stub:<seed>`` form builds a tiny deterministic classifier from a seeded
generator; it exists so the export pipeline can be exercised end to end
without checkpoints or network access, flowing through exactly the same code
path as a real model.
"""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn


class StubClassifier(nn.Module):
    """Deterministic linear probe over pooled pixels; weights fixed by seed."""

    def __init__(self, num_classes: int, seed: int):
        super().__init__()
        self.pool = nn.AdaptiveAvgPool2d((8, 8))
        generator = torch.Generator().manual_seed(seed)
        weight = torch.randn(num_classes, 3 * 8 * 8, generator=generator) * 0.35
        bias = torch.randn(num_classes, generator=generator) * 0.01
        self.linear = nn.Linear(3 * 8 * 8, num_classes)
        with torch.no_grad():
            self.linear.weight.copy_(weight)
            self.linear.bias.copy_(bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        pooled = self.pool(x).flatten(1)
        return self.linear(pooled)


def load_model(spec: str, *, num_classes: int | None = None) -> tuple[nn.Module, int]:
    """Resolve a model spec to an eval-mode module and its class count.

    ``stub:<seed>`` builds a :class:`StubClassifier` (requires num_classes);
    an existing ``.pt``/``.pth``/``.ts`` path is loaded as TorchScript; any
    other name is fetched from the torchvision zoo with its default weights.
    """
    if spec.startswith("stub:"):
        if num_classes is None:
            raise ValueError("stub models need an explicit class count")
        seed = int(spec.split(":", 1)[1])
        model = StubClassifier(num_classes, seed)
        model.eval()
        return model, num_classes

    path = Path(spec)
    if path.suffix in (".pt", ".pth", ".ts") and path.exists():
        model = torch.jit.load(str(path), map_location="cpu")
        model.eval()
        out = _probe_classes(model)
        if num_classes is not None and num_classes != out:
            raise ValueError(f"model outputs {out} classes, flag says {num_classes}")
        return model, out

    import torchvision.models as zoo

    model = zoo.get_model(spec, weights="DEFAULT")
    model.eval()
    return model, _probe_classes(model)


def _probe_classes(model: nn.Module) -> int:
    with torch.no_grad():
        out = model(torch.zeros(1, 3, 224, 224))
    return int(out.shape[-1])
