"""Exception types shared across the toolkit."""

from __future__ import annotations


class MlpcError(Exception):
    """Base class for all toolkit errors."""


class DataFormatError(MlpcError):
    """A file failed structural or semantic validation.

    Carries the offending path and, when known, the 1-based line number so
    callers can point users at the exact record.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}: " if line is None else f"{path}:{line}: "
        super().__init__(prefix + message)


class InsufficientDepthError(MlpcError):
    """A ranked record is shallower than the requested prediction-set size.

    This is a loud signal that the prediction file must be regenerated with a
    larger retained depth; the toolkit never silently clamps k.
    """

    def __init__(self, required: int, available: int, image_id: str | None = None):
        self.required = required
        self.available = available
        self.image_id = image_id
        where = f" for image '{image_id}'" if image_id else ""
        super().__init__(
            f"requested top-{required}{where} but only {available} ranked entries "
            f"are stored; regenerate predictions with depth >= {required}"
        )

    def with_image(self, image_id: str) -> "InsufficientDepthError":
        return InsufficientDepthError(self.required, self.available, image_id)
