"""Converter error types."""


class ConvertError(Exception):
    """Archive conversion failure; ``record`` names the offending record
    index where one exists."""

    def __init__(self, message: str, record: int | None = None):
        super().__init__(message)
        self.record = record


class TfRecordError(ConvertError):
    """Framing-level failure (bad length, CRC mismatch, truncation)."""
