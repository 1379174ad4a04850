"""TFRecord-to-CCDS conversion for CSI measurement archives."""

__version__ = "0.1.0"

from .convert import ArchiveSpec, ConvertSummary, convert
from .errors import ConvertError, TfRecordError

__all__ = ["ArchiveSpec", "ConvertSummary", "convert", "ConvertError", "TfRecordError"]
