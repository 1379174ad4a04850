"""Archive conversion: stream TFRecord CSI archives into one CCDS container.

Each archive record must carry a CSI tensor (B x W x 2 real/imag floats or a
B x W complex tensor), a ground-truth position (2 or 3 floats) and a scalar
timestamp. Field names are configurable since archives differ; bytes
features are decoded as serialized tensors, float features are taken as-is.
Timestamps are normalized to seconds from the first (earliest) record and an
optional antenna subset is applied before writing.

The CCDS grammar is implemented here independently of the charting package:
magic "CCDS", version u32=1, N u64, B u32, W u32, D u32, then per record a
f64 timestamp, D f64 position coordinates and B*W interleaved (f32 real,
f32 imag) channel coefficients in antenna-major order, all little-endian.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvertError
from .example import Feature, parse_example
from .tensors import parse_tensor
from .tfrecord import read_records

logger = logging.getLogger(__name__)

_CCDS_HEADER = struct.Struct("<4sIQIII")
CCDS_MAGIC = b"CCDS"
CCDS_VERSION = 1


@dataclass(frozen=True)
class ArchiveSpec:
    sources: tuple
    out_path: str
    csi_field: str = "csi"
    position_field: str = "pos-tachy"
    time_field: str = "time"
    antenna_indices: tuple | None = None
    verify_crc: bool = True

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources:
            raise ConvertError("at least one source archive is required")
        if self.antenna_indices is not None:
            indices = tuple(int(i) for i in self.antenna_indices)
            if len(set(indices)) != len(indices):
                raise ConvertError("antenna subset indices must be unique")
            if any(i < 0 for i in indices):
                raise ConvertError("antenna subset indices must be nonnegative")
            object.__setattr__(self, "antenna_indices", indices)


@dataclass
class ConvertSummary:
    out_path: str
    n: int
    b: int
    w: int
    d: int
    duplicate_timestamps: int = 0
    sources: list = field(default_factory=list)


def _feature_array(feature: Feature, name: str, record: int) -> np.ndarray:
    if feature.kind == "bytes":
        if not feature.values:
            raise ConvertError(f"record {record}: field {name!r} is empty", record=record)
        return parse_tensor(feature.values[0])
    if feature.kind == "float":
        return np.asarray(feature.values, dtype=np.float64)
    raise ConvertError(f"record {record}: field {name!r} has kind {feature.kind}", record=record)


def _to_complex_csi(array: np.ndarray, record: int) -> np.ndarray:
    if array.ndim == 3 and array.shape[2] == 2 and array.dtype.kind == "f":
        return (array[:, :, 0] + 1j * array[:, :, 1]).astype(np.complex64)
    if array.ndim == 2 and array.dtype.kind == "c":
        return array.astype(np.complex64)
    raise ConvertError(
        f"record {record}: csi tensor has shape {array.shape} dtype {array.dtype}; "
        "expected (B, W, 2) floats or (B, W) complex",
        record=record,
    )


def _extract(features: dict, name: str, record: int) -> Feature:
    if name not in features:
        raise ConvertError(f"record {record}: missing field {name!r}", record=record)
    return features[name]


def convert(spec: ArchiveSpec) -> ConvertSummary:
    """Convert the archives into one CCDS container at ``spec.out_path``."""
    csi_list: list[np.ndarray] = []
    positions: list[np.ndarray] = []
    times: list[float] = []
    record = 0
    for source in spec.sources:
        for payload in read_records(source, verify_crc=spec.verify_crc):
            features = parse_example(payload)
            csi_raw = _feature_array(_extract(features, spec.csi_field, record), spec.csi_field, record)
            csi = _to_complex_csi(csi_raw, record)
            pos = _feature_array(
                _extract(features, spec.position_field, record), spec.position_field, record
            ).reshape(-1)
            if pos.size not in (2, 3):
                raise ConvertError(
                    f"record {record}: position has {pos.size} components, expected 2 or 3",
                    record=record,
                )
            tval = _feature_array(_extract(features, spec.time_field, record), spec.time_field, record)
            if tval.size != 1:
                raise ConvertError(
                    f"record {record}: timestamp has {tval.size} components, expected 1",
                    record=record,
                )
            if not (
                np.all(np.isfinite(csi.view(np.float32)))
                and np.all(np.isfinite(pos))
                and np.isfinite(tval.reshape(-1)[0])
            ):
                raise ConvertError(f"record {record}: non-finite values", record=record)
            csi_list.append(csi)
            positions.append(pos.astype(np.float64))
            times.append(float(tval.reshape(-1)[0]))
            record += 1

    if record == 0:
        raise ConvertError("archives contain no records")

    b, w = csi_list[0].shape
    d = positions[0].size
    for i, (c, p) in enumerate(zip(csi_list, positions)):
        if c.shape != (b, w):
            raise ConvertError(
                f"record {i}: csi shape {c.shape} differs from first record {(b, w)}", record=i
            )
        if p.size != d:
            raise ConvertError(
                f"record {i}: position dimensionality {p.size} differs from first record {d}",
                record=i,
            )

    if spec.antenna_indices is not None:
        if max(spec.antenna_indices) >= b:
            raise ConvertError(
                f"antenna index {max(spec.antenna_indices)} out of range for {b} antennas"
            )
        csi_list = [c[list(spec.antenna_indices), :] for c in csi_list]
        b = len(spec.antenna_indices)

    t = np.asarray(times, dtype=np.float64)
    t -= t.min()
    order = np.argsort(t, kind="stable")
    duplicates = int(np.sum(np.diff(t[order]) == 0))
    if duplicates:
        logger.warning("%d duplicate timestamps after normalization", duplicates)

    dtype = np.dtype([("t", "<f8"), ("pos", "<f8", (d,)), ("csi", "<f4", (b, w, 2))])
    records = np.empty(record, dtype=dtype)
    records["t"] = t
    records["pos"] = np.stack(positions)
    stacked = np.stack(csi_list)
    records["csi"][..., 0] = stacked.real
    records["csi"][..., 1] = stacked.imag

    with open(spec.out_path, "wb") as fh:
        fh.write(_CCDS_HEADER.pack(CCDS_MAGIC, CCDS_VERSION, record, b, w, d))
        fh.write(records.tobytes())

    return ConvertSummary(
        out_path=spec.out_path,
        n=record,
        b=b,
        w=w,
        d=d,
        duplicate_timestamps=duplicates,
        sources=list(spec.sources),
    )
