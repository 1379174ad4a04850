"""`Example` message codec: a record is a map from field names to features,
where each feature is a bytes list, a packed float list, or an int64 list."""

from __future__ import annotations

import struct

import numpy as np

from . import wire
from .errors import ConvertError


class Feature:
    """One decoded feature: kind is "bytes", "float" or "int64"."""

    def __init__(self, kind: str, values):
        self.kind = kind
        self.values = values


def _parse_feature(buf: bytes) -> Feature:
    for field, wtype, value in wire.iter_fields(buf):
        if field == 1:  # BytesList
            items = [v for f, _, v in wire.iter_fields(value) if f == 1]
            return Feature("bytes", items)
        if field == 2:  # FloatList
            floats = bytearray()
            for f, wt, v in wire.iter_fields(value):
                if f != 1:
                    continue
                if wt == wire.LENGTH_DELIMITED:
                    floats.extend(v)
                elif wt == wire.FIXED32:
                    floats.extend(struct.pack("<I", v))
            return Feature("float", np.frombuffer(bytes(floats), dtype="<f4"))
        if field == 3:  # Int64List
            ints = []
            for f, wt, v in wire.iter_fields(value):
                if f != 1:
                    continue
                if wt == wire.VARINT:
                    ints.append(v)
                else:
                    pos = 0
                    while pos < len(v):
                        val, pos = wire.read_varint(v, pos)
                        ints.append(val)
            return Feature("int64", np.array(ints, dtype=np.int64))
    return Feature("bytes", [])


def parse_example(buf: bytes) -> dict[str, Feature]:
    features: dict[str, Feature] = {}
    for field, _, value in wire.iter_fields(buf):
        if field != 1:  # Features
            continue
        for ffield, _, entry in wire.iter_fields(value):
            if ffield != 1:  # map entry
                continue
            key = None
            feature = None
            for efield, _, evalue in wire.iter_fields(entry):
                if efield == 1:
                    key = evalue.decode("utf-8")
                elif efield == 2:
                    feature = _parse_feature(evalue)
            if key is not None and feature is not None:
                features[key] = feature
    return features


def encode_example(features: dict[str, object]) -> bytes:
    """Build an Example from {name: bytes | float array | int array}."""
    entries = b""
    for key, value in features.items():
        if isinstance(value, bytes):
            payload = wire.encode_bytes_field(1, wire.encode_bytes_field(1, value))
        elif isinstance(value, np.ndarray) and value.dtype.kind == "f":
            packed = np.asarray(value, dtype="<f4").tobytes()
            payload = wire.encode_bytes_field(2, wire.encode_bytes_field(1, packed))
        elif isinstance(value, np.ndarray) and value.dtype.kind in "iu":
            body = b"".join(wire.encode_varint(int(v)) for v in value)
            payload = wire.encode_bytes_field(3, wire.encode_bytes_field(1, body))
        else:
            raise ConvertError(f"cannot encode feature {key!r} of type {type(value)}")
        entry = wire.encode_bytes_field(1, key.encode("utf-8")) + wire.encode_bytes_field(2, payload)
        entries += wire.encode_bytes_field(1, entry)
    return wire.encode_bytes_field(1, entries)
