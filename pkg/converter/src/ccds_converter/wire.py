"""Minimal protobuf wire-format codec: just enough to read and write
`Example` and `TensorProto` messages without a protobuf dependency."""

from __future__ import annotations

import struct
from typing import Iterator

from .errors import ConvertError

VARINT = 0
FIXED64 = 1
LENGTH_DELIMITED = 2
FIXED32 = 5


def read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise ConvertError("varint runs past end of buffer")
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise ConvertError("varint wider than 64 bits")


def iter_fields(buf: bytes) -> Iterator[tuple[int, int, object]]:
    """Yield (field_number, wire_type, value); value is an int for varint
    and fixed types, bytes for length-delimited fields."""
    pos = 0
    while pos < len(buf):
        key, pos = read_varint(buf, pos)
        field = key >> 3
        wire = key & 7
        if wire == VARINT:
            value, pos = read_varint(buf, pos)
        elif wire == FIXED64:
            if pos + 8 > len(buf):
                raise ConvertError("fixed64 runs past end of buffer")
            (value,) = struct.unpack_from("<Q", buf, pos)
            pos += 8
        elif wire == LENGTH_DELIMITED:
            length, pos = read_varint(buf, pos)
            if pos + length > len(buf):
                raise ConvertError("length-delimited field runs past end of buffer")
            value = buf[pos : pos + length]
            pos += length
        elif wire == FIXED32:
            if pos + 4 > len(buf):
                raise ConvertError("fixed32 runs past end of buffer")
            (value,) = struct.unpack_from("<I", buf, pos)
            pos += 4
        else:
            raise ConvertError(f"unsupported wire type {wire} for field {field}")
        yield field, wire, value


def encode_varint(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def encode_key(field: int, wire: int) -> bytes:
    return encode_varint((field << 3) | wire)


def encode_bytes_field(field: int, payload: bytes) -> bytes:
    return encode_key(field, LENGTH_DELIMITED) + encode_varint(len(payload)) + payload


def encode_varint_field(field: int, value: int) -> bytes:
    return encode_key(field, VARINT) + encode_varint(value)
