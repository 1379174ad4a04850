"""Serialized-tensor codec: the `TensorProto` subset that CSI archives use.

Field map (tensorflow/core/framework/tensor.proto):

    1  dtype          varint (DataType enum)
    2  tensor_shape   TensorShapeProto { repeated Dim dim = 2 { size = 1 } }
    3  version_number varint
    4  tensor_content raw little-endian bytes
    5  float_val      packed floats          (fallback when content empty)
    6  double_val     packed doubles
    7  int_val        packed varints
    9  scomplex_val   packed floats, (re, im) pairs
    10 int64_val      packed varints
    12 dcomplex_val   packed doubles, (re, im) pairs
"""

from __future__ import annotations

import struct

import numpy as np

from . import wire
from .errors import ConvertError

DT_FLOAT = 1
DT_DOUBLE = 2
DT_INT32 = 3
DT_COMPLEX64 = 8
DT_INT64 = 9
DT_COMPLEX128 = 18

_DTYPES = {
    DT_FLOAT: np.dtype("<f4"),
    DT_DOUBLE: np.dtype("<f8"),
    DT_INT32: np.dtype("<i4"),
    DT_COMPLEX64: np.dtype("<c8"),
    DT_INT64: np.dtype("<i8"),
    DT_COMPLEX128: np.dtype("<c16"),
}


def _parse_shape(buf: bytes) -> tuple[int, ...]:
    dims = []
    for field, _, value in wire.iter_fields(buf):
        if field == 2:  # Dim
            size = 0
            for dfield, _, dvalue in wire.iter_fields(value):
                if dfield == 1:
                    size = dvalue
            dims.append(size)
        elif field == 3 and value:  # unknown_rank
            raise ConvertError("tensor has unknown rank")
    return tuple(dims)


def _packed_floats(buf: bytes, width: str) -> np.ndarray:
    return np.frombuffer(buf, dtype=np.dtype(width))


def parse_tensor(buf: bytes) -> np.ndarray:
    """Decode a serialized tensor into an ndarray with its declared shape."""
    dtype_code = None
    shape: tuple[int, ...] = ()
    content = b""
    typed: dict[int, bytearray] = {}
    for field, wtype, value in wire.iter_fields(buf):
        if field == 1:
            dtype_code = value
        elif field == 2:
            shape = _parse_shape(value)
        elif field == 4:
            content = value
        elif field in (5, 6, 9, 12) and wtype == wire.LENGTH_DELIMITED:
            typed.setdefault(field, bytearray()).extend(value)
        elif field in (7, 10):
            # unpacked or packed varint ints
            arr = typed.setdefault(field, bytearray())
            if wtype == wire.VARINT:
                arr.extend(np.int64(value).tobytes())
            else:
                pos = 0
                while pos < len(value):
                    v, pos = wire.read_varint(value, pos)
                    arr.extend(np.int64(v).tobytes())
    if dtype_code is None:
        raise ConvertError("tensor missing dtype")
    if dtype_code not in _DTYPES:
        raise ConvertError(f"unsupported tensor dtype code {dtype_code}")
    dtype = _DTYPES[dtype_code]
    count = int(np.prod(shape)) if shape else 1

    if content:
        flat = np.frombuffer(content, dtype=dtype)
    elif dtype_code == DT_FLOAT and 5 in typed:
        flat = _packed_floats(bytes(typed[5]), "<f4")
    elif dtype_code == DT_DOUBLE and 6 in typed:
        flat = _packed_floats(bytes(typed[6]), "<f8")
    elif dtype_code == DT_COMPLEX64 and 9 in typed:
        pairs = _packed_floats(bytes(typed[9]), "<f4")
        flat = pairs[0::2] + 1j * pairs[1::2]
    elif dtype_code == DT_COMPLEX128 and 12 in typed:
        pairs = _packed_floats(bytes(typed[12]), "<f8")
        flat = pairs[0::2] + 1j * pairs[1::2]
    elif dtype_code in (DT_INT32, DT_INT64) and (7 in typed or 10 in typed):
        raw = np.frombuffer(bytes(typed.get(7) or typed.get(10)), dtype="<i8")
        flat = raw.astype(_DTYPES[dtype_code])
    else:
        raise ConvertError("tensor carries no data")

    if flat.size != count:
        raise ConvertError(f"tensor payload holds {flat.size} values, shape {shape} needs {count}")
    return flat.reshape(shape)


def encode_tensor(array: np.ndarray) -> bytes:
    """Serialize an ndarray as a TensorProto (tensor_content form)."""
    array = np.asarray(array)
    code = None
    for candidate, dtype in _DTYPES.items():
        if dtype == array.dtype.newbyteorder("<"):
            code = candidate
            break
    if code is None:
        raise ConvertError(f"unsupported array dtype {array.dtype}")
    shape_payload = b"".join(
        wire.encode_bytes_field(2, wire.encode_varint_field(1, int(dim))) for dim in array.shape
    )
    out = wire.encode_varint_field(1, code)
    out += wire.encode_bytes_field(2, shape_payload)
    out += wire.encode_varint_field(3, 0)
    out += wire.encode_bytes_field(4, np.ascontiguousarray(array).tobytes())
    return out
