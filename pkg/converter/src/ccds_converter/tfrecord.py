"""TFRecord framing: length-prefixed records with masked CRC-32C checksums.

Layout per record::

    u64  length  (little-endian)
    u32  masked crc32c of the length bytes
    data[length]
    u32  masked crc32c of data
"""

from __future__ import annotations

import struct
from typing import Iterable, Iterator

from .crc32c import masked_crc32c
from .errors import TfRecordError

_LEN = struct.Struct("<Q")
_CRC = struct.Struct("<I")


def read_records(path, verify_crc: bool = True) -> Iterator[bytes]:
    """Yield record payloads; validation failures name the record index and
    byte offset."""
    with open(path, "rb") as fh:
        index = 0
        offset = 0
        while True:
            header = fh.read(12)
            if not header:
                return
            if len(header) < 12:
                raise TfRecordError(
                    f"record {index}: truncated length header at byte {offset}", record=index
                )
            (length,) = _LEN.unpack_from(header, 0)
            (length_crc,) = _CRC.unpack_from(header, 8)
            if verify_crc and masked_crc32c(header[:8]) != length_crc:
                raise TfRecordError(
                    f"record {index}: length checksum mismatch at byte {offset}", record=index
                )
            data = fh.read(length)
            if len(data) < length:
                raise TfRecordError(
                    f"record {index}: truncated payload at byte {offset + 12}", record=index
                )
            footer = fh.read(4)
            if len(footer) < 4:
                raise TfRecordError(
                    f"record {index}: missing data checksum at byte {offset + 12 + length}",
                    record=index,
                )
            (data_crc,) = _CRC.unpack_from(footer, 0)
            if verify_crc and masked_crc32c(data) != data_crc:
                raise TfRecordError(
                    f"record {index}: data checksum mismatch at byte {offset + 12}", record=index
                )
            yield data
            index += 1
            offset += 12 + length + 4


def write_records(path, records: Iterable[bytes]) -> int:
    """Write payloads in TFRecord framing; returns the record count."""
    count = 0
    with open(path, "wb") as fh:
        for data in records:
            length = _LEN.pack(len(data))
            fh.write(length)
            fh.write(_CRC.pack(masked_crc32c(length)))
            fh.write(data)
            fh.write(_CRC.pack(masked_crc32c(data)))
            count += 1
    return count
