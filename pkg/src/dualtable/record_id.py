"""Record identifiers: (file_id, row_number) packed into one u64.

The packed form is ``file_id << 32 | row_number``. Because both halves are
unsigned 32-bit values, integer order on the packed u64 equals lexicographic
order on the (file_id, row_number) pair, which is what lets segment scans and
delta scans merge with a plain two-pointer walk.
"""

from __future__ import annotations

import struct

from .errors import StorageError

_U64 = struct.Struct(">Q")

MAX_COMPONENT = 0xFFFFFFFF


def make_record_id(file_id: int, row_number: int) -> int:
    """Pack the pair; both components must fit in 32 bits."""
    if not 0 <= file_id <= MAX_COMPONENT:
        raise StorageError(f"file_id {file_id!r} out of u32 range")
    if not 0 <= row_number <= MAX_COMPONENT:
        raise StorageError(f"row_number {row_number!r} out of u32 range")
    return (file_id << 32) | row_number


def file_id_of(record_id: int) -> int:
    return record_id >> 32


def row_number_of(record_id: int) -> int:
    return record_id & MAX_COMPONENT


def split_record_id(record_id: int) -> tuple[int, int]:
    return record_id >> 32, record_id & MAX_COMPONENT


def encode_record_id(record_id: int) -> bytes:
    """Big-endian u64 wire form, so byte order matches numeric order."""
    return _U64.pack(record_id)


def decode_record_id(raw: bytes) -> int:
    if len(raw) != 8:
        raise StorageError(f"record id must be 8 bytes, got {len(raw)}")
    return _U64.unpack(raw)[0]


def segment_window(file_id: int) -> tuple[int, int]:
    """Half-open packed-id range [lo, hi) covering one segment file."""
    lo = make_record_id(file_id, 0)
    return lo, lo + (MAX_COMPONENT + 1)
