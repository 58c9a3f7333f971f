"""Immutable master segments: the batch-optimized half of a table.

Each segment is one file, written once and never modified; updates land in
the attached store and rewrites produce new files under fresh file ids.
Layout, all big-endian:

    [magic "DTBL"][u16 version=1][u32 table_id][u32 file_id]
    [u64 row_count][u64 schema_digest][rows...][u32 crc32]

The trailing CRC covers everything before it. Rows use the schema codec
(bitmap + length-prefixed cells). A logical write is cut into segments of
at most ``SEGMENT_TARGET_BYTES`` of encoded rows; file ids come from the
catalog so ids stay unique even across crashes.

The master byte counters account physical file bytes. Framing keeps the
file within 25% of the logical payload for realistic rows, which is the
efficiency bound the tests pin.
"""

from __future__ import annotations

import os
import struct
import zlib
from typing import Callable, Iterable

from . import faults
from .catalog import SegmentInfo
from .counters import IoCounters
from .errors import StorageError
from .schema import Schema

MAGIC = b"DTBL"
FORMAT_VERSION = 1
SEGMENT_TARGET_BYTES = 64 * 1024 * 1024

_HEADER = struct.Struct(">4sHIIQQ")
_CRC = struct.Struct(">I")


def segment_path(data_dir: str, table_id: int, file_id: int) -> str:
    return os.path.join(data_dir, f"t{table_id}_f{file_id}.dtb")


def write_segment(data_dir: str, table_id: int, file_id: int, schema: Schema,
                  encoded_rows: bytes, row_count: int,
                  counters: IoCounters | None = None) -> int:
    """Persist one already-encoded segment; returns physical file size."""
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, table_id, file_id,
                          row_count, schema.digest())
    body = header + encoded_rows
    blob = body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)
    path = segment_path(data_dir, table_id, file_id)
    budget = faults.fire("segment.write")
    with open(path, "wb") as fh:
        if budget is not None and budget < len(blob):
            fh.write(blob[:budget])
            fh.flush()
            os.fsync(fh.fileno())
            raise faults.InjectedCrash("segment.write")
        fh.write(blob)
        fh.flush()
        os.fsync(fh.fileno())
    if counters is not None:
        counters.master_bytes_written += len(blob)
    return len(blob)


def write_segments(data_dir: str, table_id: int, schema: Schema,
                   rows: Iterable[tuple], allocate_file_id: Callable[[], int],
                   counters: IoCounters | None = None,
                   target_bytes: int = SEGMENT_TARGET_BYTES) -> list[SegmentInfo]:
    """Encode rows and cut them into segments of about ``target_bytes``.

    A segment is cut before it would exceed the target, so only a single
    oversized row can push one past it. Returns manifest entries in the
    order written (ascending file id). An empty input writes nothing.
    """
    codec = schema.codec
    logical_bytes_of = codec.logical_bytes
    segments: list[SegmentInfo] = []
    parts: list[bytes] = []
    encoded_size = 0
    logical_size = 0
    count = 0

    def cut() -> None:
        nonlocal parts, encoded_size, logical_size, count
        file_id = allocate_file_id()
        write_segment(data_dir, table_id, file_id, schema,
                      b"".join(parts), count, counters)
        segments.append(SegmentInfo(file_id=file_id, row_count=count,
                                    bytes=logical_size))
        parts, encoded_size, logical_size, count = [], 0, 0, 0

    for row in rows:
        blob = codec.encode_row(row)
        if parts and encoded_size + len(blob) > target_bytes:
            cut()
        parts.append(blob)
        encoded_size += len(blob)
        logical_size += logical_bytes_of(row)
        count += 1
    if parts:
        cut()
    return segments


def _load_verified_body(data_dir: str, table_id: int, file_id: int, schema: Schema,
                        counters: IoCounters | None) -> tuple[bytes, int]:
    """Read one segment, check CRC and header; returns (body, row_count)."""
    path = segment_path(data_dir, table_id, file_id)
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise StorageError(f"missing segment file {path}") from None
    if counters is not None:
        counters.master_bytes_read += len(blob)
    if len(blob) < _HEADER.size + _CRC.size:
        raise StorageError(f"segment {path} truncated ({len(blob)} bytes)")
    (stored_crc,) = _CRC.unpack_from(blob, len(blob) - _CRC.size)
    body = blob[:-_CRC.size]
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise StorageError(f"segment {path} failed CRC check")
    magic, version, hdr_table, hdr_file, row_count, digest = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise StorageError(f"segment {path} has bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise StorageError(f"segment {path} has unsupported version {version}")
    if hdr_table != table_id or hdr_file != file_id:
        raise StorageError(
            f"segment {path} identifies as t{hdr_table}_f{hdr_file}, "
            f"expected t{table_id}_f{file_id}")
    if digest != schema.digest():
        raise StorageError(f"segment {path} was written under a different schema")
    return body, row_count


def read_segment(data_dir: str, table_id: int, file_id: int, schema: Schema,
                 counters: IoCounters | None = None) -> list[tuple]:
    """Load and verify one segment eagerly; corruption raises, never truncates."""
    body, row_count = _load_verified_body(data_dir, table_id, file_id, schema, counters)
    rows, end = schema.codec.decode_rows(body, _HEADER.size, row_count)
    if end != len(body):
        raise StorageError(f"segment has {len(body) - end} trailing bytes")
    return rows


def iter_segment(data_dir: str, table_id: int, file_id: int, schema: Schema,
                 counters: IoCounters | None = None):
    """Yield rows one at a time; the file is verified up front, decoded lazily."""
    body, row_count = _load_verified_body(data_dir, table_id, file_id, schema, counters)
    decode = schema.codec.decode_row
    offset = _HEADER.size
    for _ in range(row_count):
        row, offset = decode(body, offset)
        yield row
    if offset != len(body):
        raise StorageError(f"segment has {len(body) - offset} trailing bytes")


def delete_segment_file(data_dir: str, table_id: int, file_id: int) -> None:
    try:
        os.unlink(segment_path(data_dir, table_id, file_id))
    except FileNotFoundError:
        pass


def list_segment_files(data_dir: str) -> list[tuple[int, int]]:
    """All (table_id, file_id) pairs present on disk, referenced or not."""
    found = []
    for name in os.listdir(data_dir):
        if not (name.startswith("t") and name.endswith(".dtb")):
            continue
        stem = name[1:-4]
        table_part, sep, file_part = stem.partition("_f")
        if not sep or not table_part.isdigit() or not file_part.isdigit():
            continue
        found.append((int(table_part), int(file_part)))
    return sorted(found)
