"""Random-access delta store: cell patches and delete markers per record.

This is the mutable half of a table. State lives in an in-memory map from
record id to either a column->value patch dict or a delete marker, backed
by a CRC-framed append-only journal:

    t<table_id>_attached.log
    frame: [u32 len][u64 record_id][u8 kind][payload][u32 crc]

``len`` counts record_id+kind+payload; the CRC covers the same span. Patch
payloads are ``u16 count`` then ``(u16 ordinal, u32 len, bytes)*`` with
length 0xFFFFFFFF marking an explicit NULL. Besides PATCH and DELETE the
journal carries STMT_BEGIN/STMT_COMMIT pairs so a multi-record statement
replays all or nothing; records outside a pair commit individually.

Logical size accounting (what the cost model and the stats see): a delete
marker costs MARKER_SIZE = 9 bytes (8-byte key + 1 tag byte), a patch
costs 8 key bytes plus its cell payload bytes. The byte counters track
written/read logical bytes, not journal framing.

Visibility rules per record id: later patches merge column-wise over
earlier ones; a delete marker supersedes everything; patching a deleted
record is a contract error (an engine would never try), though journal
replay skips such records instead of failing so any write prefix loads.

Concurrency: single writer, snapshot readers. Merging builds a fresh
patch dict instead of mutating, so an in-flight scan keeps the state it
started from.
"""

from __future__ import annotations

import os
import struct
import zlib
from bisect import bisect_left
from typing import Iterable, Iterator, NamedTuple

from . import faults
from .counters import IoCounters
from .errors import DeltaError, StorageError
from .record_id import file_id_of
from .schema import Schema, decode_cell, encode_cell

KIND_PATCH = 0
KIND_DELETE = 1
KIND_STMT_BEGIN = 2
KIND_STMT_COMMIT = 3

MARKER_SIZE = 9  # logical bytes of one delete marker (8 key + 1 tag)
KEY_SIZE = 8

_FRAME_HEAD = struct.Struct(">I")
_BODY_HEAD = struct.Struct(">QB")
_CRC = struct.Struct(">I")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")

_NULL_LEN = 0xFFFFFFFF
# Upper bound on a sane frame body; anything larger is treated as a torn
# or corrupt tail during replay rather than attempted as an allocation.
_MAX_BODY = 1 << 28

_DELETED = object()


class DeltaEntry(NamedTuple):
    record_id: int
    kind: int  # KIND_PATCH or KIND_DELETE
    patches: dict[int, object] | None  # None for delete markers


def journal_path(data_dir: str, table_id: int) -> str:
    return os.path.join(data_dir, f"t{table_id}_attached.log")


class AttachedStore:
    def __init__(self, data_dir: str, table_id: int, schema: Schema,
                 counters: IoCounters | None = None):
        self.data_dir = data_dir
        self.table_id = table_id
        self.schema = schema
        self.counters = counters
        self.size_bytes = 0
        self._entries: dict[int, object] = {}  # rid -> patch dict | _DELETED
        self._sorted_ids: list[int] = []
        self._sorted_dirty = False
        self._fh = None
        self._path = journal_path(data_dir, table_id)

    # -- lifecycle -----------------------------------------------------------

    def open(self, live_file_ids: set[int] | None = None) -> None:
        """Replay the journal, drop the torn tail, keep the handle open.

        ``live_file_ids`` filters out deltas keyed by segments that no
        longer exist: a crash between a segment swap and the journal clear
        leaves such records behind, and they must not resurrect.
        """
        exists = os.path.exists(self._path)
        self._fh = open(self._path, "r+b" if exists else "w+b")
        raw = self._fh.read()
        valid_end = self._replay(raw, live_file_ids)
        if valid_end < len(raw):
            self._fh.truncate(valid_end)
            self._fh.flush()
            os.fsync(self._fh.fileno())
        self._fh.seek(valid_end)
        self._recompute_size()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _replay(self, raw: bytes, live_file_ids: set[int] | None) -> int:
        offset = 0
        valid_end = 0
        group: list[tuple[int, int, bytes]] | None = None
        while True:
            if offset + _FRAME_HEAD.size > len(raw):
                break
            (body_len,) = _FRAME_HEAD.unpack_from(raw, offset)
            if body_len < _BODY_HEAD.size or body_len > _MAX_BODY:
                break
            end = offset + _FRAME_HEAD.size + body_len + _CRC.size
            if end > len(raw):
                break
            body = raw[offset + _FRAME_HEAD.size:end - _CRC.size]
            (stored_crc,) = _CRC.unpack_from(raw, end - _CRC.size)
            if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
                break
            record_id, kind = _BODY_HEAD.unpack_from(body, 0)
            payload = body[_BODY_HEAD.size:]
            if kind == KIND_STMT_BEGIN:
                group = []
            elif kind == KIND_STMT_COMMIT:
                if group is not None:
                    for rid, rkind, rpayload in group:
                        self._apply_replayed(rid, rkind, rpayload, live_file_ids)
                    group = None
                valid_end = end
            elif kind in (KIND_PATCH, KIND_DELETE):
                if group is not None:
                    group.append((record_id, kind, payload))
                else:
                    self._apply_replayed(record_id, kind, payload, live_file_ids)
                    valid_end = end
            else:
                break  # unknown kind: treat as corruption, stop here
            offset = end
        return valid_end

    def _apply_replayed(self, record_id: int, kind: int, payload: bytes,
                        live_file_ids: set[int] | None) -> None:
        if live_file_ids is not None and file_id_of(record_id) not in live_file_ids:
            return
        if kind == KIND_DELETE:
            self._set_deleted(record_id)
            return
        patches = self._decode_patch_payload(payload)
        current = self._entries.get(record_id)
        if current is _DELETED:
            return  # replay tolerates what the live API rejects
        self._merge_patch(record_id, current, patches)

    def _recompute_size(self) -> None:
        total = 0
        for entry in self._entries.values():
            total += self._entry_size(entry)
        self.size_bytes = total

    # -- encoding ------------------------------------------------------------

    def _encode_patch_payload(self, patches: dict[int, object]) -> bytes:
        parts = [_U16.pack(len(patches))]
        for ordinal in sorted(patches):
            value = patches[ordinal]
            parts.append(_U16.pack(ordinal))
            if value is None:
                parts.append(_U32.pack(_NULL_LEN))
                continue
            blob = encode_cell(self.schema.columns[ordinal].type, value)
            parts.append(_U32.pack(len(blob)))
            parts.append(blob)
        return b"".join(parts)

    def _decode_patch_payload(self, payload: bytes) -> dict[int, object]:
        if len(payload) < _U16.size:
            raise StorageError("patch payload shorter than its count field")
        (count,) = _U16.unpack_from(payload, 0)
        offset = _U16.size
        patches: dict[int, object] = {}
        for _ in range(count):
            if offset + 6 > len(payload):
                raise StorageError("patch cell header runs past payload end")
            (ordinal,) = _U16.unpack_from(payload, offset)
            (length,) = _U32.unpack_from(payload, offset + 2)
            offset += 6
            if ordinal >= len(self.schema.columns):
                raise StorageError(f"patch ordinal {ordinal} outside schema")
            if length == _NULL_LEN:
                patches[ordinal] = None
                continue
            if offset + length > len(payload):
                raise StorageError("patch cell payload runs past payload end")
            patches[ordinal] = decode_cell(self.schema.columns[ordinal].type,
                                           payload[offset:offset + length])
            offset += length
        return patches

    def _frame(self, record_id: int, kind: int, payload: bytes = b"") -> bytes:
        body = _BODY_HEAD.pack(record_id, kind) + payload
        return _FRAME_HEAD.pack(len(body)) + body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)

    def _append(self, frames: list[bytes]) -> None:
        batch = b"".join(frames)
        budget = faults.fire("journal.write")
        if budget is not None and budget < len(batch):
            self._fh.write(batch[:budget])
            self._fh.flush()
            os.fsync(self._fh.fileno())
            raise faults.InjectedCrash("journal.write")
        self._fh.write(batch)
        self._fh.flush()
        os.fsync(self._fh.fileno())

    # -- size accounting -------------------------------------------------------

    def _entry_size(self, entry) -> int:
        if entry is _DELETED:
            return MARKER_SIZE
        return KEY_SIZE + sum(
            self.schema.cell_size(ordinal, value) for ordinal, value in entry.items())

    def _patch_write_size(self, patches: dict[int, object]) -> int:
        return KEY_SIZE + sum(
            self.schema.cell_size(ordinal, value) for ordinal, value in patches.items())

    @property
    def entry_count(self) -> int:
        return len(self._entries)

    # -- mutation ---------------------------------------------------------------

    def _check_patches(self, patches: dict[int, object]) -> dict[int, object]:
        if not patches:
            raise DeltaError("patch must assign at least one column")
        checked = {}
        for ordinal, value in patches.items():
            if not 0 <= ordinal < len(self.schema.columns):
                raise DeltaError(f"patch ordinal {ordinal} outside schema")
            checked[ordinal] = self.schema.check_value(ordinal, value)
        return checked

    def _merge_patch(self, record_id: int, current, patches: dict[int, object]) -> None:
        if current is None:
            merged = dict(patches)
            self._sorted_insert(record_id)
            old_size = 0
        else:
            merged = dict(current)
            merged.update(patches)
            old_size = self._entry_size(current)
        self._entries[record_id] = merged
        self.size_bytes += self._entry_size(merged) - old_size

    def _set_deleted(self, record_id: int) -> None:
        current = self._entries.get(record_id)
        if current is _DELETED:
            return
        if current is None:
            self._sorted_insert(record_id)
            old_size = 0
        else:
            old_size = self._entry_size(current)
        self._entries[record_id] = _DELETED
        self.size_bytes += MARKER_SIZE - old_size

    def _sorted_insert(self, record_id: int) -> None:
        self._sorted_ids.append(record_id)
        self._sorted_dirty = True

    def put_patch(self, record_id: int, patches: dict[int, object]) -> None:
        """Merge new cell values over whatever this record already has."""
        checked = self._check_patches(patches)
        current = self._entries.get(record_id)
        if current is _DELETED:
            raise DeltaError(f"record {record_id:#x} is deleted; patch rejected")
        self._append([self._frame(record_id, KIND_PATCH,
                                  self._encode_patch_payload(checked))])
        self._merge_patch(record_id, current, checked)
        if self.counters is not None:
            self.counters.attached_bytes_written += self._patch_write_size(checked)

    def put_delete_marker(self, record_id: int) -> None:
        """Mark a record deleted; repeated deletes are no-ops."""
        if self._entries.get(record_id) is _DELETED:
            return
        self._append([self._frame(record_id, KIND_DELETE)])
        self._set_deleted(record_id)
        if self.counters is not None:
            self.counters.attached_bytes_written += MARKER_SIZE

    def apply_statement(self, patches: Iterable[tuple[int, dict[int, object]]],
                        deletes: Iterable[int]) -> None:
        """Apply one statement's deltas atomically (all or nothing on replay).

        Validates everything first, then journals BEGIN + records + COMMIT
        in a single append, then updates memory. A crash inside the append
        leaves a commit-less group that replay discards.
        """
        checked_patches = []
        for record_id, cols in patches:
            if self._entries.get(record_id) is _DELETED:
                raise DeltaError(f"record {record_id:#x} is deleted; patch rejected")
            checked_patches.append((record_id, self._check_patches(cols)))
        delete_ids = [rid for rid in deletes if self._entries.get(rid) is not _DELETED]

        frames = [self._frame(0, KIND_STMT_BEGIN)]
        for record_id, cols in checked_patches:
            frames.append(self._frame(record_id, KIND_PATCH,
                                      self._encode_patch_payload(cols)))
        for record_id in delete_ids:
            frames.append(self._frame(record_id, KIND_DELETE))
        frames.append(self._frame(0, KIND_STMT_COMMIT))
        self._append(frames)

        written = 0
        for record_id, cols in checked_patches:
            self._merge_patch(record_id, self._entries.get(record_id), cols)
            written += self._patch_write_size(cols)
        for record_id in delete_ids:
            self._set_deleted(record_id)
            written += MARKER_SIZE
        if self.counters is not None:
            self.counters.attached_bytes_written += written

    def clear(self) -> None:
        """Empty the store; OVERWRITE and COMPACT end with this."""
        if faults.fire("journal.clear") is not None:
            raise faults.InjectedCrash("journal.clear")
        self._fh.truncate(0)
        self._fh.seek(0)
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._entries.clear()
        self._sorted_ids.clear()
        self._sorted_dirty = False
        self.size_bytes = 0

    # -- reads ---------------------------------------------------------------

    def _sorted_view(self) -> list[int]:
        if self._sorted_dirty:
            self._sorted_ids.sort()
            self._sorted_dirty = False
        return self._sorted_ids

    def scan_deltas(self, lo: int = 0, hi: int = 1 << 64) -> Iterator[DeltaEntry]:
        """Visible entries with lo <= record_id < hi, ascending.

        The iterator walks a snapshot taken now; later writes don't leak
        in. Read counters grow per entry as it is yielded.
        """
        if lo > hi:
            raise DeltaError(f"scan range [{lo:#x}, {hi:#x}) is inverted")
        ids = self._sorted_view()
        start = bisect_left(ids, lo)
        snapshot = []
        for idx in range(start, len(ids)):
            rid = ids[idx]
            if rid >= hi:
                break
            snapshot.append((rid, self._entries[rid]))
        return self._yield_snapshot(snapshot)

    def _yield_snapshot(self, snapshot) -> Iterator[DeltaEntry]:
        counters = self.counters
        for rid, entry in snapshot:
            if counters is not None:
                counters.attached_bytes_read += self._entry_size(entry)
                counters.attached_entries_read += 1
            if entry is _DELETED:
                yield DeltaEntry(rid, KIND_DELETE, None)
            else:
                yield DeltaEntry(rid, KIND_PATCH, entry)
