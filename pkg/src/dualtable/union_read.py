"""Merge-on-read: the up-to-date view of master segments plus deltas.

Both inputs arrive sorted by record id (segments ascend by file id and row
number, the delta store scans in key order), so one two-pointer pass
produces the merged view: a delete marker drops the master row, a patch
replaces the named cells, everything else streams through untouched. The
merge itself holds at most one pending entry per input, so memory stays
flat no matter how large the table is.

Predicates run on the merged row, never on stale master values, and the
projection is applied last. With an empty delta store the merged view is
the master scan, byte for byte, with zero delta entries read.
"""

from __future__ import annotations

from typing import Callable, Iterable, Iterator, NamedTuple, Sequence

from . import master_store
from .attached_store import KIND_DELETE, AttachedStore, DeltaEntry
from .catalog import SegmentInfo, TableDescriptor
from .counters import IoCounters
from .errors import SchemaError
from .record_id import make_record_id, segment_window

Predicate = Callable[[tuple], bool]


class MergedRow(NamedTuple):
    record_id: int
    row: tuple


def scan_table(data_dir: str, desc: TableDescriptor,
               counters: IoCounters | None = None) -> Iterator[MergedRow]:
    """The master view alone, in ascending record-id order."""
    for seg in desc.segments:
        base = make_record_id(seg.file_id, 0)
        offset = 0
        for row in master_store.iter_segment(data_dir, desc.table_id, seg.file_id,
                                             desc.schema, counters):
            yield MergedRow(base + offset, row)
            offset += 1


def _merge(master: Iterable[MergedRow],
           deltas: Iterator[DeltaEntry]) -> Iterator[MergedRow]:
    """Two-pointer merge; deltas keyed past the master stream are ignored."""
    pending = next(deltas, None)
    for record_id, row in master:
        while pending is not None and pending.record_id < record_id:
            pending = next(deltas, None)
        if pending is not None and pending.record_id == record_id:
            entry = pending
            pending = next(deltas, None)
            if entry.kind == KIND_DELETE:
                continue
            cells = list(row)
            for ordinal, value in entry.patches.items():
                cells[ordinal] = value
            yield MergedRow(record_id, tuple(cells))
        else:
            yield MergedRow(record_id, row)


def _check_projection(desc: TableDescriptor,
                      projection: Sequence[int] | None) -> tuple[int, ...] | None:
    if projection is None:
        return None
    width = len(desc.schema.columns)
    ordinals = tuple(projection)
    for ordinal in ordinals:
        if not 0 <= ordinal < width:
            raise SchemaError(f"projection ordinal {ordinal} outside schema")
    return ordinals


def _filter_project(merged: Iterator[MergedRow], predicate: Predicate | None,
                    projection: tuple[int, ...] | None) -> Iterator[MergedRow]:
    for item in merged:
        if predicate is not None and not predicate(item.row):
            continue
        if projection is None:
            yield item
        else:
            yield MergedRow(item.record_id, tuple(item.row[i] for i in projection))


def union_read(data_dir: str, desc: TableDescriptor, attached: AttachedStore,
               projection: Sequence[int] | None = None,
               predicate: Predicate | None = None,
               counters: IoCounters | None = None) -> Iterator[MergedRow]:
    """Stream the whole logical table: master merged with visible deltas."""
    ordinals = _check_projection(desc, projection)
    merged = _merge(scan_table(data_dir, desc, counters), attached.scan_deltas())
    return _filter_project(merged, predicate, ordinals)


def union_read_partition(data_dir: str, desc: TableDescriptor, segment: SegmentInfo,
                         attached: AttachedStore,
                         projection: Sequence[int] | None = None,
                         predicate: Predicate | None = None,
                         counters: IoCounters | None = None) -> Iterator[MergedRow]:
    """union_read restricted to one segment's record-id window.

    Partitions over all segments, concatenated in file-id order, reproduce
    the full union_read; the delta scan is pruned to the window so a
    partition with no deltas costs zero attached reads.
    """
    ordinals = _check_projection(desc, projection)
    lo, hi = segment_window(segment.file_id)
    base = make_record_id(segment.file_id, 0)

    def one_segment() -> Iterator[MergedRow]:
        offset = 0
        for row in master_store.iter_segment(data_dir, desc.table_id, segment.file_id,
                                             desc.schema, counters):
            yield MergedRow(base + offset, row)
            offset += 1

    merged = _merge(one_segment(), attached.scan_deltas(lo, hi))
    return _filter_project(merged, predicate, ordinals)
