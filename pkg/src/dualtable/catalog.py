"""Database-wide metadata: table registry, stats, file-id allocation.

One ``catalog.json`` per database directory holds every table descriptor,
its statistics (the inputs the cost model reads), the per-statement ratio
history, and the live segment manifest per table. All writes go through
:meth:`Catalog.save`, which writes a temp file and renames it over the old
one, so readers see either the previous or the next catalog, never a torn
one. The rename is the commit point the engine relies on when it swaps a
table's segment set.

Concurrency contract: single writer, any number of readers; the engine
serializes mutations with its statement lock.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field

from . import faults
from .cost_model import CostParams
from .errors import CatalogError
from .record_id import MAX_COMPONENT
from .schema import Schema

CATALOG_FILENAME = "catalog.json"
HISTORY_CAPACITY = 32
DEFAULT_RATIO = 0.05
DEFAULT_EWMA_WEIGHT = 0.5


@dataclass
class TableStats:
    """Logical sizes the cost model consumes; bytes are payload bytes."""

    data_size: int = 0
    row_count: int = 0
    avg_row_size: float = 0.0
    attached_size: int = 0
    attached_entries: int = 0

    def set_master(self, data_size: int, row_count: int) -> None:
        self.data_size = data_size
        self.row_count = row_count
        self.avg_row_size = (data_size / row_count) if row_count else 0.0

    def set_attached(self, size: int, entries: int) -> None:
        self.attached_size = size
        self.attached_entries = entries

    def to_json(self) -> dict:
        return {
            "data_size": self.data_size,
            "row_count": self.row_count,
            "avg_row_size": self.avg_row_size,
            "attached_size": self.attached_size,
            "attached_entries": self.attached_entries,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TableStats":
        return cls(
            data_size=data.get("data_size", 0),
            row_count=data.get("row_count", 0),
            avg_row_size=data.get("avg_row_size", 0.0),
            attached_size=data.get("attached_size", 0),
            attached_entries=data.get("attached_entries", 0),
        )


class RatioHistory:
    """Bounded FIFO of observed modification ratios plus their EWMA."""

    def __init__(self, samples=(), ewma: float = 0.0):
        self.samples: deque[float] = deque(samples, maxlen=HISTORY_CAPACITY)
        self.ewma = ewma

    def record(self, observed: float, weight: float) -> None:
        if not 0.0 <= observed <= 1.0:
            raise CatalogError(f"observed ratio {observed!r} outside [0, 1]")
        if self.samples:
            self.ewma = weight * observed + (1.0 - weight) * self.ewma
        else:
            self.ewma = observed
        self.samples.append(observed)

    def to_json(self, key: str) -> dict:
        return {"key": key, "samples": list(self.samples), "ewma": self.ewma}


@dataclass(frozen=True)
class SegmentInfo:
    """Manifest entry for one live master segment file."""

    file_id: int
    row_count: int
    bytes: int  # logical payload bytes, not file size


@dataclass
class TableDescriptor:
    name: str
    table_id: int
    schema: Schema
    next_file_id: int = 0
    stats: TableStats = field(default_factory=TableStats)
    history: dict[str, RatioHistory] = field(default_factory=dict)
    segments: list[SegmentInfo] = field(default_factory=list)
    # Shared, catalog-wide cost parameters; assigned by the owning Catalog.
    cost_params: CostParams | None = None

    def live_file_ids(self) -> set[int]:
        return {seg.file_id for seg in self.segments}

    def refresh_master_stats(self) -> None:
        self.stats.set_master(
            data_size=sum(seg.bytes for seg in self.segments),
            row_count=sum(seg.row_count for seg in self.segments),
        )


class Catalog:
    def __init__(self, data_dir: str, *, default_ratio: float = DEFAULT_RATIO,
                 ewma_weight: float = DEFAULT_EWMA_WEIGHT):
        self.data_dir = data_dir
        self.path = os.path.join(data_dir, CATALOG_FILENAME)
        self.default_ratio = default_ratio
        self.ewma_weight = ewma_weight
        self.tables: dict[str, TableDescriptor] = {}
        self.cost_params: CostParams | None = None
        self.next_table_id = 1

    # -- persistence -------------------------------------------------------

    @classmethod
    def open(cls, data_dir: str, **kwargs) -> "Catalog":
        cat = cls(data_dir, **kwargs)
        if os.path.exists(cat.path):
            try:
                with open(cat.path, "r", encoding="utf-8") as fh:
                    cat._load_json(json.load(fh))
            except (ValueError, KeyError, TypeError, OSError) as exc:
                raise CatalogError(f"unreadable catalog {cat.path}: {exc}") from exc
        try:
            # a crash between temp write and rename leaves this behind
            os.unlink(cat.path + ".tmp")
        except FileNotFoundError:
            pass
        return cat

    def _load_json(self, doc: dict) -> None:
        if doc.get("cost_params"):
            self.cost_params = CostParams.from_json(doc["cost_params"])
        self.next_table_id = doc.get("next_table_id", 1)
        for item in doc.get("tables", []):
            history = {
                h["key"]: RatioHistory(h.get("samples", ()), h.get("ewma", 0.0))
                for h in item.get("history", [])
            }
            segments = [
                SegmentInfo(s["file_id"], s["row_count"], s["bytes"])
                for s in item.get("segments", [])
            ]
            desc = TableDescriptor(
                name=item["name"],
                table_id=item["table_id"],
                schema=Schema.from_json(item["schema"]),
                next_file_id=item.get("next_file_id", 0),
                stats=TableStats.from_json(item.get("stats", {})),
                history=history,
                segments=sorted(segments, key=lambda s: s.file_id),
                cost_params=self.cost_params,
            )
            if desc.name in self.tables:
                raise CatalogError(f"duplicate table {desc.name!r} in catalog file")
            self.tables[desc.name] = desc
            if desc.table_id >= self.next_table_id:
                self.next_table_id = desc.table_id + 1

    def to_json(self) -> dict:
        return {
            "tables": [
                {
                    "name": t.name,
                    "table_id": t.table_id,
                    "schema": t.schema.to_json(),
                    "next_file_id": t.next_file_id,
                    "stats": t.stats.to_json(),
                    "history": [h.to_json(key) for key, h in sorted(t.history.items())],
                    "segments": [
                        {"file_id": s.file_id, "row_count": s.row_count, "bytes": s.bytes}
                        for s in t.segments
                    ],
                }
                for t in sorted(self.tables.values(), key=lambda t: t.table_id)
            ],
            "next_table_id": self.next_table_id,
            "cost_params": self.cost_params.to_json() if self.cost_params else None,
        }

    def save(self) -> None:
        """Atomically replace catalog.json (write temp, fsync, rename)."""
        body = json.dumps(self.to_json(), indent=1).encode("utf-8")
        tmp = self.path + ".tmp"
        budget = faults.fire("catalog.save.write")
        with open(tmp, "wb") as fh:
            if budget is not None and budget < len(body):
                fh.write(body[:budget])
                fh.flush()
                os.fsync(fh.fileno())
                raise faults.InjectedCrash("catalog.save.write")
            fh.write(body)
            fh.flush()
            os.fsync(fh.fileno())
        if faults.fire("catalog.save.pre_rename") is not None:
            raise faults.InjectedCrash("catalog.save.pre_rename")
        os.replace(tmp, self.path)
        self._fsync_dir()
        if faults.fire("catalog.save.post_rename") is not None:
            raise faults.InjectedCrash("catalog.save.post_rename")

    def _fsync_dir(self) -> None:
        try:
            fd = os.open(self.data_dir, os.O_RDONLY)
        except OSError:
            return
        try:
            os.fsync(fd)
        except OSError:
            pass
        finally:
            os.close(fd)

    # -- table registry ----------------------------------------------------

    def create_table(self, name: str, schema: Schema) -> TableDescriptor:
        if name in self.tables:
            raise CatalogError(f"table {name!r} already exists")
        # Ids come from a persistent counter and are never reused, so the
        # files of a dropped table can never be adopted by a newer one.
        table_id = self.next_table_id
        self.next_table_id += 1
        desc = TableDescriptor(name=name, table_id=table_id, schema=schema,
                               cost_params=self.cost_params)
        self.tables[name] = desc
        self.save()
        return desc

    def drop_table(self, name: str) -> TableDescriptor:
        desc = self.get(name)
        del self.tables[name]
        self.save()
        return desc

    def get(self, name: str) -> TableDescriptor:
        try:
            return self.tables[name]
        except KeyError:
            raise CatalogError(f"no table named {name!r}") from None

    def set_cost_params(self, params: CostParams | None) -> None:
        self.cost_params = params
        for desc in self.tables.values():
            desc.cost_params = params

    # -- file ids ----------------------------------------------------------

    def allocate_file_id(self, name: str) -> int:
        """Hand out the next segment file id, burning it durably first.

        The increment hits disk before the caller sees the id, so a crash
        after this call costs a gap in the sequence, never a reuse.
        """
        desc = self.get(name)
        file_id = desc.next_file_id
        if file_id > MAX_COMPONENT:
            raise CatalogError(f"table {name!r} exhausted its 32-bit file-id space")
        desc.next_file_id = file_id + 1
        self.save()
        return file_id

    # -- segment manifest ---------------------------------------------------

    def swap_segments(self, name: str, new_segments: list[SegmentInfo]) -> None:
        """Replace a table's live segment set; the save() is the commit."""
        desc = self.get(name)
        desc.segments = sorted(new_segments, key=lambda s: s.file_id)
        desc.refresh_master_stats()
        self.save()

    def append_segments(self, name: str, added: list[SegmentInfo]) -> None:
        desc = self.get(name)
        self.swap_segments(name, desc.segments + list(added))

    # -- ratio estimation ----------------------------------------------------

    def estimate_ratio(self, name: str, statement_key: str,
                       hint: float | None = None) -> float:
        """Hint wins, then history EWMA, then the configured default."""
        if hint is not None:
            if not 0.0 <= hint <= 1.0:
                raise CatalogError(f"ratio hint {hint!r} outside [0, 1]")
            return hint
        desc = self.get(name)
        hist = desc.history.get(statement_key)
        if hist is not None and hist.samples:
            return hist.ewma
        return self.default_ratio

    def record_observed_ratio(self, name: str, statement_key: str,
                              observed: float) -> None:
        desc = self.get(name)
        hist = desc.history.get(statement_key)
        if hist is None:
            hist = desc.history[statement_key] = RatioHistory()
        hist.record(observed, self.ewma_weight)
        self.save()
