"""Byte counters shared by the stores: the measurement substrate.

Every benchmark claim and model-versus-observation check in this package
reduces to these five numbers, so the stores increment them at the point
where bytes actually cross into or out of a file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class IoCounters:
    master_bytes_read: int = 0
    master_bytes_written: int = 0
    attached_bytes_read: int = 0
    attached_bytes_written: int = 0
    attached_entries_read: int = 0

    def reset(self) -> None:
        for f in fields(self):
            setattr(self, f.name, 0)

    def snapshot(self) -> "IoCounters":
        return IoCounters(**{f.name: getattr(self, f.name) for f in fields(self)})

    def delta_since(self, earlier: "IoCounters") -> "IoCounters":
        return IoCounters(**{
            f.name: getattr(self, f.name) - getattr(earlier, f.name) for f in fields(self)
        })

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}
