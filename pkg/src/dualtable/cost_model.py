"""Throughput-linear cost model deciding EDIT versus OVERWRITE.

Everything here treats a store as a pipe with a fixed byte rate: moving
``D`` bytes costs ``D/rate`` seconds, and a table is read ``k`` more times
before the next rewrite. The two margin functions return the cost of the
OVERWRITE plan minus the cost of the EDIT plan, so positive means EDIT is
the cheaper way to run the statement.

For an update touching fraction ``alpha`` of a table of ``D`` bytes:

    margin = D/W_M - alpha * (D/W_A + k * D/R_A)

For a delete of fraction ``beta`` with average row size ``d`` and delete
marker size ``m``:

    margin = D/W_M - beta * (D/W_M + k*D/R_M + (m/d)*D/W_A + k*(m/d)*D/R_A)

``W``/``R`` are write/read rates, ``M``/``A`` the master and attached
stores. Both margins are exact real arithmetic over the inputs; no hidden
constants.
"""

from __future__ import annotations

import enum
import os
import time
from dataclasses import dataclass
from typing import NamedTuple

from .errors import PlanError

DEFAULT_SUCCESSIVE_READS = 10
DELETE_MARKER_BYTES = 9  # 8-byte record key + 1 tag byte, see attached_store


class Plan(enum.Enum):
    EDIT = "edit"
    OVERWRITE = "overwrite"


@dataclass(frozen=True)
class CostParams:
    """Store throughputs in bytes/second plus the re-read count k.

    ``master_read_rate`` has no default on purpose: it never appears in the
    update margin, so a bad guess would silently skew only deletes.
    Configuration or :func:`calibrate` must supply it.
    """

    master_write_rate: float
    master_read_rate: float
    attached_write_rate: float
    attached_read_rate: float
    successive_reads_k: float = DEFAULT_SUCCESSIVE_READS
    marker_size_m: int = DELETE_MARKER_BYTES

    def __post_init__(self):
        for name in ("master_write_rate", "master_read_rate",
                     "attached_write_rate", "attached_read_rate"):
            if not getattr(self, name) > 0:
                raise PlanError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if self.successive_reads_k < 0:
            raise PlanError(f"successive_reads_k must be >= 0, got {self.successive_reads_k!r}")
        if not self.marker_size_m > 0:
            raise PlanError(f"marker_size_m must be > 0, got {self.marker_size_m!r}")

    def with_k(self, k: float | None) -> "CostParams":
        if k is None or k == self.successive_reads_k:
            return self
        return CostParams(self.master_write_rate, self.master_read_rate,
                          self.attached_write_rate, self.attached_read_rate,
                          k, self.marker_size_m)

    def to_json(self) -> dict:
        return {
            "master_write_rate": self.master_write_rate,
            "master_read_rate": self.master_read_rate,
            "attached_write_rate": self.attached_write_rate,
            "attached_read_rate": self.attached_read_rate,
            "successive_reads_k": self.successive_reads_k,
            "marker_size_m": self.marker_size_m,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CostParams":
        return cls(**data)


@dataclass(frozen=True)
class PlanDecision:
    plan: Plan
    cost_margin_seconds: float
    ratio_used: float


class PlanCosts(NamedTuple):
    """Absolute per-plan costs; overwrite - edit reproduces the margin."""
    edit: float
    overwrite: float


def _check_ratio(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise PlanError(f"{name} must be in [0, 1], got {value!r}")


def cost_update(data_bytes: float, alpha: float, p: CostParams) -> float:
    """Seconds saved by running an update as EDIT instead of OVERWRITE."""
    if data_bytes < 0:
        raise PlanError(f"data_bytes must be >= 0, got {data_bytes!r}")
    _check_ratio("alpha", alpha)
    k = p.successive_reads_k
    return (data_bytes / p.master_write_rate
            - alpha * (data_bytes / p.attached_write_rate
                       + k * data_bytes / p.attached_read_rate))


def cost_delete(data_bytes: float, beta: float, avg_row_bytes: float, p: CostParams) -> float:
    """Seconds saved by running a delete as EDIT instead of OVERWRITE."""
    if data_bytes < 0:
        raise PlanError(f"data_bytes must be >= 0, got {data_bytes!r}")
    _check_ratio("beta", beta)
    if not avg_row_bytes > 0:
        raise PlanError(f"avg_row_bytes must be > 0, got {avg_row_bytes!r}")
    k = p.successive_reads_k
    marker_frac = p.marker_size_m / avg_row_bytes
    return (data_bytes / p.master_write_rate
            - beta * (data_bytes / p.master_write_rate
                      + k * data_bytes / p.master_read_rate
                      + marker_frac * data_bytes / p.attached_write_rate
                      + k * marker_frac * data_bytes / p.attached_read_rate))


def update_plan_costs(data_bytes: float, alpha: float, p: CostParams) -> PlanCosts:
    """Absolute costs of each update plan, including the k follow-up reads.

    OVERWRITE rewrites the whole table and serves k reads from the new
    master; EDIT writes alpha*D of patches and serves each of the k reads
    as a full master scan merged with the patch bytes.
    """
    if data_bytes < 0:
        raise PlanError(f"data_bytes must be >= 0, got {data_bytes!r}")
    _check_ratio("alpha", alpha)
    k = p.successive_reads_k
    overwrite = data_bytes / p.master_write_rate + k * data_bytes / p.master_read_rate
    edit = (alpha * data_bytes / p.attached_write_rate
            + k * (alpha * data_bytes / p.attached_read_rate
                   + data_bytes / p.master_read_rate))
    return PlanCosts(edit=edit, overwrite=overwrite)


def delete_plan_costs(data_bytes: float, beta: float, avg_row_bytes: float,
                      p: CostParams) -> PlanCosts:
    """Absolute costs of each delete plan.

    OVERWRITE rewrites and re-reads only the surviving (1-beta) fraction;
    EDIT appends beta*(m/d)*D of markers and keeps scanning the full old
    master plus the marker bytes on each of the k reads.
    """
    if data_bytes < 0:
        raise PlanError(f"data_bytes must be >= 0, got {data_bytes!r}")
    _check_ratio("beta", beta)
    if not avg_row_bytes > 0:
        raise PlanError(f"avg_row_bytes must be > 0, got {avg_row_bytes!r}")
    k = p.successive_reads_k
    surviving = (1.0 - beta) * data_bytes
    overwrite = surviving / p.master_write_rate + k * surviving / p.master_read_rate
    marker_bytes = beta * data_bytes * (p.marker_size_m / avg_row_bytes)
    edit = (marker_bytes / p.attached_write_rate
            + k * (marker_bytes / p.attached_read_rate
                   + data_bytes / p.master_read_rate))
    return PlanCosts(edit=edit, overwrite=overwrite)


def crossover_update(p: CostParams) -> float:
    """The alpha at which the update margin crosses zero, clamped to [0,1]."""
    ratio = (1.0 / p.master_write_rate) / (
        1.0 / p.attached_write_rate + p.successive_reads_k / p.attached_read_rate)
    return min(1.0, max(0.0, ratio))


def crossover_delete(avg_row_bytes: float, p: CostParams) -> float:
    """The beta at which the delete margin crosses zero, clamped to [0,1]."""
    if not avg_row_bytes > 0:
        raise PlanError(f"avg_row_bytes must be > 0, got {avg_row_bytes!r}")
    k = p.successive_reads_k
    marker_frac = p.marker_size_m / avg_row_bytes
    denom = (1.0 / p.master_write_rate
             + k / p.master_read_rate
             + marker_frac / p.attached_write_rate
             + k * marker_frac / p.attached_read_rate)
    ratio = (1.0 / p.master_write_rate) / denom
    return min(1.0, max(0.0, ratio))


def choose_plan(op_kind: str, stats, ratio: float, p: CostParams) -> PlanDecision:
    """Pick the cheaper plan for one statement.

    ``stats`` is anything exposing ``data_size`` (logical table bytes) and
    ``avg_row_size``; the catalog's TableStats qualifies. ``ratio`` is the
    estimated affected fraction. Ties go to OVERWRITE: it leaves the
    attached store empty, which every later read benefits from.
    """
    if op_kind == "update":
        margin = cost_update(stats.data_size, ratio, p)
    elif op_kind == "delete":
        margin = cost_delete(stats.data_size, ratio, stats.avg_row_size, p)
    else:
        raise PlanError(f"no cost model for op {op_kind!r}")
    plan = Plan.EDIT if margin > 0 else Plan.OVERWRITE
    return PlanDecision(plan=plan, cost_margin_seconds=margin, ratio_used=ratio)


def audit_line(table: str, op_kind: str, decision: PlanDecision,
               ts: float | None = None) -> str:
    """One-line record of a plan decision for the audit log."""
    stamp = time.time() if ts is None else ts
    return (f"{stamp:.6f}, {table}, {op_kind}, {decision.ratio_used:.6f}, "
            f"{decision.cost_margin_seconds:.6f}, {decision.plan.value}")


def calibrate(data_dir: str, probe_bytes: int = 64 * 1024 * 1024,
              k: float = DEFAULT_SUCCESSIVE_READS) -> CostParams:
    """Measure store throughputs with probe files under ``data_dir``.

    Master rates come from one sequential write/read of ``probe_bytes``;
    attached rates from the same volume moved in journal-sized 4 KiB
    chunks with an fsync per batch, which is roughly how the delta journal
    behaves. Results land in a CostParams; wall-clock noise makes this a
    convenience, not an oracle.
    """
    os.makedirs(data_dir, exist_ok=True)
    chunk = b"\xa5" * (1 << 20)
    reps = max(1, probe_bytes // len(chunk))
    master_path = os.path.join(data_dir, "probe_master.tmp")
    attached_path = os.path.join(data_dir, "probe_attached.tmp")
    try:
        start = time.perf_counter()
        with open(master_path, "wb") as fh:
            for _ in range(reps):
                fh.write(chunk)
            fh.flush()
            os.fsync(fh.fileno())
        w_m = reps * len(chunk) / max(time.perf_counter() - start, 1e-9)

        start = time.perf_counter()
        with open(master_path, "rb") as fh:
            while fh.read(1 << 20):
                pass
        r_m = reps * len(chunk) / max(time.perf_counter() - start, 1e-9)

        small = b"\x5a" * 4096
        small_reps = max(1, probe_bytes // (8 * len(small)))
        start = time.perf_counter()
        with open(attached_path, "wb") as fh:
            for i in range(small_reps):
                fh.write(small)
                if i % 64 == 63:
                    fh.flush()
                    os.fsync(fh.fileno())
            fh.flush()
            os.fsync(fh.fileno())
        w_a = small_reps * len(small) / max(time.perf_counter() - start, 1e-9)

        start = time.perf_counter()
        with open(attached_path, "rb") as fh:
            while fh.read(4096):
                pass
        r_a = small_reps * len(small) / max(time.perf_counter() - start, 1e-9)
    finally:
        for path in (master_path, attached_path):
            try:
                os.unlink(path)
            except FileNotFoundError:
                pass
    return CostParams(master_write_rate=w_m, master_read_rate=r_m,
                      attached_write_rate=w_a, attached_read_rate=r_a,
                      successive_reads_k=k)
