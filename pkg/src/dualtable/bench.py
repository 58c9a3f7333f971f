"""Experiment harness: ratio sweeps and byte-counter cost oracles.

A sweep builds a fresh table per grid point, runs the same UPDATE or
DELETE under three series (forced edit, forced overwrite, cost-model
choice), and reports one CSV row per run:

    ratio,series,plan,model_cost_s,oracle_cost_s,master_read,master_written,attached_read,attached_written,wall_s

The byte columns are the statement's own counter deltas (its discovery
scan, its writes). ``model_cost_s`` is the cost model's absolute cost of
the plan the row ran, including the assumed k follow-up reads.
``oracle_cost_s`` is pure byte accounting of the same quantity: the
statement's write bytes plus k times the bytes one post-statement scan of
the table actually reads, each divided by the configured rate. Wall
seconds are informational; with a fixed seed everything except wall_s is
byte-identical between runs.

Benchmark tables have a ``u`` column holding a shuffled permutation of
i/rows, so ``WHERE u < r`` matches exactly ceil(r*rows) rows and swept
ratios are exact rather than sampled.
"""

from __future__ import annotations

import os
import random
import shutil
import time
from dataclasses import dataclass, field

from .cost_model import (CostParams, Plan, crossover_delete, crossover_update,
                         delete_plan_costs, update_plan_costs)
from .counters import IoCounters
from .engine import Database
from .errors import PlanError
from .union_read import union_read

CSV_HEADER = ("ratio,series,plan,model_cost_s,oracle_cost_s,"
              "master_read,master_written,attached_read,attached_written,wall_s")

SERIES_EDIT = "edit"
SERIES_OVERWRITE = "overwrite"
SERIES_COST_MODEL = "cost_model"


@dataclass(frozen=True)
class BenchSpec:
    rows: int
    cols: int
    grid: tuple[float, ...]
    op: str  # "update" | "delete"
    k: int
    params: CostParams
    reps: int = 1
    seed: int = 0
    payload_bytes: int = 0  # optional fixed-width string column

    def __post_init__(self):
        if self.rows < 1:
            raise PlanError(f"rows must be >= 1, got {self.rows}")
        if self.cols < 2:
            raise PlanError(f"cols must be >= 2, got {self.cols}")
        if self.op not in ("update", "delete"):
            raise PlanError(f"op must be update or delete, got {self.op!r}")
        if self.reps < 1:
            raise PlanError(f"reps must be >= 1, got {self.reps}")
        if not self.grid:
            raise PlanError("ratio grid is empty")
        for r in self.grid:
            if not 0.0 <= r <= 1.0:
                raise PlanError(f"grid ratio {r!r} outside [0, 1]")
        if self.k < 0:
            raise PlanError(f"k must be >= 0, got {self.k}")


@dataclass
class BenchRow:
    ratio: float
    series: str
    plan: str
    model_cost_s: float
    oracle_cost_s: float
    master_read: int
    master_written: int
    attached_read: int
    attached_written: int
    wall_s: float

    def as_csv(self) -> str:
        return (f"{self.ratio:.9g},{self.series},{self.plan},"
                f"{self.model_cost_s:.9g},{self.oracle_cost_s:.9g},"
                f"{self.master_read},{self.master_written},"
                f"{self.attached_read},{self.attached_written},"
                f"{self.wall_s:.9g}")


def rows_to_csv(rows: list[BenchRow]) -> str:
    return "\n".join([CSV_HEADER] + [row.as_csv() for row in rows]) + "\n"


def oracle_cost(counters: IoCounters, p: CostParams) -> float:
    """Pure byte accounting: every moved byte divided by its store's rate."""
    return (counters.master_bytes_read / p.master_read_rate
            + counters.master_bytes_written / p.master_write_rate
            + counters.attached_bytes_read / p.attached_read_rate
            + counters.attached_bytes_written / p.attached_write_rate)


def bench_schema_sql(table: str, cols: int, payload: bool) -> str:
    names = ["u float64", "v float64"]
    names += [f"c{i} int64" for i in range(cols - 2 - (1 if payload else 0))]
    if payload:
        names.append("payload string")
    return f"CREATE TABLE {table} ({', '.join(names)})"


def build_bench_table(db: Database, table: str, rows: int, cols: int,
                      rng: random.Random, payload_bytes: int = 0) -> None:
    """Create and fill one benchmark table.

    ``u`` is a shuffled permutation of i/rows (exact ratio selectivity),
    ``v`` is the update target, the rest is integer or string filler.
    """
    db.execute(bench_schema_sql(table, cols, payload_bytes > 0))
    u_values = [i / rows for i in range(rows)]
    rng.shuffle(u_values)
    n_ints = cols - 2 - (1 if payload_bytes > 0 else 0)
    payload = "x" * payload_bytes

    def gen():
        for i in range(rows):
            row = [u_values[i], rng.random()]
            for _ in range(n_ints):
                row.append(rng.randrange(1 << 30))
            if payload_bytes > 0:
                row.append(payload)
            yield tuple(row)

    db.append_rows(table, gen(), validate=False)


def _statement_text(op: str, table: str, ratio: float, k: int,
                    forced: str | None, payload_bytes: int) -> str:
    with_parts = [f"RATIO = {ratio!r}", f"K = {k}"]
    if forced:
        with_parts.append(f"PLAN = {forced.upper()}")
    clause = f" WITH {', '.join(with_parts)}"
    if op == "update":
        if payload_bytes > 0:
            assignment = f"payload = '{'y' * payload_bytes}'"
        else:
            assignment = "v = v + 1.0"
        return f"UPDATE {table} SET {assignment} WHERE u < {ratio!r}{clause}"
    return f"DELETE FROM {table} WHERE u < {ratio!r}{clause}"


def _measure_one(work_dir: str, spec: BenchSpec, ratio: float, series: str,
                 rng_seed: str) -> BenchRow:
    forced = series if series in (SERIES_EDIT, SERIES_OVERWRITE) else None
    db = Database(work_dir, params=spec.params)
    try:
        build_bench_table(db, "bench", spec.rows, spec.cols,
                          random.Random(rng_seed), spec.payload_bytes)
        desc = db.catalog.get("bench")
        data_size = desc.stats.data_size
        avg_row = desc.stats.avg_row_size
        text = _statement_text(spec.op, "bench", ratio, spec.k, forced,
                               spec.payload_bytes)
        before = db.counters.snapshot()
        start = time.perf_counter()
        report = db.execute(text)
        wall = time.perf_counter() - start
        stmt_io = db.counters.delta_since(before)

        # One real post-statement scan stands in for each of the k reads.
        before_scan = db.counters.snapshot()
        for _ in union_read(db.data_dir, desc, db._attached["bench"],
                            counters=db.counters):
            pass
        scan_io = db.counters.delta_since(before_scan)

        params = spec.params.with_k(spec.k)
        plan = report.plan_used
        if spec.op == "update":
            costs = update_plan_costs(data_size, ratio, params)
        else:
            costs = delete_plan_costs(data_size, ratio, avg_row, params)
        model = costs.edit if plan is Plan.EDIT else costs.overwrite
        oracle = (stmt_io.master_bytes_written / params.master_write_rate
                  + stmt_io.attached_bytes_written / params.attached_write_rate
                  + spec.k * (scan_io.master_bytes_read / params.master_read_rate
                              + scan_io.attached_bytes_read / params.attached_read_rate))
        return BenchRow(
            ratio=ratio, series=series, plan=plan.value,
            model_cost_s=model, oracle_cost_s=oracle,
            master_read=stmt_io.master_bytes_read,
            master_written=stmt_io.master_bytes_written,
            attached_read=stmt_io.attached_bytes_read,
            attached_written=stmt_io.attached_bytes_written,
            wall_s=wall)
    finally:
        db.close()


def run_sweep(spec: BenchSpec, work_dir: str) -> list[BenchRow]:
    """One CSV row per (repetition, grid ratio, series)."""
    os.makedirs(work_dir, exist_ok=True)
    out: list[BenchRow] = []
    for rep in range(spec.reps):
        for point, ratio in enumerate(spec.grid):
            # Same seed per point across series: all three see the same table.
            rng_seed = f"{spec.seed}:{rep}:{point}"
            for series in (SERIES_EDIT, SERIES_OVERWRITE, SERIES_COST_MODEL):
                run_dir = os.path.join(work_dir, f"r{rep}_p{point}_{series}")
                try:
                    out.append(_measure_one(run_dir, spec, ratio, series, rng_seed))
                finally:
                    shutil.rmtree(run_dir, ignore_errors=True)
    return out


def sweep_crossover(spec: BenchSpec) -> float:
    """Closed-form flip ratio for the sweep's table shape."""
    params = spec.params.with_k(spec.k)
    if spec.op == "update":
        return crossover_update(params)
    ints = spec.cols - 2 - (1 if spec.payload_bytes > 0 else 0)
    avg_row = 16 + 8 * ints + spec.payload_bytes
    return crossover_delete(avg_row, params)


def plan_flips(rows: list[BenchRow], series: str = SERIES_COST_MODEL) -> list[int]:
    """Indices (into the ratio-sorted series) where the plan changes."""
    picked = sorted((r for r in rows if r.series == series), key=lambda r: r.ratio)
    flips = []
    for i in range(1, len(picked)):
        if picked[i].plan != picked[i - 1].plan:
            flips.append(i)
    return flips


# -- randomized model-vs-oracle check ------------------------------------------

@dataclass
class ModelCheckRun:
    op: str
    plan: str
    ratio: float
    model_cost_s: float
    oracle_cost_s: float
    relative_error: float
    params: CostParams = field(repr=False, default=None)


def _random_params(rng: random.Random, k: int) -> CostParams:
    def rate() -> float:
        return 10.0 ** rng.uniform(6.0, 9.0)

    return CostParams(master_write_rate=rate(), master_read_rate=rate(),
                      attached_write_rate=rate(), attached_read_rate=rate(),
                      successive_reads_k=k)


def model_check(n_runs: int, seed: int, work_dir: str) -> list[ModelCheckRun]:
    """Randomized (D, ratio, params) trials comparing Eq-predicted cost to
    byte-counter accounting.

    Each trial builds a payload-heavy table (so file framing stays small
    next to the logical bytes), runs one UPDATE or DELETE under a forced
    plan, then physically scans the table k times. The oracle is the
    counters' bytes over rates; the model is the per-plan cost with the
    byte-observed ratio, so the comparison isolates the cost formulas from
    ratio estimation.
    """
    rng = random.Random(seed)
    os.makedirs(work_dir, exist_ok=True)
    out: list[ModelCheckRun] = []
    for trial in range(n_runs):
        rows = rng.randrange(50, 300)
        # Row payload dominates the fixed framing (headers, length
        # prefixes), keeping physical/logical skew well inside tolerance.
        payload = rng.randrange(400, 800)
        k = rng.randrange(0, 9)
        ratio = rng.uniform(0.05, 0.9)
        op = rng.choice(("update", "delete"))
        plan = rng.choice((SERIES_EDIT, SERIES_OVERWRITE))
        params = _random_params(rng, k)
        run_dir = os.path.join(work_dir, f"trial{trial}")
        db = Database(run_dir, params=params)
        try:
            build_bench_table(db, "t", rows, 3, random.Random(f"mc:{seed}:{trial}"),
                              payload_bytes=payload)
            desc = db.catalog.get("t")
            data_size = desc.stats.data_size
            avg_row = desc.stats.avg_row_size
            row_count = desc.stats.row_count
            text = _statement_text(op, "t", ratio, k, plan, payload)
            before = db.counters.snapshot()
            report = db.execute(text)
            stmt_io = db.counters.delta_since(before)
            before_scan = db.counters.snapshot()
            for _ in range(k):
                for _ in union_read(db.data_dir, desc, db._attached["t"],
                                    counters=db.counters):
                    pass
            scan_io = db.counters.delta_since(before_scan)

            oracle = (stmt_io.master_bytes_written / params.master_write_rate
                      + stmt_io.attached_bytes_written / params.attached_write_rate
                      + scan_io.master_bytes_read / params.master_read_rate
                      + scan_io.attached_bytes_read / params.attached_read_rate)
            if op == "update":
                eff = min(1.0, stmt_io.attached_bytes_written / data_size) \
                    if plan == SERIES_EDIT else ratio
                costs = update_plan_costs(data_size, eff, params)
            else:
                eff = report.rows_matched / row_count
                costs = delete_plan_costs(data_size, eff, avg_row, params)
            model = costs.edit if plan == SERIES_EDIT else costs.overwrite
            if oracle == 0.0:
                rel = 0.0 if model == 0.0 else float("inf")
            else:
                rel = abs(model - oracle) / oracle
            out.append(ModelCheckRun(op=op, plan=plan, ratio=ratio,
                                     model_cost_s=model, oracle_cost_s=oracle,
                                     relative_error=rel, params=params))
        finally:
            db.close()
            shutil.rmtree(run_dir, ignore_errors=True)
    return out
