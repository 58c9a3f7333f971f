"""Statement execution over the two stores.

A Database owns one data directory: the catalog, one attached store per
table, the shared byte counters, and a statement lock. DML runs in two
phases. Phase one walks the merged view and evaluates predicates and
assignments, so any expression error aborts before a single byte is
written. Phase two applies the collected mutations under the chosen plan:

- EDIT patches or marks records in the attached store, inside one journal
  statement group, leaving master segments untouched.
- OVERWRITE materializes the merged view with the mutation applied, writes
  fresh segments, swaps the catalog manifest (the atomic commit point),
  clears the attached store, and deletes the old files.

Either way the logical view afterwards is identical; which one runs is
decided by the cost model unless the statement forces a plan. Observed
modification ratios feed back into the catalog history so later estimates
improve, and every update/delete decision is appended to
``decisions.log``.

Recovery is open-time: journals replay to their last complete statement,
deltas referring to segments that lost the swap race are dropped, and
segment files no manifest references are unlinked.
"""

from __future__ import annotations

import csv
import io
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from . import dml, faults, master_store, union_read
from .attached_store import AttachedStore, journal_path
from .catalog import Catalog, SegmentInfo, TableDescriptor
from .cost_model import (CostParams, Plan, PlanDecision, audit_line,
                         choose_plan)
from .counters import IoCounters
from .errors import ExecutionError, SchemaError
from .schema import Column, ColumnType, Schema

AUDIT_LOG_FILENAME = "decisions.log"
DEFAULT_COMPACT_THRESHOLD = 0.25

# Rates from the cost model's reference example; used when a Database is
# opened without explicit parameters and the catalog has none stored.
FALLBACK_PARAMS = CostParams(
    master_write_rate=1e9, master_read_rate=2e9,
    attached_write_rate=0.8e9, attached_read_rate=0.5e9)


@dataclass
class ExecutionReport:
    rows_matched: int = 0
    rows_changed: int = 0
    plan_used: Optional[Plan] = None
    bytes: IoCounters = field(default_factory=IoCounters)
    wall_seconds: float = 0.0
    decision: Optional[PlanDecision] = None


class SelectResult(NamedTuple):
    columns: tuple[str, ...]
    rows: list[tuple]


# -- expression evaluation -----------------------------------------------------

_CMP_OPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _pos_of(expr) -> str:
    pos = getattr(expr, "pos", None)
    return f" at {pos[0]}:{pos[1]}" if pos else ""


def _as_bool(value, expr) -> bool:
    if value is None:
        return False
    if isinstance(value, bool):
        return value
    raise ExecutionError(f"expected a boolean, got {value!r}{_pos_of(expr)}")


def evaluate(expr, name_to_index: dict[str, int], row: tuple):
    """Evaluate one expression against a row; NULL propagates, comparisons
    with NULL are false, division is float division."""
    if isinstance(expr, dml.Literal):
        return expr.value
    if isinstance(expr, dml.ColumnRef):
        try:
            return row[name_to_index[expr.name]]
        except KeyError:
            raise ExecutionError(f"unknown column {expr.name!r}{_pos_of(expr)}") from None
    if not isinstance(expr, dml.BinOp):
        raise ExecutionError(f"cannot evaluate {expr!r}")
    op = expr.op
    if op == "AND":
        if not _as_bool(evaluate(expr.left, name_to_index, row), expr.left):
            return False
        return _as_bool(evaluate(expr.right, name_to_index, row), expr.right)
    if op == "OR":
        if _as_bool(evaluate(expr.left, name_to_index, row), expr.left):
            return True
        return _as_bool(evaluate(expr.right, name_to_index, row), expr.right)
    left = evaluate(expr.left, name_to_index, row)
    right = evaluate(expr.right, name_to_index, row)
    if op in _CMP_OPS:
        if left is None or right is None:
            return False
        if isinstance(left, bool) or isinstance(right, bool):
            if op not in ("=", "!=") or not (isinstance(left, bool) and isinstance(right, bool)):
                raise ExecutionError(f"cannot compare {left!r} {op} {right!r}{_pos_of(expr)}")
        elif isinstance(left, str) != isinstance(right, str):
            raise ExecutionError(f"cannot compare {left!r} {op} {right!r}{_pos_of(expr)}")
        return _CMP_OPS[op](left, right)
    # arithmetic
    if left is None or right is None:
        return None
    if isinstance(left, str) and isinstance(right, str) and op == "+":
        return left + right
    for operand in (left, right):
        if isinstance(operand, bool) or not isinstance(operand, (int, float)):
            raise ExecutionError(
                f"arithmetic needs numbers, got {operand!r}{_pos_of(expr)}")
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if right == 0:
            raise ExecutionError(f"division by zero{_pos_of(expr)}")
        return left / right
    raise ExecutionError(f"unknown operator {op!r}")


# -- the database ----------------------------------------------------------------

class Database:
    def __init__(self, data_dir: str, *, params: CostParams | None = None,
                 default_ratio: float = 0.05, ewma_weight: float = 0.5,
                 compact_threshold: float = DEFAULT_COMPACT_THRESHOLD,
                 auto_compact: bool = False,
                 force_plan: Plan | None = None,
                 segment_target_bytes: int = master_store.SEGMENT_TARGET_BYTES):
        os.makedirs(data_dir, exist_ok=True)
        self.data_dir = data_dir
        self.counters = IoCounters()
        self.compact_threshold = compact_threshold
        self.auto_compact = auto_compact
        self.force_plan = Plan(force_plan) if force_plan else None
        self.segment_target_bytes = segment_target_bytes
        self._lock = threading.RLock()
        self.catalog = Catalog.open(data_dir, default_ratio=default_ratio,
                                    ewma_weight=ewma_weight)
        if params is not None:
            self.catalog.set_cost_params(params)
        elif self.catalog.cost_params is None:
            self.catalog.set_cost_params(FALLBACK_PARAMS)
        self._attached: dict[str, AttachedStore] = {}
        self._recover()

    # -- lifecycle ---------------------------------------------------------

    def _recover(self) -> None:
        """Open journals, drop stale deltas, GC files no manifest owns."""
        live_segments: set[tuple[int, int]] = set()
        live_table_ids: set[int] = set()
        for desc in self.catalog.tables.values():
            live_table_ids.add(desc.table_id)
            for seg in desc.segments:
                live_segments.add((desc.table_id, seg.file_id))
            store = AttachedStore(self.data_dir, desc.table_id, desc.schema,
                                  self.counters)
            store.open(live_file_ids=desc.live_file_ids())
            self._attached[desc.name] = store
            desc.stats.set_attached(store.size_bytes, store.entry_count)
            desc.refresh_master_stats()
        for table_id, file_id in master_store.list_segment_files(self.data_dir):
            if (table_id, file_id) not in live_segments:
                master_store.delete_segment_file(self.data_dir, table_id, file_id)
        for name in os.listdir(self.data_dir):
            if name.startswith("t") and name.endswith("_attached.log"):
                stem = name[1:-len("_attached.log")]
                if stem.isdigit() and int(stem) not in live_table_ids:
                    os.unlink(os.path.join(self.data_dir, name))

    def close(self) -> None:
        with self._lock:
            for store in self._attached.values():
                store.close()
            self._attached.clear()

    def __enter__(self) -> "Database":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- public API ----------------------------------------------------------

    def execute(self, statement):
        """Run one statement (text or parsed); returns an ExecutionReport,
        or a SelectResult for SELECT."""
        if isinstance(statement, str):
            statement = dml.parse(statement)
        with self._lock:
            start = time.perf_counter()
            before = self.counters.snapshot()
            result = self._dispatch(statement)
            if isinstance(result, ExecutionReport):
                result.bytes = self.counters.delta_since(before)
                result.wall_seconds = time.perf_counter() - start
            return result

    def _dispatch(self, stmt):
        if isinstance(stmt, dml.CreateTable):
            return self._exec_create(stmt)
        if isinstance(stmt, dml.DropTable):
            return self._exec_drop(stmt)
        if isinstance(stmt, dml.Load):
            return self._exec_load(stmt)
        if isinstance(stmt, dml.Insert):
            return self._exec_insert(stmt)
        if isinstance(stmt, dml.Select):
            return self._exec_select(stmt)
        if isinstance(stmt, dml.Update):
            return self._exec_update(stmt)
        if isinstance(stmt, dml.Delete):
            return self._exec_delete(stmt)
        if isinstance(stmt, dml.Compact):
            return self.compact(stmt.table)
        raise ExecutionError(f"unsupported statement {stmt!r}")

    def table_names(self) -> list[str]:
        with self._lock:
            return sorted(self.catalog.tables)

    def auto_compact_check(self, table: str) -> bool:
        """True when the delta store has outgrown the configured fraction
        of the master data; reporting only, compaction stays explicit."""
        desc = self.catalog.get(table)
        if desc.stats.data_size <= 0:
            return False
        return desc.stats.attached_size / desc.stats.data_size > self.compact_threshold

    # -- DDL -------------------------------------------------------------------

    def _exec_create(self, stmt: dml.CreateTable) -> ExecutionReport:
        schema = Schema([Column(name, ColumnType.parse(type_name))
                         for name, type_name in stmt.columns])
        desc = self.catalog.create_table(stmt.table, schema)
        store = AttachedStore(self.data_dir, desc.table_id, schema, self.counters)
        store.open(live_file_ids=set())
        self._attached[stmt.table] = store
        return ExecutionReport()

    def _exec_drop(self, stmt: dml.DropTable) -> ExecutionReport:
        desc = self.catalog.drop_table(stmt.table)
        store = self._attached.pop(stmt.table, None)
        if store is not None:
            store.close()
        for seg in desc.segments:
            master_store.delete_segment_file(self.data_dir, desc.table_id, seg.file_id)
        try:
            os.unlink(journal_path(self.data_dir, desc.table_id))
        except FileNotFoundError:
            pass
        return ExecutionReport()

    # -- ingestion ----------------------------------------------------------------

    def _exec_insert(self, stmt: dml.Insert) -> ExecutionReport:
        desc = self.catalog.get(stmt.table)
        rows = []
        for value_tuple in stmt.rows:
            values = []
            for expr in value_tuple:
                values.append(evaluate(expr, {}, ()))
            try:
                rows.append(desc.schema.check_row(values))
            except SchemaError as exc:
                raise ExecutionError(str(exc) + _pos_of(stmt)) from exc
        return self._append_rows(desc, rows)

    def _exec_load(self, stmt: dml.Load) -> ExecutionReport:
        desc = self.catalog.get(stmt.table)
        try:
            rows = list(self._read_csv_rows(stmt.path, desc.schema))
        except OSError as exc:
            raise ExecutionError(f"cannot read {stmt.path!r}: {exc}") from exc
        return self._append_rows(desc, rows)

    @staticmethod
    def _read_csv_rows(path: str, schema: Schema) -> Iterable[tuple]:
        """Headerless CSV, one field per column; empty fields are NULL."""
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for line_no, fields in enumerate(csv.reader(fh), start=1):
                if not fields:
                    continue
                if len(fields) != len(schema.columns):
                    raise ExecutionError(
                        f"{path}:{line_no}: {len(fields)} fields for "
                        f"{len(schema.columns)} columns")
                values = []
                for i, text in enumerate(fields):
                    try:
                        values.append(_csv_value(schema.columns[i].type, text))
                    except (ValueError, SchemaError) as exc:
                        raise ExecutionError(f"{path}:{line_no}: {exc}") from exc
                yield schema.check_row(values)

    def append_rows(self, table: str, rows: Iterable[tuple],
                    validate: bool = True) -> ExecutionReport:
        """Bulk ingestion API for harnesses; the DML path is INSERT/LOAD."""
        with self._lock:
            desc = self.catalog.get(table)
            if validate:
                rows = (desc.schema.check_row(r) for r in rows)
            return self._append_rows(desc, rows)

    def _append_rows(self, desc: TableDescriptor, rows: Iterable[tuple]) -> ExecutionReport:
        new_segments = master_store.write_segments(
            self.data_dir, desc.table_id, desc.schema, rows,
            lambda: self.catalog.allocate_file_id(desc.name),
            self.counters, self.segment_target_bytes)
        if new_segments:
            self.catalog.append_segments(desc.name, new_segments)
        count = sum(seg.row_count for seg in new_segments)
        return ExecutionReport(rows_matched=count, rows_changed=count)

    # -- queries -------------------------------------------------------------------

    def _exec_select(self, stmt: dml.Select) -> SelectResult:
        desc = self.catalog.get(stmt.table)
        if stmt.columns is None:
            names = tuple(c.name for c in desc.schema.columns)
            projection = None
        else:
            names = stmt.columns
            try:
                projection = tuple(desc.schema.index(n) for n in names)
            except SchemaError as exc:
                raise ExecutionError(str(exc) + _pos_of(stmt)) from exc
        predicate = self._compile_predicate(desc, stmt.where)
        stream = union_read.union_read(self.data_dir, desc, self._attached[stmt.table],
                                       projection, predicate, self.counters)
        return SelectResult(columns=names, rows=[item.row for item in stream])

    def _compile_predicate(self, desc: TableDescriptor, where):
        if where is None:
            return None
        index = desc.schema.index_map()

        def predicate(row: tuple) -> bool:
            return _as_bool(evaluate(where, index, row), where)

        return predicate

    # -- update / delete -------------------------------------------------------------

    def _exec_update(self, stmt: dml.Update) -> ExecutionReport:
        desc = self.catalog.get(stmt.table)
        index = desc.schema.index_map()
        ordinals: list[int] = []
        seen: set[int] = set()
        for name, _ in stmt.assignments:
            try:
                ordinal = desc.schema.index(name)
            except SchemaError as exc:
                raise ExecutionError(str(exc) + _pos_of(stmt)) from exc
            if ordinal in seen:
                raise ExecutionError(f"column {name!r} assigned twice{_pos_of(stmt)}")
            seen.add(ordinal)
            ordinals.append(ordinal)
        predicate = self._compile_predicate(desc, stmt.where)

        # Phase 1: evaluate everything against the merged view.
        matched: list[tuple[int, tuple, dict[int, object]]] = []
        total_rows = 0
        store = self._attached[stmt.table]
        for record_id, row in union_read.union_read(
                self.data_dir, desc, store, None, None, self.counters):
            total_rows += 1
            if predicate is not None and not predicate(row):
                continue
            patch: dict[int, object] = {}
            for ordinal, (_, expr) in zip(ordinals, stmt.assignments):
                value = evaluate(expr, index, row)
                try:
                    patch[ordinal] = desc.schema.check_value(ordinal, value)
                except SchemaError as exc:
                    raise ExecutionError(str(exc) + _pos_of(expr)) from exc
            matched.append((record_id, row, patch))

        changed = sum(1 for _, row, patch in matched
                      if any(row[o] != v or type(row[o]) is not type(v)
                             for o, v in patch.items()))
        report = ExecutionReport(rows_matched=len(matched), rows_changed=changed)
        decision, plan = self._decide(stmt, desc, "update")
        report.decision = decision
        report.plan_used = plan
        if not matched:
            self._finish_dml(stmt, desc, "update", decision, plan, 0, total_rows)
            return report

        # Phase 2: apply under the chosen plan.
        if plan is Plan.EDIT:
            store.apply_statement(
                ((record_id, patch) for record_id, _, patch in matched), ())
            desc.stats.set_attached(store.size_bytes, store.entry_count)
        else:
            patched = {record_id: patch for record_id, _, patch in matched}

            def rewrite():
                for record_id, row in union_read.union_read(
                        self.data_dir, desc, store, None, None, self.counters):
                    patch = patched.get(record_id)
                    if patch is None:
                        yield row
                    else:
                        cells = list(row)
                        for ordinal, value in patch.items():
                            cells[ordinal] = value
                        yield tuple(cells)

            self._rewrite_table(desc, rewrite())
        self._finish_dml(stmt, desc, "update", decision, plan, len(matched), total_rows)
        return report

    def _exec_delete(self, stmt: dml.Delete) -> ExecutionReport:
        desc = self.catalog.get(stmt.table)
        predicate = self._compile_predicate(desc, stmt.where)
        store = self._attached[stmt.table]
        matched_ids: set[int] = set()
        total_rows = 0
        for record_id, row in union_read.union_read(
                self.data_dir, desc, store, None, None, self.counters):
            total_rows += 1
            if predicate is None or predicate(row):
                matched_ids.add(record_id)

        report = ExecutionReport(rows_matched=len(matched_ids),
                                 rows_changed=len(matched_ids))
        decision, plan = self._decide(stmt, desc, "delete")
        report.decision = decision
        report.plan_used = plan
        if not matched_ids:
            self._finish_dml(stmt, desc, "delete", decision, plan, 0, total_rows)
            return report

        if plan is Plan.EDIT:
            store.apply_statement((), sorted(matched_ids))
            desc.stats.set_attached(store.size_bytes, store.entry_count)
        else:
            survivors = (row for record_id, row in union_read.union_read(
                self.data_dir, desc, store, None, None, self.counters)
                if record_id not in matched_ids)
            self._rewrite_table(desc, survivors)
        self._finish_dml(stmt, desc, "delete", decision, plan,
                         len(matched_ids), total_rows)
        return report

    def _decide(self, stmt, desc: TableDescriptor,
                op_kind: str) -> tuple[PlanDecision | None, Plan]:
        """Plan selection: forced plan wins, empty tables take the no-op
        EDIT path, otherwise ask the cost model with the estimated ratio."""
        options: dml.Options = stmt.options
        forced = self.force_plan or (Plan(options.plan) if options.plan else None)
        if desc.stats.data_size <= 0 or desc.stats.row_count <= 0:
            return None, forced or Plan.EDIT
        key = dml.statement_key(dml.to_text(stmt))
        ratio = self.catalog.estimate_ratio(desc.name, key, hint=options.ratio)
        params = desc.cost_params or FALLBACK_PARAMS
        decision = choose_plan(op_kind, desc.stats, ratio, params.with_k(options.k))
        return decision, forced or decision.plan

    def _finish_dml(self, stmt, desc: TableDescriptor, op_kind: str,
                    decision: PlanDecision | None, plan: Plan,
                    n_matched: int, total_rows: int) -> None:
        if faults.fire("stmt.pre_stats") is not None:
            raise faults.InjectedCrash("stmt.pre_stats")
        if total_rows > 0:
            key = dml.statement_key(dml.to_text(stmt))
            self.catalog.record_observed_ratio(desc.name, key,
                                               n_matched / total_rows)
        with open(os.path.join(self.data_dir, AUDIT_LOG_FILENAME),
                  "a", encoding="utf-8") as fh:
            if decision is not None:
                fh.write(audit_line(desc.name, op_kind, decision) + "\n")
            else:
                # Empty table: nothing for the model to weigh, log what ran.
                fh.write(f"{time.time():.6f}, {desc.name}, {op_kind}, "
                         f"0.000000, 0.000000, {plan.value}\n")
        if self.auto_compact and self.auto_compact_check(desc.name):
            self.compact(desc.name)

    def _rewrite_table(self, desc: TableDescriptor, rows: Iterable[tuple]) -> None:
        """OVERWRITE tail: new segments, manifest swap, empty delta store.

        The manifest swap is the commit point. Before it, new files are
        invisible orphans; after it, stale journal entries keyed by dead
        file ids are filtered on recovery and the old files are garbage.
        """
        old_segments = list(desc.segments)
        new_segments = master_store.write_segments(
            self.data_dir, desc.table_id, desc.schema, rows,
            lambda: self.catalog.allocate_file_id(desc.name),
            self.counters, self.segment_target_bytes)
        self.catalog.swap_segments(desc.name, new_segments)
        if faults.fire("swap.pre_clear") is not None:
            raise faults.InjectedCrash("swap.pre_clear")
        store = self._attached[desc.name]
        store.clear()
        desc.stats.set_attached(0, 0)
        if faults.fire("swap.pre_delete_old") is not None:
            raise faults.InjectedCrash("swap.pre_delete_old")
        for seg in old_segments:
            master_store.delete_segment_file(self.data_dir, desc.table_id, seg.file_id)

    # -- compact ----------------------------------------------------------------------

    def compact(self, table: str) -> ExecutionReport:
        """Materialize the merged view into fresh segments and clear deltas.

        Runs under the database lock, so every other operation is excluded
        for the duration. View-preserving and idempotent; a failure before
        the manifest swap leaves the old table untouched.
        """
        with self._lock:
            start = time.perf_counter()
            before = self.counters.snapshot()
            desc = self.catalog.get(table)
            store = self._attached[table]
            entries_before = store.entry_count
            merged = (row for _, row in union_read.union_read(
                self.data_dir, desc, store, None, None, self.counters))
            self._rewrite_table(desc, merged)
            report = ExecutionReport(rows_matched=desc.stats.row_count,
                                     rows_changed=entries_before)
            report.bytes = self.counters.delta_since(before)
            report.wall_seconds = time.perf_counter() - start
            return report


def _csv_value(ctype: ColumnType, text: str):
    if text == "":
        return None
    if ctype is ColumnType.INT64:
        return int(text)
    if ctype is ColumnType.FLOAT64:
        return float(text)
    if ctype is ColumnType.BOOL:
        lowered = text.strip().lower()
        if lowered in ("true", "1", "t", "yes"):
            return True
        if lowered in ("false", "0", "f", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return text


def rows_to_csv(columns: tuple[str, ...], rows: list[tuple]) -> str:
    """Render a SELECT result as CSV with a header row.

    NULL prints as an empty field, booleans as true/false, floats via
    repr so values survive a round trip.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if v is None
                         else ("true" if v is True else "false") if isinstance(v, bool)
                         else repr(v) if isinstance(v, float)
                         else v
                         for v in row])
    return out.getvalue()
