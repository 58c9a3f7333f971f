"""Sweep harness: CSV surface, reproducibility, plan flips, cost oracle."""

import math

import pytest

from dualtable import bench, dml
from dualtable.bench import BenchRow, BenchSpec
from dualtable.cost_model import CostParams, crossover_update
from dualtable.counters import IoCounters
from dualtable.engine import Database
from dualtable.errors import PlanError

REFERENCE = CostParams(master_write_rate=1e9, master_read_rate=2e9,
                       attached_write_rate=0.8e9, attached_read_rate=0.5e9,
                       successive_reads_k=10)


def test_csv_header_pinned():
    assert bench.CSV_HEADER == (
        "ratio,series,plan,model_cost_s,oracle_cost_s,"
        "master_read,master_written,attached_read,attached_written,wall_s")


def test_bench_row_csv_golden():
    row = BenchRow(ratio=0.25, series="edit", plan="edit", model_cost_s=1.5,
                   oracle_cost_s=2.0, master_read=10, master_written=0,
                   attached_read=3, attached_written=40, wall_s=0.125)
    assert row.as_csv() == "0.25,edit,edit,1.5,2,10,0,3,40,0.125"


def test_rows_to_csv_layout():
    row = BenchRow(0.1, "overwrite", "overwrite", 1, 1, 0, 0, 0, 0, 0.5)
    text = bench.rows_to_csv([row, row])
    lines = text.splitlines()
    assert lines[0] == bench.CSV_HEADER
    assert len(lines) == 3
    assert text.endswith("\n")


def test_oracle_cost_per_store_rates():
    c = IoCounters()
    c.master_bytes_read = 100
    c.master_bytes_written = 200
    c.attached_bytes_read = 300
    c.attached_bytes_written = 400
    p = CostParams(master_write_rate=2.0, master_read_rate=4.0,
                   attached_write_rate=8.0, attached_read_rate=16.0,
                   successive_reads_k=0)
    assert bench.oracle_cost(c, p) == 100 / 4.0 + 200 / 2.0 + 300 / 16.0 + 400 / 8.0


def test_schema_sql_shapes():
    plain = bench.bench_schema_sql("b", 4, payload=False)
    assert plain == "CREATE TABLE b (u float64, v float64, c0 int64, c1 int64)"
    heavy = bench.bench_schema_sql("b", 4, payload=True)
    assert heavy == "CREATE TABLE b (u float64, v float64, c0 int64, payload string)"
    dml.parse(plain)
    dml.parse(heavy)


@pytest.mark.parametrize("ratio", [0.1, 0.25, 0.33, 0.5, 1.0])
def test_uniform_column_gives_exact_selectivity(tmp_path, ratio):
    import random
    db = Database(str(tmp_path / "db"), params=REFERENCE)
    try:
        bench.build_bench_table(db, "b", 40, 3, random.Random(11))
        report = db.execute(f"DELETE FROM b WHERE u < {ratio!r} WITH PLAN = EDIT")
        assert report.rows_matched == math.ceil(ratio * 40)
    finally:
        db.close()


def sweep(tmp_path, op, grid, k=10, rows=60, reps=1, seed=5):
    spec = BenchSpec(rows=rows, cols=3, grid=grid, op=op, k=k,
                     params=REFERENCE, reps=reps, seed=seed)
    return spec, bench.run_sweep(spec, str(tmp_path / "work"))


def test_sweep_emits_three_series_per_point(tmp_path):
    spec, rows = sweep(tmp_path, "update", (0.1, 0.4), reps=2)
    assert len(rows) == 2 * 2 * 3
    for point in range(2):
        for rep in range(2):
            chunk = rows[(rep * 2 + point) * 3:(rep * 2 + point) * 3 + 3]
            assert [r.series for r in chunk] == ["edit", "overwrite", "cost_model"]
    # forced series always carry their plan
    assert all(r.plan == "edit" for r in rows if r.series == "edit")
    assert all(r.plan == "overwrite" for r in rows if r.series == "overwrite")


def test_sweep_byte_columns_split_by_plan(tmp_path):
    _, rows = sweep(tmp_path, "update", (0.2,))
    edit = next(r for r in rows if r.series == "edit")
    over = next(r for r in rows if r.series == "overwrite")
    # an edit leaves master alone and journals deltas; an overwrite rewrites
    # master and never touches the delta store
    assert edit.master_written == 0 and edit.attached_written > 0
    assert over.attached_written == 0 and over.master_written > 0
    assert over.master_read > 0  # the rewrite re-reads the old segments


def test_sweep_same_table_across_series(tmp_path):
    # same seed per grid point: the cost_model run that picks EDIT moves
    # byte-for-byte what the forced edit run moved
    _, rows = sweep(tmp_path, "update", (0.01,))
    edit = next(r for r in rows if r.series == "edit")
    model = next(r for r in rows if r.series == "cost_model")
    assert model.plan == "edit"
    for name in ("master_read", "master_written", "attached_read",
                 "attached_written", "model_cost_s"):
        assert getattr(model, name) == getattr(edit, name)


def strip_wall(rows):
    return [r.as_csv().rsplit(",", 1)[0] for r in rows]


def test_sweep_reproducible_up_to_wall_clock(tmp_path):
    _, first = sweep(tmp_path, "delete", (0.05, 0.3), seed=21)
    _, second = sweep(tmp_path, "delete", (0.05, 0.3), seed=21)
    assert strip_wall(first) == strip_wall(second)


def test_sweep_seed_changes_wall_only_not_bytes(tmp_path):
    # different seeds shuffle u differently but byte totals stay put
    _, first = sweep(tmp_path, "update", (0.25,), seed=1)
    _, second = sweep(tmp_path, "update", (0.25,), seed=2)
    a = next(r for r in first if r.series == "edit")
    b = next(r for r in second if r.series == "edit")
    assert (a.master_read, a.attached_written) == (b.master_read, b.attached_written)


def test_update_flip_lands_next_to_closed_form(tmp_path):
    grid = (0.01, 0.02, 0.05, 0.1, 0.2)
    spec, rows = sweep(tmp_path, "update", grid)
    star = bench.sweep_crossover(spec)
    assert star == crossover_update(REFERENCE.with_k(10))
    flips = bench.plan_flips(rows)
    assert len(flips) == 1
    i = flips[0]
    assert grid[i - 1] <= star <= grid[i]
    model = sorted((r for r in rows if r.series == "cost_model"),
                   key=lambda r: r.ratio)
    for r in model:
        assert r.plan == ("edit" if r.ratio < star else "overwrite")


def test_delete_crossover_uses_real_row_shape(tmp_path):
    import random
    spec = BenchSpec(rows=30, cols=5, grid=(0.1,), op="delete", k=10,
                     params=REFERENCE, payload_bytes=50)
    db = Database(str(tmp_path / "db"), params=REFERENCE)
    try:
        bench.build_bench_table(db, "b", 30, 5, random.Random(0), payload_bytes=50)
        avg_row = db.catalog.get("b").stats.avg_row_size
    finally:
        db.close()
    # u, v: 8 bytes each; two int columns; 50-byte payload string
    assert avg_row == 16 + 8 * 2 + 50
    from dualtable.cost_model import crossover_delete
    assert bench.sweep_crossover(spec) == crossover_delete(avg_row, REFERENCE.with_k(10))


def test_plan_flips_synthetic():
    def row(ratio, plan):
        return BenchRow(ratio, "cost_model", plan, 0, 0, 0, 0, 0, 0, 0)

    rows = [row(0.4, "overwrite"), row(0.1, "edit"), row(0.2, "edit"),
            row(0.3, "overwrite"), row(0.5, "edit"),
            BenchRow(0.05, "edit", "edit", 0, 0, 0, 0, 0, 0, 0)]
    assert bench.plan_flips(rows) == [2, 4]  # sorted by ratio, other series ignored
    assert bench.plan_flips([row(0.1, "edit"), row(0.2, "edit")]) == []


def test_model_check_smoke(tmp_path):
    runs = bench.model_check(6, seed=3, work_dir=str(tmp_path / "mc"))
    assert len(runs) == 6
    assert {r.plan for r in runs} <= {"edit", "overwrite"}
    for r in runs:
        assert r.oracle_cost_s > 0
        assert r.relative_error <= 0.05, (r.op, r.plan, r.relative_error)
    # trial directories are removed as they finish
    assert not any(p.name.startswith("trial")
                   for p in (tmp_path / "mc").iterdir())


@pytest.mark.parametrize("kwargs,fragment", [
    (dict(rows=0), "rows"),
    (dict(cols=1), "cols"),
    (dict(op="merge"), "op"),
    (dict(reps=0), "reps"),
    (dict(grid=()), "grid"),
    (dict(grid=(0.5, 1.5)), "outside"),
    (dict(k=-1), "k"),
])
def test_spec_validation(kwargs, fragment):
    base = dict(rows=10, cols=3, grid=(0.1,), op="update", k=5, params=REFERENCE)
    base.update(kwargs)
    with pytest.raises(PlanError) as exc:
        BenchSpec(**base)
    assert fragment in str(exc.value)
