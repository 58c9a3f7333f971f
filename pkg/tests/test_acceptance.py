"""Acceptance checks, one test per numbered criterion.

Each test records a single ``criterion N: PASS/FAIL (...)`` line with its
measured numbers (echoed in the terminal summary) and asserts the same
condition with the tolerance stated inline.
"""

import math
import random
import time

import crash_kit
import dml_gen
import oracle
from dualtable import bench, dml
from dualtable.bench import BenchSpec
from dualtable.cost_model import CostParams, cost_update
from dualtable.engine import Database
from dualtable.errors import ParseError
from dualtable.union_read import scan_table, union_read

REFERENCE = CostParams(master_write_rate=1e9, master_read_rate=2e9,
                       attached_write_rate=0.8e9, attached_read_rate=0.5e9,
                       successive_reads_k=10)

SWEEP_GRID = (0.01, 0.02, 0.05, 0.1, 0.2, 0.35, 0.5)


def rsquared(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    ss_res = sum((y - (my + slope * (x - mx))) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - my) ** 2 for y in ys)
    return 1.0 - ss_res / ss_tot


def test_c1_update_cost_worked_value(criterion_report):
    report = criterion_report
    gb = 1e9
    params = CostParams(master_write_rate=1.0 * gb, master_read_rate=2.0 * gb,
                        attached_write_rate=0.8 * gb, attached_read_rate=0.5 * gb,
                        successive_reads_k=30)
    got = cost_update(100.0 * gb, 0.01, params)
    rel = abs(got - 38.75) / 38.75
    report(1, rel <= 1e-9, f"update margin {got!r}s vs 38.75s, rel err {rel:.3e}")


def test_c2_three_plan_modes_match_list_oracle(tmp_path, criterion_report):
    report = criterion_report
    start = time.perf_counter()
    rng = random.Random(20260814)
    runs = mismatches = 0
    for i in range(200):
        script = oracle.ScriptGenerator(rng).script()
        ref = oracle.ListOracle()
        for text in script:
            ref.run(text)
        expected = ref.run("SELECT * FROM t")
        for mode in (None, "edit", "overwrite"):
            db = Database(str(tmp_path / f"s{i}_{mode}"), params=REFERENCE,
                          force_plan=mode)
            try:
                for text in script:
                    db.execute(text)
                got = db.execute("SELECT * FROM t").rows
            finally:
                db.close()
            runs += 1
            if not oracle.rows_equal(got, expected):
                mismatches += 1
    elapsed = time.perf_counter() - start
    report(2, runs == 600 and mismatches == 0 and elapsed < 120.0,
           f"{runs} runs, {mismatches} mismatches, {elapsed:.1f}s")


def test_c3_update_sweep_flips_at_closed_form(tmp_path, criterion_report):
    report = criterion_report
    start = time.perf_counter()
    spec = BenchSpec(rows=100_000, cols=4, grid=SWEEP_GRID, op="update", k=10,
                     params=REFERENCE, seed=33)
    rows = bench.run_sweep(spec, str(tmp_path / "w"))

    over = sorted((r for r in rows if r.series == "overwrite"),
                  key=lambda r: r.ratio)
    mean = sum(r.master_written for r in over) / len(over)
    spread = max(abs(r.master_written - mean) / mean for r in over)

    edit = sorted((r for r in rows if r.series == "edit"), key=lambda r: r.ratio)
    r2 = rsquared([r.ratio for r in edit],
                  [float(r.attached_written) for r in edit])

    star = bench.sweep_crossover(spec)
    flips = bench.plan_flips(rows)
    bracketed = (len(flips) == 1
                 and SWEEP_GRID[flips[0] - 1] <= star <= SWEEP_GRID[flips[0]])
    elapsed = time.perf_counter() - start
    ok = spread <= 0.05 and r2 >= 0.99 and bracketed and elapsed < 300.0
    report(3, ok, f"overwrite spread {spread:.3%}, edit R^2 {r2:.6f}, "
                  f"flip index {flips}, alpha* {star:.5f}, {elapsed:.1f}s")


def test_c4_delete_sweep_flips_and_marker_bytes(tmp_path, criterion_report):
    report = criterion_report
    spec = BenchSpec(rows=30_000, cols=4, grid=SWEEP_GRID, op="delete", k=10,
                     params=REFERENCE, seed=44)
    rows = bench.run_sweep(spec, str(tmp_path / "w"))

    star = bench.sweep_crossover(spec)
    flips = bench.plan_flips(rows)
    bracketed = (len(flips) == 1
                 and SWEEP_GRID[flips[0] - 1] <= star <= SWEEP_GRID[flips[0]])

    worst = 0.0
    for r in (r for r in rows if r.series == "edit"):
        expected = math.ceil(r.ratio * spec.rows) * 9  # 8-byte key + 1-byte tag
        worst = max(worst, abs(r.attached_written - expected) / expected)
    report(4, bracketed and worst <= 0.10,
           f"flip index {flips}, beta* {star:.5f}, "
           f"worst marker-byte deviation {worst:.3%}")


def test_c5_model_matches_byte_oracle(tmp_path, criterion_report):
    report = criterion_report
    runs = bench.model_check(100, seed=7, work_dir=str(tmp_path / "mc"))
    worst = max(r.relative_error for r in runs)
    report(5, len(runs) == 100 and worst <= 0.05,
           f"{len(runs)} runs, worst relative error {worst:.3%}")


def test_c6_empty_delta_store_reads_nothing_extra(tmp_path, criterion_report):
    report = criterion_report
    db = Database(str(tmp_path / "db"), params=REFERENCE,
                  segment_target_bytes=4096)
    try:
        bench.build_bench_table(db, "t", 2000, 4, random.Random(6))
        desc = db.catalog.get("t")
        codec = desc.schema.codec

        db.counters.reset()
        master_only = list(scan_table(db.data_dir, desc, counters=db.counters))
        master_io = db.counters.snapshot()

        db.counters.reset()
        merged = list(union_read(db.data_dir, desc, db._attached["t"],
                                 counters=db.counters))
        merged_io = db.counters.snapshot()
    finally:
        db.close()

    same_bytes = (b"".join(codec.encode_row(r.row) for r in master_only)
                  == b"".join(codec.encode_row(r.row) for r in merged))
    ok = (merged_io.attached_entries_read == 0
          and merged == master_only and same_bytes
          and merged_io.master_bytes_read == master_io.master_bytes_read)
    report(6, ok, f"{merged_io.attached_entries_read} delta entries read, "
                  f"{len(merged)} rows, byte-identical={same_bytes}")


def test_c7_edit_write_amplification_narrow_update(tmp_path, criterion_report):
    report = criterion_report
    db = Database(str(tmp_path / "db"), params=REFERENCE)
    try:
        for name in ("w1", "w2"):
            bench.build_bench_table(db, name, 5000, 23, random.Random(3))
        table_size = db.catalog.get("w1").stats.data_size

        before = db.counters.snapshot()
        db.execute("UPDATE w1 SET v = v + 1.0 WHERE u < 0.01 WITH PLAN = EDIT")
        edit_io = db.counters.delta_since(before)

        before = db.counters.snapshot()
        db.execute("UPDATE w2 SET v = v + 1.0 WHERE u < 0.01 WITH PLAN = OVERWRITE")
        over_io = db.counters.delta_since(before)
    finally:
        db.close()

    edit_frac = edit_io.attached_bytes_written / table_size
    over_frac = over_io.master_bytes_written / table_size
    report(7, edit_frac <= 0.05 and over_frac >= 1.0,
           f"edit wrote {edit_frac:.4%} of the table, "
           f"overwrite wrote {over_frac:.2%}")


CRASH_SCENARIOS = {
    "edit_update": "UPDATE t SET b = 'crash', f = f + 0.5 WHERE a < 12 WITH PLAN = EDIT",
    "edit_delete": "DELETE FROM t WHERE a >= 20 WITH PLAN = EDIT",
    "ow_update": "UPDATE t SET f = 9.25 WHERE a < 10 WITH PLAN = OVERWRITE",
    "ow_delete": "DELETE FROM t WHERE a < 6 WITH PLAN = OVERWRITE",
    "insert": "INSERT INTO t VALUES (900, 'new', 1.0), (901, NULL, 2.0)",
    "compact": "__COMPACT__",
    "create": "CREATE TABLE u (x int64, y string)",
    "drop": "DROP TABLE t",
}


def test_c8_every_fault_point_recovers_to_pre_or_post(tmp_path, criterion_report):
    report = criterion_report
    template = str(tmp_path / "tpl")
    db = Database(template, segment_target_bytes=512)
    db.execute("CREATE TABLE t (a int64, b string, f float64)")
    values = ", ".join(f"({i}, 'row{i}', {float(i)})" for i in range(30))
    db.execute(f"INSERT INTO t VALUES {values}")
    db.execute("UPDATE t SET b = 'seed' WHERE a < 4 WITH PLAN = EDIT")
    db.execute("DELETE FROM t WHERE a = 28 WITH PLAN = EDIT")
    db.close()

    distinct = set()
    torn = trials = 0
    for name, statement in CRASH_SCENARIOS.items():
        scratch = tmp_path / f"runs_{name}"
        scratch.mkdir()
        firings = crash_kit.enumerate_firings(template, str(scratch), statement)

        pre_db = Database(crash_kit.clone(template, str(scratch / "pre")))
        pre = crash_kit.snapshot_views(pre_db)
        pre_db.close()
        post_db = Database(crash_kit.clone(template, str(scratch / "post")))
        crash_kit.run_statement(post_db, statement)
        post = crash_kit.snapshot_views(post_db)
        post_db.close()

        for index, point in enumerate(firings):
            distinct.add((name, index, point))
            for budget in (0, 23):
                hit, views, _ = crash_kit.crash_and_recover(
                    template, str(scratch), statement, index, budget)
                assert hit == point
                trials += 1
                if views not in (pre, post):
                    torn += 1
    report(8, len(distinct) >= 50 and torn == 0,
           f"{len(distinct)} fault points, {trials} kill trials, {torn} torn views")


def test_c9_parser_totality_and_round_trips(criterion_report):
    report = criterion_report
    rng = random.Random(99)
    seeds = ("SELECT * FROM t WHERE a = 1 AND b < 2.5",
             "UPDATE t SET a = 1 + 2 * c WHERE NOT (a >= 3) WITH RATIO = 0.5",
             "INSERT INTO t VALUES (1, 'x', NULL), (2, 'y', TRUE)",
             "CREATE TABLE t (a int64, b string, c float64)",
             "DELETE FROM t WHERE a <> 7 WITH K = 3, PLAN = EDIT")
    crashes = 0
    for i in range(100_000):
        if i % 3 == 0:
            raw = bytes(rng.randrange(256) for _ in range(rng.randint(0, 60)))
            text = raw.decode("utf-8", errors="replace")
        else:
            text = list(rng.choice(seeds))
            for _ in range(rng.randint(1, 6)):
                text[rng.randrange(len(text))] = chr(rng.randrange(32, 127))
            text = "".join(text)
        try:
            dml.parse(text)
        except ParseError as err:
            if err.line < 1 or err.col < 1:
                crashes += 1

    fixed_point_misses = 0
    for _ in range(10_000):
        stmt = dml_gen.statement(rng)
        text = dml.to_text(stmt)
        again = dml.parse(text)
        if again != stmt or dml.to_text(again) != text:
            fixed_point_misses += 1
    report(9, crashes == 0 and fixed_point_misses == 0,
           f"100000 fuzz inputs, {crashes} crashes; "
           f"10000 round trips, {fixed_point_misses} fixed-point misses")
