"""Shared machinery for crash-injection testing.

The engine's stores call ``faults.fire(name)`` around every durability
boundary. The helpers here run a statement three times per injection
index: once uninstrumented to learn the post-statement view, then once
per byte-budget crashing at the chosen firing, reopening the database
afterwards and checking the recovered view is exactly the pre- or the
post-statement one.
"""

from __future__ import annotations

import os
import shutil

from dualtable import Database, faults


class FiringCounter:
    """Records every fire() in order without disturbing execution."""

    def __init__(self):
        self.points: list[str] = []

    def __call__(self, point: str):
        self.points.append(point)
        return None


class CrashAt:
    """Returns a torn-write budget at the n-th firing, None elsewhere.

    Returning an int makes write-style points persist that many bytes and
    die; checkpoint-style points treat any non-None as an immediate kill.
    """

    def __init__(self, index: int, budget: int = 0):
        self.index = index
        self.budget = budget
        self.seen = 0
        self.hit_point = None

    def __call__(self, point: str):
        i = self.seen
        self.seen += 1
        if i == self.index:
            self.hit_point = point
            return self.budget
        return None


def snapshot_views(db: Database) -> dict[str, list[tuple]]:
    views = {}
    for name in sorted(db.catalog.tables):
        views[name] = db.execute(f"SELECT * FROM {name}").rows
    return views


def run_statement(db: Database, statement: str):
    if statement == "__COMPACT__":
        return db.compact("t")
    return db.execute(statement)


def referenced_files(db: Database) -> set[str]:
    keep = {"catalog.json", "decisions.log"}
    for desc in db.catalog.tables.values():
        keep.add(f"t{desc.table_id}_attached.log")
        for seg in desc.segments:
            keep.add(f"t{desc.table_id}_f{seg.file_id}.dtb")
    return keep


def clone(template_dir: str, work_dir: str) -> str:
    target = os.path.join(work_dir, "crash_run")
    if os.path.exists(target):
        shutil.rmtree(target)
    shutil.copytree(template_dir, target)
    return target


def enumerate_firings(template_dir: str, work_dir: str, statement: str) -> list[str]:
    """Dry-run the statement and list the fault points it passes through."""
    counter = FiringCounter()
    path = clone(template_dir, work_dir)
    faults.install(counter)
    try:
        db = Database(path)
        counter.points.clear()  # ignore firings from recovery/open
        run_statement(db, statement)
        db.close()
    finally:
        faults.install(None)
    return counter.points


def crash_and_recover(template_dir: str, work_dir: str, statement: str,
                      index: int, budget: int):
    """Run `statement`, dying at the index-th fault point.

    Returns (hit_point, views_after_recovery, leftover_files). hit_point is
    None when the statement finished before reaching the index.
    """
    path = clone(template_dir, work_dir)
    hook = CrashAt(index, budget)
    crashed = False
    db = Database(path)
    faults.install(hook)
    try:
        run_statement(db, statement)
    except faults.InjectedCrash:
        crashed = True
    finally:
        faults.install(None)
        # abandon `db` without clean shutdown, like a killed process
        db.close()

    recovered = Database(path)
    views = snapshot_views(recovered)
    on_disk = set(os.listdir(path))
    leftover = on_disk - referenced_files(recovered)
    recovered.close()
    assert crashed == (hook.hit_point is not None)
    return hook.hit_point, views, leftover
