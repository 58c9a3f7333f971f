"""dualtable: an embedded table engine with two-sided storage.

Tables live in immutable, batch-friendly master segments; updates and
deletes may instead land in a random-access attached store as cell
patches and delete markers. A throughput-linear cost model picks, per
statement, whether editing the attached store or rewriting the master
segments is cheaper, and merge-on-read presents the single up-to-date
view either way.
"""

from .attached_store import AttachedStore, DeltaEntry
from .catalog import Catalog, RatioHistory, SegmentInfo, TableDescriptor, TableStats
from .cost_model import (CostParams, Plan, PlanCosts, PlanDecision, calibrate,
                         choose_plan, cost_delete, cost_update,
                         crossover_delete, crossover_update,
                         delete_plan_costs, update_plan_costs)
from .counters import IoCounters
from .engine import Database, ExecutionReport, SelectResult
from .errors import (CatalogError, DeltaError, DualTableError, ExecutionError,
                     ParseError, PlanError, SchemaError, StorageError)
from .record_id import (decode_record_id, encode_record_id, file_id_of,
                        make_record_id, row_number_of, split_record_id)
from .schema import Column, ColumnType, Schema
from .union_read import MergedRow, scan_table, union_read, union_read_partition

__version__ = "0.1.0"

__all__ = [
    "AttachedStore", "DeltaEntry",
    "Catalog", "RatioHistory", "SegmentInfo", "TableDescriptor", "TableStats",
    "CostParams", "Plan", "PlanCosts", "PlanDecision", "calibrate",
    "choose_plan", "cost_delete", "cost_update",
    "crossover_delete", "crossover_update",
    "delete_plan_costs", "update_plan_costs",
    "IoCounters",
    "Database", "ExecutionReport", "SelectResult",
    "CatalogError", "DeltaError", "DualTableError", "ExecutionError",
    "ParseError", "PlanError", "SchemaError", "StorageError",
    "decode_record_id", "encode_record_id", "file_id_of",
    "make_record_id", "row_number_of", "split_record_id",
    "Column", "ColumnType", "Schema",
    "MergedRow", "scan_table", "union_read", "union_read_partition",
    "__version__",
]
