"""Command-line front end: scripts, a REPL, benchmarks, maintenance.

    dualtable run <script>    execute a ';'-separated statement file
    dualtable repl            interactive statement loop on stdin
    dualtable bench ...       ratio sweep, CSV on stdout
    dualtable compact <table> materialize the merged view
    dualtable calibrate       measure store rates, print config keys

Exit codes: 0 success, 1 user error (bad syntax, unknown table, bad
arguments), 2 internal error. Script diagnostics go to stderr as
"line:col: message"; SELECT results go to stdout as CSV.
"""

from __future__ import annotations

import argparse
import sys

from . import bench, dml
from .config import Config, ConfigError, load_config
from .cost_model import calibrate
from .engine import Database, SelectResult, rows_to_csv
from .errors import DualTableError, ParseError
from .faults import InjectedCrash

EXIT_OK = 0
EXIT_USER = 1
EXIT_INTERNAL = 2


def _open_database(cfg: Config) -> Database:
    return Database(cfg.data_dir, params=cfg.cost_params(),
                    default_ratio=cfg.default_ratio,
                    ewma_weight=cfg.ewma_weight,
                    compact_threshold=cfg.compact_threshold)


def _print_result(result, out) -> None:
    if isinstance(result, SelectResult):
        out.write(rows_to_csv(result.columns, result.rows))
    elif result.plan_used is not None:
        out.write(f"-- {result.rows_matched} matched, {result.rows_changed} "
                  f"changed, plan={result.plan_used.value}\n")


def cmd_run(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    cfg = load_config(args.config, args.set)
    try:
        with open(args.script, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        err.write(f"cannot read script: {exc}\n")
        return EXIT_USER
    try:
        statements = dml.parse_script(text)
    except ParseError as exc:
        err.write(f"{exc.line}:{exc.col}: {exc.message}\n")
        return EXIT_USER
    with _open_database(cfg) as db:
        for stmt in statements:
            try:
                _print_result(db.execute(stmt), out)
            except DualTableError as exc:
                pos = getattr(stmt, "pos", None) or (0, 0)
                err.write(f"{pos[0]}:{pos[1]}: {exc}\n")
                return EXIT_USER
    return EXIT_OK


def _split_complete(buffer: str) -> tuple[str, str] | None:
    """Cut the buffer after its last ';' outside strings and comments."""
    in_string = in_comment = False
    last_semi = -1
    i = 0
    while i < len(buffer):
        ch = buffer[i]
        if in_comment:
            if ch == "\n":
                in_comment = False
        elif in_string:
            if ch == "'":
                if buffer[i + 1:i + 2] == "'":
                    i += 1
                else:
                    in_string = False
        elif ch == "'":
            in_string = True
        elif ch == "-" and buffer[i + 1:i + 2] == "-":
            in_comment = True
        elif ch == ";":
            last_semi = i
        i += 1
    if last_semi < 0:
        return None
    return buffer[:last_semi + 1], buffer[last_semi + 1:]


def cmd_repl(args, out=None, err=None, inp=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    inp = inp or sys.stdin
    cfg = load_config(args.config, args.set)
    interactive = hasattr(inp, "isatty") and inp.isatty()
    buffer = ""
    with _open_database(cfg) as db:
        if interactive:
            out.write("dualtable repl; statements end with ';'\n")
        while True:
            if interactive:
                out.write("... " if buffer.strip() else ">>> ")
                out.flush()
            line = inp.readline()
            if not line:
                break
            buffer += line
            cut = _split_complete(buffer)
            if cut is None:
                continue
            text, buffer = cut
            try:
                for stmt in dml.parse_script(text):
                    _print_result(db.execute(stmt), out)
            except ParseError as exc:
                err.write(f"{exc.line}:{exc.col}: {exc.message}\n")
            except DualTableError as exc:
                err.write(f"error: {exc}\n")
    return EXIT_OK


def cmd_bench(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    cfg = load_config(args.config, None)
    if args.params:
        cfg = load_config(args.params, None, base=cfg)
    cfg = load_config(None, args.set, base=cfg)
    try:
        grid = tuple(float(x) for x in args.grid.split(",") if x.strip())
    except ValueError:
        err.write(f"bad --grid {args.grid!r}\n")
        return EXIT_USER
    k = int(args.k) if args.k is not None else int(cfg.k_default)
    try:
        spec = bench.BenchSpec(rows=args.rows, cols=args.cols, grid=grid,
                               op=args.op, k=k, params=cfg.cost_params(),
                               reps=args.reps, seed=args.seed)
    except DualTableError as exc:
        err.write(f"{exc}\n")
        return EXIT_USER
    rows = bench.run_sweep(spec, args.work_dir)
    out.write(bench.rows_to_csv(rows))
    return EXIT_OK


def cmd_compact(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    cfg = load_config(args.config, args.set)
    with _open_database(cfg) as db:
        report = db.compact(args.table)
        out.write(f"-- compacted {args.table}: {report.rows_matched} rows, "
                  f"{report.bytes.master_bytes_written} master bytes written\n")
    return EXIT_OK


def cmd_calibrate(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    cfg = load_config(args.config, args.set)
    params = calibrate(cfg.data_dir, probe_bytes=args.probe_bytes)
    out.write(f"W_M = {params.master_write_rate:.6g}\n"
              f"R_M = {params.master_read_rate:.6g}\n"
              f"W_A = {params.attached_write_rate:.6g}\n"
              f"R_A = {params.attached_read_rate:.6g}\n")
    return EXIT_OK


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualtable",
        description="hybrid-storage table engine: master segments plus a "
                    "delta store, with cost-based update/delete planning")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")

    p_run = sub.add_parser("run", help="execute a statement script")
    p_run.add_argument("script")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_repl = sub.add_parser("repl", help="interactive statement loop")
    common(p_repl)
    p_repl.set_defaults(func=cmd_repl)

    p_bench = sub.add_parser("bench", help="ratio sweep, CSV to stdout")
    p_bench.add_argument("--op", choices=("update", "delete"), required=True)
    p_bench.add_argument("--rows", type=int, default=10000)
    p_bench.add_argument("--cols", type=int, default=4)
    p_bench.add_argument("--grid", default="0.01,0.02,0.05,0.1,0.2,0.35,0.5")
    p_bench.add_argument("--k", default=None)
    p_bench.add_argument("--reps", type=int, default=1)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--params", default=None,
                         help="cost-parameter file (config format)")
    p_bench.add_argument("--work-dir", default="bench_work")
    common(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_compact = sub.add_parser("compact", help="compact one table")
    p_compact.add_argument("table")
    common(p_compact)
    p_compact.set_defaults(func=cmd_compact)

    p_cal = sub.add_parser("calibrate", help="measure store throughput")
    p_cal.add_argument("--probe-bytes", type=int, default=64 * 1024 * 1024)
    common(p_cal)
    p_cal.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that's a user error here
        return EXIT_USER if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USER
    except DualTableError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USER
    except InjectedCrash:
        raise
    except KeyboardInterrupt:
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits 2
        sys.stderr.write(f"internal error: {exc!r}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
