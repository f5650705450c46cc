"""``dgl`` command line: parse, wp, check, run, report.

Exit codes: 0 success, 1 check or verdict failure, 2 usage or configuration
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench as benchstore
from .checker import CheckSpec, check
from .config import ConfigError, load_settings
from .parser import DglSyntaxError, parse_formula, print_formula
from .pipeline import MULTI_SHOT, ZERO_SHOT, RunConfig, run_suite
from .report import make_report
from .solver import SolverConfig
from .symexec import ToolFailure, expand
from .transport import HttpTransport, ReplayTransport, TransportError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("dglcheck")


class UsageError(Exception):
    pass


def _read_source(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_text(encoding="utf-8", errors="replace")


def _load_model(path):
    """Parse a model file, printing diagnostics; returns None on syntax errors."""
    src = _read_source(path)
    try:
        return parse_formula(src), []
    except DglSyntaxError as e:
        return None, e.diagnostics


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _solver(args) -> SolverConfig:
    cfg = SolverConfig.from_env(args.settings)
    if not cfg.available():
        raise UsageError(
            f"solver {cfg.cmd[0] if cfg.cmd else '?'!r} not found; set DGL_SOLVER or solver.cmd"
        )
    return cfg


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_parse(args) -> int:
    formula, diags = _load_model(args.file)
    if formula is None:
        for d in diags:
            print(d.message, file=sys.stderr)
        if args.json:
            print(json.dumps({"ok": False, "diagnostics": [d.to_dict() for d in diags]},
                             sort_keys=True, ensure_ascii=False))
        return EXIT_FAIL
    _emit(args, {"ok": True, "formula": print_formula(formula)}, print_formula(formula))
    return EXIT_OK


def cmd_wp(args) -> int:
    formula, diags = _load_model(args.file)
    if formula is None:
        for d in diags:
            print(d.message, file=sys.stderr)
        return EXIT_FAIL
    try:
        result = expand(formula)
    except ToolFailure as e:
        print(f"tool_failure: {e}", file=sys.stderr)
        if args.json:
            print(json.dumps({"ok": False, "reason": e.reason.to_dict()}, sort_keys=True))
        else:
            print(f"tool_failure:{e.reason.kind.value}")
        return EXIT_FAIL
    _emit(args, {"ok": True, "wp": print_formula(result)}, print_formula(result))
    return EXIT_OK


def _expected(args):
    if args.bench:
        suite = benchstore.load_suite(args.bench_dir)
        try:
            b = suite.get(args.bench)
        except KeyError:
            raise UsageError(f"unknown benchmark {args.bench!r}") from None
        expected, min_writes = b.expected, b.min_writes
    else:
        if args.expected is None or args.min_writes is None:
            raise UsageError("check needs --expected and --min-writes, or --bench")
        expected, min_writes = args.expected, args.min_writes
    if args.min_writes is not None:
        min_writes = args.min_writes
    if Path(expected).is_file():
        expected = Path(expected).read_text(encoding="utf-8")
    try:
        return parse_formula(expected), min_writes
    except DglSyntaxError as e:
        raise UsageError(f"expected solution: {e}") from None


def cmd_check(args) -> int:
    expected, min_writes = _expected(args)
    formula, diags = _load_model(args.file)
    if formula is None:
        for d in diags:
            print(d.message, file=sys.stderr)
        print("failed:syntax")
        return EXIT_FAIL
    timeout_ms = int(args.timeout * 1000) if args.timeout is not None else int(
        args.settings["solver.timeout_ms"])
    try:
        spec = CheckSpec(expected, min_writes, timeout_ms)
    except ValueError as e:
        raise UsageError(str(e)) from None
    sink = None
    if args.verbose:
        def sink(rec):
            print(json.dumps(rec, sort_keys=True), file=sys.stderr, flush=True)
    verdict = check(formula, spec, _solver(args), on_stage=sink)
    if args.json:
        print(json.dumps(verdict.to_dict(), sort_keys=True))
    else:
        print(verdict.label)
        if verdict.reason is not None:
            print(f"reason: {verdict.reason.kind.value}: {verdict.reason.detail}")
        elif verdict.detail:
            print(f"detail: {verdict.detail}")
        for k, v in verdict.directions.items():
            print(f"{k}: {v}")
        if verdict.counterexample:
            cx = ", ".join(f"{k}={v}" for k, v in verdict.counterexample.items())
            print(f"counterexample: {cx}")
    return EXIT_OK if verdict.success else EXIT_FAIL


def cmd_run(args) -> int:
    s = args.settings
    if args.transport == "replay":
        if not args.replay:
            raise UsageError("--transport replay needs --replay FILE")
        if not Path(args.replay).is_file():
            raise UsageError(f"no such file: {args.replay}")
        transport = ReplayTransport.from_file(args.replay)
    else:
        try:
            transport = HttpTransport(base_url=s.get("llm.base_url"))
        except TransportError as e:
            raise UsageError(str(e)) from None
    suite = benchstore.load_suite(args.bench_dir)
    benches = suite.benchmarks
    if args.only:
        wanted = set(args.only)
        unknown = wanted - {b.id for b in benches}
        if unknown:
            raise UsageError(f"unknown benchmark(s): {', '.join(sorted(unknown))}")
        benches = [b for b in benches if b.id in wanted]
    config = RunConfig(
        model=args.model or s["llm.model"],
        mode=args.mode,
        samples=args.samples if args.samples is not None else int(s["run.samples"]),
        max_repairs=args.max_repairs if args.max_repairs is not None else int(s["run.max_repairs"]),
        temperature=float(s["run.temperature"]),
        max_tokens=int(s["llm.max_tokens"]) if args.transport == "live" else None,
        timeout_ms=int(args.timeout * 1000) if args.timeout is not None else int(s["solver.timeout_ms"]),
        workers=args.workers if args.workers is not None else int(s["run.workers"]),
        semantic_repair=args.semantic_repair,
        solver=_solver(args),
    )
    if config.samples < 1:
        raise UsageError("--samples must be at least 1")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "a", encoding="utf-8") as fh:
        def write(rec):
            fh.write(json.dumps(rec.to_dict(args.timings), sort_keys=True, ensure_ascii=False) + "\n")
            fh.flush()
            print(f"{rec.benchmark}\t{rec.best.label}\t{' '.join(v.label for v in rec.verdicts)}")

        records = run_suite(benches, transport, config, suite.fewshot, on_record=write)
    solved = sum(r.best.success for r in records)
    print(f"solved {solved}/{len(records)}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    for p in args.results:
        if not Path(p).is_file():
            raise UsageError(f"no such file: {p}")
    result = make_report(args.results, args.out)
    for row in result["summary"]:
        print(f"{row['model']}\t{row['mode']}\t{row['success']}/{row['problems']}")
    print(f"wrote {args.out}/summary.csv, outcomes.csv, heatmap.svg, bars.svg", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dgl", description="Check dGL formalizations of kinematics problems.")
    p.add_argument("--config", help="settings file (default: ./dgl.toml if present)")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("parse", help="syntax-check a model file")
    sp.add_argument("file")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("wp", help="print the weakest precondition of a formula")
    sp.add_argument("file")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_wp)

    sp = sub.add_parser("check", help="certify a model against an expected solution")
    sp.add_argument("file")
    sp.add_argument("--expected", help="expected solution formula, or a file containing it")
    sp.add_argument("--min-writes", type=int)
    sp.add_argument("--bench", help="take expected solution and min writes from this benchmark")
    sp.add_argument("--bench-dir", help="benchmark directory (default: shipped suite)")
    sp.add_argument("--timeout", type=float, help="solver budget in seconds (default 180)")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--verbose", action="store_true", help="stage trace as JSON lines on stderr")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("run", help="autoformalize a benchmark suite with an LLM")
    sp.add_argument("bench_dir", nargs="?", help="benchmark directory (default: shipped suite)")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--max-repairs", type=int)
    sp.add_argument("--mode", choices=[MULTI_SHOT, ZERO_SHOT], default=MULTI_SHOT)
    sp.add_argument("--transport", choices=["live", "replay"], default="live")
    sp.add_argument("--replay", help="JSONL transcript for --transport replay")
    sp.add_argument("--model", help="model id sent to the endpoint and recorded in results")
    sp.add_argument("--out", default="results.jsonl")
    sp.add_argument("--only", nargs="+", metavar="ID")
    sp.add_argument("--timeout", type=float, help="checker budget per sample in seconds")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--semantic-repair", action="store_true",
                    help="also feed checker rejections back to the model")
    sp.add_argument("--timings", action="store_true", help="record wall-clock times")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("report", help="summary CSV and figures from results files")
    sp.add_argument("results", nargs="+")
    sp.add_argument("--out", default="report")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        args.settings = load_settings(args.config)
        return args.func(args)
    except (UsageError, ConfigError, benchstore.BenchmarkError, TransportError) as e:
        print(f"dgl: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
