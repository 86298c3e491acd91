"""``braid`` command line.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 upstream provider failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .cache import BraidCache, CacheMiss
from .config import ConfigError, load_config
from .datasets import EmptyDataset, SchemaError
from .gateway import GatewayError, HttpGateway, StubGateway
from .masking import MaskingConfig, mask_numerals
from .mermaid import LintConfig, MermaidError, lint_graph, parse_flowchart, serialize, validate
from .report import MissingBaseline, aggregate, emit_reports
from .runner import RunLog, run_classic, run_matrix

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_UPSTREAM = 0, 1, 2, 3


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_parse(args) -> int:
    graph = parse_flowchart(_read(args.file))
    result = validate(graph)
    for f in result.findings:
        _err(str(f))
    _err(f"{len(graph.nodes)} nodes, {len(graph.edges)} edges")
    sys.stdout.write(serialize(graph))
    return EXIT_OK if result.ok else EXIT_DATA


def cmd_lint(args) -> int:
    graph = parse_flowchart(_read(args.file))
    disabled = {r.lower() for r in args.disable}
    config = LintConfig(
        atomicity="atomicity" not in disabled,
        branching="branching" not in disabled,
        verification="verification" not in disabled,
        leakage="leakage" not in disabled,
        max_label_tokens=args.max_tokens,
    )
    report = lint_graph(graph, config)
    for f in report.findings:
        _err(str(f))
    _err(f"{len(report.findings)} finding(s)")
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_mask(args) -> int:
    graph = parse_flowchart(_read(args.file))
    config = MaskingConfig(placeholder=args.placeholder, mask_edge_labels=not args.keep_edge_labels,
                           strict_digits=args.strict_digits)
    outcome = mask_numerals(graph, config)
    sys.stdout.write(serialize(outcome.graph))
    _err(f"{outcome.literals_masked} literal(s) masked")
    return EXIT_OK


def _overrides(args) -> dict:
    return {
        "dataset": args.dataset,
        "generators": args.generators,
        "solvers": args.solvers,
        "judge": args.judge,
        "baseline": args.baseline,
        "sample_size": args.sample_size,
        "seed": args.seed,
        "concurrency": args.concurrency,
        "out": args.out,
        "prices": args.prices,
    }


def cmd_run(args) -> int:
    config = load_config(args.config, _overrides(args))
    if args.stub_script:
        gateway = StubGateway.from_file(args.stub_script, concurrency=config.concurrency)
    else:
        gateway = HttpGateway(config.providers, concurrency=config.concurrency)
    modes = ["matrix", "classic"] if args.mode == "all" else [args.mode]
    print(f"seed {config.seed}; log {config.log_path}")
    for mode in modes:
        runner = run_matrix if mode == "matrix" else run_classic
        summary = runner(config, gateway)
        print(f"{mode}: {summary.new_records} new record(s), {summary.skipped} already present, "
              f"{summary.failures} failure(s), {summary.gateway_calls} new calls")
        for kind, n in sorted(summary.failure_kinds.items()):
            print(f"  {kind}: {n}")
    records = RunLog(config.log_path).results()
    try:
        report = aggregate(records, config.baseline.label, config.amortize_n, config.include_judge_cost)
    except MissingBaseline as exc:
        print(f"reports skipped: {exc}")
        return EXIT_OK
    for path in emit_reports(report, Path(config.out) / "reports"):
        print(f"wrote {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    runlog = RunLog(args.log)
    if not runlog.path.exists():
        _err(f"no such log: {args.log}")
        return EXIT_DATA
    records = runlog.records()
    headers = [r for r in records if r.get("type") == "run"]
    last = headers[-1]["config"] if headers else {}
    baseline = args.baseline or last.get("baseline")
    amortize_n = args.amortize_n or last.get("amortize_n", 1)
    include_judge = last.get("include_judge_cost", False)
    results = [r for r in records if r.get("type") == "result"]
    report = aggregate(results, baseline or "", amortize_n, include_judge)
    out = Path(args.out) if args.out else runlog.path.parent / "reports"
    for path in emit_reports(report, out):
        print(f"wrote {path}")
    return EXIT_OK


def _cache(args) -> BraidCache:
    if args.cache_dir:
        return BraidCache(args.cache_dir)
    if os.environ.get("BRAID_CACHE_DIR"):
        return BraidCache(os.environ["BRAID_CACHE_DIR"])
    if args.config:
        return BraidCache(load_config(args.config).cache_path)
    return BraidCache(Path("runs/default/cache"))


def cmd_cache(args) -> int:
    cache = _cache(args)
    if args.action == "list":
        keys = cache.keys()
        for key in keys:
            print(key)
        _err(f"{len(keys)} cached graph(s) in {cache.dir}")
    elif args.action == "purge":
        _err(f"removed {cache.purge()} cached graph(s)")
    else:
        if not args.digest:
            _err("cache show needs a digest")
            return EXIT_USAGE
        try:
            sys.stdout.write(cache.show(args.digest))
        except CacheMiss:
            _err(f"unknown digest: {args.digest}")
            return EXIT_DATA
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse defaults to 2, which is our data-error code
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="braid", description="Bounded-reasoning graph harness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a Mermaid file and print its canonical form")
    p.add_argument("file", help="path or - for stdin")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("lint", help="apply graph-construction lint rules")
    p.add_argument("file")
    p.add_argument("--max-tokens", type=int, default=15)
    p.add_argument("--disable", action="append", default=[],
                   choices=["atomicity", "branching", "verification", "leakage"])
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("mask", help="replace numerical literals with a placeholder")
    p.add_argument("file")
    p.add_argument("--placeholder", default="_")
    p.add_argument("--keep-edge-labels", action="store_true")
    p.add_argument("--strict-digits", action="store_true")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("run", help="run the generator x solver matrix and/or the classic control")
    p.add_argument("--mode", choices=["matrix", "classic", "all"], default="all")
    p.add_argument("--config")
    p.add_argument("--dataset", help="KIND=PATH, replaces the configured datasets")
    p.add_argument("--generators", help="comma list of [provider/]model[@effort]")
    p.add_argument("--solvers")
    p.add_argument("--judge")
    p.add_argument("--baseline")
    p.add_argument("--prices", help="price sheet CSV")
    p.add_argument("--sample-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--stub-script", help="JSON script for the offline stub gateway")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="regenerate reports from a run log")
    p.add_argument("log")
    p.add_argument("--out")
    p.add_argument("--baseline")
    p.add_argument("--amortize-n", type=int)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("cache", help="inspect the graph cache")
    p.add_argument("action", choices=["list", "purge", "show"])
    p.add_argument("digest", nargs="?")
    p.add_argument("--cache-dir")
    p.add_argument("--config")
    p.set_defaults(func=cmd_cache)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_USAGE
    except (MermaidError, SchemaError, EmptyDataset, MissingBaseline) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_DATA
    except GatewayError as exc:
        _err(f"provider failure ({exc.kind}): {exc}")
        return EXIT_UPSTREAM
    except OSError as exc:
        _err(f"io error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
