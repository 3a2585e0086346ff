"""Command-line driver: ``phaseqm run`` and ``phaseqm selfcheck``.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration or
domain error, 3 numeric failure (e.g. a root search that does not converge).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import FORMATS, load_config
from .errors import DomainError, NumericError

EXIT_OK, EXIT_FAIL, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3


def _write(path: Optional[str], text: str) -> None:
    if path:
        out = Path(path)
        if out.parent != Path(""):
            out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def cmd_run(args) -> int:
    from .reporting import dumps, run_report, summary_lines, to_csv
    from .tasks import run_tasks

    cfg = load_config(args.config)
    fmt = args.format or cfg.output.get("format", "json")
    path = args.output or cfg.output.get("path")
    start = time.perf_counter()
    results = run_tasks(cfg)
    wall = time.perf_counter() - start if args.timing else None
    report = run_report(cfg.raw, results, wall)
    _write(path, dumps(report) if fmt == "json" else to_csv(results))
    for line in summary_lines(results):
        print(line)
    s = report["summary"]
    verdict = "PASS" if report["passed"] else "FAIL"
    print(f"{verdict}: {s['checks'] - s['failed'] - s['report_only']} passed, {s['failed']} failed, {s['report_only']} report-only")
    if path:
        print(f"report written to {path}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_selfcheck(args) -> int:
    from . import acceptance
    from .reporting import dumps

    if args.list:
        for name in acceptance.criterion_names():
            print(name)
        return EXIT_OK
    results = []
    for cid, name, _ in acceptance.CRITERIA:
        r = acceptance.run_criterion(cid, args.perturb_B)
        results.append(r)
        print(f"{'PASS' if r.passed else 'FAIL'}  {cid:>2}. {name}")
        for c in r.checks:
            if c.passed is False:
                print(f"        failed: {c.name}: {c.value:.6g} {c.relation} {c.bound}")
    report = acceptance.selfcheck_report(results, args.perturb_B)
    _write(args.output, dumps(report))
    ok = report["passed"]
    print(f"selfcheck {'passed' if ok else 'FAILED'}: {sum(r.passed for r in results)}/{len(results)} criteria")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phaseqm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"phaseqm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the task described by a JSON config")
    run.add_argument("config", help="path to the run config (JSON)")
    run.add_argument("--output", help="report path (overrides output.path)")
    run.add_argument("--format", choices=FORMATS, help="report format (overrides output.format)")
    run.add_argument("--timing", action="store_true", help="embed wall time in the report (breaks byte-identity)")
    run.set_defaults(func=cmd_run)

    sc = sub.add_parser("selfcheck", help="run the built-in acceptance suite")
    sc.add_argument("--list", action="store_true", help="list the criteria without running them")
    sc.add_argument("--output", help="write the JSON selfcheck report here")
    sc.add_argument("--perturb-B", dest="perturb_B", type=float, default=0.0, help=argparse.SUPPRESS)
    sc.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
