"""Command-line entry point: ``dockmine parse|mine|check``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .corpus import find_dockerfiles, ingest
from .detector import CheckResult, check_file, format_record, format_text
from .dockerfile import DockerfileSyntaxError
from .ir import dump_ir, parse_and_substitute
from .miner import DEFAULT_MAX_LEN, mine, report
from .rules import RuleCatalog, SchemaError, builtin_catalog, load_rules

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_ERROR = 2

log = logging.getLogger("dockmine")


def _support(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"must satisfy 0 < x <= 1, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _id_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated rule ids, got {text!r}") from None


def _read(path: str) -> Optional[str]:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"dockmine: cannot read {path}: {exc}", file=sys.stderr)
        return None


def cmd_parse(args) -> int:
    text = _read(args.file)
    if text is None:
        return EXIT_ERROR
    try:
        # shell bodies are always parsed so a broken RUN is reported either way
        parsed = parse_and_substitute(text, args.file)
    except DockerfileSyntaxError as exc:
        print(f"dockmine: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.dump_ir:
        sys.stdout.write(dump_ir(parsed.ir))
        return EXIT_OK
    ast = parsed.ast
    for note in ast.notes:
        print(f"dockmine: note: {note}", file=sys.stderr)
    for inst in ast.instructions:
        start, end = inst.line_span
        fields = {"form": inst.form, "args": inst.args}
        if inst.flags:
            fields["flags"] = [[k, v] for k, v in inst.flags]
        if inst.keyword == "FROM":
            fields.update(image=inst.image, tag=inst.tag, digest=inst.digest, alias=inst.alias)
        print(f"{start}-{end}\t{inst.keyword}\t{json.dumps(fields)}")
    return EXIT_OK


def cmd_mine(args) -> int:
    if not Path(args.corpus).is_dir():
        print(f"dockmine: not a directory: {args.corpus}", file=sys.stderr)
        return EXIT_ERROR
    entries = [e for e in ingest(args.corpus) if e.gold_eligible]
    if not entries:
        print("dockmine: no eligible Dockerfiles in corpus", file=sys.stderr)
        return EXIT_ERROR
    corpus = [e.parsed.ir for e in entries]
    results = mine(corpus, args.min_support, args.max_len, jobs=args.jobs)
    text = json.dumps(report(results, args.min_support, args.max_len), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _check_one(job: tuple[str, RuleCatalog]) -> CheckResult:
    path, catalog = job
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        return CheckResult(path, error=DockerfileSyntaxError(0, f"cannot read file: {exc}", path))
    return check_file(text, catalog, path)


def cmd_check(args) -> int:
    try:
        catalog = load_rules(Path(args.rules)) if args.rules else builtin_catalog()
    except (OSError, SchemaError, ValueError) as exc:
        print(f"dockmine: bad rule file: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.only:
        catalog = catalog.only(args.only)
    target = Path(args.target)
    if not target.exists():
        print(f"dockmine: no such file or directory: {target}", file=sys.stderr)
        return EXIT_ERROR
    paths = [str(p) for p in find_dockerfiles(target)]
    jobs = [(p, catalog) for p in paths]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_check_one, jobs, chunksize=16))
    else:
        results = [_check_one(j) for j in jobs]

    fmt = format_record if args.format == "records" else format_text
    status = EXIT_OK
    for res in results:
        if res.error is not None:
            print(f"dockmine: {res.error}", file=sys.stderr)
            status = EXIT_ERROR
            continue
        for v in res.violations:
            print(fmt(v))
        if res.has_mandatory and status == EXIT_OK:
            status = EXIT_VIOLATIONS
    return status


def build_parser() -> argparse.ArgumentParser:
    catalog_version = builtin_catalog().version
    parser = argparse.ArgumentParser(
        prog="dockmine",
        description="Parse Dockerfiles, mine usage patterns and check best-practice rules.")
    parser.add_argument("--version", action="version",
                        version=f"dockmine {__version__} (rule catalog {catalog_version})")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="print the instruction AST or the IR token dump")
    p.add_argument("file")
    p.add_argument("--dump-ir", action="store_true", help="print IR tokens instead of the AST")
    p.set_defaults(func=cmd_parse)

    default_jobs = os.cpu_count() or 1
    m = sub.add_parser("mine", help="mine sequential patterns from a corpus directory")
    m.add_argument("corpus")
    m.add_argument("--min-support", type=_support, default=Fraction(2, 5),
                   help="minimum support fraction in (0, 1] (default 0.4)")
    m.add_argument("--max-len", type=_positive_int, default=DEFAULT_MAX_LEN,
                   help="maximum pattern length; patterns cut at this length count as maximal "
                        "(default %(default)s)")
    m.add_argument("--out", help="write the JSON report here instead of stdout")
    m.add_argument("--jobs", type=_positive_int, default=default_jobs)
    m.set_defaults(func=cmd_mine)

    c = sub.add_parser("check", help="check Dockerfiles against a rule catalog")
    c.add_argument("target", help="a Dockerfile or a directory to scan")
    c.add_argument("--rules", help="YAML rule catalog (default: built-in)")
    c.add_argument("--format", choices=("text", "records"), default="text")
    c.add_argument("--only", type=_id_list, help="comma-separated rule ids to check")
    c.add_argument("--jobs", type=_positive_int, default=default_jobs)
    c.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="dockmine: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
