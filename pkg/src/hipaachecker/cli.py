"""Command line interface.

Exit status: 0 every checkable rule satisfied, 1 at least one unsatisfied,
2 usage or input error, 3 ingestion or decompiler failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .catalog import (
    Catalog,
    builtin_catalog,
    catalog_counts,
    load_catalog,
)
from .corpus import compute_stats, load_manifest, run_batch, stats_to_csv
from .errors import (
    CatalogError,
    ChecksumMismatchError,
    EmptyCorpusError,
    IngestionError,
    ManifestError,
    PatternError,
    WorkdirUnwritableError,
)
from .ingestion import (
    DEFAULT_DECOMPILER_TIMEOUT,
    DecompilerSpec,
    extract_apk,
    open_source_tree,
)
from .reporting import (
    bundle_from_json,
    make_bundle,
    render_html,
    render_json,
    render_text,
    tree_source_access,
)
from .scanner import scan_tree
from .verdicts import evaluate, exit_code

DECOMPILER_ENV_VAR = "HIPAACHECKER_DECOMPILER"

EXIT_COMPLIANT = 0
EXIT_NONCOMPLIANT = 1
EXIT_USAGE = 2
EXIT_INGESTION = 3


class _UsageError(Exception):
    pass


def _add_catalog_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--rules", metavar="FILE",
        help="load rules from FILE instead of the built-in catalog")
    parser.add_argument(
        "--profile", choices=["paper", "strict"], default="paper",
        help="built-in catalog profile (default: paper)")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _add_scan_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--decompiler", metavar="CMD",
        help="decompiler command with {apk} and {out} placeholders "
             f"(default: ${DECOMPILER_ENV_VAR})")
    parser.add_argument(
        "--timeout", type=float, default=DEFAULT_DECOMPILER_TIMEOUT,
        metavar="SECS", help="decompiler timeout in seconds")
    parser.add_argument(
        "--deterministic", action="store_true",
        help="fixed timestamp; output is byte-identical across runs")
    parser.add_argument(
        "--workers", type=_positive_int, metavar="N",
        help="worker count for scanning (default: auto)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hipaachecker",
        description="Check app source trees and APKs for HIPAA "
                    "technical-safeguard evidence.")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser(
        "scan", help="scan one source directory or .apk file")
    scan.add_argument(
        "target", help="source directory, or APK when the path ends in .apk")
    _add_catalog_flags(scan)
    scan.add_argument(
        "--format", action="append", choices=["json", "html", "text"],
        dest="formats", metavar="FMT",
        help="output format, repeatable (default: text)")
    scan.add_argument(
        "--out", metavar="DIR",
        help="directory for report files (default: current directory)")
    _add_scan_flags(scan)

    batch = sub.add_parser("batch", help="scan an app corpus from a manifest")
    batch.add_argument("--manifest", required=True, metavar="FILE",
                       help="CSV manifest: app_id,category,kind,path")
    batch.add_argument("--out", required=True, metavar="DIR",
                       help="work directory for per-app reports")
    batch.add_argument("--stats", metavar="FILE",
                       help="statistics CSV path (default: <out>/stats.csv)")
    _add_catalog_flags(batch)
    _add_scan_flags(batch)

    rules = sub.add_parser("rules", help="inspect the rule catalog")
    rules.add_argument("action", choices=["list"])
    rules.add_argument(
        "--format", choices=["text", "json"], default="text", dest="format")
    _add_catalog_flags(rules)

    render = sub.add_parser(
        "render", help="re-render an existing JSON report")
    render.add_argument("--json", required=True, metavar="FILE",
                        dest="report_json", help="report.json to re-render")
    render.add_argument(
        "--format", action="append", choices=["html", "text"],
        dest="formats", metavar="FMT",
        help="output format, repeatable (default: html)")
    render.add_argument("--out", metavar="DIR",
                        help="directory for rendered files")
    return parser


def _load_selected_catalog(args: argparse.Namespace) -> Catalog:
    if args.rules:
        if args.profile != "paper":
            raise _UsageError(
                "--profile applies to the built-in catalog; it cannot be "
                "combined with --rules")
        try:
            text = Path(args.rules).read_text(encoding="utf-8")
        except OSError as exc:
            raise _UsageError(f"cannot read rules file: {exc}") from exc
        return load_catalog(text)
    return builtin_catalog(args.profile)


def _decompiler_spec(args: argparse.Namespace) -> DecompilerSpec | None:
    template = args.decompiler or os.environ.get(DECOMPILER_ENV_VAR)
    if not template:
        return None
    try:
        return DecompilerSpec(template, args.timeout)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _write_reports(bundle, formats: list[str], out: str | None) -> None:
    file_formats = [f for f in formats if f in ("json", "html")]
    if file_formats:
        out_dir = Path(out or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        if "json" in file_formats:
            (out_dir / "report.json").write_bytes(render_json(bundle))
        if "html" in file_formats:
            (out_dir / "report.html").write_bytes(render_html(bundle))
    if "text" in formats:
        sys.stdout.write(render_text(bundle))


def _cmd_scan(args: argparse.Namespace) -> int:
    catalog = _load_selected_catalog(args)
    formats = args.formats or ["text"]
    target = args.target
    if target.endswith(".apk"):
        spec = _decompiler_spec(args)
        if spec is None:
            raise _UsageError(
                f"scanning an APK needs --decompiler or ${DECOMPILER_ENV_VAR}")
        app_id = Path(target).stem
        with tempfile.TemporaryDirectory(prefix="hipaachecker-") as workdir:
            tree = extract_apk(target, workdir, spec)
            scan = scan_tree(tree, catalog, workers=args.workers)
    else:
        app_id = Path(target).name or Path(target).resolve().name
        tree = open_source_tree(target)
        scan = scan_tree(tree, catalog, workers=args.workers)
    verdict = evaluate(scan, catalog, app_id)
    bundle = make_bundle(
        verdict, scan, scanned_root=target,
        source_access=tree_source_access(tree),
        deterministic=args.deterministic)
    _write_reports(bundle, formats, args.out)
    return exit_code(verdict)


def _cmd_batch(args: argparse.Namespace) -> int:
    catalog = _load_selected_catalog(args)
    try:
        manifest_text = Path(args.manifest).read_text(encoding="utf-8")
    except OSError as exc:
        raise _UsageError(f"cannot read manifest: {exc}") from exc
    entries = load_manifest(manifest_text)
    spec = _decompiler_spec(args)
    try:
        result = run_batch(
            entries, catalog, args.out, decompiler=spec,
            deterministic=args.deterministic, workers=args.workers)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    for app_id, message in result.failures:
        print(f"failed: {app_id}: {message}", file=sys.stderr)
    if not result.verdicts:
        print("no app scanned successfully", file=sys.stderr)
        return EXIT_INGESTION
    stats = compute_stats(list(result.verdicts), list(result.records), entries)
    stats_path = Path(args.stats) if args.stats else Path(args.out) / "stats.csv"
    stats_path.parent.mkdir(parents=True, exist_ok=True)
    stats_path.write_bytes(stats_to_csv(stats))
    print(f"scanned {stats.app_count}/{len(entries)} apps, "
          f"stats written to {stats_path}")
    return 0


def _cmd_rules(args: argparse.Namespace) -> int:
    catalog = _load_selected_catalog(args)
    counts = catalog_counts(catalog)
    if args.format == "json":
        doc = {
            "safeguards": counts["safeguards"],
            "checkable_rules": counts["checkable_rules"],
            "sub_rules": counts["sub_rules"],
            "patterns": counts["patterns"],
            "catalog_checksum": catalog.checksum,
            "rules": [
                {
                    "rule_id": rule.rule_id,
                    "cfr_reference": rule.safeguard.cfr_reference,
                    "safeguard_name": rule.safeguard.safeguard_name,
                    "checkable": rule.checkable,
                    "sub_rules": [
                        {
                            "sub_rule_id": sub.sub_rule_id,
                            "mode": sub.mode,
                            "polarity": sub.polarity,
                            "patterns": list(sub.patterns),
                        }
                        for sub in rule.sub_rules
                    ],
                }
                for rule in catalog.rules
            ],
        }
        print(json.dumps(doc, indent=2, ensure_ascii=False))
    else:
        for rule in catalog.rules:
            mark = "checkable" if rule.checkable else "not checkable"
            print(f"{rule.safeguard.cfr_reference:<20} {rule.rule_id:<32} "
                  f"{len(rule.sub_rules):>2} sub-rule(s)  {mark}")
        print(f"{counts['safeguards']} safeguards, "
              f"{counts['checkable_rules']} checkable rules, "
              f"{counts['sub_rules']} sub-rules, "
              f"{counts['patterns']} patterns")
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    try:
        data = json.loads(Path(args.report_json).read_text(encoding="utf-8"))
    except OSError as exc:
        raise _UsageError(f"cannot read report: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _UsageError(f"not a JSON report: {exc}") from exc
    try:
        bundle = bundle_from_json(data)
    except (KeyError, TypeError) as exc:
        raise _UsageError(f"unexpected report shape: {exc}") from exc
    formats = args.formats or ["html"]
    _write_reports(bundle, formats, args.out)
    return 0


def run(argv: list[str] | None = None) -> int:
    """Parse arguments and dispatch; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "scan": _cmd_scan,
        "batch": _cmd_batch,
        "rules": _cmd_rules,
        "render": _cmd_render,
    }
    try:
        return handlers[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (CatalogError, PatternError, ManifestError,
            ChecksumMismatchError, EmptyCorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestionError, WorkdirUnwritableError, NotADirectoryError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGESTION


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
