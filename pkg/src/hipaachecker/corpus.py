"""Batch scanning of an app corpus and aggregate statistics.

The manifest is CSV with the exact header ``app_id,category,kind,path``.
Every app gets a JSON and an HTML report under the work directory; failures
are collected without stopping the batch. Statistics are percentages over
the successfully scanned apps: prevalence (apps satisfying a rule), match
share (fraction of all match records attributed to a rule), and prevalence
split by store category.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .catalog import Catalog
from .errors import (
    BadHeaderError,
    BadRowError,
    DuplicateAppIdError,
    EmptyCorpusError,
    HipaaCheckerError,
    WorkdirUnwritableError,
)
from .ingestion import DecompilerSpec, extract_apk, open_source_tree
from .reporting import make_bundle, render_html, render_json, tree_source_access
from .scanner import MatchRecord, scan_tree
from .verdicts import NOT_CHECKABLE, SATISFIED, AppVerdict, evaluate

CATEGORIES = ("medical", "health_fitness", "other")
KINDS = ("source", "apk")
MANIFEST_HEADER = ("app_id", "category", "kind", "path")


@dataclass(frozen=True)
class AppEntry:
    app_id: str
    category: str
    kind: str
    path: str


@dataclass(frozen=True)
class BatchResult:
    verdicts: tuple[AppVerdict, ...]
    records: tuple[MatchRecord, ...]
    failures: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class CorpusStats:
    """Aggregates over one batch. Percentage values are unrounded; rounding
    to one decimal happens only when writing CSV. Rules that cannot be
    checked carry None prevalence."""

    per_rule_prevalence: dict[str, float | None]
    match_share: dict[str, float]
    per_category_prevalence: dict[tuple[str, str], float | None]
    app_count: int
    failed_apps: tuple[str, ...]
    rule_order: tuple[str, ...]
    categories: tuple[str, ...]


def load_manifest(csv_text: str) -> list[AppEntry]:
    """Parse manifest CSV. Unknown categories fold into ``other``.

    Raises BadHeaderError, BadRowError (with the 1-based file row number),
    or DuplicateAppIdError.
    """
    reader = csv.reader(io.StringIO(csv_text))
    rows = list(reader)
    if not rows or tuple(rows[0]) != MANIFEST_HEADER:
        raise BadHeaderError(
            f"manifest header must be {','.join(MANIFEST_HEADER)}")
    entries: list[AppEntry] = []
    seen: set[str] = set()
    for row_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(MANIFEST_HEADER):
            raise BadRowError(
                f"expected {len(MANIFEST_HEADER)} fields, got {len(row)}",
                row_no)
        app_id, category, kind, path = (field.strip() for field in row)
        if not app_id:
            raise BadRowError("empty app_id", row_no)
        if kind not in KINDS:
            raise BadRowError(f"unknown kind {kind!r}", row_no)
        if not path:
            raise BadRowError("empty path", row_no)
        if app_id in seen:
            raise DuplicateAppIdError(f"duplicate app_id {app_id!r}")
        seen.add(app_id)
        if category not in CATEGORIES:
            category = "other"
        entries.append(AppEntry(app_id, category, kind, path))
    return entries


def run_batch(
    entries: list[AppEntry],
    catalog: Catalog,
    workdir: str | os.PathLike[str],
    decompiler: DecompilerSpec | None = None,
    deterministic: bool = False,
    workers: int | None = None,
) -> BatchResult:
    """Scan every app in ``entries``, writing per-app reports to
    ``workdir/<app_id>/report.json`` and ``report.html``.

    A failing app is recorded and the batch moves on; an unusable work
    directory aborts with WorkdirUnwritableError. A decompiler spec is
    required when any entry is an APK.
    """
    workdir = Path(workdir)
    try:
        workdir.mkdir(parents=True, exist_ok=True)
        probe = workdir / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise WorkdirUnwritableError(f"{workdir}: {exc}") from exc
    if decompiler is None and any(e.kind == "apk" for e in entries):
        raise ValueError("a decompiler spec is required for apk entries")

    verdicts: list[AppVerdict] = []
    records: list[MatchRecord] = []
    failures: list[tuple[str, str]] = []
    for entry in entries:
        app_dir = workdir / entry.app_id
        try:
            app_dir.mkdir(parents=True, exist_ok=True)
            if entry.kind == "apk":
                assert decompiler is not None
                tree = extract_apk(
                    entry.path, app_dir / "extracted", decompiler)
            else:
                tree = open_source_tree(entry.path)
            scan = scan_tree(tree, catalog, workers=workers)
            verdict = evaluate(scan, catalog, entry.app_id)
            bundle = make_bundle(
                verdict, scan, scanned_root=entry.path,
                source_access=tree_source_access(tree),
                deterministic=deterministic)
            (app_dir / "report.json").write_bytes(render_json(bundle))
            (app_dir / "report.html").write_bytes(render_html(bundle))
        except (HipaaCheckerError, OSError) as exc:
            failures.append((entry.app_id, str(exc)))
            continue
        verdicts.append(verdict)
        records.extend(scan.records)
    return BatchResult(tuple(verdicts), tuple(records), tuple(failures))


def compute_stats(
    verdicts: list[AppVerdict] | tuple[AppVerdict, ...],
    all_records: list[MatchRecord] | tuple[MatchRecord, ...],
    entries: list[AppEntry],
) -> CorpusStats:
    """Aggregate verdicts into corpus percentages.

    All verdicts must come from the same catalog. Raises EmptyCorpusError
    when nothing was scanned. Denominators count successfully scanned apps
    only; category rows exist only for categories with at least one scanned
    app.
    """
    if not verdicts:
        raise EmptyCorpusError("no app was scanned")
    rule_order = tuple(r.rule_id for r in verdicts[0].rules)
    checkable = {
        r.rule_id for r in verdicts[0].rules if r.status != NOT_CHECKABLE}
    total = len(verdicts)

    satisfied_counts: dict[str, int] = {r: 0 for r in rule_order}
    for verdict in verdicts:
        for rule in verdict.rules:
            if rule.status == SATISFIED:
                satisfied_counts[rule.rule_id] += 1
    prevalence: dict[str, float | None] = {
        rule_id: (100.0 * satisfied_counts[rule_id] / total
                  if rule_id in checkable else None)
        for rule_id in rule_order
    }

    record_counts: dict[str, int] = {r: 0 for r in rule_order}
    for record in all_records:
        if record.rule_id in record_counts:
            record_counts[record.rule_id] += 1
    total_records = sum(record_counts.values())
    match_share: dict[str, float] = {
        rule_id: (100.0 * record_counts[rule_id] / total_records
                  if total_records else 0.0)
        for rule_id in rule_order
    }

    category_of = {e.app_id: e.category for e in entries}
    scanned_by_category: dict[str, list[AppVerdict]] = {}
    for verdict in verdicts:
        category = category_of.get(verdict.app_id, "other")
        scanned_by_category.setdefault(category, []).append(verdict)
    per_category: dict[tuple[str, str], float | None] = {}
    categories = tuple(sorted(scanned_by_category))
    for category in categories:
        group = scanned_by_category[category]
        for rule_id in rule_order:
            if rule_id not in checkable:
                per_category[(category, rule_id)] = None
                continue
            count = sum(
                1 for v in group for r in v.rules
                if r.rule_id == rule_id and r.status == SATISFIED)
            per_category[(category, rule_id)] = 100.0 * count / len(group)

    scanned_ids = {v.app_id for v in verdicts}
    failed = tuple(
        e.app_id for e in entries if e.app_id not in scanned_ids)
    return CorpusStats(
        per_rule_prevalence=prevalence,
        match_share=match_share,
        per_category_prevalence=per_category,
        app_count=total,
        failed_apps=failed,
        rule_order=rule_order,
        categories=categories,
    )


def format_percentage(value: float | None) -> str:
    """One decimal place, halves rounding up. None renders empty."""
    if value is None:
        return ""
    return str(Decimal(repr(value)).quantize(
        Decimal("0.1"), rounding=ROUND_HALF_UP))


def stats_to_csv(stats: CorpusStats) -> bytes:
    """Rows sorted by (metric, category, catalog rule order)."""
    ordinal = {rule_id: i for i, rule_id in enumerate(stats.rule_order)}
    rows: list[tuple[str, str, str, float | None]] = []
    for category in stats.categories:
        for rule_id in stats.rule_order:
            rows.append(("category_prevalence", category, rule_id,
                         stats.per_category_prevalence[(category, rule_id)]))
    for rule_id in stats.rule_order:
        rows.append(("match_share", "", rule_id, stats.match_share[rule_id]))
    for rule_id in stats.rule_order:
        rows.append(("prevalence", "", rule_id,
                     stats.per_rule_prevalence[rule_id]))
    rows.sort(key=lambda row: (row[0], row[1], ordinal[row[2]]))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["metric", "category", "rule_id", "value"])
    for metric, category, rule_id, value in rows:
        writer.writerow([metric, category, rule_id, format_percentage(value)])
    return buffer.getvalue().encode("utf-8")
