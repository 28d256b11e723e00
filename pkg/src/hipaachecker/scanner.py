"""Runs the pattern catalog over a source tree and collects match records."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .catalog import Catalog
from .ingestion import SourceFile, SourceTree
from .patterns import MultiMatcher, build_matcher

SNIPPET_LIMIT = 500


@dataclass(frozen=True)
class MatchRecord:
    """One pattern hit on one line. ``occurrences`` counts every
    non-overlapping span of the pattern on that line; the column is the
    leftmost one."""

    file: str
    line_number: int
    column: int
    rule_id: str
    sub_rule_id: str
    pattern_text: str
    snippet: str
    occurrences: int


@dataclass(frozen=True)
class ScanResult:
    records: tuple[MatchRecord, ...]
    files_scanned: int
    lines_scanned: int
    warnings: tuple[str, ...]
    catalog_checksum: str


def scan_file(source: SourceFile, matcher: MultiMatcher) -> list[MatchRecord]:
    """Match every catalog pattern against every line of one file.

    Records come back ordered by (line_number, catalog pattern order).
    """
    records: list[MatchRecord] = []
    for line_no, pattern, span, occurrences in matcher.scan_lines(source.lines):
        rule_id, sub_rule_id, _ = pattern.key
        line = source.lines[line_no - 1]
        records.append(MatchRecord(
            file=source.relative_path,
            line_number=line_no,
            column=span.start_column,
            rule_id=rule_id,
            sub_rule_id=sub_rule_id,
            pattern_text=pattern.source_text,
            snippet=line[:SNIPPET_LIMIT],
            occurrences=occurrences,
        ))
    return records


def scan_tree(
    tree: SourceTree,
    catalog: Catalog,
    workers: int | None = None,
) -> ScanResult:
    """Scan every file of ``tree`` against ``catalog``.

    The unit of parallelism is the file; per-file results are merged with a
    stable sort on (file, line, catalog pattern order), so the output is
    identical for any worker count.
    """
    matcher = build_matcher(catalog)
    if workers is not None and workers < 1:
        raise ValueError("workers must be at least 1")
    if workers == 1 or len(tree.files) <= 1:
        per_file = [scan_file(f, matcher) for f in tree.files]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_file = list(pool.map(lambda f: scan_file(f, matcher),
                                     tree.files))
    ordinal_of = {
        (p.key[0], p.key[1], p.source_text): i
        for i, p in enumerate(matcher.patterns)
    }
    records = [r for batch in per_file for r in batch]
    records.sort(key=lambda r: (
        r.file.encode("utf-8"),
        r.line_number,
        ordinal_of[(r.rule_id, r.sub_rule_id, r.pattern_text)],
    ))
    return ScanResult(
        records=tuple(records),
        files_scanned=len(tree.files),
        lines_scanned=sum(len(f.lines) for f in tree.files),
        warnings=tree.warnings,
        catalog_checksum=catalog.checksum,
    )
