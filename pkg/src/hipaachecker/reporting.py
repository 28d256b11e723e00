"""Report rendering: machine-readable JSON, a self-contained HTML page, and
a terminal summary. All three are derived from one ReportBundle."""

from __future__ import annotations

import html
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Sequence

from . import __version__
from .catalog import SafeguardRef, safeguard_for_reference
from .ingestion import SourceTree
from .scanner import MatchRecord, ScanResult
from .verdicts import (
    NOT_CHECKABLE,
    SATISFIED,
    UNSATISFIED,
    AppVerdict,
    RuleStatus,
    SubRuleStatus,
)

EPOCH_TIMESTAMP = "1970-01-01T00:00:00Z"
CONTEXT_LINES = 2

# General guidance for app users, shown in the HTML footer whenever a rule
# is unsatisfied.
USER_GUIDANCE = (
    "Check the application's review and privacy policy.",
    "Take advantage of tools to confirm HIPAA compliance before disclosing "
    "personal health information.",
    "Examine and criticize apps, To inform others and assist researchers "
    "and developers in effectively rebuilding the app.",
)

# (file, 1-based line) -> up to five (line_no, text) pairs centred on the
# line, or None when the file cannot be read back.
SourceAccess = Callable[[str, int], "list[tuple[int, str]] | None"]


@dataclass(frozen=True)
class ReportMetadata:
    tool_version: str
    timestamp: str
    scanned_root: str
    deterministic: bool


@dataclass(frozen=True)
class ReportBundle:
    verdict: AppVerdict
    records: tuple[MatchRecord, ...]
    files_scanned: int
    lines_scanned: int
    catalog_checksum: str
    metadata: ReportMetadata
    source_access: SourceAccess | None = None


def tree_source_access(tree: SourceTree) -> SourceAccess:
    """Context callback backed by an in-memory source tree."""
    lines_by_file = {f.relative_path: f.lines for f in tree.files}

    def access(file: str, line: int) -> list[tuple[int, str]] | None:
        lines = lines_by_file.get(file)
        if lines is None or not 1 <= line <= len(lines):
            return None
        lo = max(1, line - CONTEXT_LINES)
        hi = min(len(lines), line + CONTEXT_LINES)
        return [(no, lines[no - 1]) for no in range(lo, hi + 1)]

    return access


def make_bundle(
    verdict: AppVerdict,
    scan: ScanResult,
    scanned_root: str,
    source_access: SourceAccess | None = None,
    deterministic: bool = False,
) -> ReportBundle:
    if deterministic:
        timestamp = EPOCH_TIMESTAMP
    else:
        timestamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return ReportBundle(
        verdict=verdict,
        records=scan.records,
        files_scanned=scan.files_scanned,
        lines_scanned=scan.lines_scanned,
        catalog_checksum=scan.catalog_checksum,
        metadata=ReportMetadata(
            __version__, timestamp, scanned_root, deterministic),
        source_access=source_access,
    )


def _match_obj(record: MatchRecord) -> dict:
    return {
        "file": record.file,
        "line": record.line_number,
        "column": record.column,
        "pattern": record.pattern_text,
        "snippet": record.snippet,
        "occurrences": record.occurrences,
    }


def _records_by_sub(
    records: Sequence[MatchRecord],
) -> dict[tuple[str, str], list[MatchRecord]]:
    grouped: dict[tuple[str, str], list[MatchRecord]] = {}
    for record in records:
        grouped.setdefault((record.rule_id, record.sub_rule_id), []).append(
            record)
    return grouped


def render_json(bundle: ReportBundle) -> bytes:
    """Serialize the report. Key order is fixed so output is reproducible."""
    verdict = bundle.verdict
    grouped = _records_by_sub(bundle.records)
    rules = []
    for rule in verdict.rules:
        subrules = []
        for sub in rule.sub_statuses:
            matches = grouped.get((rule.rule_id, sub.sub_rule_id), [])
            subrules.append({
                "sub_rule_id": sub.sub_rule_id,
                "status": sub.status,
                "matches": [_match_obj(r) for r in matches],
            })
        rules.append({
            "rule_id": rule.rule_id,
            "cfr_reference": rule.safeguard.cfr_reference,
            "status": rule.status,
            "recommendation": rule.recommendation,
            "subrules": subrules,
        })
    doc = {
        "tool_version": bundle.metadata.tool_version,
        "catalog_checksum": bundle.catalog_checksum,
        "app_id": verdict.app_id,
        "scanned_root": bundle.metadata.scanned_root,
        "timestamp": bundle.metadata.timestamp,
        "files_scanned": bundle.files_scanned,
        "lines_scanned": bundle.lines_scanned,
        "rules": rules,
        "advisory_findings": [
            {"rule_id": r.rule_id, "sub_rule_id": r.sub_rule_id,
             **_match_obj(r)}
            for r in verdict.advisory_findings
        ],
        "summary": {
            "satisfied_count": verdict.satisfied_count,
            "checkable_count": verdict.checkable_count,
        },
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode(
        "utf-8")


def bundle_from_json(data: dict) -> ReportBundle:
    """Rebuild a renderable bundle from parsed render_json output.

    Source context is not recoverable, so HTML re-rendered from JSON shows
    snippets only.
    """
    records: list[MatchRecord] = []
    rule_statuses: list[RuleStatus] = []
    for rule in data["rules"]:
        sub_statuses: list[SubRuleStatus] = []
        for sub in rule["subrules"]:
            sub_records = [
                MatchRecord(
                    file=m["file"], line_number=m["line"], column=m["column"],
                    rule_id=rule["rule_id"], sub_rule_id=sub["sub_rule_id"],
                    pattern_text=m["pattern"], snippet=m["snippet"],
                    occurrences=m["occurrences"])
                for m in sub["matches"]
            ]
            records.extend(sub_records)
            sub_statuses.append(SubRuleStatus(
                sub["sub_rule_id"], sub["status"],
                frozenset(), len(sub_records)))
        safeguard = safeguard_for_reference(rule["cfr_reference"])
        if safeguard is None:
            safeguard = SafeguardRef(rule["cfr_reference"], rule["rule_id"], "")
        rule_statuses.append(RuleStatus(
            rule["rule_id"], safeguard, rule["status"],
            tuple(sub_statuses), rule.get("recommendation")))
    advisory = tuple(
        MatchRecord(
            file=m["file"], line_number=m["line"], column=m["column"],
            rule_id=m["rule_id"], sub_rule_id=m["sub_rule_id"],
            pattern_text=m["pattern"], snippet=m["snippet"],
            occurrences=m["occurrences"])
        for m in data.get("advisory_findings", []))
    verdict = AppVerdict(
        app_id=data["app_id"],
        rules=tuple(rule_statuses),
        satisfied_count=data["summary"]["satisfied_count"],
        checkable_count=data["summary"]["checkable_count"],
        advisory_findings=advisory,
    )
    timestamp = data["timestamp"]
    return ReportBundle(
        verdict=verdict,
        records=tuple(records),
        files_scanned=data["files_scanned"],
        lines_scanned=data["lines_scanned"],
        catalog_checksum=data["catalog_checksum"],
        metadata=ReportMetadata(
            data["tool_version"], timestamp, data["scanned_root"],
            timestamp == EPOCH_TIMESTAMP),
        source_access=None,
    )


_GLYPHS = {SATISFIED: "✓", UNSATISFIED: "✗", NOT_CHECKABLE: "—"}

_HTML_STYLE = """\
body { font-family: sans-serif; margin: 2em auto; max-width: 60em;
       color: #1a1a2e; }
h1 { font-size: 1.4em; }
table.meta td { padding: 0 0.8em 0 0; color: #444; }
section.rule { border: 1px solid #ccc; border-radius: 6px;
               margin: 1em 0; padding: 0.2em 1em; }
section.rule h2 { font-size: 1.05em; }
.glyph-satisfied { color: #1a7f37; }
.glyph-unsatisfied { color: #b42318; }
.glyph-not_checkable { color: #666; }
.recommendation { background: #fff8e1; border-left: 4px solid #e0a800;
                  padding: 0.5em 0.8em; margin: 0.5em 0; }
.subrule { margin: 0.6em 0 0.6em 1em; }
.match { margin: 0.5em 0 0.9em 1em; }
.match .where { font-family: monospace; font-size: 0.9em; color: #333; }
pre.context { background: #f6f8fa; border: 1px solid #ddd; padding: 0.5em;
              overflow-x: auto; margin: 0.3em 0; }
pre.context span.hit { background: #ffe9a8; display: inline-block;
                       width: 100%; }
footer { margin-top: 2em; border-top: 1px solid #ccc; color: #444;
         font-size: 0.9em; }
"""


def _context_block(bundle: ReportBundle, record: MatchRecord) -> str:
    context = None
    if bundle.source_access is not None:
        context = bundle.source_access(record.file, record.line_number)
    if context is None:
        context = [(record.line_number, record.snippet)]
    rows = []
    for no, text in context:
        escaped = html.escape(text) or "&nbsp;"
        prefix = f"{no:>6}  "
        if no == record.line_number:
            rows.append(f'<span class="hit">{prefix}{escaped}</span>')
        else:
            rows.append(f"{prefix}{escaped}")
    return '<pre class="context">' + "\n".join(rows) + "</pre>"


def render_html(bundle: ReportBundle) -> bytes:
    """One self-contained page: a section per rule, a block per match."""
    verdict = bundle.verdict
    meta = bundle.metadata
    grouped = _records_by_sub(bundle.records)
    out: list[str] = []
    out.append("<!DOCTYPE html>")
    out.append('<html lang="en"><head><meta charset="utf-8">')
    out.append(f"<title>Safeguard report: {html.escape(verdict.app_id)}"
               f"</title>")
    out.append(f"<style>{_HTML_STYLE}</style></head><body>")
    out.append(f"<h1>Technical safeguard report: "
               f"{html.escape(verdict.app_id)}</h1>")
    out.append('<table class="meta">')
    for label, value in (
        ("Generated", meta.timestamp),
        ("Tool version", meta.tool_version),
        ("Scanned root", meta.scanned_root),
        ("Catalog checksum", bundle.catalog_checksum),
        ("Files scanned", str(bundle.files_scanned)),
        ("Lines scanned", str(bundle.lines_scanned)),
        ("Satisfied", f"{verdict.satisfied_count}/"
                      f"{verdict.checkable_count} checkable rules"),
    ):
        out.append(f"<tr><td>{html.escape(label)}</td>"
                   f"<td>{html.escape(value)}</td></tr>")
    out.append("</table>")

    anchor = 0
    for rule in verdict.rules:
        glyph = _GLYPHS[rule.status]
        out.append('<section class="rule">')
        out.append(
            f'<h2><span class="glyph-{rule.status}">{glyph}</span> '
            f"{html.escape(rule.safeguard.cfr_reference)} "
            f"{html.escape(rule.rule_id)} "
            f"<small>({html.escape(rule.status.replace('_', ' '))})</small>"
            f"</h2>")
        out.append(f"<p><strong>{html.escape(rule.safeguard.safeguard_name)}"
                   f"</strong> {html.escape(rule.safeguard.description)}</p>")
        if rule.recommendation:
            out.append(f'<div class="recommendation">'
                       f"{html.escape(rule.recommendation)}</div>")
        for sub in rule.sub_statuses:
            matches = grouped.get((rule.rule_id, sub.sub_rule_id), [])
            out.append('<div class="subrule">')
            out.append(f"<strong>{html.escape(sub.sub_rule_id)}</strong> "
                       f"<small>{html.escape(sub.status)}, "
                       f"{len(matches)} match(es)</small>")
            for record in matches:
                anchor += 1
                out.append(f'<div class="match" id="match-{anchor}">')
                out.append(
                    f'<div class="where">{html.escape(record.file)}:'
                    f"{record.line_number}:{record.column} "
                    f"pattern <code>{html.escape(record.pattern_text)}</code>"
                    f" ({record.occurrences}x)</div>")
                out.append(_context_block(bundle, record))
                out.append("</div>")
            out.append("</div>")
        out.append("</section>")

    out.append("<footer>")
    if verdict.satisfied_count < verdict.checkable_count:
        out.append("<p>Guidance for app users:</p><ul>")
        for item in USER_GUIDANCE:
            out.append(f"<li>{html.escape(item)}</li>")
        out.append("</ul>")
    out.append(f"<p>{len(bundle.records)} match(es) in total.</p>")
    out.append("</footer></body></html>")
    return "\n".join(out).encode("utf-8")


def render_text(bundle: ReportBundle) -> str:
    """Terminal summary: one status line per rule plus a closing tally."""
    verdict = bundle.verdict
    tags = {SATISFIED: "PASS", UNSATISFIED: "FAIL", NOT_CHECKABLE: "N/A"}
    lines = [
        f"[{tags[rule.status]}] {rule.safeguard.cfr_reference} {rule.rule_id}"
        for rule in verdict.rules
    ]
    lines.append(
        f"satisfied {verdict.satisfied_count}/{verdict.checkable_count} "
        f"checkable")
    return "\n".join(lines) + "\n"
