"""Turns scan records into per-rule compliance verdicts.

A sub-rule in mode ``any`` is satisfied by one matching pattern; in mode
``all`` every one of its patterns must match somewhere in the app. A rule is
satisfied when at least one of its evidence sub-rules is satisfied; hits on
advisory sub-rules never satisfy a rule and are surfaced as findings instead.
Rules without sub-rules are reported as not checkable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import Catalog, SafeguardRef
from .errors import ChecksumMismatchError
from .scanner import MatchRecord, ScanResult

SATISFIED = "satisfied"
UNSATISFIED = "unsatisfied"
NOT_CHECKABLE = "not_checkable"


@dataclass(frozen=True)
class SubRuleStatus:
    sub_rule_id: str
    status: str
    matched_patterns: frozenset[int]
    match_count: int


@dataclass(frozen=True)
class RuleStatus:
    rule_id: str
    safeguard: SafeguardRef
    status: str
    sub_statuses: tuple[SubRuleStatus, ...]
    recommendation: str | None


@dataclass(frozen=True)
class AppVerdict:
    app_id: str
    rules: tuple[RuleStatus, ...]
    satisfied_count: int
    checkable_count: int
    advisory_findings: tuple[MatchRecord, ...]


def evaluate(result: ScanResult, catalog: Catalog, app_id: str) -> AppVerdict:
    """Judge one app's scan against the catalog it was produced with.

    Raises ChecksumMismatchError when the scan was made with a different
    catalog. The verdict is a pure function of the set of records: record
    order never affects it.
    """
    if result.catalog_checksum != catalog.checksum:
        raise ChecksumMismatchError(
            f"scan used catalog {result.catalog_checksum[:12]}, "
            f"evaluating against {catalog.checksum[:12]}")

    by_sub: dict[tuple[str, str], list[MatchRecord]] = {}
    for record in result.records:
        by_sub.setdefault((record.rule_id, record.sub_rule_id), []).append(
            record)

    rule_statuses: list[RuleStatus] = []
    advisory: list[MatchRecord] = []
    for rule in catalog.rules:
        if not rule.checkable:
            rule_statuses.append(RuleStatus(
                rule.rule_id, rule.safeguard, NOT_CHECKABLE, (), None))
            continue
        sub_statuses: list[SubRuleStatus] = []
        evidence_satisfied = False
        for sub in rule.sub_rules:
            records = by_sub.get((rule.rule_id, sub.sub_rule_id), [])
            index_of = {text: i for i, text in enumerate(sub.patterns)}
            matched = frozenset(
                index_of[r.pattern_text] for r in records
                if r.pattern_text in index_of)
            if sub.mode == "all":
                ok = matched == frozenset(range(len(sub.patterns)))
            else:
                ok = bool(matched)
            sub_statuses.append(SubRuleStatus(
                sub.sub_rule_id, SATISFIED if ok else UNSATISFIED,
                matched, len(records)))
            if sub.polarity == "advisory":
                advisory.extend(records)
            elif ok:
                evidence_satisfied = True
        status = SATISFIED if evidence_satisfied else UNSATISFIED
        recommendation = None
        if status == UNSATISFIED:
            recommendation = catalog.recommendations.get(rule.rule_id)
        rule_statuses.append(RuleStatus(
            rule.rule_id, rule.safeguard, status,
            tuple(sub_statuses), recommendation))

    advisory.sort(key=lambda r: (
        r.file.encode("utf-8"), r.line_number, r.column,
        r.rule_id, r.sub_rule_id, r.pattern_text))
    return AppVerdict(
        app_id=app_id,
        rules=tuple(rule_statuses),
        satisfied_count=sum(
            1 for s in rule_statuses if s.status == SATISFIED),
        checkable_count=sum(
            1 for s in rule_statuses if s.status != NOT_CHECKABLE),
        advisory_findings=tuple(advisory),
    )


def exit_code(verdict: AppVerdict) -> int:
    """0 when every checkable rule is satisfied, 1 otherwise."""
    return 0 if verdict.satisfied_count == verdict.checkable_count else 1
