"""Restricted wildcard pattern engine.

Patterns are literal strings with two gap tokens: ``.*`` accepts any run of
characters and ``\\s*`` accepts a run of spaces and tabs. Both gaps may be
empty and neither crosses a line boundary. Everything else in a pattern,
quotes and parentheses included, matches itself exactly and case-sensitively.

A compiled pattern is a sequence of literal segments joined by gaps. Matching
is leftmost: the reported span is the earliest-starting one, and within that
start every later segment sits at its earliest feasible position.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Sequence

from .errors import (
    AdjacentWildcardsError,
    EmptyPatternError,
    LeadingOrTrailingWildcardError,
)

if TYPE_CHECKING:
    from .catalog import Catalog

ANY_CHARS = "any_chars"
ANY_WHITESPACE = "any_whitespace"

# (rule_id, sub_rule_id, index of the pattern within its sub-rule)
PatternKey = tuple[str, str, int]

_WS_TOKEN = "\\s*"
_ANY_TOKEN = ".*"


@dataclass(frozen=True)
class MatchSpan:
    """1-based inclusive column range of a match within a line."""

    start_column: int
    end_column: int


@dataclass(frozen=True)
class CompiledPattern:
    """A parsed pattern: literal segments with a gap between each pair."""

    segments: tuple[str, ...]
    gaps: tuple[str, ...]
    source_text: str
    key: PatternKey

    @cached_property
    def _regex(self) -> re.Pattern[str]:
        parts = [re.escape(self.segments[0])]
        for gap, segment in zip(self.gaps, self.segments[1:]):
            parts.append("[ \t]*?" if gap == ANY_WHITESPACE else ".*?")
            parts.append(re.escape(segment))
        return re.compile("".join(parts))


def compile_pattern(raw: str, key: PatternKey = ("", "", 0)) -> CompiledPattern:
    """Parse ``raw`` into a CompiledPattern.

    Trailing whitespace on ``raw`` is ignored. Raises EmptyPatternError,
    AdjacentWildcardsError, or LeadingOrTrailingWildcardError for patterns
    the language does not admit.
    """
    text = raw.rstrip()
    if not text:
        raise EmptyPatternError("empty pattern", raw, key)

    segments: list[str] = []
    gaps: list[str] = []
    buf: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        if text.startswith(_WS_TOKEN, i):
            gap, i = ANY_WHITESPACE, i + len(_WS_TOKEN)
        elif text.startswith(_ANY_TOKEN, i):
            gap, i = ANY_CHARS, i + len(_ANY_TOKEN)
        else:
            buf.append(text[i])
            i += 1
            continue
        if not buf:
            if not segments:
                raise LeadingOrTrailingWildcardError(
                    "pattern starts with a wildcard", text, key)
            raise AdjacentWildcardsError("adjacent wildcards", text, key)
        segments.append("".join(buf))
        buf.clear()
        gaps.append(gap)
    if not buf:
        # the scan above guarantees at least one gap was seen to get here
        raise LeadingOrTrailingWildcardError(
            "pattern ends with a wildcard", text, key)
    segments.append("".join(buf))
    return CompiledPattern(tuple(segments), tuple(gaps), text, key)


def match_line(pattern: CompiledPattern, line: str) -> MatchSpan | None:
    """Return the leftmost span of ``pattern`` in ``line``, if any.

    ``line`` must not contain line terminators.
    """
    m = pattern._regex.search(line)
    if m is None:
        return None
    return MatchSpan(m.start() + 1, m.end())


def count_occurrences(pattern: CompiledPattern, line: str) -> int:
    """Count non-overlapping spans of ``pattern`` in ``line``, left to right."""
    count = 0
    pos = 0
    while True:
        m = pattern._regex.search(line, pos)
        if m is None:
            return count
        count += 1
        pos = m.end()


@dataclass(frozen=True)
class MultiMatcher:
    """Matches many patterns at once.

    Holds the patterns in catalog order and keeps a first-segment index so a
    line is only handed to a pattern whose opening literal occurs in it. The
    result of scanning is defined entirely by per-pattern match_line calls;
    the index is an accelerator, never a semantic filter.
    """

    patterns: tuple[CompiledPattern, ...]
    _first_segments: tuple[str, ...] = field(init=False, repr=False)
    _ordinals: dict[PatternKey, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        firsts: list[str] = []
        seen: set[str] = set()
        for p in self.patterns:
            fs = p.segments[0]
            if fs not in seen:
                seen.add(fs)
                firsts.append(fs)
        object.__setattr__(self, "_first_segments", tuple(firsts))
        object.__setattr__(
            self, "_ordinals", {p.key: i for i, p in enumerate(self.patterns)})

    def ordinal(self, key: PatternKey) -> int:
        """Position of a pattern in catalog order; used for stable sorting."""
        return self._ordinals[key]

    def scan_line(self, line: str) -> list[tuple[CompiledPattern, MatchSpan]]:
        """All patterns matching ``line``, in catalog order, leftmost spans."""
        present: dict[str, bool] = {}
        hits: list[tuple[CompiledPattern, MatchSpan]] = []
        for p in self.patterns:
            fs = p.segments[0]
            found = present.get(fs)
            if found is None:
                found = fs in line
                present[fs] = found
            if not found:
                continue
            span = match_line(p, line)
            if span is not None:
                hits.append((p, span))
        return hits

    def scan_lines(
        self, lines: Sequence[str],
    ) -> list[tuple[int, CompiledPattern, MatchSpan, int]]:
        """Scan a block of lines; yields (line_no, pattern, span, occurrences).

        Equivalent to calling scan_line per line (a tested invariant), but
        prefilters on the whole block so files free of any opening literal
        cost a handful of substring searches.
        """
        if not lines or not self.patterns:
            return []
        content = "\n".join(lines)
        present = [fs for fs in self._first_segments if fs in content]
        if not present:
            return []
        starts = [0]
        for line in lines:
            starts.append(starts[-1] + len(line) + 1)
        candidates: dict[int, set[str]] = {}
        for fs in present:
            pos = content.find(fs)
            while pos != -1:
                # first segments never contain terminators, so the occurrence
                # lies entirely inside the line it starts on
                idx = bisect_right(starts, pos) - 1
                candidates.setdefault(idx, set()).add(fs)
                pos = content.find(fs, pos + 1)
        out: list[tuple[int, CompiledPattern, MatchSpan, int]] = []
        for idx in sorted(candidates):
            fs_here = candidates[idx]
            line = lines[idx]
            for p in self.patterns:
                if p.segments[0] not in fs_here:
                    continue
                span = match_line(p, line)
                if span is not None:
                    out.append((idx + 1, p, span, count_occurrences(p, line)))
        return out


def build_matcher(catalog: Catalog) -> MultiMatcher:
    """Compile every pattern of ``catalog`` into one MultiMatcher.

    Compilation failures propagate with the (rule, sub-rule, index) key.
    """
    compiled: list[CompiledPattern] = []
    for rule in catalog.rules:
        for sub in rule.sub_rules:
            for i, raw in enumerate(sub.patterns):
                compiled.append(
                    compile_pattern(raw, (rule.rule_id, sub.sub_rule_id, i)))
    return MultiMatcher(tuple(compiled))


def compile_many(raw_patterns: Iterable[str]) -> MultiMatcher:
    """Build a matcher from bare pattern strings (keys are positional)."""
    return MultiMatcher(tuple(
        compile_pattern(raw, ("", "", i)) for i, raw in enumerate(raw_patterns)))
