"""Exception types shared across the package."""

from __future__ import annotations


class HipaaCheckerError(Exception):
    """Base class for all errors raised by this package."""


# --- rule catalog -----------------------------------------------------------

class CatalogError(HipaaCheckerError):
    pass


class CatalogParseError(CatalogError):
    """Malformed rules-file line. Carries the 1-based line number."""

    def __init__(self, message: str, line_no: int) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateIdError(CatalogError):
    pass


class EmptySubRuleError(CatalogError):
    pass


# --- pattern engine ---------------------------------------------------------

class PatternError(HipaaCheckerError):
    """Raised when a raw pattern cannot be compiled."""

    def __init__(self, message: str, source_text: str, key: tuple | None = None) -> None:
        where = f" (pattern {key!r})" if key is not None else ""
        super().__init__(f"{message}: {source_text!r}{where}")
        self.source_text = source_text
        self.key = key


class EmptyPatternError(PatternError):
    pass


class AdjacentWildcardsError(PatternError):
    pass


class LeadingOrTrailingWildcardError(PatternError):
    pass


# --- ingestion --------------------------------------------------------------

class IngestionError(HipaaCheckerError):
    pass


class NotAnApkError(IngestionError):
    pass


class DecompilerError(IngestionError):
    def __init__(self, message: str, stderr: str = "") -> None:
        super().__init__(message)
        self.stderr = stderr


class DecompilerFailedError(DecompilerError):
    pass


class DecompilerTimeoutError(DecompilerError):
    pass


# --- verdicts ---------------------------------------------------------------

class ChecksumMismatchError(HipaaCheckerError):
    pass


# --- corpus analytics -------------------------------------------------------

class ManifestError(HipaaCheckerError):
    pass


class BadHeaderError(ManifestError):
    pass


class BadRowError(ManifestError):
    """Malformed manifest row. Carries the 1-based row number."""

    def __init__(self, message: str, row_no: int) -> None:
        super().__init__(f"row {row_no}: {message}")
        self.row_no = row_no


class DuplicateAppIdError(ManifestError):
    pass


class EmptyCorpusError(HipaaCheckerError):
    pass


class WorkdirUnwritableError(HipaaCheckerError):
    pass
