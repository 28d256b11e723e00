"""Static checker for HIPAA technical-safeguard evidence in Android apps."""

__version__ = "0.1.0"

from .catalog import (  # noqa: E402,F401
    Catalog,
    SafeguardRef,
    SafeguardRule,
    SubRule,
    builtin_catalog,
    load_catalog,
    serialize_catalog,
    validate_catalog,
)
from .ingestion import (  # noqa: F401
    DecompilerSpec,
    SourceFile,
    SourceTree,
    extract_apk,
    open_source_tree,
)
from .patterns import (  # noqa: F401
    CompiledPattern,
    MatchSpan,
    MultiMatcher,
    build_matcher,
    compile_pattern,
    match_line,
)
from .scanner import MatchRecord, ScanResult, scan_file, scan_tree  # noqa: F401
from .verdicts import AppVerdict, evaluate, exit_code  # noqa: F401
from .reporting import (  # noqa: F401
    ReportBundle,
    make_bundle,
    render_html,
    render_json,
    render_text,
)
from .corpus import (  # noqa: F401
    AppEntry,
    CorpusStats,
    compute_stats,
    load_manifest,
    run_batch,
    stats_to_csv,
)
