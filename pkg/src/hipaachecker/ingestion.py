"""Turns a source directory or an APK into a scannable tree of text lines.

Enumeration is deterministic: files are collected recursively, hidden
directories are pruned, and the result is sorted by relative path bytes.
APK handling is two-step: unzip the container, then hand the file to an
external decompiler subprocess and scan whatever it emits.
"""

from __future__ import annotations

import os
import subprocess
import zipfile
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    DecompilerFailedError,
    DecompilerTimeoutError,
    NotAnApkError,
)

DEFAULT_EXTENSIONS = frozenset(
    {".java", ".kt", ".xml", ".gradle", ".kts", ".properties"})
MAX_FILE_BYTES = 20 * 1024 * 1024
_BINARY_SNIFF_BYTES = 4096
DEFAULT_DECOMPILER_TIMEOUT = 300.0


@dataclass(frozen=True)
class SourceFile:
    """One decoded text file. ``lines`` carry no terminators; numbering
    starts at 1. ``decode_lossy`` marks files that were not valid UTF-8."""

    relative_path: str
    lines: tuple[str, ...]
    decode_lossy: bool = False


@dataclass(frozen=True)
class SourceTree:
    root: Path
    files: tuple[SourceFile, ...]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class DecompilerSpec:
    """External decompiler invocation.

    ``command_template`` must contain the placeholders ``{apk}`` and
    ``{out}`` exactly once each; after substitution it is split on
    whitespace, so the paths involved must not contain spaces.
    """

    command_template: str
    timeout_seconds: float = DEFAULT_DECOMPILER_TIMEOUT

    def __post_init__(self) -> None:
        for placeholder in ("{apk}", "{out}"):
            n = self.command_template.count(placeholder)
            if n != 1:
                raise ValueError(
                    f"command template must contain {placeholder} exactly "
                    f"once, found {n}")
        if self.timeout_seconds <= 0:
            raise ValueError("timeout must be positive")


def split_lines(text: str) -> tuple[str, ...]:
    """Split on LF, CRLF, or CR. A trailing terminator adds no empty line."""
    if not text:
        return ()
    normalized = text.replace("\r\n", "\n").replace("\r", "\n")
    if normalized.endswith("\n"):
        normalized = normalized[:-1]
    return tuple(normalized.split("\n"))


def _decode(data: bytes) -> tuple[tuple[str, ...], bool]:
    try:
        return split_lines(data.decode("utf-8")), False
    except UnicodeDecodeError:
        return split_lines(data.decode("utf-8", errors="replace")), True


def _enumerate(
    root: Path,
    extensions: frozenset[str],
    prefix: str = "",
) -> tuple[list[SourceFile], list[str]]:
    files: list[SourceFile] = []
    warnings: list[str] = []
    resolved_root = root.resolve()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = [d for d in dirnames if not d.startswith(".")]
        for name in filenames:
            path = Path(dirpath) / name
            if os.path.splitext(name)[1] not in extensions:
                continue
            rel = prefix + path.relative_to(root).as_posix()
            if path.is_symlink():
                target = path.resolve()
                if resolved_root not in target.parents:
                    warnings.append(
                        f"{rel}: symlink escapes the tree root, skipped")
                    continue
            try:
                size = path.stat().st_size
                if size > MAX_FILE_BYTES:
                    warnings.append(
                        f"{rel}: {size} bytes exceeds the "
                        f"{MAX_FILE_BYTES // (1024 * 1024)} MB limit, skipped")
                    continue
                data = path.read_bytes()
            except OSError as exc:
                warnings.append(f"{rel}: read failed ({exc}), skipped")
                continue
            if b"\x00" in data[:_BINARY_SNIFF_BYTES]:
                continue
            lines, lossy = _decode(data)
            files.append(SourceFile(rel, lines, lossy))
    return files, warnings


def _sorted_tree(
    root: Path, files: list[SourceFile], warnings: list[str],
) -> SourceTree:
    files.sort(key=lambda f: f.relative_path.encode("utf-8"))
    return SourceTree(root, tuple(files), tuple(warnings))


def open_source_tree(
    root: str | os.PathLike[str],
    extensions: frozenset[str] | set[str] = DEFAULT_EXTENSIONS,
) -> SourceTree:
    """Enumerate and decode the matching files under ``root``.

    Hidden directories are pruned; symlinks resolving outside the root and
    unreadable, oversized, or binary files are skipped (the first three with
    a warning). Raises NotADirectoryError when root is not a directory.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"not a directory: {root}")
    files, warnings = _enumerate(root, frozenset(extensions))
    return _sorted_tree(root, files, warnings)


def extract_apk(
    apk: str | os.PathLike[str],
    workdir: str | os.PathLike[str],
    spec: DecompilerSpec,
) -> SourceTree:
    """Unpack ``apk`` and decompile it into ``workdir``; return the tree.

    The container is unzipped to ``workdir/unpacked`` and the decompiler is
    pointed at ``workdir/decompiled``; its output is what gets scanned. When
    the decompiler emits no XML at all, readable XML resources from the
    unpacked container are folded in so manifest checks still see them.
    Decompiler stdout and stderr land in ``workdir/decompiler.log``.
    """
    apk = Path(apk)
    workdir = Path(workdir)
    data = apk.read_bytes() if apk.is_file() else None
    if data is None or data[:2] != b"PK":
        raise NotAnApkError(f"{apk}: not a ZIP container")
    warnings: list[str] = []
    unpacked = workdir / "unpacked"
    unpacked.mkdir(parents=True, exist_ok=True)
    try:
        with zipfile.ZipFile(apk) as zf:
            if "classes.dex" not in zf.namelist():
                warnings.append(f"{apk.name}: no classes.dex entry")
            zf.extractall(unpacked)
    except zipfile.BadZipFile as exc:
        raise NotAnApkError(f"{apk}: {exc}") from exc

    decompiled = workdir / "decompiled"
    decompiled.mkdir(parents=True, exist_ok=True)
    command = (spec.command_template
               .replace("{apk}", str(apk))
               .replace("{out}", str(decompiled))
               .split())
    log_path = workdir / "decompiler.log"
    try:
        proc = subprocess.run(
            command, capture_output=True, timeout=spec.timeout_seconds)
    except subprocess.TimeoutExpired as exc:
        _write_log(log_path, exc.stdout or b"", exc.stderr or b"")
        raise DecompilerTimeoutError(
            f"decompiler exceeded {spec.timeout_seconds}s") from exc
    except OSError as exc:
        _write_log(log_path, b"", str(exc).encode())
        raise DecompilerFailedError(
            f"decompiler could not be started: {exc}") from exc
    _write_log(log_path, proc.stdout, proc.stderr)
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", errors="replace")
        raise DecompilerFailedError(
            f"decompiler exited with status {proc.returncode}: "
            f"{stderr.strip()}", stderr=stderr)

    files, enum_warnings = _enumerate(
        decompiled, DEFAULT_EXTENSIONS, prefix="decompiled/")
    warnings.extend(enum_warnings)
    if not any(f.relative_path.endswith(".xml") for f in files):
        xml_files, xml_warnings = _enumerate(
            unpacked, frozenset({".xml"}), prefix="unpacked/")
        files.extend(xml_files)
        warnings.extend(xml_warnings)
    return _sorted_tree(workdir, files, warnings)


def _write_log(path: Path, stdout: bytes, stderr: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(b"--- stdout ---\n")
        fh.write(stdout)
        fh.write(b"\n--- stderr ---\n")
        fh.write(stderr)
        fh.write(b"\n")
