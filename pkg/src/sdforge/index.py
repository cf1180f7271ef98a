"""Byte-offset index: map record identifiers to exact file locations.

Building the index costs one sequential pass over each source file;
afterwards any record is retrievable with a single seek+read instead of
rescanning multi-gigabyte sources per query.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IndexFormatError, MalformedRecordError
from .sdf import extract_tag_value, read_blocks, tag_pattern

log = logging.getLogger(__name__)

MAGIC = "#sdforge-index v1"


@dataclass(frozen=True)
class IndexEntry:
    identifier: str
    file_id: int
    offset: int
    length: int


@dataclass
class FileStats:
    """Per-file accounting from an index build."""

    bytes_read: int = 0
    blocks: int = 0
    skipped: int = 0


@dataclass
class OffsetIndex:
    file_table: list[str] = field(default_factory=list)
    entries: dict[str, IndexEntry] = field(default_factory=dict)
    duplicate_log: list[str] = field(default_factory=list)
    #: build-time accounting, keyed like file_table; not serialized
    build_stats: dict[str, FileStats] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)


def index_file(
    path: str | os.PathLike[str],
    key_tag: str,
    file_id: int = 0,
) -> tuple[list[IndexEntry], FileStats]:
    """Index one SDF file: one entry per block keyed by ``key_tag``.

    Blocks missing the key (or with an empty value) are counted as
    skipped, as are malformed blocks; neither is dropped silently.
    Offsets/lengths are exactly those produced by the block reader.
    """
    pattern = tag_pattern(key_tag)
    stats = FileStats()
    entries: list[IndexEntry] = []

    def diag(d) -> None:
        stats.bytes_read += d.length
        log.warning("%s: %s at byte %d", path, d.kind, d.offset)

    with open(path, "rb") as stream:
        for offset, length, block in read_blocks(stream, on_diagnostic=diag):
            stats.bytes_read += length
            stats.blocks += 1
            try:
                value = extract_tag_value(block, pattern)
            except MalformedRecordError as exc:
                stats.skipped += 1
                log.warning("%s: skipping block at byte %d: %s", path, offset, exc)
                continue
            if not value:
                stats.skipped += 1
                continue
            entries.append(IndexEntry(value, file_id, offset, length))
    return entries, stats


def build_index(
    paths: list[str | os.PathLike[str]],
    key_tag: str,
    workers: int = 1,
) -> OffsetIndex:
    """Scan every source file exactly once and merge the partial indices.

    Files are indexed in parallel (one worker per file) but merged in
    path order, so the result is identical for any worker count.
    Identifiers seen more than once keep their first occurrence and are
    recorded in ``duplicate_log``.
    """
    unique = [str(p) for p in paths]
    if len(set(unique)) != len(unique):
        raise ValueError("input paths must be distinct")
    index = OffsetIndex(file_table=unique)
    if not unique:
        return index

    if workers <= 1:
        partials = [index_file(p, key_tag, file_id=i) for i, p in enumerate(unique)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(index_file, p, key_tag, i) for i, p in enumerate(unique)
            ]
            partials = [f.result() for f in futures]

    for path, (entries, stats) in zip(unique, partials):
        index.build_stats[path] = stats
        for entry in entries:
            if entry.identifier in index.entries:
                index.duplicate_log.append(entry.identifier)
            else:
                index.entries[entry.identifier] = entry
    return index


def write_index(index: OffsetIndex, path: str | os.PathLike[str]) -> None:
    """Persist to the tab-separated on-disk format (UTF-8, LF).

    Layout: magic line; ``#files<TAB>n``; n file-table lines
    ``f<TAB>id<TAB>path``; then one ``identifier<TAB>file_id<TAB>offset
    <TAB>length`` line per entry.  Tabs separate fields because
    identifiers may legitimately contain commas.
    """
    tmp = Path(path)
    with open(tmp, "w", encoding="utf-8", newline="\n") as out:
        out.write(MAGIC + "\n")
        out.write(f"#files\t{len(index.file_table)}\n")
        for file_id, file_path in enumerate(index.file_table):
            out.write(f"f\t{file_id}\t{file_path}\n")
        for entry in index.entries.values():
            out.write(f"{entry.identifier}\t{entry.file_id}\t{entry.offset}\t{entry.length}\n")


def read_index(path: str | os.PathLike[str]) -> OffsetIndex:
    """Load a persisted index; structurally inverse to :func:`write_index`."""
    with open(path, "r", encoding="utf-8", newline="\n") as stream:
        header = stream.readline().rstrip("\n")
        if header != MAGIC:
            raise IndexFormatError(f"bad magic line {header!r}; expected {MAGIC!r}")
        counts = stream.readline().rstrip("\n").split("\t")
        if len(counts) != 2 or counts[0] != "#files":
            raise IndexFormatError("missing #files header line")
        n_files = int(counts[1])
        file_table: list[str] = []
        for i in range(n_files):
            fields = stream.readline().rstrip("\n").split("\t")
            if len(fields) != 3 or fields[0] != "f" or int(fields[1]) != i:
                raise IndexFormatError(f"truncated or corrupt file table at row {i}")
            file_table.append(fields[2])
        index = OffsetIndex(file_table=file_table)
        for line_no, line in enumerate(stream, start=2 + n_files + 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise IndexFormatError(f"line {line_no}: expected 4 fields, got {len(fields)}")
            identifier, file_id, offset, length = fields
            entry = IndexEntry(identifier, int(file_id), int(offset), int(length))
            if entry.file_id >= n_files:
                raise IndexFormatError(f"line {line_no}: file id {entry.file_id} out of range")
            if identifier in index.entries:
                index.duplicate_log.append(identifier)
            else:
                index.entries[identifier] = entry
    return index


def lookup(index: OffsetIndex, identifiers: list[str]) -> dict[str, IndexEntry | None]:
    """Resolve identifiers against the in-memory index; no file access."""
    get = index.entries.get
    return {ident: get(ident) for ident in identifiers}
