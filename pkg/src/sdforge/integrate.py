"""Multi-source record integration.

Covers the whole curation funnel: pull identifier sets out of each
source, intersect them, audit hashed short identifiers against their
full forms for collisions, and extract the selected records either via
the byte-offset index (sorted seeks) or via the brute-force scan kept
as a correctness and performance baseline.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import BinaryIO

from .errors import ExtractionError, MalformedRecordError
from .index import OffsetIndex
from .sdf import extract_tag_value, read_blocks, tag_pattern

log = logging.getLogger(__name__)


@dataclass
class IdentifierSet:
    source_name: str
    identifiers: set[str]
    scanned: int = 0
    missing: int = 0


@dataclass(frozen=True)
class CollisionFinding:
    """One short key shared by two or more distinct full identifiers."""

    short_key: str
    distinct_full_ids: tuple[str, ...]
    locations: tuple[tuple[str, int], ...]


@dataclass
class ExtractionPlan:
    """Per-file (offset, length, identifier) work lists, offset-sorted."""

    file_table: list[str]
    per_file: dict[int, list[tuple[int, int, str]]]

    def planned_identifiers(self) -> set[str]:
        return {ident for rows in self.per_file.values() for _, _, ident in rows}


@dataclass
class ExtractionReport:
    extracted: int = 0
    verification_failures: list[str] = field(default_factory=list)
    bytes_written: int = 0


def extract_identifiers(
    paths: list[str | os.PathLike[str]],
    key_tag: str,
    source_name: str = "",
) -> IdentifierSet:
    """Collect the set of ``key_tag`` values across files (duplicates collapse).

    Identifiers are compared after trimming trailing whitespace only.
    Records missing the key, carrying an empty value, or malformed are
    counted as missing.
    """
    pattern = tag_pattern(key_tag)
    result = IdentifierSet(source_name or str(paths[0] if paths else ""), set())
    for path in paths:
        with open(path, "rb") as stream:
            for offset, _length, block in read_blocks(stream):
                result.scanned += 1
                try:
                    value = extract_tag_value(block, pattern)
                except MalformedRecordError as exc:
                    result.missing += 1
                    log.warning("%s: block at byte %d: %s", path, offset, exc)
                    continue
                if not value:
                    result.missing += 1
                else:
                    result.identifiers.add(value)
    return result


def intersect(sets: list[IdentifierSet], min_sources: int | None = None) -> set[str]:
    """Identifiers present in at least ``min_sources`` sets (default: all)."""
    if len(sets) < 2:
        raise ValueError("intersection needs at least 2 identifier sets")
    if min_sources is None:
        min_sources = len(sets)
    if not 1 <= min_sources <= len(sets):
        raise ValueError(f"min_sources must be in 1..{len(sets)}")
    counts: dict[str, int] = {}
    for s in sets:
        for ident in s.identifiers:
            counts[ident] = counts.get(ident, 0) + 1
    return {ident for ident, c in counts.items() if c >= min_sources}


def audit_collisions(
    paths: list[str | os.PathLike[str]],
    short_tag: str,
    full_tag: str,
) -> tuple[list[CollisionFinding], int]:
    """Find short keys mapped to >= 2 distinct full identifiers.

    Returns (findings, records_missing_either_tag).  An empty findings
    list means the scanned corpus is collision-free.  Records missing a
    tag are counted, never treated as collisions.
    """
    short_pat = tag_pattern(short_tag)
    full_pat = tag_pattern(full_tag)
    groups: dict[str, dict[str, tuple[str, int]]] = {}
    missing = 0
    for path in paths:
        with open(path, "rb") as stream:
            for offset, _length, block in read_blocks(stream):
                try:
                    short = extract_tag_value(block, short_pat)
                    full = extract_tag_value(block, full_pat)
                except MalformedRecordError:
                    missing += 1
                    continue
                if not short or not full:
                    missing += 1
                    continue
                groups.setdefault(short, {}).setdefault(full, (str(path), offset))
    findings = [
        CollisionFinding(
            short_key=short,
            distinct_full_ids=tuple(fulls.keys()),
            locations=tuple(fulls.values()),
        )
        for short, fulls in groups.items()
        if len(fulls) >= 2
    ]
    findings.sort(key=lambda f: f.short_key)
    return findings, missing


def plan_extraction(
    index: OffsetIndex,
    targets: set[str],
) -> tuple[ExtractionPlan, list[str]]:
    """Group targets by source file and sort each file's list by offset.

    The plan covers exactly ``targets`` intersected with the index keys;
    everything else lands in the missing list.
    """
    per_file: dict[int, list[tuple[int, int, str]]] = {}
    missing: list[str] = []
    for ident in targets:
        entry = index.entries.get(ident)
        if entry is None:
            missing.append(ident)
        else:
            per_file.setdefault(entry.file_id, []).append(
                (entry.offset, entry.length, entry.identifier)
            )
    for rows in per_file.values():
        rows.sort()
    missing.sort()
    return ExtractionPlan(file_table=list(index.file_table), per_file=per_file), missing


def extract_records(
    plan: ExtractionPlan,
    sink: BinaryIO,
    verify_tag: str | None = None,
    seek_log: dict[int, list[int]] | None = None,
) -> ExtractionReport:
    """Copy planned records byte-identically from their sources.

    Files are visited in file-id order, and within a file reads follow
    ascending offsets, so disk access is a single forward sweep per file.
    When ``verify_tag`` is given, each extracted block's tag value must
    equal the planned identifier; mismatches (stale index, collision)
    are reported and the record excluded.  ``seek_log``, when supplied,
    collects the read offsets per file id for instrumentation.
    """
    report = ExtractionReport()
    pattern = tag_pattern(verify_tag) if verify_tag else None
    for file_id in sorted(plan.per_file):
        path = plan.file_table[file_id]
        rows = plan.per_file[file_id]
        try:
            stream = open(path, "rb")
        except OSError as exc:
            raise ExtractionError(f"cannot open {path}: {exc}") from exc
        with stream:
            for offset, length, ident in rows:
                if seek_log is not None:
                    seek_log.setdefault(file_id, []).append(offset)
                try:
                    stream.seek(offset)
                    block = stream.read(length)
                except OSError as exc:
                    raise ExtractionError(f"read failed at {path}:{offset}: {exc}") from exc
                if len(block) != length:
                    report.verification_failures.append(ident)
                    log.warning("%s: short read at byte %d for %r", path, offset, ident)
                    continue
                if pattern is not None:
                    try:
                        value = extract_tag_value(block, pattern)
                    except MalformedRecordError:
                        value = None
                    if value != ident:
                        report.verification_failures.append(ident)
                        log.warning(
                            "%s: verification failed at byte %d: expected %r got %r",
                            path,
                            offset,
                            ident,
                            value,
                        )
                        continue
                sink.write(block)
                report.extracted += 1
                report.bytes_written += length
    return report


def nested_loop_extract(
    paths: list[str | os.PathLike[str]],
    targets: set[str],
    sink: BinaryIO,
    key_tag: str,
) -> ExtractionReport:
    """Brute-force baseline: scan every block, linear-search the target list.

    Kept deliberately index-free.  Each record's key is compared against
    the remaining targets by list scan, preserving the quadratic
    records-times-targets cost profile the index exists to avoid.  The
    record set produced is identical to the indexed path's.
    """
    report = ExtractionReport()
    pattern = tag_pattern(key_tag)
    remaining = list(targets)
    for path in paths:
        if not remaining:
            break
        with open(path, "rb") as stream:
            for _offset, length, block in read_blocks(stream):
                if not remaining:
                    break
                try:
                    value = extract_tag_value(block, pattern)
                except MalformedRecordError:
                    continue
                if value is not None and value in remaining:
                    remaining.remove(value)
                    sink.write(block)
                    report.extracted += 1
                    report.bytes_written += length
    return report
