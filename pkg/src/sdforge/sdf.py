"""Streaming reader/writer for block-delimited structure-data (SDF) files.

An SDF file concatenates molecule records.  Each record is a V2000
connection table (3 header lines, counts line, atom block, bond block,
``M  END``), followed by tagged data sections (``> <TAG>`` header, value
lines, blank line) and a ``$$$$`` terminator line.

Everything here operates on *bytes*.  Offsets produced by
:func:`read_blocks` are exact byte positions in the underlying stream,
which downstream indexing relies on; newline conventions are preserved,
never normalized.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import BinaryIO, Callable, Iterator

from .errors import MalformedRecordError, UnsupportedFormatError

log = logging.getLogger(__name__)

TERMINATOR = b"$$$$"

#: order code used for aromatic bonds in V2000 bond blocks
AROMATIC_ORDER = 4

# old-style charge column codes (counts-line era); code 4 is a radical, not a charge
_CHARGE_CODES = {0: 0, 1: 3, 2: 2, 3: 1, 4: 0, 5: -1, 6: -2, 7: -3}

_VERSION_RE = re.compile(r"V(\d{4})")


@dataclass(frozen=True)
class Atom:
    element: str
    charge: int = 0


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: int


@dataclass(frozen=True)
class MolGraph:
    """Molecular graph: atoms with formal charges, bonds with orders.

    Bond endpoints are 0-based atom indices.  Hydrogens are typically
    implicit; descriptor code derives them from valence rules.
    """

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append(bond.b)
            adj[bond.b].append(bond.a)
        return tuple(tuple(sorted(n)) for n in adj)

    @cached_property
    def incident_bonds(self) -> tuple[tuple[Bond, ...], ...]:
        inc: list[list[Bond]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            inc[bond.a].append(bond)
            inc[bond.b].append(bond)
        return tuple(tuple(b) for b in inc)

    def validate(self) -> None:
        n = len(self.atoms)
        seen: set[tuple[int, int]] = set()
        for bond in self.bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise MalformedRecordError(
                    f"bond ({bond.a}, {bond.b}) references atom outside 0..{n - 1}"
                )
            if bond.a == bond.b:
                raise MalformedRecordError(f"self-bond on atom {bond.a}")
            pair = (min(bond.a, bond.b), max(bond.a, bond.b))
            if pair in seen:
                raise MalformedRecordError(f"duplicate bond between atoms {pair}")
            seen.add(pair)


@dataclass(frozen=True)
class SdfDiagnostic:
    """Non-fatal problem noticed while scanning a stream."""

    kind: str
    offset: int
    length: int
    message: str


@dataclass
class SdfRecord:
    """One molecule block: raw bytes plus the parsed data sections."""

    raw_bytes: bytes
    properties: dict[str, str] = field(default_factory=dict)

    @cached_property
    def graph(self) -> MolGraph:
        return parse_molfile(self.raw_bytes)


def _log_diagnostic(diag: SdfDiagnostic) -> None:
    log.warning("%s at byte %d (%d bytes): %s", diag.kind, diag.offset, diag.length, diag.message)


def read_blocks(
    stream: BinaryIO,
    on_diagnostic: Callable[[SdfDiagnostic], None] | None = None,
) -> Iterator[tuple[int, int, bytes]]:
    """Iterate ``(byte_offset, byte_length, block_bytes)`` over a stream.

    Blocks include their terminator line.  Offsets are exact positions of
    each block's first byte; every input byte is accounted for either in a
    yielded block or in a diagnostic, so concatenating the blocks (plus
    diagnosed tail bytes) reproduces the input.  Memory use is bounded by
    the largest single block.

    A tail without a terminator is reported through ``on_diagnostic``
    (default: a log warning) as ``trailing_data`` when whitespace-only,
    ``unterminated_block`` otherwise.  Neither aborts iteration.
    """
    if on_diagnostic is None:
        on_diagnostic = _log_diagnostic
    offset = 0
    start = 0
    parts: list[bytes] = []
    for line in stream:
        if not parts:
            start = offset
        parts.append(line)
        offset += len(line)
        if line.startswith(TERMINATOR) and line.rstrip(b"\r\n") == TERMINATOR:
            block = b"".join(parts)
            yield start, len(block), block
            parts = []
    if parts:
        tail = b"".join(parts)
        kind = "trailing_data" if not tail.strip() else "unterminated_block"
        on_diagnostic(
            SdfDiagnostic(
                kind=kind,
                offset=start,
                length=len(tail),
                message="stream ended without a block terminator",
            )
        )


def _decode_line(line: bytes) -> str:
    # latin-1 maps bytes 1:1 onto code points; connection tables are ASCII
    return line.decode("latin-1")


def _int_field(text: str, what: str) -> int:
    try:
        return int(text.strip() or "0")
    except ValueError as exc:
        raise MalformedRecordError(f"unparseable {what}: {text!r}") from exc


def parse_molfile(block: bytes) -> MolGraph:
    """Parse the V2000 connection table at the start of a record block.

    Column positions follow the CTfile layout; lines too short for fixed
    columns fall back to whitespace splitting so that hand-written
    fixtures parse too.  ``M  CHG`` lines supersede the atom-block charge
    column: if any appear, all column charges are reset before applying
    them.
    """
    lines = block.split(b"\n")
    if len(lines) < 4:
        raise MalformedRecordError("block too short for a molfile header")
    counts = _decode_line(lines[3]).rstrip("\r")
    match = _VERSION_RE.search(counts)
    if match is None:
        raise MalformedRecordError(f"counts line missing version tag: {counts!r}")
    if match.group(0) != "V2000":
        raise UnsupportedFormatError(f"unsupported connection-table version {match.group(0)}")
    n_atoms = _int_field(counts[0:3], "atom count")
    n_bonds = _int_field(counts[3:6], "bond count")
    if len(lines) < 4 + n_atoms + n_bonds:
        raise MalformedRecordError("counts line promises more atom/bond lines than present")

    elements: list[str] = []
    charges: list[int] = []
    for i in range(n_atoms):
        line = _decode_line(lines[4 + i]).rstrip("\r")
        if len(line) >= 34:
            element = line[31:34].strip()
            code = _int_field(line[36:39], "charge code") if len(line) >= 37 else 0
        else:
            fields = line.split()
            if len(fields) < 4:
                raise MalformedRecordError(f"short atom line: {line!r}")
            element = fields[3]
            code = int(fields[5]) if len(fields) > 5 else 0
        if not element:
            raise MalformedRecordError(f"atom line {i} has no element symbol")
        elements.append(element)
        charges.append(_CHARGE_CODES.get(code, 0))

    raw_bonds: list[tuple[int, int, int]] = []
    for i in range(n_bonds):
        line = _decode_line(lines[4 + n_atoms + i]).rstrip("\r")
        if len(line) >= 9:
            a = _int_field(line[0:3], "bond atom")
            b = _int_field(line[3:6], "bond atom")
            order = _int_field(line[6:9], "bond order")
        else:
            fields = line.split()
            if len(fields) < 3:
                raise MalformedRecordError(f"short bond line: {line!r}")
            a, b, order = int(fields[0]), int(fields[1]), int(fields[2])
        if order not in (1, 2, 3, AROMATIC_ORDER):
            raise MalformedRecordError(f"unsupported bond order {order}")
        raw_bonds.append((a - 1, b - 1, order))

    saw_chg = False
    for raw in lines[4 + n_atoms + n_bonds :]:
        line = _decode_line(raw).rstrip("\r")
        if line.startswith("M  END"):
            break
        if line.startswith("M  CHG"):
            if not saw_chg:
                charges = [0] * n_atoms
                saw_chg = True
            fields = line.split()
            pairs = fields[3:]
            if len(fields) < 3 or int(fields[2]) * 2 != len(pairs):
                raise MalformedRecordError(f"bad charge line: {line!r}")
            for j in range(0, len(pairs), 2):
                idx = int(pairs[j]) - 1
                if not 0 <= idx < n_atoms:
                    raise MalformedRecordError(f"charge line references atom {idx + 1}")
                charges[idx] = int(pairs[j + 1])

    graph = MolGraph(
        atoms=tuple(Atom(e, c) for e, c in zip(elements, charges)),
        bonds=tuple(Bond(a, b, order) for a, b, order in raw_bonds),
    )
    graph.validate()
    return graph


def parse_properties(block: bytes) -> dict[str, str]:
    """Extract the tagged data sections of a record block.

    Returns a tag -> value map in file order.  Values keep internal
    newlines; a blank line, the next ``>`` header, or the terminator ends
    a value.  Duplicate tags are rejected as malformed.
    """
    lines = block.split(b"\n")
    props: dict[str, str] = {}
    i = 0
    n = len(lines)
    while i < n:
        stripped = lines[i].rstrip(b"\r")
        if stripped == b"M  END":
            i += 1
            break
        i += 1
    while i < n:
        stripped = lines[i].rstrip(b"\r")
        if stripped == TERMINATOR:
            break
        if stripped.startswith(b">"):
            header = stripped.decode("utf-8", errors="replace")
            lo = header.find("<")
            hi = header.find(">", lo + 1)
            if lo < 0 or hi < 0 or hi == lo + 1:
                raise MalformedRecordError(f"data header without a tag: {header!r}")
            tag = header[lo + 1 : hi]
            if tag in props:
                raise MalformedRecordError(f"duplicate property tag {tag!r}")
            i += 1
            value_lines: list[str] = []
            while i < n:
                body = lines[i].rstrip(b"\r")
                if body == b"" or body == TERMINATOR or body.startswith(b">"):
                    break
                value_lines.append(body.decode("utf-8", errors="replace"))
                i += 1
            props[tag] = "\n".join(value_lines)
            # skip the single blank line closing the value
            if i < n and lines[i].rstrip(b"\r") == b"":
                i += 1
        else:
            i += 1
    return props


def parse_record(raw: bytes) -> SdfRecord:
    """Build an :class:`SdfRecord` with properties parsed, graph deferred."""
    return SdfRecord(raw_bytes=raw, properties=parse_properties(raw))


def get_property(record: SdfRecord, tag: str) -> str | None:
    """Stored value for ``tag``, or None when absent. Never fabricates."""
    return record.properties.get(tag)


def tag_pattern(tag: str) -> re.Pattern[bytes]:
    """Compiled matcher for the data-header line carrying ``tag``."""
    return re.compile(rb"(?m)^>[^<\n]*<" + re.escape(tag.encode()) + rb">[^\n]*\r?\n")


def extract_tag_value(block: bytes, pattern: re.Pattern[bytes]) -> str | None:
    """Fast single-tag extraction used on hot scan paths.

    Equivalent to ``parse_properties(block).get(tag)`` with trailing
    whitespace trimmed, but avoids building the full property map.
    Raises :class:`MalformedRecordError` on duplicate tags.
    """
    match = pattern.search(block)
    if match is None:
        return None
    if pattern.search(block, match.end()) is not None:
        raise MalformedRecordError("duplicate property tag in block")
    start = match.end()
    value_lines: list[bytes] = []
    for line in block[start:].split(b"\n"):
        body = line.rstrip(b"\r")
        if body == b"" or body == TERMINATOR or body.startswith(b">"):
            break
        value_lines.append(body)
    return b"\n".join(value_lines).decode("utf-8", errors="replace").rstrip()


def format_molfile(graph: MolGraph, name: str = "", comment: str = "") -> bytes:
    """Serialize a graph as a V2000 connection table (LF newlines)."""
    out: list[str] = [name, "  sdforge          2D", comment]
    out.append(f"{len(graph.atoms):3d}{len(graph.bonds):3d}  0  0  0  0  0  0  0  0999 V2000")
    for atom in graph.atoms:
        out.append(
            f"{0.0:10.4f}{0.0:10.4f}{0.0:10.4f} {atom.element:<3} 0  0  0  0  0  0  0  0  0  0  0  0"
        )
    for bond in graph.bonds:
        out.append(f"{bond.a + 1:3d}{bond.b + 1:3d}{bond.order:3d}  0")
    charged = [(i + 1, atom.charge) for i, atom in enumerate(graph.atoms) if atom.charge]
    for lo in range(0, len(charged), 8):
        chunk = charged[lo : lo + 8]
        out.append(
            f"M  CHG{len(chunk):3d}" + "".join(f"{idx:4d}{chg:4d}" for idx, chg in chunk)
        )
    out.append("M  END")
    return ("\n".join(out) + "\n").encode()


def format_record(
    graph: MolGraph,
    properties: dict[str, str],
    name: str = "",
    comment: str = "",
) -> bytes:
    """Serialize a full record block including data sections and terminator."""
    parts = [format_molfile(graph, name=name, comment=comment)]
    for tag, value in properties.items():
        parts.append(f"> <{tag}>\n{value}\n\n".encode())
    parts.append(TERMINATOR + b"\n")
    return b"".join(parts)


def write_record(record: SdfRecord, sink: BinaryIO) -> int:
    """Write one record; byte-identical to the source when raw bytes exist."""
    if record.raw_bytes:
        data = record.raw_bytes
    else:
        data = format_record(record.graph, record.properties)
    sink.write(data)
    return len(data)
