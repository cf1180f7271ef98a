"""Manifest-driven file acquisition: parallel, checksum-verified, resumable.

Transport is abstracted behind a small fetcher interface so the test
suite can run against a local in-process server (or a fake) instead of
the network.  Every downloaded file is MD5-verified; transient failures
retry with exponential backoff; partial files resume from their current
length via byte-range requests.
"""

from __future__ import annotations

import hashlib
import http.client
import logging
import os
import random
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .errors import ManifestError

log = logging.getLogger(__name__)

_MD5_RE = re.compile(r"^[0-9a-f]{32}$")

BACKOFF_BASE = 0.5
BACKOFF_CAP = 30.0
BACKOFF_JITTER = 0.2


@dataclass(frozen=True)
class ManifestEntry:
    url: str
    expected_checksum: str
    expected_size: int | None
    dest_path: str


@dataclass
class EntryResult:
    dest_path: str
    status: str  # ok | checksum_mismatch | failed_after_retries | skipped_existing
    attempts: int
    bytes_transferred: int
    resumed: bool
    error: str = ""


@dataclass
class FetchReport:
    results: list[EntryResult] = field(default_factory=list)

    def count(self, status: str) -> int:
        return sum(1 for r in self.results if r.status == status)


class Fetcher(Protocol):
    """Transfers ``url`` into ``dest``, appending from ``resume_from``.

    Returns (bytes_transferred, resumed).  ``resumed`` is False when the
    transfer restarted from zero (e.g. the server ignored the range
    request).  Raises OSError/urllib errors on transport failure.
    """

    def __call__(self, url: str, dest: Path, resume_from: int) -> tuple[int, bool]: ...


def http_fetch(url: str, dest: Path, resume_from: int, timeout: float = 30.0) -> tuple[int, bool]:
    """Default fetcher: HTTP(S) GET with a Range header when resuming."""
    request = urllib.request.Request(url)
    if resume_from > 0:
        request.add_header("Range", f"bytes={resume_from}-")
    with urllib.request.urlopen(request, timeout=timeout) as response:
        resumed = resume_from > 0 and response.status == 206
        mode = "ab" if resumed else "wb"
        transferred = 0
        with open(dest, mode) as out:
            while True:
                chunk = response.read(1 << 16)
                if not chunk:
                    break
                out.write(chunk)
                transferred += len(chunk)
    return transferred, resumed


def load_manifest(path: str | os.PathLike[str]) -> list[ManifestEntry]:
    """Parse a manifest: ``url<TAB>md5<TAB>size<TAB>dest_path`` per line.

    Size may be ``-`` when unknown.  Blank lines and ``#`` comments are
    ignored.  Duplicate destinations and path escapes are rejected.
    """
    entries: list[ManifestEntry] = []
    seen_dests: set[str] = set()
    with open(path, "r", encoding="utf-8") as stream:
        for line_no, raw in enumerate(stream, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ManifestError(f"line {line_no}: expected 4 tab-separated fields")
            url, checksum, size_text, dest = fields
            checksum = checksum.lower()
            if not _MD5_RE.match(checksum):
                raise ManifestError(f"line {line_no}: bad MD5 checksum {fields[1]!r}")
            if size_text == "-":
                size: int | None = None
            else:
                try:
                    size = int(size_text)
                except ValueError:
                    raise ManifestError(f"line {line_no}: bad size {size_text!r}") from None
            norm = os.path.normpath(dest)
            if norm.startswith("..") or os.path.isabs(norm):
                raise ManifestError(f"line {line_no}: destination escapes output dir: {dest!r}")
            if norm in seen_dests:
                raise ManifestError(f"line {line_no}: duplicate destination {dest!r}")
            seen_dests.add(norm)
            entries.append(ManifestEntry(url, checksum, size, norm))
    return entries


def verify_checksum(path: str | os.PathLike[str], expected: str) -> bool:
    """True iff the MD5 of the full file equals ``expected`` (case-insensitive)."""
    digest = hashlib.md5()
    with open(path, "rb") as stream:
        while True:
            chunk = stream.read(1 << 20)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest() == expected.lower()


def backoff_delays(max_retries: int, rng: random.Random) -> list[float]:
    """Jittered exponential backoff schedule, clamped non-decreasing."""
    delays: list[float] = []
    previous = 0.0
    for attempt in range(max_retries):
        nominal = min(BACKOFF_BASE * (2.0**attempt), BACKOFF_CAP)
        jittered = nominal * (1.0 + rng.uniform(-BACKOFF_JITTER, BACKOFF_JITTER))
        previous = max(previous, jittered)
        delays.append(previous)
    return delays


def _fetch_one(
    entry: ManifestEntry,
    out_dir: Path,
    max_retries: int,
    fetcher: Fetcher,
    sleeper: Callable[[float], None],
    rng: random.Random,
) -> EntryResult:
    dest = out_dir / entry.dest_path
    dest.parent.mkdir(parents=True, exist_ok=True)
    if dest.exists() and verify_checksum(dest, entry.expected_checksum):
        return EntryResult(entry.dest_path, "skipped_existing", 0, 0, False)

    delays = backoff_delays(max_retries, rng)
    attempts = 0
    total = 0
    ever_resumed = False
    last_error = ""
    mismatch = False
    while attempts <= max_retries:
        if attempts > 0:
            sleeper(delays[attempts - 1])
        attempts += 1
        resume_from = dest.stat().st_size if dest.exists() else 0
        if entry.expected_size is not None and resume_from > entry.expected_size:
            dest.unlink()  # overshoot can never verify; restart clean
            resume_from = 0
        try:
            transferred, resumed = fetcher(entry.url, dest, resume_from)
        except (OSError, urllib.error.URLError, http.client.HTTPException) as exc:
            last_error = str(exc)
            log.warning("fetch %s attempt %d failed: %s", entry.url, attempts, exc)
            continue
        total += transferred
        ever_resumed = ever_resumed or resumed
        if verify_checksum(dest, entry.expected_checksum):
            return EntryResult(entry.dest_path, "ok", attempts, total, ever_resumed)
        mismatch = True
        last_error = "checksum mismatch"
        log.warning("fetch %s attempt %d: checksum mismatch", entry.url, attempts)
        dest.unlink()  # complete-but-wrong bytes cannot be resumed
    status = "checksum_mismatch" if mismatch else "failed_after_retries"
    return EntryResult(entry.dest_path, status, attempts, total, ever_resumed, last_error)


def fetch_all(
    entries: list[ManifestEntry],
    out_dir: str | os.PathLike[str],
    workers: int = 4,
    max_retries: int = 3,
    fetcher: Fetcher | None = None,
    sleeper: Callable[[float], None] = time.sleep,
    seed: int | None = None,
) -> FetchReport:
    """Fetch every manifest entry; per-entry failures never abort the batch.

    Each entry is handled by exactly one worker; report assembly is
    serialized in manifest order.  Partial files from transport failures
    are kept on disk so a later run can resume them.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fetch = fetcher or http_fetch
    base_rng = random.Random(seed)
    rngs = [random.Random(base_rng.random()) for _ in entries]
    report = FetchReport()
    if not entries:
        return report
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [
            pool.submit(_fetch_one, entry, out, max_retries, fetch, sleeper, rng)
            for entry, rng in zip(entries, rngs)
        ]
        report.results = [f.result() for f in futures]
    return report
