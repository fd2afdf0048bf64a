"""Open TPL archives, enumerate their source entries and apply corpus constraints."""

from __future__ import annotations

import logging
import re
import tarfile
import urllib.parse
import urllib.request
import zipfile
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .core import Language, TPLDetectError

log = logging.getLogger(__name__)

MIN_FILE_BYTES = 1024
MIN_LIBRARY_BYTES = 9 * 1024
MIN_STARS = 1

_KIND_BY_SUFFIX = {".class": "ClassFile", ".py": "PySource"}
_LANGUAGE_BY_KIND = {"ClassFile": Language.JAVA, "PySource": Language.PYTHON}


class UnreadableArchive(TPLDetectError):
    pass


class NoSourceFiles(TPLDetectError):
    pass


class AmbiguousLanguage(TPLDetectError):
    pass


class CatalogParseError(TPLDetectError):
    pass


@dataclass(frozen=True)
class SourceEntry:
    relative_path: str
    kind: str  # "ClassFile" or "PySource"
    raw_bytes: bytes = field(repr=False)

    @property
    def size_bytes(self) -> int:
        return len(self.raw_bytes)

    @property
    def language(self) -> Language:
        return _LANGUAGE_BY_KIND[self.kind]


@dataclass(frozen=True)
class LibraryMetadata:
    name: str
    version: str = ""
    category: str = ""
    tags: tuple[str, ...] = ()
    usage_count: int = 0
    star_count: int | None = None
    source_url: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("library name must be non-empty")


@dataclass(frozen=True)
class LibraryArchive:
    id: str
    path: Path
    language: Language
    entries: tuple[SourceEntry, ...]
    metadata: LibraryMetadata

    @property
    def total_source_bytes(self) -> int:
        return sum(e.size_bytes for e in self.entries)


def archive_id_for(path: Path) -> str:
    name = path.name
    for suffix in (".tar.gz", ".tgz", ".jar", ".zip", ".whl"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break
    return re.sub(r"[/#\s]", "_", name) or "archive"


def _read_members(path: Path) -> list[tuple[str, bytes]]:
    try:
        if zipfile.is_zipfile(path):
            with zipfile.ZipFile(path) as zf:
                return [(info.filename, zf.read(info)) for info in zf.infolist()
                        if not info.is_dir()]
        if tarfile.is_tarfile(path):
            with tarfile.open(path, "r:*") as tf:
                out = []
                for member in tf.getmembers():
                    if member.isfile():
                        fh = tf.extractfile(member)
                        out.append((member.name, fh.read() if fh else b""))
                return out
    except (zipfile.BadZipFile, tarfile.TarError, EOFError, OSError, ValueError) as exc:
        raise UnreadableArchive(f"{path}: {exc}") from exc
    raise UnreadableArchive(f"{path}: not a ZIP/JAR or tar archive")


def _clean_path(name: str) -> str:
    parts = [p for p in name.replace("\\", "/").split("/") if p not in ("", ".", "..")]
    return "/".join(parts)


def open_archive(path, language_hint: Language | None = None,
                 metadata: LibraryMetadata | None = None,
                 archive_id: str | None = None) -> LibraryArchive:
    """Open a JAR/ZIP or (gzipped) tarball and collect its .class/.py entries.

    Entries are sorted by relative path. Without a hint the language is the
    majority entry kind; entries of the other language are dropped.
    """
    path = Path(path)
    if not path.is_file():
        raise UnreadableArchive(f"{path}: no such file")
    entries = []
    for name, data in _read_members(path):
        rel = _clean_path(name)
        kind = _KIND_BY_SUFFIX.get(Path(rel).suffix)
        if kind:
            entries.append(SourceEntry(rel, kind, data))
    if not entries:
        raise NoSourceFiles(f"{path}: no .class or .py files")
    if language_hint is None:
        counts = Counter(e.language for e in entries)
        ranked = counts.most_common()
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            raise AmbiguousLanguage(f"{path}: equal numbers of Java and Python files")
        language = ranked[0][0]
    else:
        language = Language(language_hint)
    # Duplicate paths (possible in tarballs) keep the last occurrence.
    by_path = {e.relative_path: e for e in entries if e.language is language}
    if not by_path:
        raise NoSourceFiles(f"{path}: no {language.value} source files")
    aid = archive_id or archive_id_for(path)
    meta = metadata or LibraryMetadata(name=aid)
    return LibraryArchive(aid, path, language, tuple(by_path[k] for k in sorted(by_path)), meta)


def filter_entries(entries, min_size: int = MIN_FILE_BYTES) -> list[SourceEntry]:
    return [e for e in entries if e.size_bytes >= min_size]


@dataclass(frozen=True)
class ConstraintCheck:
    accepted: bool
    reason: str | None = None
    detail: str = ""


def check_corpus_constraints(archive: LibraryArchive,
                             min_total_source_bytes: int = MIN_LIBRARY_BYTES,
                             min_stars: int = MIN_STARS,
                             min_file_bytes: int = MIN_FILE_BYTES) -> ConstraintCheck:
    if not archive.entries:
        return ConstraintCheck(False, "SourceFileCount", "no source files")
    total = archive.total_source_bytes
    if total < min_total_source_bytes:
        return ConstraintCheck(False, "SizeConstraint",
                               f"{total} source bytes < {min_total_source_bytes}")
    stars = archive.metadata.star_count
    if stars is not None and stars < min_stars:
        return ConstraintCheck(False, "ReputationConstraint", f"{stars} stars < {min_stars}")
    if not filter_entries(archive.entries, min_file_bytes):
        return ConstraintCheck(False, "FileSizeConstraint",
                               f"no file of at least {min_file_bytes} bytes")
    return ConstraintCheck(True)


# --------------------------------------------------------------------------
# catalog


@dataclass(frozen=True)
class CatalogLine:
    location: str
    metadata: LibraryMetadata | None
    line_no: int


@dataclass
class FetchResult:
    archives: list[LibraryArchive] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)  # (location, reason)


def parse_catalog(text: str) -> list[CatalogLine]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.rstrip("\r").split("\t")
        if len(fields) > 5 or not fields[0].strip():
            raise CatalogParseError(f"line {n}: expected 1-5 tab-separated fields")
        location = fields[0].strip()
        meta = None
        if len(fields) > 1:
            name, version, category, stars = (fields[1:] + [""] * 4)[:4]
            try:
                star_count = int(stars) if stars.strip() else None
            except ValueError:
                raise CatalogParseError(f"line {n}: star count {stars!r} is not an integer") from None
            if star_count is not None and star_count < 0:
                raise CatalogParseError(f"line {n}: negative star count")
            if not name.strip():
                raise CatalogParseError(f"line {n}: empty library name")
            meta = LibraryMetadata(name.strip(), version.strip(), category.strip(),
                                   star_count=star_count, source_url=location)
        out.append(CatalogLine(location, meta, n))
    return out


def _is_remote(location: str) -> bool:
    return urllib.parse.urlparse(location).scheme in ("http", "https", "ftp")


def _resolve(line: CatalogLine, base: Path, dest_dir: Path, timeout: float) -> Path:
    if not _is_remote(line.location):
        p = Path(line.location)
        return p if p.is_absolute() else base / p
    name = Path(urllib.parse.urlparse(line.location).path).name or f"entry{line.line_no}"
    target = dest_dir / name
    with urllib.request.urlopen(line.location, timeout=timeout) as resp:
        target.write_bytes(resp.read())
    return target


def fetch_catalog(catalog_file, dest_dir, workers: int = 4, timeout: float = 30.0) -> FetchResult:
    """Download/open every catalog entry. Per-entry failures are recorded, not raised.

    Relative local paths resolve against the catalog file's directory.
    """
    catalog_file, dest_dir = Path(catalog_file), Path(dest_dir)
    lines = parse_catalog(catalog_file.read_text(encoding="utf-8"))
    dest_dir.mkdir(parents=True, exist_ok=True)
    base = catalog_file.parent

    def work(line: CatalogLine):
        try:
            path = _resolve(line, base, dest_dir, timeout)
            return open_archive(path, metadata=line.metadata), None
        except (OSError, TPLDetectError, ValueError) as exc:
            log.warning("skipping %s: %s", line.location, exc)
            return None, str(exc)

    result = FetchResult()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for line, (archive, error) in zip(lines, pool.map(work, lines)):
            if archive is not None:
                result.archives.append(archive)
            else:
                result.failures.append((line.location, error))
    return result
