"""Reference index: per-file vectors of the trusted corpus plus library metadata.

Queries are exhaustive exact cosine scans; at the corpus sizes this tool is
built for (tens of thousands of low-dimensional vectors) a scan costs
milliseconds and keeps the ranking exact.

On disk an index is a directory with three files::

    catalog.tsv   library_id, name, version, category, doc_count (tab-separated UTF-8)
    vectors.bin   "XLDB", u32 version, u32 dimension, u64 count, then per record:
                  u32-prefixed doc_id, u8 channel (0 bytecode, 1 source),
                  u32-prefixed library_id, dimension x f32 (all little-endian)
    checksum      CRC-32 of vectors.bin as 8 hex digits
"""

from __future__ import annotations

import io
import struct
import threading
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .core import Channel, Language, TPLDetectError, language_of_path, split_doc_id
from .embed import DimensionMismatch, DocVector, ZeroVector
from .ingest import LibraryMetadata

INDEX_MAGIC = b"XLDB"
INDEX_VERSION = 1
CATALOG_FILE = "catalog.tsv"
VECTORS_FILE = "vectors.bin"
CHECKSUM_FILE = "checksum"

_LANG_CODE = {None: 0, Language.JAVA: 1, Language.PYTHON: 2}


class DuplicateLibrary(TPLDetectError):
    pass


class EmptyChannel(TPLDetectError):
    pass


class CorruptIndex(TPLDetectError):
    pass


class VersionMismatch(TPLDetectError):
    pass


class Match(NamedTuple):
    doc_id: str
    library_id: str
    score: float


@dataclass
class CatalogEntry:
    metadata: LibraryMetadata
    doc_ids: list[str] = field(default_factory=list)


def _clean(text: str) -> str:
    return " ".join(str(text).split("\t")).replace("\n", " ").replace("\r", " ")


class ReferenceIndex:
    def __init__(self, dimension: int | None = None):
        self.dimension = dimension
        self.catalog: dict[str, CatalogEntry] = {}
        self._doc_ids: list[str] = []
        self._libraries: list[str] = []
        self._channels = np.zeros(0, dtype=np.uint8)
        self._languages = np.zeros(0, dtype=np.uint8)
        self._matrix = np.zeros((0, dimension or 0), dtype=np.float32)
        self._norms = np.zeros(0, dtype=np.float64)
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._doc_ids)

    @property
    def channels(self) -> set[Channel]:
        return {Channel.from_code(int(c)) for c in np.unique(self._channels)}

    def library_of(self, doc_id: str) -> str:
        return self._libraries[self._doc_ids.index(doc_id)]

    def vector(self, doc_id: str) -> DocVector:
        i = self._doc_ids.index(doc_id)
        return DocVector(doc_id, self._matrix[i])

    def records(self):
        """Yield (doc_id, channel, library_id, values) in insertion order."""
        for i, doc_id in enumerate(self._doc_ids):
            yield doc_id, Channel.from_code(int(self._channels[i])), self._libraries[i], self._matrix[i]

    # -- writing -------------------------------------------------------------

    def add_library(self, library_id: str, metadata: LibraryMetadata,
                    vectors: Iterable[tuple[Channel, DocVector]]) -> ReferenceIndex:
        """Add one library and its vectors; nothing changes if any check fails."""
        vectors = list(vectors)
        with self._lock:
            if library_id in self.catalog:
                raise DuplicateLibrary(f"library {library_id!r} already indexed")
            dim = self.dimension
            seen = set(self._doc_ids)
            for channel, vec in vectors:
                if dim is None:
                    dim = vec.dimension
                if vec.dimension != dim:
                    raise DimensionMismatch(f"{vec.doc_id}: dimension {vec.dimension}, index has {dim}")
                if vec.doc_id in seen:
                    raise DuplicateLibrary(f"doc_id {vec.doc_id!r} already indexed")
                seen.add(vec.doc_id)
            self.dimension = dim
            entry = CatalogEntry(metadata, [v.doc_id for _, v in vectors])
            if vectors:
                rows = np.stack([v.values for _, v in vectors]).astype(np.float32)
                self._matrix = np.vstack([self._matrix.reshape(-1, dim), rows])
                self._norms = np.concatenate([self._norms, [v.norm for _, v in vectors]])
                self._channels = np.concatenate(
                    [self._channels, np.array([Channel(c).code for c, _ in vectors], np.uint8)])
                langs = [_LANG_CODE[language_of_path(split_doc_id(v.doc_id)[1])] for _, v in vectors]
                self._languages = np.concatenate([self._languages, np.array(langs, np.uint8)])
                self._doc_ids += [v.doc_id for _, v in vectors]
                self._libraries += [library_id] * len(vectors)
            self.catalog[library_id] = entry
        return self

    # -- queries -------------------------------------------------------------

    def _scores(self, probe: DocVector, channel: Channel, language: Language | None):
        if probe.norm == 0.0:
            raise ZeroVector("probe vector is zero")
        mask = self._channels == Channel(channel).code
        if language is not None:
            mask &= self._languages == _LANG_CODE[Language(language)]
        rows = np.flatnonzero(mask)
        if rows.size == 0:
            raise EmptyChannel(f"no {Channel(channel).value} vectors in the index")
        if probe.dimension != self.dimension:
            raise DimensionMismatch(f"probe dimension {probe.dimension}, index has {self.dimension}")
        sub = self._matrix[rows].astype(np.float64)
        p = probe.values.astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = (sub @ p) / (self._norms[rows] * probe.norm)
        scores = np.clip(np.nan_to_num(scores, nan=0.0), -1.0, 1.0)
        return rows, scores

    def _ranked(self, rows, scores) -> list[Match]:
        ids = np.array([self._doc_ids[r] for r in rows])
        order = np.lexsort((ids, -scores))
        return [Match(self._doc_ids[rows[i]], self._libraries[rows[i]], float(scores[i]))
                for i in order]

    def query_top_k(self, probe: DocVector, channel: Channel, k: int,
                    language: Language | None = None) -> list[Match]:
        """Exact top-k by cosine; ties broken by doc_id ascending."""
        if k < 1:
            raise ValueError("k must be >= 1")
        rows, scores = self._scores(probe, channel, language)
        if k < rows.size:
            # Keep every row tied with the k-th score so the tie-break stays exact.
            kth = np.partition(-scores, k - 1)[k - 1]
            keep = -scores <= kth
            rows, scores = rows[keep], scores[keep]
        return self._ranked(rows, scores)[:k]

    def query_above(self, probe: DocVector, channel: Channel, threshold: float,
                    language: Language | None = None) -> list[Match]:
        """Every record scoring strictly above ``threshold``, best first."""
        rows, scores = self._scores(probe, channel, language)
        keep = scores > threshold
        return self._ranked(rows[keep], scores[keep])

    # -- persistence ---------------------------------------------------------

    def _vectors_blob(self) -> bytes:
        buf = io.BytesIO()
        buf.write(INDEX_MAGIC)
        buf.write(struct.pack("<IIQ", INDEX_VERSION, self.dimension or 0, len(self)))
        for i, doc_id in enumerate(self._doc_ids):
            d = doc_id.encode("utf-8")
            lib = self._libraries[i].encode("utf-8")
            buf.write(struct.pack("<I", len(d)) + d)
            buf.write(struct.pack("<B", int(self._channels[i])))
            buf.write(struct.pack("<I", len(lib)) + lib)
            buf.write(self._matrix[i].astype("<f4").tobytes())
        return buf.getvalue()

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        blob = self._vectors_blob()
        lines = []
        for lib_id, entry in self.catalog.items():
            m = entry.metadata
            lines.append("\t".join([_clean(lib_id), _clean(m.name), _clean(m.version),
                                    _clean(m.category), str(len(entry.doc_ids))]))
        (directory / CATALOG_FILE).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
        (directory / VECTORS_FILE).write_bytes(blob)
        (directory / CHECKSUM_FILE).write_text(f"{zlib.crc32(blob):08x}\n", encoding="ascii")
        return directory

    @classmethod
    def load(cls, directory) -> ReferenceIndex:
        directory = Path(directory)
        try:
            blob = (directory / VECTORS_FILE).read_bytes()
            expected = (directory / CHECKSUM_FILE).read_text(encoding="ascii").strip()
            catalog_text = (directory / CATALOG_FILE).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise CorruptIndex(f"{directory}: {exc}") from exc
        if f"{zlib.crc32(blob):08x}" != expected.lower():
            raise CorruptIndex(f"{directory}: checksum mismatch")
        if blob[:4] != INDEX_MAGIC or len(blob) < 20:
            raise CorruptIndex(f"{directory}: bad vectors.bin header")
        version, dim, count = struct.unpack_from("<IIQ", blob, 4)
        if version != INDEX_VERSION:
            raise VersionMismatch(f"index format version {version}, expected {INDEX_VERSION}")

        records: list[tuple[str, int, str, np.ndarray]] = []
        pos = 20
        try:
            for _ in range(count):
                (n,) = struct.unpack_from("<I", blob, pos)
                doc_id = blob[pos + 4:pos + 4 + n].decode("utf-8")
                pos += 4 + n
                channel = blob[pos]
                (n,) = struct.unpack_from("<I", blob, pos + 1)
                lib = blob[pos + 5:pos + 5 + n].decode("utf-8")
                pos += 5 + n
                if pos + 4 * dim > len(blob):
                    raise CorruptIndex(f"{directory}: truncated vector record")
                values = np.frombuffer(blob, dtype="<f4", count=dim, offset=pos).astype(np.float32)
                pos += 4 * dim
                if channel > 1:
                    raise CorruptIndex(f"{directory}: bad channel byte {channel}")
                records.append((doc_id, channel, lib, values))
        except (struct.error, IndexError, UnicodeDecodeError) as exc:
            raise CorruptIndex(f"{directory}: malformed record ({exc})") from exc
        if pos != len(blob):
            raise CorruptIndex(f"{directory}: trailing bytes in vectors.bin")

        by_library: dict[str, list] = {}
        for rec in records:
            by_library.setdefault(rec[2], []).append(rec)
        index = cls(dim if count or dim else None)
        for line in catalog_text.splitlines():
            parts = line.split("\t")
            if len(parts) != 5 or not parts[4].isdigit():
                raise CorruptIndex(f"{directory}: malformed catalog row {line!r}")
            lib_id, name, version, category, doc_count = parts
            recs = by_library.pop(lib_id, [])
            if len(recs) != int(doc_count):
                raise CorruptIndex(f"{directory}: {lib_id} lists {doc_count} docs, found {len(recs)}")
            meta = LibraryMetadata(name or lib_id, version, category)
            index.add_library(lib_id, meta, [(Channel.from_code(c), DocVector(d, v))
                                             for d, c, _, v in recs])
        if by_library:
            raise CorruptIndex(f"{directory}: vectors for uncatalogued libraries {sorted(by_library)}")
        # add_library appends per library; restore the original record order.
        if index._doc_ids != [r[0] for r in records]:
            index._reorder([r[0] for r in records])
        return index

    def _reorder(self, doc_ids: list[str]) -> None:
        pos = {d: i for i, d in enumerate(self._doc_ids)}
        order = np.array([pos[d] for d in doc_ids], dtype=np.int64)
        self._doc_ids = [self._doc_ids[i] for i in order]
        self._libraries = [self._libraries[i] for i in order]
        self._channels = self._channels[order]
        self._languages = self._languages[order]
        self._matrix = self._matrix[order]
        self._norms = self._norms[order]


def add_library(index: ReferenceIndex, archive, vectors) -> ReferenceIndex:
    """Add ``archive`` (a ``LibraryArchive``) with its per-channel vectors."""
    return index.add_library(archive.id, archive.metadata, vectors)


def query_top_k(index: ReferenceIndex, probe: DocVector, channel: Channel, k: int,
                language: Language | None = None) -> list[Match]:
    return index.query_top_k(probe, channel, k, language)


def save(index: ReferenceIndex, directory) -> Path:
    return index.save(directory)


def load(directory) -> ReferenceIndex:
    return ReferenceIndex.load(directory)
