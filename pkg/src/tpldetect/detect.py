"""Relevant/irrelevant verdicts for a library archive and top-similar library ranking."""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

from .classfile import ClassFormatError, parse_classfile
from .core import Channel, Language, NormalizedDocument, TPLDetectError, make_doc_id
from .embed import DocVector, Lib2VecModel, NoKnownTokens, ZeroVector
from .index import EmptyChannel, ReferenceIndex
from .ingest import MIN_FILE_BYTES, LibraryArchive, SourceEntry, filter_entries
from .normalize import (BYTECODE_POLICY, SOURCE_POLICY, NormalizationPolicy, ToolFailed,
                        ToolMissing, adapt_external, decode_text, disassemble, normalize_source)

log = logging.getLogger(__name__)

ALPHA_SC = 0.98359
ALPHA_BC = 0.99110

Models = Mapping[tuple[Language, Channel], Lib2VecModel]


class NoUsableEntries(TPLDetectError):
    pass


class NoUsableChannel(TPLDetectError):
    pass


class Label(str, enum.Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"


class RequiredChannels(str, enum.Enum):
    ALL = "all"
    ANY = "any"


def _default_thresholds() -> dict[tuple[Language, Channel], float]:
    return {(lang, ch): ALPHA_BC if ch is Channel.BYTECODE else ALPHA_SC
            for lang in Language for ch in Channel}


@dataclass(frozen=True)
class DetectionPolicy:
    thresholds: Mapping[tuple[Language, Channel], float] = field(default_factory=_default_thresholds)
    k: int = 5
    majority_fraction: float = 0.5
    required_channels: RequiredChannels = RequiredChannels.ALL
    rank_thresholds: Mapping[tuple[Language, Channel], float] | None = None
    min_file_bytes: int = MIN_FILE_BYTES

    def __post_init__(self):
        merged = _default_thresholds()
        merged.update({(Language(l), Channel(c)): float(v) for (l, c), v in self.thresholds.items()})
        object.__setattr__(self, "thresholds", merged)
        object.__setattr__(self, "required_channels", RequiredChannels(self.required_channels))
        for value in merged.values():
            if not 0.0 < value <= 1.0:
                raise ValueError(f"threshold {value} outside (0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.majority_fraction <= 1.0:
            raise ValueError("majority_fraction must lie in (0, 1]")

    def threshold(self, language: Language, channel: Channel) -> float:
        return self.thresholds[(Language(language), Channel(channel))]

    def rank_threshold(self, language: Language, channel: Channel) -> float:
        if self.rank_thresholds and (language, channel) in self.rank_thresholds:
            return self.rank_thresholds[(language, channel)]
        return self.threshold(language, channel)

    def required_matches(self, file_count: int) -> int:
        # The epsilon keeps 0.5 * 10 at 5 despite binary fractions.
        return max(1, math.ceil(self.majority_fraction * file_count - 1e-9))


# --------------------------------------------------------------------------
# documents


@dataclass(frozen=True)
class Normalizer:
    """How entries become documents per channel; adapters fill the non-native channels."""

    adapters: Mapping[tuple[Language, Channel], str] = field(default_factory=dict)
    bytecode_policy: NormalizationPolicy = BYTECODE_POLICY
    source_policy: NormalizationPolicy = SOURCE_POLICY
    timeout: float = 60.0

    def channels(self, language: Language) -> list[Channel]:
        native = Channel.BYTECODE if language is Language.JAVA else Channel.SOURCE
        return [ch for ch in Channel if ch is native or (language, ch) in self.adapters]

    def document(self, archive_id: str, entry: SourceEntry, channel: Channel) -> NormalizedDocument:
        language = entry.language
        doc_id = make_doc_id(archive_id, entry.relative_path, channel)
        if language is Language.JAVA and channel is Channel.BYTECODE:
            return disassemble(parse_classfile(entry.raw_bytes), self.bytecode_policy, doc_id)
        if language is Language.PYTHON and channel is Channel.SOURCE:
            text, replaced = decode_text(entry.raw_bytes)
            if replaced:
                log.debug("%s: %d undecodable bytes replaced", doc_id, replaced)
            return normalize_source(text, language, self.source_policy, doc_id)
        policy = self.bytecode_policy if channel is Channel.BYTECODE else self.source_policy
        doc = adapt_external(entry, self.adapters.get((language, channel)), language, channel,
                             doc_id, policy, self.timeout)
        return doc


DOC_ERRORS = (ClassFormatError, ToolMissing, ToolFailed)


def library_vectors(archive: LibraryArchive, models: Models, normalizer: Normalizer = Normalizer(),
                    min_file_bytes: int = MIN_FILE_BYTES, workers: int = 1):
    """Inferred (channel, DocVector) pairs for every filtered entry of ``archive``.

    Entries that cannot be normalized or share no vocabulary with the model
    are skipped with a warning.
    """
    jobs = []
    for entry in filter_entries(archive.entries, min_file_bytes):
        for channel in normalizer.channels(archive.language):
            model = models.get((archive.language, channel))
            if model is not None:
                jobs.append((entry, channel, model))

    def run(job):
        entry, channel, model = job
        try:
            doc = normalizer.document(archive.id, entry, channel)
            return channel, model.infer_vector(doc)
        except (*DOC_ERRORS, NoKnownTokens) as exc:
            log.warning("%s/%s (%s): not indexed: %s", archive.id, entry.relative_path,
                        channel.value, exc)
            return None

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run, jobs))
    return [r for r in results if r is not None]


# --------------------------------------------------------------------------
# scoring


@dataclass(frozen=True)
class ChannelScore:
    score: float
    matched: bool
    best_doc: str | None = None
    note: str = ""


@dataclass(frozen=True)
class FileScore:
    relative_path: str
    channels: Mapping[Channel, ChannelScore]
    vectors: Mapping[Channel, DocVector] = field(default_factory=dict, repr=False, compare=False)


def _probe(archive_id: str, entry: SourceEntry, channel: Channel, model: Lib2VecModel,
           normalizer: Normalizer) -> tuple[DocVector | None, str]:
    try:
        doc = normalizer.document(archive_id, entry, channel)
        return model.infer_vector(doc), ""
    except NoKnownTokens:
        return None, "no-known-tokens"
    except DOC_ERRORS as exc:
        return None, f"unreadable: {type(exc).__name__}"


def score_file(archive_id: str, entry: SourceEntry, channels, models: Models,
               index: ReferenceIndex, policy: DetectionPolicy,
               normalizer: Normalizer = Normalizer()) -> FileScore:
    """Best top-k cosine per channel; matched iff it is strictly above the threshold."""
    language = entry.language
    scores, vectors = {}, {}
    for channel in channels:
        vec, note = _probe(archive_id, entry, channel, models[(language, channel)], normalizer)
        if vec is None:
            scores[channel] = ChannelScore(0.0, False, None, note)
            continue
        vectors[channel] = vec
        try:
            top = index.query_top_k(vec, channel, policy.k, language)
        except ZeroVector:
            scores[channel] = ChannelScore(0.0, False, None, "zero-vector")
            continue
        best = top[0]
        scores[channel] = ChannelScore(best.score, best.score > policy.threshold(language, channel),
                                       best.doc_id)
    return FileScore(entry.relative_path, scores, vectors)


def _evaluable_channels(archive: LibraryArchive, models: Models, index: ReferenceIndex,
                        normalizer: Normalizer) -> list[Channel]:
    present = index.channels
    out = []
    for channel in normalizer.channels(archive.language):
        if (archive.language, channel) not in models:
            continue
        if channel not in present:
            log.warning("index holds no %s vectors; channel skipped", channel.value)
            continue
        out.append(channel)
    return out


def score_archive(archive: LibraryArchive, models: Models, index: ReferenceIndex,
                  policy: DetectionPolicy = DetectionPolicy(),
                  normalizer: Normalizer = Normalizer(), workers: int = 1):
    entries = filter_entries(archive.entries, policy.min_file_bytes)
    if not entries:
        raise NoUsableEntries(f"{archive.id}: no file of at least {policy.min_file_bytes} bytes")
    channels = _evaluable_channels(archive, models, index, normalizer)
    if not channels:
        raise NoUsableChannel(f"{archive.id}: no model and index data for {archive.language.value}")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        files = list(pool.map(lambda e: score_file(archive.id, e, channels, models, index, policy,
                                                   normalizer), entries))
    files.sort(key=lambda f: f.relative_path)
    return channels, files


# --------------------------------------------------------------------------
# verdict and ranking


@dataclass(frozen=True)
class Verdict:
    archive_id: str
    label: Label
    per_file: tuple[FileScore, ...]
    matched_count: Mapping[Channel, int]
    required: int
    channels: tuple[Channel, ...]
    file_count: int

    @property
    def relevant(self) -> bool:
        return self.label is Label.RELEVANT


def decide(matched_count: Mapping[Channel, int], required: int,
           mode: RequiredChannels = RequiredChannels.ALL) -> Label:
    """The majority rule: at least ``required`` matches on every (or any) channel."""
    hits = [matched_count[c] >= required for c in matched_count]
    ok = all(hits) if mode is RequiredChannels.ALL else any(hits)
    return Label.RELEVANT if hits and ok else Label.IRRELEVANT


def verdict_from_scores(archive_id: str, channels, files, policy: DetectionPolicy) -> Verdict:
    counts = {ch: sum(f.channels[ch].matched for f in files) for ch in channels}
    required = policy.required_matches(len(files))
    return Verdict(archive_id, decide(counts, required, policy.required_channels), tuple(files),
                   counts, required, tuple(channels), len(files))


def classify(archive: LibraryArchive, models: Models, index: ReferenceIndex,
             policy: DetectionPolicy = DetectionPolicy(), normalizer: Normalizer = Normalizer(),
             workers: int = 1) -> Verdict:
    channels, files = score_archive(archive, models, index, policy, normalizer, workers)
    return verdict_from_scores(archive.id, channels, files, policy)


@dataclass(frozen=True)
class RankedLibrary:
    library_id: str
    matched_files: int
    score: float


@dataclass(frozen=True)
class SimilarityReport:
    ranking: tuple[RankedLibrary, ...]
    k: int


def rank_from_scores(archive: LibraryArchive, files, index: ReferenceIndex,
                     policy: DetectionPolicy, k: int | None = None) -> SimilarityReport:
    k = policy.k if k is None else k
    best: dict[str, dict[str, float]] = {}  # library -> file -> best score
    for f in files:
        for channel, vec in f.vectors.items():
            try:
                hits = index.query_above(vec, channel,
                                         policy.rank_threshold(archive.language, channel),
                                         archive.language)
            except (EmptyChannel, ZeroVector):
                continue
            for hit in hits:
                per_file = best.setdefault(hit.library_id, {})
                per_file[f.relative_path] = max(per_file.get(f.relative_path, -1.0), hit.score)
    ranked = sorted((RankedLibrary(lib, len(v), float(sum(sorted(v.values()))))
                     for lib, v in best.items()),
                    key=lambda r: (-r.matched_files, -r.score, r.library_id))
    return SimilarityReport(tuple(ranked[:k]), k)


def rank_similar(archive: LibraryArchive, models: Models, index: ReferenceIndex,
                 policy: DetectionPolicy = DetectionPolicy(), k: int | None = None,
                 normalizer: Normalizer = Normalizer(), workers: int = 1) -> SimilarityReport:
    """Libraries ordered by how many distinct archive files they match."""
    try:
        _, files = score_archive(archive, models, index, policy, normalizer, workers)
    except (NoUsableEntries, NoUsableChannel):
        return SimilarityReport((), policy.k if k is None else k)
    return rank_from_scores(archive, files, index, policy, k)


def check(archive: LibraryArchive, models: Models, index: ReferenceIndex,
          policy: DetectionPolicy = DetectionPolicy(), normalizer: Normalizer = Normalizer(),
          workers: int = 1) -> tuple[Verdict, SimilarityReport]:
    """Verdict and top-k ranking from a single scoring pass."""
    channels, files = score_archive(archive, models, index, policy, normalizer, workers)
    return (verdict_from_scores(archive.id, channels, files, policy),
            rank_from_scores(archive, files, index, policy))
