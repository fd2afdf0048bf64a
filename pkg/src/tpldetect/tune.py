"""Same/different pair sets, threshold derivation, accuracy metrics and parameter sweeps."""

from __future__ import annotations

import enum
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import obfuscate
from .classfile import parse_classfile
from .core import Channel, Language, NormalizedDocument, TPLDetectError, split_doc_id
from .embed import Lib2VecModel, NoKnownTokens, TrainingConfig, cosine, train
from .normalize import BYTECODE_POLICY, SOURCE_POLICY, decode_text, disassemble, normalize_source
from .obfuscate import TransformKind, TransformSpec

log = logging.getLogger(__name__)

Transform = Callable[[NormalizedDocument, int], NormalizedDocument]

# Inference seed offset for the second member of a pair, so that a "same"
# pair is scored the way an unseen copy of a file would be.
PAIR_SEED_OFFSET = 7919


class InsufficientDocs(TPLDetectError):
    pass


class EmptySameSet(TPLDetectError):
    pass


@dataclass(frozen=True)
class Pair:
    a: NormalizedDocument
    b: NormalizedDocument
    same: bool


@dataclass(frozen=True)
class PairSet:
    pairs: tuple[Pair, ...]
    seed: int

    @property
    def same_count(self) -> int:
        return sum(p.same for p in self.pairs)

    @property
    def different_count(self) -> int:
        return len(self.pairs) - self.same_count

    def __len__(self) -> int:
        return len(self.pairs)


def generate_pairs(docs: Sequence[NormalizedDocument], n_pairs: int | None = None, seed: int = 0,
                   transform: Transform | None = None) -> PairSet:
    """Half "same" pairs (a document with itself or its transformed copy), half distinct pairs.

    ``n_pairs`` defaults to the number of documents. Same pairs use distinct
    documents and different pairs distinct unordered couples, so no pair
    repeats; the request is capped accordingly.
    """
    docs = list(docs)
    if len({d.doc_id for d in docs}) < 2:
        raise InsufficientDocs("need at least two distinct documents")
    n = len(docs)
    n_pairs = n if n_pairs is None else n_pairs
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 0x9A125])
    n_same = min((n_pairs + 1) // 2, n)
    n_diff = min(n_pairs - (n_pairs + 1) // 2, n * (n - 1) // 2)
    n_same = min(n_same, n_diff + 1)
    n_diff = min(n_diff, n_same + 1)

    same_idx = rng.choice(n, size=n_same, replace=False)
    chosen: set[tuple[int, int]] = set()
    diff = []
    while len(diff) < n_diff:
        i, j = (int(x) for x in rng.integers(0, n, size=2))
        key = (min(i, j), max(i, j))
        if i == j or key in chosen:
            continue
        chosen.add(key)
        diff.append((i, j))

    pairs = []
    for t, i in enumerate(same_idx):
        doc = docs[i]
        other = transform(doc, seed + t) if transform is not None else doc
        pairs.append(Pair(doc, other, True))
    pairs.extend(Pair(docs[i], docs[j], False) for i, j in diff)
    order = rng.permutation(len(pairs))
    return PairSet(tuple(pairs[k] for k in order), seed)


def make_transform(spec: TransformSpec, sources: Mapping[str, bytes]) -> Transform:
    """Build a document transform that re-runs the real normalization on rewritten input.

    ``sources`` maps doc_id to the entry's raw bytes. Transforms that do not
    apply to a document's channel leave it unchanged.
    """

    def apply(doc: NormalizedDocument, seed: int) -> NormalizedDocument:
        seed = spec.seed + seed
        if spec.kind is TransformKind.IDENTIFIER_RENAME:
            return obfuscate.rename_identifiers(doc, seed) if doc.channel is Channel.SOURCE else doc
        raw = sources[doc.doc_id]
        if spec.kind is TransformKind.PACKAGE_RENAME:
            if doc.channel is not Channel.BYTECODE:
                return doc
            model = obfuscate.rename_packages(parse_classfile(raw), seed)
            return disassemble(model, BYTECODE_POLICY, doc.doc_id)
        if doc.channel is not Channel.SOURCE:
            return doc
        text, _ = decode_text(raw)
        text = obfuscate.apply_source_transform(replace(spec, seed=seed), text, doc.language)
        return normalize_source(text, doc.language, SOURCE_POLICY, doc.doc_id)

    return apply


# --------------------------------------------------------------------------
# scoring and metrics


@dataclass(frozen=True)
class ScoredPairs:
    same: np.ndarray
    different: np.ndarray
    unscored: int = 0  # pairs where a member had no known tokens


def score_pairs(model: Lib2VecModel, pairs: PairSet, seed: int | None = None) -> ScoredPairs:
    """Cosine per pair; a member without known tokens scores 0."""
    seed = model.config.seed if seed is None else seed
    cache: dict[tuple[str, tuple, int], object] = {}

    def vec(doc, s):
        key = (doc.doc_id, doc.tokens, s)
        if key not in cache:
            try:
                cache[key] = model.infer_vector(doc, seed=s)
            except NoKnownTokens:
                cache[key] = None
        return cache[key]

    same, diff, missing = [], [], 0
    for p in pairs.pairs:
        u, v = vec(p.a, seed), vec(p.b, seed + PAIR_SEED_OFFSET)
        if u is None or v is None or u.norm == 0 or v.norm == 0:
            score, missing = 0.0, missing + 1
        else:
            score = cosine(u, v)
        (same if p.same else diff).append(score)
    return ScoredPairs(np.array(same, dtype=np.float64), np.array(diff, dtype=np.float64), missing)


class ThresholdMode(str, enum.Enum):
    SAME_MEAN = "same-mean"
    MIDPOINT = "midpoint"


@dataclass(frozen=True)
class Thresholds:
    alpha: float
    same_mean: float
    different_mean: float
    mode: ThresholdMode


def compute_thresholds(scored: ScoredPairs, mode: ThresholdMode = ThresholdMode.SAME_MEAN) -> Thresholds:
    if scored.same.size == 0:
        raise EmptySameSet("no same pairs to average")
    mode = ThresholdMode(mode)
    same_mean = float(np.mean(scored.same))
    diff_mean = float(np.mean(scored.different)) if scored.different.size else float("nan")
    if mode is ThresholdMode.SAME_MEAN or math.isnan(diff_mean):
        alpha = same_mean
    else:
        alpha = (same_mean + diff_mean) / 2
    return Thresholds(alpha, same_mean, diff_mean, mode)


@dataclass(frozen=True)
class EvalResult:
    same_mean: float
    different_mean: float
    threshold: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    point: Mapping[str, object] = field(default_factory=dict)


def evaluate(scored: ScoredPairs, threshold: float) -> EvalResult:
    """Predict "same" iff cosine > threshold; "same" is the positive class."""
    tp = int(np.sum(scored.same > threshold))
    fn = scored.same.size - tp
    fp = int(np.sum(scored.different > threshold))
    tn = scored.different.size - fp
    total = tp + fn + fp + tn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalResult(
        float(np.mean(scored.same)) if scored.same.size else float("nan"),
        float(np.mean(scored.different)) if scored.different.size else float("nan"),
        float(threshold), (tp + tn) / total if total else 0.0, precision, recall, f1)


def evaluate_model(model: Lib2VecModel, pairs: PairSet, threshold: float) -> EvalResult:
    return evaluate(score_pairs(model, pairs), threshold)


# --------------------------------------------------------------------------
# sweeps


class Axis(str, enum.Enum):
    EPOCHS = "epochs"
    VECTOR_SIZE = "vector_size"
    SAMPLE_COUNT = "sample_count"


@dataclass(frozen=True)
class SweepScenario:
    axis: Axis
    grid: tuple
    fixed: TrainingConfig = TrainingConfig()

    def configs(self) -> list[TrainingConfig]:
        return [replace(self.fixed, **{Axis(self.axis).value: v}) for v in self.grid]


def default_scenario(axis: Axis, corpus_size: int | None = None, step: int = 5000,
                     fixed: TrainingConfig = TrainingConfig()) -> SweepScenario:
    """Grids: epochs and vector size 5..50 in steps of 5, sample count step..corpus size."""
    axis = Axis(axis)
    base = replace(fixed, epochs=10, vector_size=10, sample_count=None)
    if axis is Axis.SAMPLE_COUNT:
        if not corpus_size:
            raise ValueError("the sample-count grid needs the corpus size")
        grid = tuple(range(step, corpus_size + 1, step)) or (corpus_size,)
    else:
        grid = tuple(range(5, 51, 5))
    return SweepScenario(axis, grid, base)


@dataclass(frozen=True)
class ChannelCorpus:
    """Documents of one (language, channel) with the library each belongs to."""

    language: Language
    channel: Channel
    docs: tuple[NormalizedDocument, ...]
    sources: Mapping[str, bytes] = field(default_factory=dict, repr=False)

    def libraries(self) -> list[str]:
        return sorted({split_doc_id(d.doc_id)[0] for d in self.docs})


@dataclass(frozen=True)
class Split:
    train: tuple[NormalizedDocument, ...]
    test: tuple[NormalizedDocument, ...]
    test_libraries: tuple[str, ...]
    seed: int


def split_by_library(corpus: ChannelCorpus, test_fraction: float = 0.2, seed: int = 0) -> Split:
    """Hold out whole libraries, so test files are unseen by construction."""
    libs = corpus.libraries()
    if len(libs) < 2:
        raise InsufficientDocs("need at least two libraries to split")
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 0x5B117])
    n_test = min(len(libs) - 1, max(1, round(test_fraction * len(libs))))
    test_libs = {libs[i] for i in rng.choice(len(libs), size=n_test, replace=False)}
    train_docs = tuple(d for d in corpus.docs if split_doc_id(d.doc_id)[0] not in test_libs)
    test_docs = tuple(d for d in corpus.docs if split_doc_id(d.doc_id)[0] in test_libs)
    return Split(train_docs, test_docs, tuple(sorted(test_libs)), seed)


REPORT_COLUMNS = ("axis", "value", "language", "channel", "epochs", "vector_size", "sample_count",
                  "same_mean", "different_mean", "threshold", "accuracy", "precision", "recall",
                  "f1", "train_docs", "test_pairs", "split_seed", "pair_seed", "transform")


def sweep(corpora: Iterable[ChannelCorpus], scenario: SweepScenario, pair_seed: int = 0,
          split_seed: int = 0, n_pairs: int | None = None,
          mode: ThresholdMode = ThresholdMode.MIDPOINT,
          transform: TransformSpec | None = None) -> list[EvalResult]:
    """Train and evaluate one model per grid point and channel.

    The threshold for a grid point comes from its own untransformed pairs;
    with ``transform`` the transformed pairs are then evaluated against it.
    """
    results = []
    for corpus in corpora:
        split = split_by_library(corpus, seed=split_seed)
        pairs = generate_pairs(split.test, n_pairs, pair_seed)
        tpairs = None
        if transform is not None:
            tpairs = generate_pairs(split.test, n_pairs, pair_seed,
                                    make_transform(transform, corpus.sources))
        for value, config in zip(scenario.grid, scenario.configs()):
            model = train(split.train, config, corpus.channel, corpus.language)
            thresholds = compute_thresholds(score_pairs(model, pairs), mode)
            scored = score_pairs(model, tpairs if tpairs is not None else pairs)
            res = evaluate(scored, thresholds.alpha)
            point = {
                "axis": Axis(scenario.axis).value, "value": value,
                "language": corpus.language.value, "channel": corpus.channel.value,
                "epochs": config.epochs, "vector_size": config.vector_size,
                "sample_count": "ALL" if config.sample_count is None else config.sample_count,
                "train_docs": model.training_doc_count, "test_pairs": len(pairs),
                "split_seed": split_seed, "pair_seed": pair_seed,
                "transform": transform.kind.value if transform else "none",
            }
            log.info("%s=%s %s/%s f1=%.4f", point["axis"], value, corpus.language.value,
                     corpus.channel.value, res.f1)
            results.append(replace(res, point=point))
    # None on the sample-count axis means the whole corpus, so it sorts last.
    results.sort(key=lambda r: (r.point["language"], r.point["channel"],
                                math.inf if r.point["value"] is None else r.point["value"]))
    return results


def _fmt(value) -> str:
    return f"{value:.6f}" if isinstance(value, float) else str(value)


def render_report(results: Sequence[EvalResult]) -> str:
    out = io.StringIO()
    out.write("\t".join(REPORT_COLUMNS) + "\n")
    for r in results:
        row = {**r.point, "same_mean": r.same_mean, "different_mean": r.different_mean,
               "threshold": r.threshold, "accuracy": r.accuracy, "precision": r.precision,
               "recall": r.recall, "f1": r.f1}
        out.write("\t".join(_fmt(row[c]) for c in REPORT_COLUMNS) + "\n")
    return out.getvalue()


def render_gnuplot(results: Sequence[EvalResult]) -> str:
    """One data block per (language, channel): value, same mean, different mean, accuracy, F1."""
    blocks: dict[tuple, list[EvalResult]] = {}
    for r in results:
        blocks.setdefault((r.point["language"], r.point["channel"]), []).append(r)
    out = io.StringIO()
    for (lang, ch), rows in blocks.items():
        out.write(f"# {lang} {ch} {rows[0].point['axis']}\n# value same different accuracy f1\n")
        for r in rows:
            out.write(f"{r.point['value']} {r.same_mean:.6f} {r.different_mean:.6f} "
                      f"{r.accuracy:.6f} {r.f1:.6f}\n")
        out.write("\n\n")
    return out.getvalue()


def write_report(results: Sequence[EvalResult], path, gnuplot: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(results), encoding="utf-8")
    if gnuplot:
        path.with_suffix(".dat").write_text(render_gnuplot(results), encoding="utf-8")
    return path


def build_corpora(archives, normalizer=None, min_file_bytes: int | None = None) -> list[ChannelCorpus]:
    """Group the documents of ``archives`` into one corpus per (language, channel)."""
    from .detect import DOC_ERRORS, Normalizer
    from .ingest import MIN_FILE_BYTES, filter_entries

    normalizer = normalizer or Normalizer()
    min_file_bytes = MIN_FILE_BYTES if min_file_bytes is None else min_file_bytes
    docs: dict[tuple[Language, Channel], list] = {}
    sources: dict[tuple[Language, Channel], dict] = {}
    for archive in archives:
        for entry in filter_entries(archive.entries, min_file_bytes):
            for channel in normalizer.channels(archive.language):
                try:
                    doc = normalizer.document(archive.id, entry, channel)
                except DOC_ERRORS as exc:
                    log.warning("%s/%s: skipped: %s", archive.id, entry.relative_path, exc)
                    continue
                key = (archive.language, channel)
                docs.setdefault(key, []).append(doc)
                sources.setdefault(key, {})[doc.doc_id] = entry.raw_bytes
    return [ChannelCorpus(lang, ch, tuple(docs[(lang, ch)]), sources[(lang, ch)])
            for lang, ch in sorted(docs, key=lambda k: (k[0].value, k[1].value))]
