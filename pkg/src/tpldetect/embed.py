"""Paragraph-vector (PV-DM) models over normalized code documents.

The hidden layer averages the document vector with the vectors of the words
in a symmetric window around each position and predicts the centre word
with negative sampling. Training updates document, word and output
matrices; inference freezes the word and output matrices and fits only a
fresh document vector.
"""

from __future__ import annotations

import io
import logging
import math
import struct
import zlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .core import Channel, Language, NormalizedDocument, TPLDetectError

log = logging.getLogger(__name__)

MODEL_MAGIC = b"L2VM"
MODEL_VERSION = 1
NS_EXPONENT = 0.75
CUM_DOMAIN = 2**31 - 1
REAL = np.float32


class EmptyCorpus(TPLDetectError):
    pass


class DegenerateVocabulary(TPLDetectError):
    pass


class NoKnownTokens(TPLDetectError):
    pass


class ZeroVector(TPLDetectError):
    pass


class DimensionMismatch(TPLDetectError):
    pass


class CorruptModel(TPLDetectError):
    pass


class VersionMismatch(TPLDetectError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 10
    vector_size: int = 10
    sample_count: int | None = None  # None trains on every document
    window: int = 5
    negative: int = 5
    min_count: int = 2
    initial_lr: float = 0.025
    final_lr: float = 1e-4
    seed: int = 1
    infer_epochs: int = 50
    workers: int = 1

    def __post_init__(self):
        for name in ("epochs", "vector_size", "window", "min_count", "infer_epochs", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.negative < 1:
            raise ValueError("negative sampling needs at least one negative sample")
        if self.sample_count is not None and self.sample_count < 1:
            raise ValueError("sample_count must be positive or None")
        if not 0 < self.final_lr <= self.initial_lr:
            raise ValueError("need 0 < final_lr <= initial_lr")


@dataclass
class Vocabulary:
    tokens: list[str]
    counts: np.ndarray
    index: dict[str, int] = field(repr=False)
    total_token_count: int

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def frequency(self, token: str) -> int:
        return int(self.counts[self.index[token]])

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        """Map tokens to indices, dropping out-of-vocabulary ones."""
        idx = self.index
        return np.fromiter((idx[t] for t in tokens if t in idx), dtype=np.int64)

    def cum_table(self) -> np.ndarray:
        weights = self.counts.astype(np.float64) ** NS_EXPONENT
        cum = np.round(np.cumsum(weights) / weights.sum() * CUM_DOMAIN)
        return cum.astype(np.uint64)


def _tokens_of(doc) -> Sequence[str]:
    return doc.tokens if isinstance(doc, NormalizedDocument) else doc


def build_vocabulary(docs: Iterable, min_count: int = 2) -> Vocabulary:
    """Frequency-filtered vocabulary; indices by descending frequency, then token."""
    counter: Counter[str] = Counter()
    n_docs = 0
    for doc in docs:
        counter.update(_tokens_of(doc))
        n_docs += 1
    if n_docs == 0:
        raise EmptyCorpus("no documents")
    kept = sorted(((t, c) for t, c in counter.items() if c >= min_count),
                  key=lambda tc: (-tc[1], tc[0]))
    tokens = [t for t, _ in kept]
    counts = np.array([c for _, c in kept], dtype=np.int64)
    return Vocabulary(tokens, counts, {t: i for i, t in enumerate(tokens)},
                      int(counts.sum()) if len(counts) else 0)


@dataclass(frozen=True)
class DocVector:
    doc_id: str
    values: np.ndarray = field(repr=False)
    norm: float = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=REAL)
        if values.ndim != 1:
            raise ValueError("doc vector must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.doc_id}: non-finite vector")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "norm", float(np.linalg.norm(values.astype(np.float64))))

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


def cosine(u: DocVector, v: DocVector) -> float:
    if u.dimension != v.dimension:
        raise DimensionMismatch(f"{u.dimension} != {v.dimension}")
    if u.norm == 0.0 or v.norm == 0.0:
        raise ZeroVector("cosine undefined for a zero vector")
    dot = float(np.dot(u.values.astype(np.float64), v.values.astype(np.float64)))
    return max(-1.0, min(1.0, dot / (u.norm * v.norm)))


@dataclass
class Lib2VecModel:
    channel: Channel
    language: Language
    config: TrainingConfig
    vocab: Vocabulary
    word_vectors: np.ndarray  # V x size
    output_weights: np.ndarray  # V x size, negative-sampling layer
    doc_tags: list[str]
    doc_vectors: np.ndarray  # training documents, D x size
    training_doc_count: int
    epoch_losses: list[float] = field(default_factory=list)

    def __post_init__(self):
        self._cum_table = self.vocab.cum_table()
        self._tag_index = {t: i for i, t in enumerate(self.doc_tags)}

    @property
    def vector_size(self) -> int:
        return self.word_vectors.shape[1]

    def training_vector(self, doc_id: str) -> DocVector:
        return DocVector(doc_id, self.doc_vectors[self._tag_index[doc_id]])

    # -- inference -----------------------------------------------------------

    def infer_vector(self, doc, infer_epochs: int | None = None,
                     seed: int | None = None) -> DocVector:
        tokens = _tokens_of(doc)
        doc_id = doc.doc_id if isinstance(doc, NormalizedDocument) else ""
        words = self.vocab.encode(tokens)
        if words.size == 0:
            raise NoKnownTokens(f"{doc_id or 'document'}: no token in the model vocabulary")
        seed = self.config.seed if seed is None else seed
        content = zlib.crc32("\x00".join(tokens).encode("utf-8", errors="surrogatepass"))
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, content])
        vec = ((rng.random(self.vector_size) - 0.5) / self.vector_size).astype(REAL)
        state = np.array([rng.integers(0, 2**63)], dtype=np.uint64)
        epochs = infer_epochs or self.config.infer_epochs
        _kernels.infer_document(vec, words, self.word_vectors, self.output_weights,
                                self._cum_table, self.config.window, self.config.negative,
                                self.config.initial_lr, self.config.final_lr, epochs, state)
        return DocVector(doc_id, vec)

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        Path(path).write_bytes(dump_model(self))

    @classmethod
    def load(cls, path) -> Lib2VecModel:
        return load_model(Path(path).read_bytes())


def infer_vector(model: Lib2VecModel, doc, infer_epochs: int | None = None,
                 seed: int | None = None) -> DocVector:
    return model.infer_vector(doc, infer_epochs, seed)


def _sample(docs: list, config: TrainingConfig) -> list:
    if config.sample_count is None or config.sample_count >= len(docs):
        return docs
    rng = np.random.default_rng(config.seed)
    chosen = np.sort(rng.choice(len(docs), size=config.sample_count, replace=False))
    return [docs[i] for i in chosen]


def train(docs: Iterable, config: TrainingConfig = TrainingConfig(),
          channel: Channel = Channel.BYTECODE, language: Language = Language.JAVA) -> Lib2VecModel:
    """Train a model for exactly ``config.epochs`` passes.

    With ``workers == 1`` the result is bit-reproducible for a fixed seed.
    With more workers, shards are trained concurrently into shared matrices
    and only statistical reproducibility holds.
    """
    docs = list(docs)
    if not docs:
        raise EmptyCorpus("no documents to train on")
    docs = _sample(docs, config)
    vocab = build_vocabulary(docs, config.min_count)
    if len(vocab) == 0:
        raise DegenerateVocabulary(f"no token occurs at least {config.min_count} times")

    tags = [d.doc_id if isinstance(d, NormalizedDocument) and d.doc_id else str(i)
            for i, d in enumerate(docs)]
    encoded = [vocab.encode(_tokens_of(d)) for d in docs]
    offsets = np.zeros(len(encoded) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(e) for e in encoded])
    flat = np.concatenate(encoded) if encoded else np.zeros(0, dtype=np.int64)

    size = config.vector_size
    rng = np.random.default_rng(config.seed)
    W = ((rng.random((len(vocab), size)) - 0.5) / size).astype(REAL)
    D = ((rng.random((len(docs), size)) - 0.5) / size).astype(REAL)
    U = np.zeros((len(vocab), size), dtype=REAL)
    cum = vocab.cum_table()

    n_docs = len(docs)
    workers = min(config.workers, n_docs)
    shards = np.array_split(np.arange(n_docs, dtype=np.int64), workers)
    states = [np.array([rng.integers(0, 2**63)], dtype=np.uint64) for _ in shards]
    total_progress = float(config.epochs * n_docs)
    losses = []

    def run(k: int, epoch: int):
        shard = shards[k]
        start = epoch * n_docs + (shard[0] if shard.size else 0)
        return _kernels.train_shard(shard, offsets, flat, D, W, U, cum, config.window,
                                    config.negative, config.initial_lr, config.final_lr,
                                    float(start), total_progress, states[k])

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for epoch in range(config.epochs):
            if pool is None:
                results = [run(0, epoch)]
            else:
                results = list(pool.map(lambda k: run(k, epoch), range(workers)))
            loss = sum(r[0] for r in results)
            count = sum(r[1] for r in results)
            losses.append(loss / max(count, 1))
            log.debug("epoch %d: mean loss %.5f", epoch + 1, losses[-1])
    finally:
        if pool is not None:
            pool.shutdown()

    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(D)) and np.all(np.isfinite(U))):
        raise FloatingPointError("training diverged; lower the learning rate")
    return Lib2VecModel(channel, language, config, vocab, W, U, tags, D, len(docs), losses)


# --------------------------------------------------------------------------
# analytic loss, used by the gradient check


def pvdm_loss_and_grad(doc_vec, W, U, examples):
    """Negative-sampling loss of a frozen mini-batch and its gradients.

    ``examples`` is a list of ``(context_word_ids, target_ids, labels)``.
    Returns ``(loss, d_doc, d_W, d_U)`` in float64.
    """
    doc_vec = np.asarray(doc_vec, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    loss = 0.0
    g_doc = np.zeros_like(doc_vec)
    g_W = np.zeros_like(W)
    g_U = np.zeros_like(U)
    for context, targets, labels in examples:
        context = np.asarray(context, dtype=np.int64)
        n = len(context) + 1
        h = (doc_vec + W[context].sum(axis=0)) / n
        g_h = np.zeros_like(h)
        for t, label in zip(targets, labels):
            s = float(U[t] @ h)
            sig = 1.0 / (1.0 + math.exp(-s))
            if label:
                loss -= math.log(sig)
                g = sig - 1.0
            else:
                loss -= math.log(1.0 - sig)
                g = sig
            g_h += g * U[t]
            g_U[t] += g * h
        g_doc += g_h / n
        for c in context:
            g_W[c] += g_h / n
    return loss, g_doc, g_W, g_U


# --------------------------------------------------------------------------
# model file


_LANG_CODE = {Language.JAVA: 0, Language.PYTHON: 1}
_CONFIG_FMT = "<IIqIIIddQIQ"


def _put_str(buf: io.BytesIO, text: str) -> None:
    data = text.encode("utf-8", errors="surrogatepass")
    buf.write(struct.pack("<I", len(data)))
    buf.write(data)


def dump_model(model: Lib2VecModel) -> bytes:
    c = model.config
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    buf.write(struct.pack("<IBB", MODEL_VERSION, model.channel.code, _LANG_CODE[model.language]))
    buf.write(struct.pack(_CONFIG_FMT, c.epochs, c.vector_size,
                          -1 if c.sample_count is None else c.sample_count,
                          c.window, c.negative, c.min_count, c.initial_lr, c.final_lr,
                          c.seed & 0xFFFFFFFFFFFFFFFF, c.infer_epochs, model.training_doc_count))
    buf.write(struct.pack("<Q", len(model.vocab)))
    for token, count in zip(model.vocab.tokens, model.vocab.counts):
        _put_str(buf, token)
        buf.write(struct.pack("<Q", int(count)))
    buf.write(np.ascontiguousarray(model.word_vectors, dtype="<f4").tobytes())
    buf.write(np.ascontiguousarray(model.output_weights, dtype="<f4").tobytes())
    buf.write(struct.pack("<Q", len(model.doc_tags)))
    for tag in model.doc_tags:
        _put_str(buf, tag)
    buf.write(np.ascontiguousarray(model.doc_vectors, dtype="<f4").tobytes())
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


class _Cursor:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptModel("model file truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8", errors="surrogatepass")

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        raw = self.take(rows * cols * 4)
        return np.frombuffer(raw, dtype="<f4").astype(REAL).reshape(rows, cols)


def load_model(data: bytes) -> Lib2VecModel:
    if len(data) < 8 or data[:4] != MODEL_MAGIC:
        raise CorruptModel("not a model file (bad magic)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptModel("model checksum mismatch")
    cur = _Cursor(body)
    cur.take(4)
    version, channel_code, lang_code = cur.unpack("<IBB")
    if version != MODEL_VERSION:
        raise VersionMismatch(f"model format version {version}, expected {MODEL_VERSION}")
    (epochs, size, sample, window, negative, min_count, lr0, lr1, seed, infer_epochs,
     n_train) = cur.unpack(_CONFIG_FMT)
    config = TrainingConfig(epochs, size, None if sample < 0 else sample, window, negative,
                            min_count, lr0, lr1, seed, infer_epochs)
    (n_vocab,) = cur.unpack("<Q")
    tokens, counts = [], []
    for _ in range(n_vocab):
        tokens.append(cur.string())
        counts.append(cur.unpack("<Q")[0])
    counts_arr = np.array(counts, dtype=np.int64)
    vocab = Vocabulary(tokens, counts_arr, {t: i for i, t in enumerate(tokens)},
                       int(counts_arr.sum()))
    W = cur.matrix(n_vocab, size)
    U = cur.matrix(n_vocab, size)
    (n_docs,) = cur.unpack("<Q")
    tags = [cur.string() for _ in range(n_docs)]
    D = cur.matrix(n_docs, size)
    if cur.pos != len(body):
        raise CorruptModel("trailing bytes in model file")
    language = {v: k for k, v in _LANG_CODE.items()}[lang_code]
    return Lib2VecModel(Channel.from_code(channel_code), language, config, vocab,
                        W.copy(), U.copy(), tags, D.copy(), n_train)


def config_dict(config: TrainingConfig) -> dict:
    return asdict(config)
