import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tpldetect import _kernels
from tpldetect.core import Channel, Language, NormalizedDocument
from tpldetect.embed import (CorruptModel, DegenerateVocabulary, DimensionMismatch, DocVector,
                             EmptyCorpus, Lib2VecModel, NoKnownTokens, TrainingConfig, ZeroVector,
                             build_vocabulary, cosine, dump_model, load_model,
                             pvdm_loss_and_grad, train)


def docs_from(rng, n, length=40, vocab=30):
    words = [f"w{i}" for i in range(vocab)]
    return [NormalizedDocument(f"lib/d{i}.class#bytecode", Channel.BYTECODE, Language.JAVA,
                               tuple(rng.choice(words, size=length)))
            for i in range(n)]


# -- vocabulary ----------------------------------------------------------------


def test_vocabulary_counts_and_order():
    vocab = build_vocabulary([["a", "b", "a"]], min_count=1)
    assert vocab.tokens == ["a", "b"]
    assert vocab.frequency("a") == 2 and vocab.frequency("b") == 1
    assert vocab.index["a"] == 0


def test_vocabulary_min_count():
    assert build_vocabulary([["a", "b", "a"]], min_count=2).tokens == ["a"]


def test_vocabulary_deterministic():
    docs = [["x", "y", "z", "y"], ["z", "q"]]
    assert build_vocabulary(docs, 1).index == build_vocabulary(docs, 1).index


def test_vocabulary_empty():
    with pytest.raises(EmptyCorpus):
        build_vocabulary([])


# -- training ------------------------------------------------------------------


def test_two_single_token_docs_smoke():
    model = train([["alpha"], ["beta"]], TrainingConfig(min_count=1))
    assert model.config.epochs == 10 and model.vector_size == 10
    for m in (model.word_vectors, model.output_weights, model.doc_vectors):
        assert np.all(np.isfinite(m))


def test_degenerate_vocabulary():
    with pytest.raises(DegenerateVocabulary):
        train([["alpha"], ["beta"]], TrainingConfig(min_count=2))
    with pytest.raises(EmptyCorpus):
        train([])


def test_training_is_reproducible(rng):
    docs = docs_from(rng, 20)
    a = train(docs, TrainingConfig(seed=5))
    b = train(docs, TrainingConfig(seed=5))
    assert np.array_equal(a.word_vectors, b.word_vectors)
    assert np.array_equal(a.doc_vectors, b.doc_vectors)
    assert a.epoch_losses == b.epoch_losses
    c = train(docs, TrainingConfig(seed=6))
    assert not np.array_equal(a.word_vectors, c.word_vectors)


def test_loss_decreases(rng):
    model = train(docs_from(rng, 30), TrainingConfig(epochs=10))
    assert model.epoch_losses[-1] < model.epoch_losses[0]
    assert len(model.epoch_losses) == 10


def test_sample_count_consumes_exactly_psi(rng):
    docs = docs_from(rng, 100)
    model = train(docs, TrainingConfig(sample_count=5))
    assert model.training_doc_count == 5
    again = train(docs, TrainingConfig(sample_count=5))
    assert model.doc_tags == again.doc_tags


def test_parallel_training_runs(rng):
    model = train(docs_from(rng, 20), TrainingConfig(workers=3))
    assert np.all(np.isfinite(model.doc_vectors))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainingConfig(initial_lr=0.001, final_lr=0.01)


# -- inference -----------------------------------------------------------------


@pytest.fixture(scope="module")
def toy_model():
    rng = np.random.default_rng(0)
    return train(docs_from(rng, 50), TrainingConfig())


def test_no_known_tokens(toy_model):
    with pytest.raises(NoKnownTokens):
        toy_model.infer_vector(["unknown", "tokens"])


def test_inference_deterministic(toy_model):
    doc = ["w1", "w2", "w3", "w1", "w9"]
    assert np.array_equal(toy_model.infer_vector(doc).values, toy_model.infer_vector(doc).values)


def test_identical_texts_beat_unrelated(toy_model):
    d = ["w1", "w2", "w3", "w4"] * 5
    d_copy = list(d)
    other = ["w20", "w21", "w22", "w29"] * 5
    same = cosine(toy_model.infer_vector(d), toy_model.infer_vector(d_copy))
    diff = cosine(toy_model.infer_vector(d), toy_model.infer_vector(other))
    assert same >= diff
    assert same == pytest.approx(1.0)


def test_inferred_vector_tracks_training_vector(small_desk, small_models):
    # Tolerance fixed after measuring the small desk corpus: the mean
    # own-vector cosine is about 0.72 for bytecode and 0.47 for source.
    from tpldetect import tune
    from tpldetect.ingest import open_archive

    corpora = tune.build_corpora([open_archive(p) for p in small_desk.reference])
    for corpus in corpora:
        model = small_models[(corpus.language, corpus.channel)]
        unit = model.doc_vectors / np.linalg.norm(model.doc_vectors, axis=1, keepdims=True)
        own, others = [], []
        for i, doc in enumerate(corpus.docs):
            assert model.doc_tags[i] == doc.doc_id
            v = model.infer_vector(doc).values
            s = unit @ (v / np.linalg.norm(v))
            own.append(s[i])
            others.append(np.delete(s, i).mean())
        own, others = np.array(own), np.array(others)
        assert (own - others).mean() >= 0.25
        if corpus.channel is Channel.BYTECODE:
            assert own.mean() >= 0.6
            assert np.all(own > others)


# -- cosine --------------------------------------------------------------------


def test_cosine_examples():
    assert cosine(DocVector("u", [1, 0]), DocVector("v", [0, 1])) == 0.0
    assert abs(cosine(DocVector("u", [1, 0]), DocVector("v", [1, 1])) - 0.70710678) <= 1e-8
    with pytest.raises(ZeroVector):
        cosine(DocVector("u", [0, 0]), DocVector("v", [1, 1]))
    with pytest.raises(DimensionMismatch):
        cosine(DocVector("u", [1, 0]), DocVector("v", [1, 1, 1]))


@given(hnp.arrays(np.float32, st.integers(1, 16),
                  elements=st.floats(-1e3, 1e3, width=32, allow_nan=False)))
def test_cosine_self_is_one(values):
    v = DocVector("v", values)
    if v.norm > 1e-3:
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-6)


@given(hnp.arrays(np.float32, 8, elements=st.floats(-10, 10, width=32)),
       hnp.arrays(np.float32, 8, elements=st.floats(-10, 10, width=32)))
def test_cosine_bounded_and_symmetric(a, b):
    u, v = DocVector("u", a), DocVector("v", b)
    if u.norm > 1e-3 and v.norm > 1e-3:
        c = cosine(u, v)
        assert -1.0 <= c <= 1.0
        assert c == cosine(v, u)


# -- gradients -----------------------------------------------------------------


def frozen_batch(seed=3, vocab=12, size=6):
    rng = np.random.default_rng(seed)
    W = rng.normal(0, 0.3, (vocab, size))
    U = rng.normal(0, 0.3, (vocab, size))
    d = rng.normal(0, 0.3, size)
    examples = []
    for _ in range(4):
        context = rng.choice(vocab, size=4, replace=False)
        targets = rng.choice(vocab, size=3, replace=False)
        examples.append((context, targets, [1, 0, 0]))
    return d, W, U, examples


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        hi = f()
        x[i] = old - eps
        lo = f()
        x[i] = old
        g[i] = (hi - lo) / (2 * eps)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)


def test_analytic_gradient_matches_finite_differences():
    d, W, U, ex = frozen_batch()
    _, gd, gW, gU = pvdm_loss_and_grad(d, W, U, ex)
    loss = lambda: pvdm_loss_and_grad(d, W, U, ex)[0]  # noqa: E731
    assert rel_err(gd, numeric_grad(loss, d)) < 1e-4
    assert rel_err(gW, numeric_grad(loss, W)) < 1e-4
    assert rel_err(gU, numeric_grad(loss, U)) < 1e-4


def test_kernel_step_follows_analytic_gradient():
    d, W, U, ex = frozen_batch(vocab=10, size=5)
    context, targets, labels = ex[0]
    loss, gd, gW, gU = pvdm_loss_and_grad(d, W, U, [ex[0]])
    lr = 0.01
    d2, W2, U2 = d.copy(), W.copy(), U.copy()
    h, gh = np.empty(5), np.empty(5)
    k_loss = _kernels.sgd_step(d2, np.asarray(context, np.int64), np.asarray(targets, np.int64),
                               np.asarray(labels, np.int8), W2, U2, lr, True, True, h, gh, 1.0)
    assert k_loss == pytest.approx(loss, rel=1e-12)
    assert np.allclose(d2 - d, -lr * gd, atol=1e-14)
    assert np.allclose(W2 - W, -lr * gW, atol=1e-14)
    assert np.allclose(U2 - U, -lr * gU, atol=1e-14)


# -- persistence ---------------------------------------------------------------


def test_model_roundtrip(toy_model, tmp_path):
    path = tmp_path / "m.l2vm"
    toy_model.save(path)
    back = Lib2VecModel.load(path)
    assert back.config == toy_model.config
    assert back.vocab.tokens == toy_model.vocab.tokens
    assert np.array_equal(back.word_vectors, toy_model.word_vectors)
    doc = ["w3", "w4", "w5", "w3"]
    assert np.array_equal(back.infer_vector(doc).values, toy_model.infer_vector(doc).values)


def test_model_header_records_epochs(toy_model):
    raw = dump_model(toy_model)
    assert raw[:4] == b"L2VM"
    import struct
    epochs, size = struct.unpack_from("<II", raw, 10)
    assert (epochs, size) == (10, 10)


def test_model_corruption_detected(toy_model):
    raw = bytearray(dump_model(toy_model))
    raw[len(raw) // 2] ^= 0xFF
    with pytest.raises(CorruptModel):
        load_model(bytes(raw))
    with pytest.raises(CorruptModel):
        load_model(b"nope")


def test_log_sigmoid_stable():
    assert _kernels._log_sigmoid(-800.0) == pytest.approx(-800.0)
    assert _kernels._log_sigmoid(800.0) == pytest.approx(0.0)
    assert _kernels._log_sigmoid(0.0) == pytest.approx(-math.log(2))
