import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpldetect.core import Channel, Language
from tpldetect.embed import DimensionMismatch, DocVector
from tpldetect.index import (CorruptIndex, DuplicateLibrary, EmptyChannel, ReferenceIndex,
                             VersionMismatch)
from tpldetect.ingest import LibraryMetadata

BC = Channel.BYTECODE
SC = Channel.SOURCE


def meta(name="lib"):
    return LibraryMetadata(name, "1.0", "util")


def vecs(lib, rows, channel=BC, ext="class"):
    return [(channel, DocVector(f"{lib}/f{i}.{ext}#{channel.value}", r)) for i, r in enumerate(rows)]


def random_index(rng, n_libs, per_lib, dim=10):
    index = ReferenceIndex()
    for j in range(n_libs):
        index.add_library(f"L{j:03d}", meta(f"L{j}"), vecs(f"L{j:03d}", rng.normal(size=(per_lib, dim))))
    return index


def brute_force(index, probe, channel, k):
    """Independent oracle: math.fsum cosine over every record, full sort."""
    p = [float(x) for x in probe.values]
    pn = math.sqrt(math.fsum(x * x for x in p))
    scored = []
    for doc_id, ch, lib, values in index.records():
        if ch is not channel:
            continue
        v = [float(x) for x in values]
        score = math.fsum(a * b for a, b in zip(p, v)) / (pn * math.sqrt(math.fsum(x * x for x in v)))
        scored.append((-score, doc_id, lib))
    scored.sort()
    return [(d, l, -s) for s, d, l in scored[:k]]


def test_add_library_counts():
    index = ReferenceIndex()
    index.add_library("a", meta(), vecs("a", np.eye(3)))
    assert len(index) == 3 and list(index.catalog) == ["a"]


def test_duplicate_library_leaves_index_unchanged():
    index = ReferenceIndex()
    index.add_library("a", meta(), vecs("a", np.eye(3)))
    with pytest.raises(DuplicateLibrary):
        index.add_library("a", meta(), vecs("b", np.eye(3)))
    assert len(index) == 3


def test_wrong_dimension_is_atomic():
    index = ReferenceIndex()
    index.add_library("a", meta(), vecs("a", np.eye(3)))
    bad = vecs("b", np.eye(3)) + [(BC, DocVector("b/x.class#bytecode", np.ones(4)))]
    with pytest.raises(DimensionMismatch):
        index.add_library("b", meta(), bad)
    assert len(index) == 3 and "b" not in index.catalog


def test_probe_in_index_scores_one():
    rng = np.random.default_rng(0)
    index = random_index(rng, 3, 5)
    doc_id, _, _, values = next(index.records())
    top = index.query_top_k(DocVector("p", values), BC, 3)
    assert top[0].doc_id == doc_id
    assert abs(top[0].score - 1.0) <= 1e-9


def test_k_larger_than_population():
    index = random_index(np.random.default_rng(1), 2, 3)
    assert len(index.query_top_k(DocVector("p", np.ones(10)), BC, 100)) == 6


def test_empty_channel():
    index = random_index(np.random.default_rng(1), 1, 2)
    with pytest.raises(EmptyChannel):
        index.query_top_k(DocVector("p", np.ones(10)), SC, 5)


def test_language_filter():
    index = ReferenceIndex()
    index.add_library("j", meta(), vecs("j", np.eye(2), SC, "class"))
    index.add_library("p", meta(), vecs("p", np.eye(2), SC, "py"))
    hits = index.query_top_k(DocVector("q", [1, 0]), SC, 5, Language.PYTHON)
    assert {h.library_id for h in hits} == {"p"}


def test_ties_broken_by_doc_id():
    index = ReferenceIndex()
    index.add_library("b", meta(), [(BC, DocVector("b/z.class#bytecode", [1, 0]))])
    index.add_library("a", meta(), [(BC, DocVector("a/y.class#bytecode", [2, 0]))])
    hits = index.query_top_k(DocVector("q", [1, 0]), BC, 1)
    assert hits[0].doc_id == "a/y.class#bytecode"


def test_query_above_is_strict_superset_of_threshold():
    index = random_index(np.random.default_rng(2), 5, 10)
    probe = DocVector("p", np.random.default_rng(3).normal(size=10))
    above = index.query_above(probe, BC, 0.2)
    assert all(m.score >= 0.2 for m in above)
    every = index.query_top_k(probe, BC, len(index))
    assert above == [m for m in every if m.score >= 0.2]


def test_random_200_matches_oracle():
    rng = np.random.default_rng(4)
    index = random_index(rng, 20, 10)
    for _ in range(10):
        probe = DocVector("p", rng.normal(size=10))
        got = index.query_top_k(probe, BC, 200)
        want = brute_force(index, probe, BC, 200)
        assert [m.doc_id for m in got] == [w[0] for w in want]
        assert np.allclose([m.score for m in got], [w[2] for w in want], atol=1e-9, rtol=0)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 12))
def test_topk_property(seed, k, per_lib):
    rng = np.random.default_rng(seed)
    index = random_index(rng, 3, per_lib, dim=4)
    probe = DocVector("p", rng.normal(size=4))
    got = index.query_top_k(probe, BC, k)
    want = brute_force(index, probe, BC, k)
    assert [(m.doc_id, m.library_id) for m in got] == [(w[0], w[1]) for w in want]


def test_save_load_answers_identically(tmp_path):
    rng = np.random.default_rng(5)
    index = random_index(rng, 10, 10)
    index.save(tmp_path / "idx")
    back = ReferenceIndex.load(tmp_path / "idx")
    assert list(back.catalog) == list(index.catalog)
    for _ in range(100):
        probe = DocVector("p", rng.normal(size=10))
        assert back.query_top_k(probe, BC, 5) == index.query_top_k(probe, BC, 5)


def test_tampered_vectors_rejected(tmp_path):
    index = random_index(np.random.default_rng(6), 2, 3)
    d = index.save(tmp_path / "idx")
    raw = bytearray((d / "vectors.bin").read_bytes())
    raw[-3] ^= 0x01
    (d / "vectors.bin").write_bytes(bytes(raw))
    with pytest.raises(CorruptIndex):
        ReferenceIndex.load(d)


def test_tampered_catalog_rejected(tmp_path):
    index = random_index(np.random.default_rng(6), 2, 3)
    d = index.save(tmp_path / "idx")
    (d / "catalog.tsv").write_text("L000\tL0\t1.0\tutil\t2\n")
    with pytest.raises(CorruptIndex):
        ReferenceIndex.load(d)


def test_version_mismatch(tmp_path):
    import struct
    import zlib

    index = random_index(np.random.default_rng(6), 1, 1)
    d = index.save(tmp_path / "idx")
    raw = bytearray((d / "vectors.bin").read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    (d / "vectors.bin").write_bytes(bytes(raw))
    (d / "checksum").write_text(f"{zlib.crc32(bytes(raw)):08x}\n")
    with pytest.raises(VersionMismatch):
        ReferenceIndex.load(d)


def test_empty_roundtrip(tmp_path):
    d = ReferenceIndex().save(tmp_path / "idx")
    back = ReferenceIndex.load(d)
    assert len(back) == 0 and back.catalog == {}


def test_missing_files(tmp_path):
    with pytest.raises(CorruptIndex):
        ReferenceIndex.load(tmp_path / "nothing")
