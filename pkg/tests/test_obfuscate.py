import ast
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpldetect import classfile as cf
from tpldetect import synth
from tpldetect.classfile import parse_classfile
from tpldetect.classgen import ClassBuilder
from tpldetect.core import Channel, Language, NormalizedDocument
from tpldetect.normalize import disassemble, normalize_source
from tpldetect.obfuscate import (JAVA_PRINT, PY_PRINT, TransformKind, TransformSpec,
                                 apply_source_transform, insert_statements, relocate_methods, rename_functions,
                                 rename_identifiers, rename_packages, rename_packages_bytes,
                                 statement_count)

from conftest import rich_class

PY = Language.PYTHON
JAVA = Language.JAVA


def doc(tokens, language=PY):
    return NormalizedDocument("d", Channel.SOURCE, language, tuple(tokens))


# -- identifiers --------------------------------------------------------------


def test_rename_identifiers_consistent():
    assert rename_identifiers(doc(["foo", "=", "bar", "+", "foo"])).tokens == (
        "id0", "=", "id1", "+", "id0")


def test_rename_identifiers_keeps_keywords():
    assert rename_identifiers(doc(["def", "foo"])).tokens == ("def", "id0")


def test_rename_identifiers_deterministic_and_idempotent():
    d = normalize_source("def f(a):\n    return g(a, 'x')\n", PY)
    once = rename_identifiers(d, seed=4)
    assert once == rename_identifiers(d, seed=4)
    assert rename_identifiers(once) == once


def test_rename_identifiers_rejects_bytecode():
    with pytest.raises(ValueError):
        rename_identifiers(NormalizedDocument("d", Channel.BYTECODE, JAVA, ("x",)))


# -- packages -------------------------------------------------------------------


def pool_strings(model):
    return [c.args[0] for c in model.constant_pool if c is not None and c.tag == cf.UTF8]


def test_package_rename_pool_walk():
    model = parse_classfile(rich_class())
    renamed = rename_packages(model, seed=3)
    strings = pool_strings(renamed)
    # The string literal that happens to spell a class name is untouched.
    literals = [renamed.utf8(c.args[0]) for c in renamed.constant_pool
                if c is not None and c.tag == cf.STRING]
    assert literals == ["com/acme/Widget"]
    assert not any(s.startswith("com/acme/") or "Lcom/acme/" in s for s in strings
                   if s not in literals)
    assert "java/lang/Object" in strings and "(Ljava/lang/String;)I" in strings
    assert renamed.name.endswith("/Widget") and renamed.name.startswith("p0x")


def test_package_rename_default_package():
    b = ClassBuilder("Foo")
    b.add_method("f", "()V", [("return",)])
    renamed = rename_packages(parse_classfile(b.to_bytes()))
    assert renamed.name.startswith("p0x") and renamed.name.endswith("/Foo")


def test_package_rename_restricted():
    model = parse_classfile(rich_class())
    renamed = rename_packages(model, packages={"com/nothing"})
    assert pool_strings(renamed) == pool_strings(model)


def test_package_rename_preserves_tokens():
    raw = rich_class()
    renamed = rename_packages_bytes(raw, seed=9)
    assert renamed != raw
    assert disassemble(parse_classfile(renamed)).tokens == disassemble(parse_classfile(raw)).tokens


@settings(max_examples=25)
@given(st.integers(0, 2**31), st.integers(0, 1000))
def test_package_rename_invariance_on_generated(seed, rename_seed):
    rng = np.random.default_rng(seed)
    (raw,) = synth.make_java_library(rng, synth.shared_java_motifs(rng, 8), 1).values()
    renamed = parse_classfile(rename_packages_bytes(raw, rename_seed))
    assert disassemble(renamed).tokens == disassemble(parse_classfile(raw)).tokens


# -- relocation --------------------------------------------------------------


PY_SRC = '''import os


def f(a):
    return a + 1


@staticmethod
def g(b):
    """Doc."""
    return b * 2


class K:
    def m1(self):
        return 1

    def m2(self):
        return 2

    def m3(self):
        return 3


def h():
    x = 1
    y = 2
    return x + y
'''

JAVA_SRC = '''package a;

public class K {
    private int n = 0;

    public int f(int a) {
        return a + 1;
    }

    public int g(int b) {
        int c = b * 2;
        return c;
    }

    void h() {
        n++;
        System.gc();
    }
}
'''


def multiset(text, language):
    return Counter(normalize_source(text, language).tokens)


@pytest.mark.parametrize("text,language", [(PY_SRC, PY), (JAVA_SRC, JAVA)])
def test_relocation_preserves_tokens(text, language):
    outputs = {relocate_methods(text, language, seed) for seed in range(6)}
    assert len(outputs) > 1
    for out in outputs:
        assert multiset(out, language) == multiset(text, language)
    assert relocate_methods(text, language, 2) == relocate_methods(text, language, 2)


def test_relocated_python_still_parses():
    for seed in range(5):
        ast.parse(relocate_methods(PY_SRC, PY, seed))


def test_single_function_identity():
    src = "def only(x):\n    return x\n"
    assert relocate_methods(src, PY, 7) == src


def test_unparsable_python_left_unchanged():
    src = "def broken(:\n"
    assert relocate_methods(src, PY, 1) == src


def test_rename_functions_python():
    out = rename_functions(PY_SRC, PY, seed=1)
    tree = ast.parse(out)
    names = {n.name for n in ast.walk(tree) if isinstance(n, ast.FunctionDef)}
    assert not names & {"f", "g", "h", "m1"}


# -- insertion --------------------------------------------------------------


TEN = "".join(f"x{i} = {i}\n" for i in range(10))


def test_rate_zero_identity():
    assert insert_statements(PY_SRC, PY, rate=0.0) == PY_SRC
    assert insert_statements(JAVA_SRC, JAVA, rate=0.0) == JAVA_SRC


def test_rate_one_on_ten_statements():
    assert statement_count(TEN, PY) == 10
    out = insert_statements(TEN, PY, rate=1.0, seed=3)
    assert out.count('print("t")') == 10
    ast.parse(out)


@pytest.mark.parametrize("text,language,stmt",
                         [(PY_SRC, PY, PY_PRINT), (JAVA_SRC, JAVA, JAVA_PRINT)])
@pytest.mark.parametrize("rate", [0.2, 0.5, 1.0])
def test_insertion_token_count(text, language, stmt, rate):
    per = len(normalize_source(stmt, language).tokens)
    n = statement_count(text, language)
    k = int(np.floor(rate * n + 0.5))
    out = insert_statements(text, language, rate=rate, seed=5)
    grow = len(normalize_source(out, language).tokens) - len(normalize_source(text, language).tokens)
    assert grow == k * per


def test_java_insert_skips_unreachable():
    out = insert_statements(JAVA_SRC, JAVA, rate=1.0)
    for line_a, line_b in zip(out.splitlines(), out.splitlines()[1:]):
        if line_a.strip().startswith("return"):
            assert "println" not in line_b


def test_apply_source_transform_dispatch():
    spec = TransformSpec(TransformKind.STATEMENT_INSERT, seed=1, rate=0.2)
    assert apply_source_transform(spec, TEN, PY).count("print") == 2
    spec = TransformSpec(TransformKind.FUNCTION_RENAME_RELOCATE, seed=1)
    assert multiset(apply_source_transform(spec, TEN, PY), PY) == multiset(TEN, PY)


def test_transform_spec_validation():
    with pytest.raises(ValueError):
        TransformSpec(TransformKind.STATEMENT_INSERT, rate=1.5)
