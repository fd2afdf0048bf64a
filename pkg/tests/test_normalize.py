import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tpldetect.classfile import parse_classfile
from tpldetect.classgen import ClassBuilder
from tpldetect.core import Channel, Language
from tpldetect.ingest import SourceEntry
from tpldetect.normalize import (BYTECODE_POLICY, NormalizationPolicy, ToolFailed, ToolMissing,
                                 adapt_external, descriptor_shape, disassemble, escape_ws,
                                 normalize_source, tokenize_source)

from conftest import one_method_class, rich_class


def tokens(raw, **kw):
    return list(disassemble(parse_classfile(raw), **kw).tokens)


def test_one_method_tokens():
    assert tokens(one_method_class()) == ["METHOD", "()I", "iconst_1", "ireturn"]


def test_package_name_is_erased():
    a = rich_class("com/acme/Widget", "com/acme/Helper")
    b = rich_class("org/other/Widget", "org/other/Helper")
    assert a != b
    assert tokens(a) == tokens(b)


def test_zero_methods_gives_header_only():
    b = ClassBuilder("a/Empty")
    b.add_interface("a/Api")
    b.add_field("x", "J")
    assert tokens(b.to_bytes()) == ["IMPLEMENTS", "CLS_0", "FIELD", "J"]


def test_rich_class_tokens():
    toks = tokens(rich_class())
    assert toks[:6] == ["IMPLEMENTS", "CLS_0", "FIELD", "I", "FIELD", "L"]
    assert "BR_+1" in toks or any(t.startswith("BR_+") for t in toks)
    assert any(t.startswith("BR_-") for t in toks)
    # Names become placeholders, numbered by first use.
    assert "MTD_0" in toks and "FLD_0" in toks
    assert not any("acme" in t for t in toks if not t.startswith('"'))


def test_placeholders_off_keeps_names():
    toks = tokens(rich_class(), policy=NormalizationPolicy(placeholder_identifiers=False))
    assert any("com/acme/Helper" in t for t in toks)


def test_literals_can_be_masked():
    toks = tokens(rich_class(), policy=NormalizationPolicy(keep_literals=False))
    assert not any(t.startswith('"') for t in toks)


def test_descriptor_shape():
    assert descriptor_shape("(Ljava/lang/String;I[J)Lcom/x/Y;") == "(LI[J)L"
    assert descriptor_shape("()V") == "()V"


def test_python_comment_stripped():
    assert normalize_source("x=1 # note", Language.PYTHON).tokens == ("x", "=", "1")


def test_python_def_by_hand():
    doc = normalize_source("def f(a): return a", Language.PYTHON)
    assert list(doc.tokens) == ["def", "f", "(", "a", ")", ":", "return", "a"]


def test_empty_source():
    assert normalize_source("", Language.PYTHON).tokens == ()
    assert normalize_source("", Language.JAVA).tokens == ()


def test_docstring_kept_and_ws_escaped():
    doc = normalize_source('def f():\n    """two\n    lines"""\n', Language.PYTHON)
    doc_token = [t for t in doc.tokens if t.startswith('"""')][0]
    assert " " not in doc_token and "\n" not in doc_token


def test_java_comments_stripped():
    src = "/* head */ int x = 1; // tail\nString s = \"a // b\";"
    assert list(normalize_source(src, Language.JAVA).tokens) == [
        "int", "x", "=", "1", ";", "String", "s", "=", '"a\\u0020//\\u0020b"', ";"]


def test_source_placeholders():
    doc = normalize_source("foo = bar + foo", Language.PYTHON,
                           NormalizationPolicy(placeholder_identifiers=True))
    assert list(doc.tokens) == ["id0", "=", "id1", "+", "id0"]


def test_escape_ws_is_injective_on_spaces():
    assert escape_ws("a b") != escape_ws("a\tb")
    assert " " not in escape_ws("a b")


@given(st.text(max_size=200))
def test_tokenizer_total_and_whitespace_free(text):
    for language in Language:
        doc = normalize_source(text, language)
        assert all(t and not any(c.isspace() for c in t) for t in doc.tokens)


@given(st.lists(st.sampled_from(["x", "=", "1", "(", ")", "foo", "'s'", "+"]), max_size=30))
def test_comment_never_changes_tokens(parts):
    text = " ".join(parts)
    assert (normalize_source(text + "  # trailing", Language.PYTHON).tokens
            == normalize_source(text, Language.PYTHON).tokens)


def test_tokenize_reports_kinds():
    kinds = [t.kind for t in tokenize_source("x = 'a'  # c", Language.PYTHON)]
    assert kinds == ["name", "op", "string", "comment"]


ENTRY = SourceEntry("A.class", "ClassFile", b"\xca\xfe")


def test_adapter_unset():
    with pytest.raises(ToolMissing):
        adapt_external(ENTRY, None, Language.JAVA)


def test_adapter_missing_binary():
    with pytest.raises(ToolMissing):
        adapt_external(ENTRY, "definitely-not-a-tool-xyz {input}", Language.JAVA)


def test_adapter_echo_stub():
    text = "class A { int f() { return 1; } }"
    cmd = f"{sys.executable} -c \"print('{text}')\" {{input}}"
    doc = adapt_external(ENTRY, cmd, Language.JAVA, Channel.SOURCE, "a#source")
    assert doc.tokens == normalize_source(text + "\n", Language.JAVA).tokens
    assert doc.channel is Channel.SOURCE


def test_adapter_failure_captures_stderr():
    cmd = f"{sys.executable} -c \"import sys; sys.stderr.write('boom'); sys.exit(1)\""
    with pytest.raises(ToolFailed) as info:
        adapt_external(ENTRY, cmd, Language.JAVA)
    assert info.value.returncode == 1
    assert "boom" in info.value.stderr


def test_bytecode_policy_default():
    assert BYTECODE_POLICY.placeholder_identifiers
