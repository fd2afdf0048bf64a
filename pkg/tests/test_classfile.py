import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpldetect import classfile as cf
from tpldetect import synth
from tpldetect.classfile import (BadMagic, ClassFormatError, TruncatedInput, UnsupportedVersion,
                                 parse_classfile, write_classfile)

from conftest import one_method_class, rich_class


def test_magic_and_version_accepted():
    raw = one_method_class()
    assert raw[:8] == bytes.fromhex("CAFEBABE00000034")
    model = parse_classfile(raw)
    assert model.magic == 0xCAFEBABE
    assert model.major_version == 52


def test_one_method_decodes_to_iconst_1_ireturn():
    model = parse_classfile(one_method_class())
    assert len(model.methods) == 1
    method = model.methods[0]
    assert model.member_name(method) == "one"
    assert model.member_descriptor(method) == "()I"
    # Frozen oracle: javap prints `iconst_1; ireturn`, opcodes 0x04 and 0xac.
    assert method.code.code == b"\x04\xac"
    assert [i.mnemonic for i in method.code.instructions] == ["iconst_1", "ireturn"]


def test_truncated_in_constant_pool_reports_offset():
    raw = one_method_class()
    with pytest.raises(TruncatedInput) as info:
        parse_classfile(raw[:14])
    assert info.value.offset >= 10
    assert "offset" in str(info.value)


def test_bad_magic():
    with pytest.raises(BadMagic) as info:
        parse_classfile(b"\xca\xfe\xba\xbf" + one_method_class()[4:])
    assert info.value.offset == 0


def test_unsupported_version():
    raw = bytearray(one_method_class())
    raw[6:8] = struct.pack(">H", 99)
    with pytest.raises(UnsupportedVersion):
        parse_classfile(bytes(raw))


def test_empty_input():
    with pytest.raises(TruncatedInput):
        parse_classfile(b"")


def test_trailing_bytes_rejected():
    with pytest.raises(ClassFormatError):
        parse_classfile(one_method_class() + b"\x00")


def test_branch_offsets_decoded():
    model = parse_classfile(rich_class())
    run = model.methods[0]
    goto = [i for i in run.code.instructions if i.mnemonic == "goto"][0]
    assert goto.offset + goto.operands[0] == 0  # jumps back to the loop head


@pytest.mark.parametrize("maker", [one_method_class, rich_class])
def test_write_roundtrip_is_byte_exact(maker):
    raw = maker()
    assert write_classfile(parse_classfile(raw)) == raw


def test_modified_utf8_roundtrip():
    for text in ["", "abc", "nul\x00byte", "é", "\U0001F600"]:
        assert cf.decode_modified_utf8(cf.encode_modified_utf8(text)) == text
    assert b"\x00" not in cf.encode_modified_utf8("a\x00b")


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_generated_classes_parse_and_roundtrip(seed):
    import numpy as np

    rng = np.random.default_rng(seed)
    files = synth.make_java_library(rng, synth.shared_java_motifs(rng, 8), 1)
    (raw,) = files.values()
    assert write_classfile(parse_classfile(raw)) == raw


@given(st.binary(max_size=64))
def test_arbitrary_bytes_only_raise_structured_errors(data):
    try:
        parse_classfile(data)
    except ClassFormatError as exc:
        assert exc.offset >= 0
