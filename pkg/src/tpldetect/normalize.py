"""Turn archive entries into whitespace-free token documents.

Two channels exist. The bytecode channel comes from the native classfile
parser: method bodies are disassembled to mnemonics and every symbolic name
is replaced by a positional placeholder, so renaming classes, methods or
packages leaves the document unchanged. The source channel is a flat
tokenization with comments removed. Channels this package cannot produce
natively (Java decompilation, Python bytecode) go through an external
command configured by the caller.
"""

from __future__ import annotations

import logging
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from . import classfile as cf
from . import opcodes as op
from .core import Channel, Language, NormalizedDocument, TPLDetectError

log = logging.getLogger(__name__)

PYTHON_KEYWORDS = frozenset(
    "False None True and as assert async await break class continue def del elif else "
    "except finally for from global if import in is lambda nonlocal not or pass raise "
    "return try while with yield".split()
)
JAVA_KEYWORDS = frozenset(
    "abstract assert boolean break byte case catch char class const continue default do "
    "double else enum extends final finally float for goto if implements import instanceof "
    "int interface long native new package private protected public return short static "
    "strictfp super switch synchronized this throw throws transient try void volatile while "
    "true false null var record yield".split()
)
KEYWORDS = {Language.PYTHON: PYTHON_KEYWORDS, Language.JAVA: JAVA_KEYWORDS}


@dataclass(frozen=True)
class NormalizationPolicy:
    placeholder_identifiers: bool = True
    keep_literals: bool = True
    strip_comments: bool = True


BYTECODE_POLICY = NormalizationPolicy()
SOURCE_POLICY = NormalizationPolicy(placeholder_identifiers=False)

_WS = re.compile(r"\s")


def escape_ws(token: str) -> str:
    """Replace whitespace inside a token by ``\\uXXXX`` escapes."""
    return _WS.sub(lambda m: f"\\u{ord(m.group()):04x}", token)


def decode_text(raw: bytes) -> tuple[str, int]:
    """Decode UTF-8 lossily; return the text and the number of replaced sequences."""
    text = raw.decode("utf-8", errors="replace")
    return text, text.count("�") - raw.decode("utf-8", errors="ignore").count("�")


# --------------------------------------------------------------------------
# bytecode channel


def descriptor_shape(descriptor: str) -> str:
    """Elide class names from a field or method descriptor: ``(Ljava/lang/String;I)V`` -> ``(LI)V``."""
    return escape_ws(re.sub(r"L[^;]*;", "L", descriptor))


class _Names:
    """First-use placeholder assignment, scoped to one document."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.tables: dict[str, dict[str, str]] = {"CLS": {}, "MTD": {}, "FLD": {}}

    def get(self, kind: str, name: str) -> str:
        if not self.enabled:
            return escape_ws(name) or '""'
        table = self.tables[kind]
        if name not in table:
            table[name] = f"{kind}_{len(table)}"
        return table[name]


class _Disassembler:
    def __init__(self, model: cf.ClassFile, policy: NormalizationPolicy):
        self.m = model
        self.pool = model.constant_pool
        self.policy = policy
        self.names = _Names(policy.placeholder_identifiers)

    def utf8(self, index: int) -> str:
        return self.pool[index].args[0]

    def class_token(self, class_index: int) -> str:
        name = self.utf8(self.pool[class_index].args[0])
        if name.startswith("["):
            return descriptor_shape(name)
        return self.names.get("CLS", name)

    def name_and_type(self, index: int) -> tuple[str, str]:
        name_i, desc_i = self.pool[index].args
        return self.utf8(name_i), self.utf8(desc_i)

    def member_tokens(self, index: int) -> list[str]:
        entry = self.pool[index]
        owner, nat = entry.args
        name, desc = self.name_and_type(nat)
        kind = "FLD" if entry.tag == cf.FIELDREF else "MTD"
        return [self.class_token(owner), self.names.get(kind, name), descriptor_shape(desc)]

    def number(self, text: str) -> str:
        return text if self.policy.keep_literals else "NUM"

    def constant_tokens(self, index: int) -> list[str]:
        c = self.pool[index]
        t = c.tag
        if t == cf.INTEGER:
            return [self.number(str(c.value))]
        if t == cf.LONG:
            return [self.number(f"{c.value}L")]
        if t == cf.FLOAT:
            return [self.number(f"{c.value!r}f")]
        if t == cf.DOUBLE:
            return [self.number(f"{c.value!r}d")]
        if t == cf.STRING:
            if not self.policy.keep_literals:
                return ["STR"]
            text = self.utf8(c.args[0])
            return [escape_ws('"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"')]
        if t == cf.CLASS:
            return [self.class_token(index)]
        if t == cf.METHOD_TYPE:
            return ["MT", descriptor_shape(self.utf8(c.args[0]))]
        if t == cf.METHOD_HANDLE:
            return ["MH", str(c.args[0]), *self.member_tokens(c.args[1])]
        if t in (cf.DYNAMIC, cf.INVOKE_DYNAMIC):
            name, desc = self.name_and_type(c.args[1])
            return ["DYN", self.names.get("MTD", name), descriptor_shape(desc)]
        return [c.kind]

    def method_tokens(self, member: cf.Member) -> list[str]:
        out = ["METHOD", descriptor_shape(self.m.member_descriptor(member))]
        if member.code is None:
            return out
        insns = member.code.instructions
        position = {insn.offset: i for i, insn in enumerate(insns)}

        def branch(i: int, pc: int, delta: int) -> str:
            target = position.get(pc + delta)
            if target is None:
                return "BR_?"
            return f"BR_{target - i:+d}"

        for i, insn in enumerate(insns):
            layout = op.LAYOUT[insn.opcode]
            name = insn.mnemonic
            if name in ("ldc_w", "goto_w", "jsr_w"):
                name = name[:-2]
            out.append(name)
            a = insn.operands
            if insn.wide:
                out.extend(str(x) for x in a)
            elif layout in (op.S1, op.S2):
                out.append(self.number(str(a[0])))
            elif layout == op.LOCAL:
                out.append(str(a[0]))
            elif layout in (op.CP1, op.CP2):
                entry = self.pool[a[0]]
                if entry.tag in (cf.FIELDREF, cf.METHODREF, cf.INTERFACE_METHODREF):
                    out.extend(self.member_tokens(a[0]))
                else:
                    out.extend(self.constant_tokens(a[0]))
            elif layout in (op.BR2, op.BR4):
                out.append(branch(i, insn.offset, a[0]))
            elif layout == op.IINC:
                out.extend((str(a[0]), self.number(str(a[1]))))
            elif layout == op.NEWARRAY:
                out.append(op.NEWARRAY_TYPES[a[0]])
            elif layout == op.INVOKEINTERFACE:
                out.extend(self.member_tokens(a[0]))
            elif layout == op.INVOKEDYNAMIC:
                out.extend(self.constant_tokens(a[0])[1:])
            elif layout == op.MULTIANEWARRAY:
                out.extend((self.class_token(a[0]), str(a[1])))
            elif layout == op.TABLESWITCH:
                default, low, high, targets = a
                out.extend((self.number(str(low)), self.number(str(high)),
                            branch(i, insn.offset, default)))
                out.extend(branch(i, insn.offset, d) for d in targets)
            elif layout == op.LOOKUPSWITCH:
                default, pairs = a
                out.append(branch(i, insn.offset, default))
                for match, d in pairs:
                    out.extend((self.number(str(match)), branch(i, insn.offset, d)))
        return out

    def tokens(self) -> list[str]:
        out: list[str] = []
        for index in self.m.interfaces:
            out += ["IMPLEMENTS", self.class_token(index)]
        for member in self.m.fields:
            out += ["FIELD", descriptor_shape(self.m.member_descriptor(member))]
        for member in self.m.methods:
            out += self.method_tokens(member)
        return out


def disassemble(model: cf.ClassFile, policy: NormalizationPolicy = BYTECODE_POLICY,
                doc_id: str = "") -> NormalizedDocument:
    """Bytecode-channel document for a parsed class.

    Layout: class-level header tokens (``IMPLEMENTS CLS_n`` per interface,
    ``FIELD <shape>`` per field) followed, for each method in classfile order,
    by ``METHOD <descriptor shape>`` and its instruction tokens.
    """
    tokens = _Disassembler(model, policy).tokens()
    return NormalizedDocument(doc_id, Channel.BYTECODE, Language.JAVA, tuple(tokens))


# --------------------------------------------------------------------------
# source channel


class Token(NamedTuple):
    kind: str  # "comment", "string", "number", "name", "op"
    text: str
    start: int
    end: int


_NUMBER = (r"(?:0[xX][0-9a-fA-F_]+|0[bB][01_]+|0[oO][0-7_]+"
           r"|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d[\d_]*)?)[jJlLfFdD]?")
_NAME = r"[^\W\d]\w*"

_PY_STRING = (r"(?:[rRbBuUfF]{1,2})?(?:'''(?:\\.|[^\\])*?(?:'''|\Z)"
              r'|"""(?:\\.|[^\\])*?(?:"""|\Z)'
              r"|'(?:\\.|[^\\'\n])*(?:'|$)"
              r'|"(?:\\.|[^\\"\n])*(?:"|$))')
_JAVA_STRING = (r'(?:"""(?:\\.|[^\\])*?(?:"""|\Z)'
                r'|"(?:\\.|[^\\"\n])*(?:"|$)'
                r"|'(?:\\.|[^\\'\n])*(?:'|$))")

_SCANNERS = {
    Language.PYTHON: re.compile(
        rf"(?P<ws>\s+)|(?P<comment>#[^\n]*)|(?P<string>{_PY_STRING})"
        rf"|(?P<number>{_NUMBER})|(?P<name>{_NAME})|(?P<op>\S)",
        re.MULTILINE | re.DOTALL,
    ),
    Language.JAVA: re.compile(
        rf"(?P<ws>\s+)|(?P<comment>//[^\n]*|/\*.*?(?:\*/|\Z))|(?P<string>{_JAVA_STRING})"
        rf"|(?P<number>{_NUMBER})|(?P<name>{_NAME})|(?P<op>\S)",
        re.MULTILINE | re.DOTALL,
    ),
}


def tokenize_source(text: str, language: Language) -> list[Token]:
    """Lexical scan keeping comments; every punctuation character is its own token."""
    out = []
    for m in _SCANNERS[Language(language)].finditer(text):
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(), m.start(), m.end()))
    return out


def normalize_source(text: str, language: Language, policy: NormalizationPolicy = SOURCE_POLICY,
                     doc_id: str = "") -> NormalizedDocument:
    language = Language(language)
    keywords = KEYWORDS[language]
    placeholders: dict[str, str] = {}
    tokens = []
    for tok in tokenize_source(text, language):
        kind, value = tok.kind, tok.text
        if kind == "comment":
            if policy.strip_comments:
                continue
        elif kind == "string" and not policy.keep_literals:
            value = "STR"
        elif kind == "number" and not policy.keep_literals:
            value = "NUM"
        elif kind == "name" and policy.placeholder_identifiers and value not in keywords:
            value = placeholders.setdefault(value, f"id{len(placeholders)}")
        tokens.append(escape_ws(value))
    return NormalizedDocument(doc_id, Channel.SOURCE, language, tuple(tokens))


# --------------------------------------------------------------------------
# external tools


class ToolMissing(TPLDetectError):
    pass


class ToolFailed(TPLDetectError):
    def __init__(self, message: str, returncode: int, stderr: str):
        super().__init__(message)
        self.returncode = returncode
        self.stderr = stderr


def adapt_external(entry, command_template: str | None, language: Language,
                   channel: Channel = Channel.SOURCE, doc_id: str = "",
                   policy: NormalizationPolicy = SOURCE_POLICY,
                   timeout: float = 60.0) -> NormalizedDocument:
    """Run an external converter over ``entry`` and tokenize what it prints.

    ``command_template`` is split shell-style; ``{input}`` is replaced by the
    path of a temporary file holding the entry's bytes.
    """
    if not command_template:
        raise ToolMissing("no command template configured")
    suffix = Path(entry.relative_path).suffix
    with tempfile.TemporaryDirectory(prefix="tpldetect-") as tmp:
        path = Path(tmp) / f"input{suffix}"
        path.write_bytes(entry.raw_bytes)
        argv = [part.replace("{input}", str(path)) for part in shlex.split(command_template)]
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=timeout)
        except FileNotFoundError as exc:
            raise ToolMissing(f"command not found: {argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise ToolFailed(f"{argv[0]} timed out after {timeout}s", -1, "") from exc
    stderr = proc.stderr.decode("utf-8", errors="replace")
    if proc.returncode != 0:
        raise ToolFailed(f"{argv[0]} exited with {proc.returncode}", proc.returncode, stderr)
    text, _ = decode_text(proc.stdout)
    doc = normalize_source(text, language, policy, doc_id)
    return NormalizedDocument(doc.doc_id, Channel(channel), doc.language, doc.tokens)
