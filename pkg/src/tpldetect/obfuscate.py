"""Semantics-preserving rewrites used to test how well detection survives obfuscation.

Source transforms work on raw text before normalization, as a real
obfuscator would; the package rename works on the parsed classfile, so the
invariance it is meant to demonstrate has to survive the real pipeline.
"""

from __future__ import annotations

import ast
import enum
import logging
import math
import re
import zlib
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import classfile as cf
from .core import Channel, Language, NormalizedDocument, TPLDetectError
from .normalize import KEYWORDS, tokenize_source

log = logging.getLogger(__name__)

PY_PRINT = 'print("t")'
JAVA_PRINT = 'System.out.println("t");'

_IDENT = re.compile(r"[^\W\d]\w*\Z")
_CLASS_IN_DESC = re.compile(r"L([^;<>]+);")


class SegmentationFailed(TPLDetectError):
    pass


class TransformKind(str, enum.Enum):
    PACKAGE_RENAME = "package-rename"
    FUNCTION_RENAME_RELOCATE = "function-relocate"
    STATEMENT_INSERT = "statement-insert"
    IDENTIFIER_RENAME = "identifier-rename"


@dataclass(frozen=True)
class TransformSpec:
    kind: TransformKind
    seed: int = 0
    rate: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "kind", TransformKind(self.kind))
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


def _rng(seed: int, *salt) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, *salt])


# --------------------------------------------------------------------------
# identifiers


def rename_identifiers(doc: NormalizedDocument, seed: int = 0) -> NormalizedDocument:
    """Rename every non-keyword identifier to ``idN`` in order of first use.

    The canonical numbering does not depend on ``seed``; it is accepted so the
    transform has the same signature as the others.
    """
    if doc.channel is not Channel.SOURCE:
        raise ValueError("identifier renaming applies to source-channel documents")
    keywords = KEYWORDS[doc.language]
    mapping: dict[str, str] = {}
    out = []
    for tok in doc.tokens:
        if _IDENT.match(tok) and tok not in keywords:
            tok = mapping.setdefault(tok, f"id{len(mapping)}")
        out.append(tok)
    return NormalizedDocument(doc.doc_id, doc.channel, doc.language, tuple(out))


# --------------------------------------------------------------------------
# packages


def _new_package(package: str, seed: int) -> str:
    return f"p0x{zlib.crc32(f'{seed}:{package}'.encode()):x}"


PLATFORM_PACKAGES = ("java/", "javax/", "jdk/", "sun/")


def _rename_class(name: str, seed: int, only) -> str:
    if name.startswith("["):
        return _rename_descriptor(name, seed, only)
    package, _, simple = name.rpartition("/")
    if only is None:
        if name.startswith(PLATFORM_PACKAGES):
            return name
    elif package not in only:
        return name
    return f"{_new_package(package, seed)}/{simple}"


def _rename_descriptor(desc: str, seed: int, only) -> str:
    return _CLASS_IN_DESC.sub(lambda m: f"L{_rename_class(m.group(1), seed, only)};", desc)


def rename_packages(model: cf.ClassFile, seed: int = 0, packages=None) -> cf.ClassFile:
    """Move every class the pool names into a seeded package.

    Class-name and descriptor Utf8 entries are rewritten in place, so all
    references stay consistent. Classes in the default package get a package
    too. Platform classes (``java/``, ``javax/``, ...) keep their names, as a
    repackaging obfuscator must leave them. ``packages`` restricts the rename
    to those (slash-separated) package names. Generic ``Signature`` attributes are left alone.
    """
    only = None if packages is None else {p.replace(".", "/") for p in packages}
    pool = list(model.constant_pool)
    names: set[int] = set()
    descriptors: set[int] = set()
    literals: set[int] = set()
    for entry in pool:
        if entry is None:
            continue
        if entry.tag == cf.CLASS:
            names.add(entry.args[0])
        elif entry.tag == cf.NAME_AND_TYPE:
            descriptors.add(entry.args[1])
        elif entry.tag == cf.METHOD_TYPE:
            descriptors.add(entry.args[0])
        elif entry.tag == cf.STRING:
            literals.add(entry.args[0])
    for member in model.fields + model.methods:
        descriptors.add(member.descriptor_index)

    repoint: dict[int, int] = {}  # for Utf8 entries shared with string literals
    for index in sorted(names | descriptors):
        text = pool[index].args[0]
        new = _rename_class(text, seed, only) if index in names else _rename_descriptor(text, seed, only)
        if new == text:
            continue
        if index in literals:
            pool.append(cf.Constant(cf.UTF8, (new,)))
            repoint[index] = len(pool) - 1
        else:
            pool[index] = cf.Constant(cf.UTF8, (new,))
    if len(pool) > 0xFFFF:
        raise ValueError("constant pool overflow while renaming packages")
    if repoint:
        for i, entry in enumerate(pool):
            if entry is None:
                continue
            if entry.tag == cf.CLASS and entry.args[0] in repoint:
                pool[i] = cf.Constant(cf.CLASS, (repoint[entry.args[0]],))
            elif entry.tag == cf.NAME_AND_TYPE and entry.args[1] in repoint:
                pool[i] = cf.Constant(cf.NAME_AND_TYPE, (entry.args[0], repoint[entry.args[1]]))
            elif entry.tag == cf.METHOD_TYPE and entry.args[0] in repoint:
                pool[i] = cf.Constant(cf.METHOD_TYPE, (repoint[entry.args[0]],))

        def fix(members):
            return tuple(m if m.descriptor_index not in repoint else
                         cf.Member(m.access_flags, m.name_index, repoint[m.descriptor_index],
                                   m.attributes, m.code) for m in members)
        from dataclasses import replace
        model = replace(model, fields=fix(model.fields), methods=fix(model.methods))
    return model.with_pool(pool)


def rename_packages_bytes(raw: bytes, seed: int = 0, packages=None) -> bytes:
    """``rename_packages`` on serialized classfile bytes."""
    return cf.write_classfile(rename_packages(cf.parse_classfile(raw), seed, packages))


# --------------------------------------------------------------------------
# segmentation of function blocks


def _line_starts(text: str) -> list[int]:
    return [0] + [m.end() for m in re.finditer("\n", text)]


def _lines(text: str) -> list[str]:
    # ast numbers lines on "\n" only, unlike str.splitlines
    return text.split("\n")[:-1] if text.endswith("\n") else text.split("\n")


def _python_groups(text: str) -> list[list[tuple[int, int]]]:
    """Character spans of sibling ``def`` blocks, grouped by enclosing body."""
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError) as exc:
        raise SegmentationFailed(f"python source does not parse: {exc}") from exc
    starts = _line_starts(text)
    lines = _lines(text)

    def span(node):
        first = min([node.lineno] + [d.lineno for d in node.decorator_list])
        last = node.end_lineno
        return starts[first - 1], min(len(text), starts[last - 1] + len(lines[last - 1]) + 1)

    groups = []

    def visit(body):
        funcs = [n for n in body if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))]
        stmt_lines = {}
        for n in body:
            stmt_lines.setdefault(n.lineno, []).append(n)
        for f in funcs:
            # A block is movable only if nothing else shares its first or last line.
            if len(stmt_lines.get(f.lineno, ())) > 1 or any(
                    n is not f and n.lineno <= f.end_lineno and n.end_lineno >= f.lineno
                    for n in body):
                raise SegmentationFailed(f"line {f.lineno}: function shares lines with another statement")
        if len(funcs) > 1:
            groups.append([span(f) for f in funcs])
        for n in body:
            if isinstance(n, ast.ClassDef):
                visit(n.body)

    visit(tree.body)
    return groups


def _java_members(text: str):
    """Yield (start, end, name, is_method, depth) for members of every type body."""
    toks = [t for t in tokenize_source(text, Language.JAVA) if t.kind != "comment"]
    stack: list[str] = []  # "type" or "block" per open brace
    members = []
    member_start = 0
    header: list = []
    paren = 0
    for i, tok in enumerate(toks):
        in_type = not stack or stack[-1] == "type"
        if tok.text == "(":
            paren += 1
        elif tok.text == ")":
            paren -= 1
        if tok.text == "{":
            texts = [h.text for h in header]
            is_type = "(" not in texts and any(
                kw in texts for kw in ("class", "interface", "enum", "record"))
            if in_type and stack:
                members.append(["open", member_start, None, header[:],
                                not is_type and "(" in texts, len(stack)])
            stack.append("type" if is_type else "block")
            header = []
            member_start = tok.end
        elif tok.text == "}":
            if not stack:
                raise SegmentationFailed(f"offset {tok.start}: unbalanced closing brace")
            stack.pop()
            if stack and stack[-1] == "type":
                for m in reversed(members):
                    if m[0] == "open" and m[5] == len(stack):
                        m[0], m[2] = "closed", tok.end
                        break
                member_start = tok.end
            header = []
        elif tok.text == ";" and in_type and paren == 0:
            member_start = tok.end
            header = []
        else:
            if in_type and not header:
                member_start = _line_start(text, tok.start, member_start)
            header.append(tok)
    if stack or paren:
        raise SegmentationFailed("unbalanced braces or parentheses")
    out = []
    for state, start, end, head, is_method, depth in members:
        if state != "closed":
            raise SegmentationFailed("unterminated member block")
        name = None
        for j, h in enumerate(head):
            if h.text == "(" and j > 0 and head[j - 1].kind == "name":
                name = head[j - 1].text
                break
        out.append((start, end, name, is_method, depth))
    return out


def _line_start(text: str, pos: int, floor: int) -> int:
    """Start of the line holding ``pos`` unless other code precedes it on that line."""
    line = text.rfind("\n", 0, pos) + 1
    return line if line >= floor and not text[line:pos].strip() else pos


def _java_groups(text: str) -> list[list[tuple[int, int]]]:
    members = _java_members(text)
    groups: dict[tuple, list] = {}
    # Siblings share a depth and the nearest enclosing type member.
    for start, end, _, is_method, depth in members:
        if not is_method:
            continue
        parent = max((m for m in members if m[0] < start and m[1] >= end and not m[3]),
                     key=lambda m: m[0], default=None)
        groups.setdefault((depth, parent and parent[0]), []).append((start, end))
    return [g for g in groups.values() if len(g) > 1]


def _permute_spans(text: str, groups, seed: int) -> str:
    pieces = []  # (start, end, replacement)
    for g, spans in enumerate(groups):
        order = _rng(seed, g).permutation(len(spans))
        for slot, src in zip(spans, order):
            s, e = spans[src]
            pieces.append((slot[0], slot[1], text[s:e]))
    out, pos = [], 0
    for s, e, rep in sorted(pieces):
        out.append(text[pos:s])
        out.append(rep)
        pos = e
    out.append(text[pos:])
    return "".join(out)


def relocate_methods(source_text: str, language: Language, seed: int = 0) -> str:
    """Shuffle the order of sibling function blocks; other text stays put."""
    language = Language(language)
    if not source_text.endswith("\n"):
        # the last block must carry a line break wherever it lands
        return relocate_methods(source_text + "\n", language, seed)[:-1]
    try:
        groups = _python_groups(source_text) if language is Language.PYTHON else _java_groups(source_text)
    except SegmentationFailed as exc:
        log.warning("relocation skipped: %s", exc)
        return source_text
    return _permute_spans(source_text, groups, seed)


def _defined_functions(text: str, language: Language) -> list[str]:
    if language is Language.PYTHON:
        try:
            tree = ast.parse(text)
        except (SyntaxError, ValueError):
            return []
        return sorted({n.name for n in ast.walk(tree)
                       if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))
                       and not (n.name.startswith("__") and n.name.endswith("__"))})
    try:
        members = _java_members(text)
    except SegmentationFailed:
        return []
    return sorted({m[2] for m in members if m[3] and m[2] and m[2] != "main"})


def rename_functions(source_text: str, language: Language, seed: int = 0) -> str:
    """Give every function defined in the file a seeded meaningless name."""
    language = Language(language)
    names = _defined_functions(source_text, language)
    if not names:
        return source_text
    mapping = {n: f"f{zlib.crc32(f'{seed}:{n}'.encode()):08x}" for n in names}
    out, pos = [], 0
    for tok in tokenize_source(source_text, language):
        if tok.kind == "name" and tok.text in mapping:
            out.append(source_text[pos:tok.start])
            out.append(mapping[tok.text])
            pos = tok.end
    out.append(source_text[pos:])
    return "".join(out)


def rename_and_relocate(source_text: str, language: Language, seed: int = 0) -> str:
    return relocate_methods(rename_functions(source_text, language, seed), language, seed)


# --------------------------------------------------------------------------
# statement insertion


def _python_boundaries(text: str) -> list[tuple[int, str]]:
    """(insert offset, indentation) after each simple statement on its own lines."""
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError) as exc:
        log.warning("statement insertion skipped: %s", exc)
        return []
    starts = _line_starts(text)
    lines = [line + "\n" for line in _lines(text)]
    if not text.endswith("\n"):
        lines[-1] = lines[-1][:-1]
    first_lines = Counter(node.lineno for node in ast.walk(tree) if isinstance(node, ast.stmt))
    out = []
    for node in ast.walk(tree):
        if not isinstance(node, ast.stmt) or hasattr(node, "body"):
            continue
        if first_lines[node.end_lineno] > (node.lineno == node.end_lineno):
            continue  # another statement starts on the line this one ends on
        line = lines[node.lineno - 1]
        indent = line[:len(line) - len(line.lstrip())]
        if len(indent.encode("utf-8")) != node.col_offset:
            continue  # statement follows something else on its line, e.g. "if x: y"
        last = lines[node.end_lineno - 1]
        end = starts[node.end_lineno - 1] + len(last)
        out.append((end, indent, last.endswith("\n")))
    out.sort()
    return [(pos, indent + PY_PRINT + "\n" if nl else "\n" + indent + PY_PRINT)
            for pos, indent, nl in out]


def _java_boundaries(text: str) -> list[tuple[int, str]]:
    stack: list[str] = []
    header: list[str] = []
    paren = 0
    out = []
    for tok in tokenize_source(text, Language.JAVA):
        if tok.kind == "comment":
            continue
        t = tok.text
        if t == "(":
            paren += 1
        elif t == ")":
            paren -= 1
        elif t == "{":
            is_type = any(h in ("class", "interface", "enum", "record") for h in header) \
                and "(" not in header
            stack.append("type" if is_type else "block")
            header = []
            continue
        elif t == "}":
            if stack:
                stack.pop()
            header = []
            continue
        elif t == ";":
            # after a jump the print would be unreachable, which javac rejects
            if paren == 0 and stack and stack[-1] == "block" and not (
                    header and header[0] in ("return", "throw", "break", "continue")):
                out.append((tok.end, " " + JAVA_PRINT))
            header = []
            continue
        header.append(t)
    return out


def insert_statements(source_text: str, language: Language, rate: float = 0.2,
                      seed: int = 0) -> str:
    """Insert a print statement after a seeded fraction ``rate`` of statements."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    language = Language(language)
    sites = _python_boundaries(source_text) if language is Language.PYTHON \
        else _java_boundaries(source_text)
    k = math.floor(rate * len(sites) + 0.5)
    if k == 0:
        return source_text
    chosen = np.sort(_rng(seed, 1).choice(len(sites), size=k, replace=False))
    out, pos = [], 0
    for i in chosen:
        at, stmt = sites[i]
        out.append(source_text[pos:at])
        out.append(stmt)
        pos = at
    out.append(source_text[pos:])
    return "".join(out)


def statement_count(source_text: str, language: Language) -> int:
    """Number of statement boundaries ``insert_statements`` can use."""
    language = Language(language)
    return len(_python_boundaries(source_text) if language is Language.PYTHON
               else _java_boundaries(source_text))


def apply_source_transform(spec: TransformSpec, source_text: str, language: Language) -> str:
    """Text-level transforms; identifier renaming happens on the normalized document."""
    if spec.kind is TransformKind.FUNCTION_RENAME_RELOCATE:
        return rename_and_relocate(source_text, language, spec.seed)
    if spec.kind is TransformKind.STATEMENT_INSERT:
        return insert_statements(source_text, language, spec.rate, spec.seed)
    return source_text
