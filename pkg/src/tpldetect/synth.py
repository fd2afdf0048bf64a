"""Synthetic TPL corpora for tests, acceptance runs and experiment scripts.

Each library gets its own naming vocabulary, string literals and a subset of
code "motifs" (short instruction or statement patterns); files are random
compositions of the library's motifs. Files within a library therefore
share idioms while every file stays distinct, which is roughly how real
libraries look to a bag-of-context model.
"""

from __future__ import annotations

import builtins
import io
import keyword
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classgen import ACC_PUBLIC, ACC_STATIC, ClassBuilder

_ONSETS = ["b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v",
           "w", "z", "br", "cl", "dr", "fl", "gr", "pl", "st", "tr", "sh", "ch", "th", "qu"]
_NUCLEI = ["a", "e", "i", "o", "u", "ai", "ea", "io", "ou", "y"]
_CODAS = ["", "", "n", "r", "s", "t", "l", "x", "m", "ck", "nd", "st"]

_JDK_TYPES = ["java/lang/String", "java/lang/Object", "java/util/List", "java/util/Map",
              "java/lang/Integer", "java/io/InputStream", "java/util/ArrayList",
              "java/util/HashMap", "java/lang/StringBuilder", "java/util/Iterator"]
_PY_BUILTINS = ["len", "range", "sorted", "isinstance", "min", "max", "sum", "enumerate",
                "zip", "dict", "list", "set", "str", "int", "any", "all", "getattr", "repr"]


# Generated names must stay valid identifiers in both languages.
_RESERVED = frozenset(keyword.kwlist) | {
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while", "var", "record", "yield"} | set(dir(builtins))


def pseudo_word(rng: np.random.Generator, syllables: int | None = None) -> str:
    n = syllables or int(rng.integers(1, 4))
    return "".join(_ONSETS[rng.integers(len(_ONSETS))] + _NUCLEI[rng.integers(len(_NUCLEI))]
                   + _CODAS[rng.integers(len(_CODAS))] for _ in range(n))


def _words(rng: np.random.Generator, n: int) -> list[str]:
    out: list[str] = []
    while len(out) < n:
        w = pseudo_word(rng)
        if w not in out and len(w) > 2 and w not in _RESERVED:
            out.append(w)
    return out


def _camel(parts: list[str]) -> str:
    return parts[0] + "".join(p.capitalize() for p in parts[1:])


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


# --------------------------------------------------------------------------
# Java


@dataclass
class _JavaTheme:
    package: str
    classes: list[str]
    methods: list[str]
    fields: list[str]
    strings: list[str]
    motifs: list[list[tuple]]
    numbers: list[int]


_DESCRIPTORS = ["()I", "(I)I", "(II)I", "(Ljava/lang/String;)I", "(Ljava/lang/String;)V",
                "()Ljava/lang/String;", "(I)Ljava/lang/Object;", "(Ljava/lang/Object;)Z",
                "(J)J", "()V", "(Ljava/util/List;I)V", "(Ljava/util/Map;)Ljava/lang/String;"]


def _java_primitive(rng: np.random.Generator, theme_names) -> list[tuple]:
    """One primitive step; operands prefixed with '$' are filled per file."""
    classes, methods, fields = theme_names
    kind = int(rng.integers(24))
    if kind >= 20:
        return _java_expression(rng, theme_names)
    c = _pick(rng, classes)
    m = _pick(rng, methods)
    f = _pick(rng, fields)
    d = _pick(rng, _DESCRIPTORS)
    local = int(rng.integers(1, 6))
    if kind == 0:
        return [("aload_0",), ("getfield", ("$this", f, "I")), ("$int",), ("iadd",),
                ("istore", local)]
    if kind == 1:
        return [("aload_0",), ("aload_1",), ("invokevirtual", (c, m, "(Ljava/lang/String;)I")),
                ("istore", local)]
    if kind == 2:
        return [("new", c), ("dup",), ("$str",),
                ("invokespecial", (c, "<init>", "(Ljava/lang/String;)V")), ("astore", local)]
    if kind == 3:
        return [("iconst_0",), ("istore", local), ("label", "$L0"), ("iload", local), ("$int",),
                ("if_icmpge", "$L1"), ("aload_0",), ("iload", local),
                ("invokevirtual", ("$this", m, "(I)I")), ("pop",), ("iinc", local, 1),
                ("goto", "$L0"), ("label", "$L1")]
    if kind == 4:
        return [("new", "java/lang/StringBuilder"), ("dup",),
                ("invokespecial", ("java/lang/StringBuilder", "<init>", "()V")), ("$str",),
                ("invokevirtual", ("java/lang/StringBuilder", "append",
                                   "(Ljava/lang/String;)Ljava/lang/StringBuilder;")),
                ("iload", local),
                ("invokevirtual", ("java/lang/StringBuilder", "append",
                                   "(I)Ljava/lang/StringBuilder;")),
                ("invokevirtual", ("java/lang/StringBuilder", "toString", "()Ljava/lang/String;")),
                ("astore", local)]
    if kind == 5:
        return [("aload_1",), ("ifnull", "$L0"), ("aload_1",),
                ("invokevirtual", ("java/lang/Object", "hashCode", "()I")), ("$int",), ("irem",),
                ("istore", local), ("label", "$L0")]
    if kind == 6:
        return [("iload", local), ("$int",), ("invokestatic", (c, m, "(II)I")),
                ("istore", local)]
    if kind == 7:
        return [("iload_1",), ("tableswitch", 0, "$L2", ["$L0", "$L1"]), ("label", "$L0"),
                ("$int",), ("istore", local), ("goto", "$L2"), ("label", "$L1"), ("$int",),
                ("istore", local), ("label", "$L2")]
    if kind == 8:
        return [("iload_1",), ("iload_2",), ("imul",), ("$int",), ("ixor",), ("iconst_3",),
                ("ishl",), ("istore", local)]
    if kind == 9:
        return [("$int",), ("newarray", 10), ("astore", local), ("aload", local), ("iconst_0",),
                ("iload_1",), ("iastore",)]
    if kind == 10:
        return [("iload_1",), ("ifge", "$L0"), ("new", "java/lang/IllegalArgumentException"),
                ("dup",), ("$str",),
                ("invokespecial", ("java/lang/IllegalArgumentException", "<init>",
                                   "(Ljava/lang/String;)V")), ("athrow",), ("label", "$L0")]
    if kind == 12:
        return [("aload_1",), ("instanceof", c), ("ifeq", "$L0"), ("aload_1",), ("checkcast", c),
                ("astore", local), ("label", "$L0")]
    if kind == 13:
        return [("getstatic", (c, f.upper(), "I")), ("$int",), ("iadd",),
                ("putstatic", (c, f.upper(), "I"))]
    if kind == 14:
        return [("iload_2",), ("lookupswitch", "$L2", [(1, "$L0"), (7, "$L1")]), ("label", "$L0"),
                ("$str",), ("astore", local), ("label", "$L1"), ("iinc", local, -1),
                ("label", "$L2")]
    if kind == 15:
        return [("lload", local), ("ldc2_w", ("$long",)), ("lmul",), ("l2i",), ("istore", local)]
    if kind == 16:
        return [("aload", local), ("arraylength",), ("istore", local), ("aload", local),
                ("iload", local), ("iconst_1",), ("isub",), ("iaload",), ("ireturn",)]
    if kind == 17:
        return [("iload_1",), ("i2d",), ("ldc2_w", ("double", 0.5)), ("dmul",), ("d2i",),
                ("istore", local)]
    if kind == 18:
        return [("aload_0",), ("aload_1",), ("invokeinterface", ("java/util/Map", "get",
                                                                "(Ljava/lang/Object;)Ljava/lang/Object;")),
                ("dup",), ("ifnonnull", "$L0"), ("pop",), ("$str",), ("label", "$L0"),
                ("astore", local)]
    if kind == 19:
        return [("aload_1",), ("invokevirtual", ("java/lang/String", "length", "()I")),
                ("iload_2",), ("if_icmple", "$L0"), ("aload_1",), ("iconst_0",), ("iload_2",),
                ("invokevirtual", ("java/lang/String", "substring", "(II)Ljava/lang/String;")),
                ("astore_1",), ("label", "$L0")]
    return [("aload_0",), ("getfield", ("$this", f, "Ljava/util/List;")), ("aload_1",),
            ("invokeinterface", ("java/util/List", "add", "(Ljava/lang/Object;)Z")), ("pop",),
            ("aload_0",), ("ldc2_w", ("$long",)), ("putfield", ("$this", f + "Stamp", "J"))]


_INT_OPS = ["iadd", "isub", "imul", "idiv", "irem", "iand", "ior", "ixor", "ishl", "ishr", "iushr"]


def _java_expression(rng: np.random.Generator, theme_names, depth: int = 0) -> list[tuple]:
    """A random int-valued expression tree in postfix form, stored to a local."""
    classes, methods, fields = theme_names

    def expr(d):
        r = rng.random()
        if d >= 3 or r < 0.3:
            leaf = int(rng.integers(5))
            if leaf == 0:
                return [(f"iload_{int(rng.integers(1, 4))}",)]
            if leaf == 1:
                return [(f"iconst_{int(rng.integers(0, 6))}",)]
            if leaf == 2:
                return [("$int",)]
            if leaf == 3:
                return [("aload_0",), ("getfield", ("$this", _pick(rng, fields), "I"))]
            return [("iload", int(rng.integers(4, 8)))]
        if r < 0.75:
            return expr(d + 1) + expr(d + 1) + [(_pick(rng, _INT_OPS),)]
        if r < 0.85:
            return expr(d + 1) + [("ineg",)]
        if r < 0.92:
            return expr(d + 1) + [("i2l",), ("ldc2_w", ("$long",)), ("ladd",), ("l2i",)]
        return (expr(d + 1) + expr(d + 1)
                + [("invokestatic", (_pick(rng, classes), _pick(rng, methods), "(II)I"))])

    return expr(depth) + [("istore", int(rng.integers(1, 8)))]


def _relabel(step: list[tuple], j: int) -> list[tuple]:
    def fix(a):
        if isinstance(a, str) and a.startswith("$L"):
            return f"$L{j}_{a[2:]}"
        if isinstance(a, list):
            return [fix(x) for x in a]
        if isinstance(a, tuple) and len(a) == 2 and isinstance(a[0], int):
            return (a[0], fix(a[1]))  # lookupswitch (match, label)
        return a
    return [tuple(fix(a) for a in insn) for insn in step]


def _java_motif(rng: np.random.Generator, names) -> list[tuple]:
    return [insn for j in range(int(rng.integers(2, 4)))
            for insn in _relabel(_java_primitive(rng, names), j)]


def _java_theme(rng: np.random.Generator, shared_motifs: list[list[tuple]]) -> _JavaTheme:
    words = _words(rng, 40)
    package = "/".join(["org", words[0], words[1]])
    classes = [f"{package}/{w.capitalize()}{_pick(rng, ['', 'Impl', 'Util', 'Factory'])}"
               for w in words[2:10]] + list(_JDK_TYPES[:3])
    methods = [_camel([_pick(rng, ["get", "set", "make", "read", "apply", "to"]), w])
               for w in words[10:24]]
    fields = words[24:32]
    strings = [" ".join(_words(rng, int(rng.integers(1, 4)))) for _ in range(12)]
    names = (classes, methods, fields)
    own = [_java_motif(rng, names) for _ in range(20)]
    picks = rng.choice(len(shared_motifs), size=6, replace=False)
    motifs = own + [shared_motifs[i] for i in picks]
    numbers = [int(x) for x in rng.integers(-100, 2000, size=8)]
    return _JavaTheme(package, classes, methods, fields, strings, motifs, numbers)


def _instantiate(motif: list[tuple], rng: np.random.Generator, theme: _JavaTheme,
                 this: str, tag: str) -> list[tuple]:
    out = []
    for insn in motif:
        name = insn[0]
        if name == "$int":
            v = _pick(rng, theme.numbers) if rng.random() < 0.6 else int(rng.integers(-5000, 5000))
            out.append(("sipush", max(-32768, min(32767, v))))
            continue
        if name == "$str":
            s = _pick(rng, theme.strings)
            if rng.random() < 0.5:
                s += f" #{int(rng.integers(1000))}"
            out.append(("ldc", ("str", s)))
            continue
        args = []
        for a in insn[1:]:
            if isinstance(a, str) and a.startswith("$L"):
                a = f"{tag}{a}"
            elif isinstance(a, tuple) and a and a[0] == "$this":
                a = (this,) + a[1:]
            elif isinstance(a, tuple) and a == ("$long",):
                a = ("long", int(rng.integers(1, 1 << 40)))
            elif isinstance(a, list):
                a = [(x[0], f"{tag}{x[1]}") if isinstance(x, tuple) else
                     f"{tag}{x}" if x.startswith("$L") else x for x in a]
            args.append(a)
        out.append((name, *args))
    return out


def make_java_class(rng: np.random.Generator, theme: _JavaTheme, class_name: str,
                    min_size: int = 1100) -> bytes:
    b = ClassBuilder(class_name, _pick(rng, [c for c in theme.classes if c != class_name]))
    if rng.random() < 0.3:
        b.add_interface("java/lang/Runnable")
    for f in rng.choice(theme.fields, size=int(rng.integers(1, 4)), replace=False):
        b.add_field(str(f), _pick(rng, ["I", "Ljava/util/List;", "J", "Ljava/lang/String;"]))
    # Each class specializes in a handful of the library's idioms.
    motifs = [theme.motifs[i] for i in rng.choice(len(theme.motifs), size=6, replace=False)]
    n_methods = 0
    while True:
        code = []
        for k in range(int(rng.integers(2, 6))):
            motif = _pick(rng, motifs)
            code += _instantiate(motif, rng, theme, class_name, f"m{n_methods}k{k}")
        ret = _pick(rng, ["I", "V"])
        code += [("iload_1",), ("ireturn",)] if ret == "I" else [("return",)]
        name = f"{_pick(rng, theme.methods)}{n_methods}"
        access = ACC_PUBLIC | (ACC_STATIC if rng.random() < 0.2 else 0)
        b.add_method(name, f"(II){ret}", code, access=access)
        n_methods += 1
        raw = b.to_bytes()
        if len(raw) >= min_size and n_methods >= 3:
            return raw


def make_java_library(rng: np.random.Generator, shared_motifs, n_classes: int) -> dict[str, bytes]:
    theme = _java_theme(rng, shared_motifs)
    files = {}
    for i in range(n_classes):
        simple = f"{pseudo_word(rng).capitalize()}{i}"
        name = f"{theme.package}/{simple}"
        files[f"{name}.class"] = make_java_class(rng, theme, name)
    return files


def shared_java_motifs(rng: np.random.Generator, n: int = 30) -> list[list[tuple]]:
    names = ([f"com/common/{w.capitalize()}" for w in _words(rng, 6)] + _JDK_TYPES,
             [_camel(["do", w]) for w in _words(rng, 8)], _words(rng, 6))
    return [_java_motif(rng, names) for _ in range(n)]


# --------------------------------------------------------------------------
# Python


_PY_TEMPLATES = [
    "{v} = {a} {op} {n}",
    "{v} = {f}({a}, {b})",
    "{v} = [{x} {op} {n} for {x} in {a} if {x}]",
    "if {a} {cmp} {n}:\n{i}    {v} = {b}.{m}({s})",
    "for {x} in {bi}({a}):\n{i}    {v} += {x} {op} {n}",
    "{v} = {{{s}: {a}, {s2}: {n}}}",
    "{a}.{m}({v}, {n})",
    "while {v} {cmp} {n}:\n{i}    {v} = {v} {op} {n2}",
    "try:\n{i}    {v} = {bi}({a})\n{i}except ValueError:\n{i}    {v} = {s}",
    "{v} = {bi}({a}) {op} {bi2}({b})",
    "with open({s}) as {x}:\n{i}    {v} = {x}.read()",
    "self.{fld} = {a}",
    "{v} = self.{fld}.{m}({s})",
    "assert {a} {cmp} {n}, {s}",
    "{v}, {x} = {a}, {b}",
    "{v} = lambda {x}: {x} {op} {n}",
]

_OPS = ["+", "-", "*", "//", "%", "|", "&"]
_AUG = ["+=", "-=", "*=", "|=", "//="]


def _py_expr(rng: np.random.Generator, depth: int = 0) -> str:
    """A random expression skeleton; braces are holes filled per statement."""
    r = rng.random()
    if depth >= 2 or r < 0.4:
        return _pick(rng, ["{a}", "{b}", "{x}", "{n}", "{s}", "{a}.{fld}", "None", "True",
                           str(int(rng.integers(0, 4)))])
    sub = lambda: _py_expr(rng, depth + 1)  # noqa: E731
    k = int(rng.integers(11))
    if k == 0:
        return f"{{f}}({sub()}, {sub()})"
    if k == 1:
        return f"{{b}}.{{m}}({sub()})"
    if k == 2:
        return f"({sub()} {_pick(rng, _OPS)} {sub()})"
    if k == 3:
        return f"{{a}}[{sub()}]"
    if k == 4:
        return f"[{sub()}, {sub()}]"
    if k == 5:
        return f"(not {sub()})"
    if k == 6:
        return f"{{bi}}({sub()})"
    if k == 7:
        return f"({sub()} {_pick(rng, _CMPS)} {sub()})"
    if k == 8:
        return f"({sub()} if {sub()} else {sub()})"
    if k == 9:
        return f"{{{{{{s}}: {sub()}}}}}"
    return f"{{a}}.{{m}}({sub()}, {{n}})"


def _py_random_template(rng: np.random.Generator) -> str:
    e = lambda: _py_expr(rng)  # noqa: E731
    k = int(rng.integers(7))
    if k == 0:
        return f"{{v}} = {e()}"
    if k == 1:
        return f"{{v}} {_pick(rng, _AUG)} {e()}"
    if k == 2:
        return f"if {e()}:\n{{i}}    {{v}} = {e()}\n{{i}}else:\n{{i}}    {{v}} = {e()}"
    if k == 3:
        return f"for {{x}} in {e()}:\n{{i}}    {{a}}.{{m}}({e()})"
    if k == 4:
        return f"{{a}}.{{m}}({e()}, {e()})"
    if k == 5:
        return f"while {e()}:\n{{i}}    {{v}} = {e()}\n{{i}}    break"
    return f"if {e()}:\n{{i}}    raise ValueError({{s}})"
_CMPS = ["<", ">", "==", "!=", "<=", ">="]


@dataclass
class _PyTheme:
    names: list[str]
    funcs: list[str]
    methods: list[str]
    fields: list[str]
    strings: list[str]
    templates: list[str]
    builtins: list[str]
    numbers: list[int]


_COMMON_PY_NAMES = ["data", "value", "result", "items", "key", "path", "name", "config",
                    "count", "index", "text", "line", "node", "parts", "buf", "size", "state",
                    "options", "args", "kwargs", "obj", "item", "values", "entry", "target"]


def shared_python_names(rng: np.random.Generator, n: int = 400) -> list[str]:
    """Identifiers common to the whole synthetic ecosystem."""
    return _COMMON_PY_NAMES + _words(rng, n)


def _py_theme(rng: np.random.Generator, common: list[str] | None = None) -> _PyTheme:
    words = _words(rng, 45)
    if common:
        # about half of a library's names come from the shared ecosystem
        shared = [common[i] for i in rng.choice(len(common), size=40, replace=False)]
        for slot, w in zip(rng.choice(45, size=40, replace=False), shared):
            if w not in words:
                words[slot] = w
    templates = [_PY_TEMPLATES[i] for i in rng.choice(len(_PY_TEMPLATES), 3, replace=False)]
    templates += [_py_random_template(rng) for _ in range(12)]
    return _PyTheme(
        names=words[:14],
        funcs=[_camel([w]) + "_" + _pick(rng, ["load", "parse", "apply", "build", "check"])
               for w in words[14:26]],
        methods=words[26:36],
        fields=words[36:45],
        strings=[repr(" ".join(_words(rng, int(rng.integers(1, 3))))) for _ in range(12)],
        templates=templates,
        builtins=[_PY_BUILTINS[i] for i in rng.choice(len(_PY_BUILTINS), 6, replace=False)],
        numbers=[int(x) for x in rng.integers(0, 500, size=8)],
    )


def _py_statement(rng: np.random.Generator, theme: _PyTheme, indent: str, params: list[str]) -> str:
    template = _pick(rng, theme.templates)
    pool = theme.names + params

    def num():
        return str(_pick(rng, theme.numbers) if rng.random() < 0.6 else int(rng.integers(1000)))

    return indent + template.format(
        v=_pick(rng, pool), a=_pick(rng, pool), b=_pick(rng, pool), x=_pick(rng, pool),
        f=_pick(rng, theme.funcs), m=_pick(rng, theme.methods), fld=_pick(rng, theme.fields),
        s=_pick(rng, theme.strings), s2=_pick(rng, theme.strings), n=num(), n2=num(),
        op=_pick(rng, _OPS), cmp=_pick(rng, _CMPS), bi=_pick(rng, theme.builtins),
        bi2=_pick(rng, theme.builtins), i=indent,
    )


def _py_function(rng: np.random.Generator, theme: _PyTheme, name: str, indent: str,
                 method: bool) -> str:
    params = list(rng.choice(theme.names, size=int(rng.integers(1, 4)), replace=False))
    params = [str(p) for p in params]
    sig = ", ".join((["self"] if method else []) + params)
    lines = [f"{indent}def {name}({sig}):"]
    if rng.random() < 0.3:
        lines.append(f'{indent}    """{_pick(rng, theme.strings)[1:-1]}."""')
    for _ in range(int(rng.integers(3, 8))):
        if rng.random() < 0.15:
            lines.append(f"{indent}    # {pseudo_word(rng)} {pseudo_word(rng)}")
        lines.append(_py_statement(rng, theme, indent + "    ", params))
    lines.append(f"{indent}    return {_pick(rng, params)}")
    return "\n".join(lines)


def make_python_module(rng: np.random.Generator, theme: _PyTheme, min_size: int = 1100) -> str:
    theme = _specialize(rng, theme)
    parts = [f"import {_pick(rng, ['os', 're', 'json', 'math', 'itertools'])}", ""]
    used: set[str] = set()
    in_class = False
    while True:
        if not in_class and rng.random() < 0.25:
            parts.append(f"\nclass {pseudo_word(rng).capitalize()}:")
            in_class = True
        name = _pick(rng, theme.funcs)
        while name in used:
            name = f"{name}_{len(used)}"
        used.add(name)
        parts.append(_py_function(rng, theme, name, "    " if in_class else "", in_class))
        parts.append("")
        text = "\n".join(parts) + "\n"
        if len(text.encode()) >= min_size and len(used) >= 3:
            return text


def _specialize(rng: np.random.Generator, theme: _PyTheme) -> _PyTheme:
    """A module uses only part of its library's templates and names."""
    def some(seq, k):
        return [seq[i] for i in sorted(rng.choice(len(seq), size=min(k, len(seq)), replace=False))]
    return _PyTheme(some(theme.names, 9), theme.funcs, some(theme.methods, 6),
                    some(theme.fields, 5), some(theme.strings, 8), some(theme.templates, 6),
                    theme.builtins, theme.numbers)


def make_python_library(rng: np.random.Generator, n_files: int,
                        common: list[str] | None = None) -> dict[str, bytes]:
    theme = _py_theme(rng, common)
    pkg = pseudo_word(rng)
    return {f"{pkg}/{pseudo_word(rng)}_{i}.py": make_python_module(rng, theme).encode()
            for i in range(n_files)}


# --------------------------------------------------------------------------
# archives and corpora


def zip_bytes(files: dict[str, bytes]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(files):
            info = zipfile.ZipInfo(name, date_time=(2020, 1, 1, 0, 0, 0))
            zf.writestr(info, files[name])
    return buf.getvalue()


def write_archive(path, files: dict[str, bytes]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(zip_bytes(files))
    return path


@dataclass
class DeskCorpus:
    """Paths of generated archives, split into reference and held-out libraries."""

    root: Path
    java: list[Path]
    python: list[Path]
    foreign_java: list[Path]
    foreign_python: list[Path]

    @property
    def reference(self) -> list[Path]:
        return self.java + self.python

    @property
    def foreign(self) -> list[Path]:
        return self.foreign_java + self.foreign_python


def build_desk_corpus(root, n_java: int = 60, n_python: int = 60, files_per_library: int = 10,
                      n_foreign: int = 3, seed: int = 7) -> DeskCorpus:
    root = Path(root)
    rng = np.random.default_rng(seed)
    shared = shared_java_motifs(rng)
    common = shared_python_names(rng)

    def java(prefix: str, n: int) -> list[Path]:
        return [write_archive(root / f"{prefix}java{i:02d}.jar",
                              make_java_library(rng, shared, files_per_library))
                for i in range(n)]

    def python(prefix: str, n: int) -> list[Path]:
        return [write_archive(root / f"{prefix}py{i:02d}.zip",
                              make_python_library(rng, files_per_library, common))
                for i in range(n)]

    return DeskCorpus(root, java("lib-", n_java), python("lib-", n_python),
                      java("foreign-", n_foreign), python("foreign-", n_foreign))
