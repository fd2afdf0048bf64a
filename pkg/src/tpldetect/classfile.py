"""Parser and writer for JVM classfiles.

The parser is strict about structure (every read is bounds-checked and every
constant-pool reference is validated) but lenient about semantics: unknown
attributes are kept as opaque blobs, stack maps are never interpreted.
All failures are raised as ``ClassFormatError`` subclasses carrying the byte
offset at which the problem was detected.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from . import opcodes as op

MAGIC = 0xCAFEBABE
MIN_MAJOR, MAX_MAJOR = 45, 61

# Constant pool tags.
UTF8 = 1
INTEGER = 3
FLOAT = 4
LONG = 5
DOUBLE = 6
CLASS = 7
STRING = 8
FIELDREF = 9
METHODREF = 10
INTERFACE_METHODREF = 11
NAME_AND_TYPE = 12
METHOD_HANDLE = 15
METHOD_TYPE = 16
DYNAMIC = 17
INVOKE_DYNAMIC = 18
MODULE = 19
PACKAGE = 20

TAG_NAMES = {
    UTF8: "Utf8",
    INTEGER: "Integer",
    FLOAT: "Float",
    LONG: "Long",
    DOUBLE: "Double",
    CLASS: "Class",
    STRING: "String",
    FIELDREF: "Fieldref",
    METHODREF: "Methodref",
    INTERFACE_METHODREF: "InterfaceMethodref",
    NAME_AND_TYPE: "NameAndType",
    METHOD_HANDLE: "MethodHandle",
    METHOD_TYPE: "MethodType",
    DYNAMIC: "Dynamic",
    INVOKE_DYNAMIC: "InvokeDynamic",
    MODULE: "Module",
    PACKAGE: "Package",
}

_MEMBER_REFS = (FIELDREF, METHODREF, INTERFACE_METHODREF)
_LOADABLE = (INTEGER, FLOAT, STRING, CLASS, METHOD_TYPE, METHOD_HANDLE, DYNAMIC)


class ClassFormatError(ValueError):
    """Base class for classfile decoding errors."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BadMagic(ClassFormatError):
    pass


class TruncatedInput(ClassFormatError):
    pass


class BadConstantPoolTag(ClassFormatError):
    """Unknown tag byte, or a reference to an entry of the wrong kind."""


class IndexOutOfRange(ClassFormatError):
    pass


class UnsupportedVersion(ClassFormatError):
    pass


class BadOpcode(ClassFormatError):
    pass


class MalformedClassFile(ClassFormatError):
    """Structural problem not covered by the more specific errors."""


@dataclass(frozen=True)
class Constant:
    """One constant-pool entry.

    ``args`` holds the decoded payload: the string for Utf8, the integer value
    for Integer/Long, the raw IEEE bit pattern for Float/Double (so NaN
    payloads survive a round trip), and pool indices for reference kinds.
    """

    tag: int
    args: tuple

    @property
    def kind(self) -> str:
        return TAG_NAMES[self.tag]

    @property
    def value(self):
        if self.tag == FLOAT:
            return struct.unpack(">f", struct.pack(">I", self.args[0]))[0]
        if self.tag == DOUBLE:
            return struct.unpack(">d", struct.pack(">Q", self.args[0]))[0]
        return self.args[0]


@dataclass(frozen=True)
class Attribute:
    name_index: int
    data: bytes


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: int
    operands: tuple = ()
    wide: bool = False

    @property
    def mnemonic(self) -> str:
        return op.MNEMONIC[self.opcode]


@dataclass(frozen=True)
class ExceptionHandler:
    start_pc: int
    end_pc: int
    handler_pc: int
    catch_type: int


@dataclass(frozen=True)
class Code:
    max_stack: int
    max_locals: int
    code: bytes
    instructions: tuple[Instruction, ...]
    exception_table: tuple[ExceptionHandler, ...]
    attributes: tuple[Attribute, ...]


@dataclass(frozen=True)
class Member:
    access_flags: int
    name_index: int
    descriptor_index: int
    attributes: tuple[Attribute, ...]
    code: Code | None = None


@dataclass(frozen=True)
class ClassFile:
    magic: int
    minor_version: int
    major_version: int
    constant_pool: tuple[Constant | None, ...]
    access_flags: int
    this_class: int
    super_class: int
    interfaces: tuple[int, ...]
    fields: tuple[Member, ...]
    methods: tuple[Member, ...]
    attributes: tuple[Attribute, ...] = field(default=())

    def utf8(self, index: int) -> str:
        entry = self.constant_pool[index]
        assert entry is not None and entry.tag == UTF8
        return entry.args[0]

    def class_name(self, index: int) -> str:
        return self.utf8(self.constant_pool[index].args[0])

    def member_name(self, member: Member) -> str:
        return self.utf8(member.name_index)

    def member_descriptor(self, member: Member) -> str:
        return self.utf8(member.descriptor_index)

    @property
    def name(self) -> str:
        return self.class_name(self.this_class)

    def with_pool(self, pool) -> ClassFile:
        return replace(self, constant_pool=tuple(pool))


# --------------------------------------------------------------------------
# modified UTF-8


def decode_modified_utf8(raw: bytes) -> str:
    raw = raw.replace(b"\xc0\x80", b"\x00")
    try:
        text = raw.decode("utf-8", errors="surrogatepass")
    except UnicodeDecodeError:
        return raw.decode("utf-8", errors="replace")
    # Recombine surrogate pairs produced by the 6-byte supplementary encoding.
    return text.encode("utf-16-le", errors="surrogatepass").decode("utf-16-le", errors="replace")


def encode_modified_utf8(text: str) -> bytes:
    out = bytearray()
    for unit in text:
        cp = ord(unit)
        if cp > 0xFFFF:
            hi, lo = divmod(cp - 0x10000, 0x400)
            for s in (0xD800 + hi, 0xDC00 + lo):
                out += chr(s).encode("utf-8", errors="surrogatepass")
        elif cp == 0:
            out += b"\xc0\x80"
        else:
            out += unit.encode("utf-8", errors="surrogatepass")
    return bytes(out)


# --------------------------------------------------------------------------
# parsing


class _Reader:
    __slots__ = ("data", "pos", "base")

    def __init__(self, data: bytes, base: int = 0):
        self.data = data
        self.pos = 0
        self.base = base

    @property
    def offset(self) -> int:
        return self.base + self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise TruncatedInput(f"need {n} bytes, {len(self.data) - self.pos} left", self.offset)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u1(self) -> int:
        return self.take(1)[0]

    def s1(self) -> int:
        return struct.unpack(">b", self.take(1))[0]

    def u2(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def s2(self) -> int:
        return struct.unpack(">h", self.take(2))[0]

    def u4(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def s4(self) -> int:
        return struct.unpack(">i", self.take(4))[0]

    def remaining(self) -> int:
        return len(self.data) - self.pos


def _read_constant(r: _Reader) -> tuple[Constant, int]:
    at = r.offset
    tag = r.u1()
    if tag == UTF8:
        n = r.u2()
        return Constant(UTF8, (decode_modified_utf8(r.take(n)),)), 1
    if tag == INTEGER:
        return Constant(INTEGER, (r.s4(),)), 1
    if tag == FLOAT:
        return Constant(FLOAT, (r.u4(),)), 1
    if tag == LONG:
        return Constant(LONG, (struct.unpack(">q", r.take(8))[0],)), 2
    if tag == DOUBLE:
        return Constant(DOUBLE, (struct.unpack(">Q", r.take(8))[0],)), 2
    if tag in (CLASS, STRING, METHOD_TYPE, MODULE, PACKAGE):
        return Constant(tag, (r.u2(),)), 1
    if tag in (FIELDREF, METHODREF, INTERFACE_METHODREF, NAME_AND_TYPE, DYNAMIC, INVOKE_DYNAMIC):
        return Constant(tag, (r.u2(), r.u2())), 1
    if tag == METHOD_HANDLE:
        return Constant(tag, (r.u1(), r.u2())), 1
    raise BadConstantPoolTag(f"unknown constant pool tag {tag}", at)


class _Pool:
    """Constant pool with checked lookups."""

    def __init__(self, entries: list[Constant | None]):
        self.entries = entries

    def get(self, index: int, offset: int, *tags: int) -> Constant:
        if not 0 < index < len(self.entries) or self.entries[index] is None:
            raise IndexOutOfRange(f"constant pool index {index} out of range", offset)
        entry = self.entries[index]
        if tags and entry.tag not in tags:
            want = "/".join(TAG_NAMES[t] for t in tags)
            raise BadConstantPoolTag(f"entry {index} is {entry.kind}, expected {want}", offset)
        return entry

    def validate(self, offsets: list[int]) -> None:
        for i, entry in enumerate(self.entries):
            if entry is None:
                continue
            at = offsets[i]
            t, a = entry.tag, entry.args
            if t in (CLASS, STRING, METHOD_TYPE, MODULE, PACKAGE):
                self.get(a[0], at, UTF8)
            elif t in _MEMBER_REFS:
                self.get(a[0], at, CLASS)
                self.get(a[1], at, NAME_AND_TYPE)
            elif t == NAME_AND_TYPE:
                self.get(a[0], at, UTF8)
                self.get(a[1], at, UTF8)
            elif t in (DYNAMIC, INVOKE_DYNAMIC):
                self.get(a[1], at, NAME_AND_TYPE)
            elif t == METHOD_HANDLE:
                if not 1 <= a[0] <= 9:
                    raise MalformedClassFile(f"bad method handle kind {a[0]}", at)
                self.get(a[1], at, *_MEMBER_REFS)


def _read_attributes(r: _Reader, pool: _Pool) -> list[Attribute]:
    count = r.u2()
    out = []
    for _ in range(count):
        at = r.offset
        name_index = r.u2()
        pool.get(name_index, at, UTF8)
        length = r.u4()
        out.append(Attribute(name_index, r.take(length)))
    return out


def _cp_operand(pool: _Pool, index: int, at: int, opcode: int) -> None:
    name = op.MNEMONIC[opcode]
    if opcode in (0x12, 0x13):
        pool.get(index, at, *_LOADABLE)
    elif opcode == 0x14:
        pool.get(index, at, LONG, DOUBLE, DYNAMIC)
    elif name in ("getstatic", "putstatic", "getfield", "putfield"):
        pool.get(index, at, FIELDREF)
    elif name == "invokevirtual":
        pool.get(index, at, METHODREF)
    elif name in ("invokespecial", "invokestatic"):
        pool.get(index, at, METHODREF, INTERFACE_METHODREF)
    elif name == "invokeinterface":
        pool.get(index, at, INTERFACE_METHODREF)
    elif name == "invokedynamic":
        pool.get(index, at, INVOKE_DYNAMIC)
    else:  # new, anewarray, checkcast, instanceof, multianewarray
        pool.get(index, at, CLASS)


def decode_instructions(code: bytes, pool: _Pool | None = None, base: int = 0) -> tuple[Instruction, ...]:
    """Decode a method body into instructions.

    Branch operands are kept as raw relative byte offsets. ``pool``, when
    given, is used to validate constant-pool operands.
    """
    r = _Reader(code, base)
    out = []
    while r.remaining():
        pc = r.pos
        at = r.offset
        opcode = r.u1()
        layout = op.LAYOUT.get(opcode)
        if layout is None:
            raise BadOpcode(f"undefined opcode 0x{opcode:02x}", at)
        wide = False
        if layout == op.NONE:
            operands = ()
        elif layout == op.S1:
            operands = (r.s1(),)
        elif layout == op.S2:
            operands = (r.s2(),)
        elif layout == op.LOCAL:
            operands = (r.u1(),)
        elif layout in (op.CP1, op.CP2):
            index = r.u1() if layout == op.CP1 else r.u2()
            if pool is not None:
                _cp_operand(pool, index, at, opcode)
            operands = (index,)
        elif layout == op.BR2:
            operands = (r.s2(),)
        elif layout == op.BR4:
            operands = (r.s4(),)
        elif layout == op.IINC:
            operands = (r.u1(), r.s1())
        elif layout == op.NEWARRAY:
            atype = r.u1()
            if atype not in op.NEWARRAY_TYPES:
                raise MalformedClassFile(f"bad newarray type {atype}", at)
            operands = (atype,)
        elif layout == op.INVOKEINTERFACE:
            index = r.u2()
            count = r.u1()
            r.u1()
            if pool is not None:
                _cp_operand(pool, index, at, opcode)
            operands = (index, count)
        elif layout == op.INVOKEDYNAMIC:
            index = r.u2()
            r.u2()
            if pool is not None:
                _cp_operand(pool, index, at, opcode)
            operands = (index,)
        elif layout == op.MULTIANEWARRAY:
            index = r.u2()
            dims = r.u1()
            if pool is not None:
                _cp_operand(pool, index, at, opcode)
            operands = (index, dims)
        elif layout == op.TABLESWITCH:
            r.take((4 - (pc + 1) % 4) % 4)
            default, low, high = r.s4(), r.s4(), r.s4()
            n = high - low + 1
            if n < 0 or n * 4 > r.remaining():
                raise MalformedClassFile(f"tableswitch range {low}..{high} exceeds code", at)
            operands = (default, low, high, tuple(r.s4() for _ in range(n)))
        elif layout == op.LOOKUPSWITCH:
            r.take((4 - (pc + 1) % 4) % 4)
            default, npairs = r.s4(), r.s4()
            if npairs < 0 or npairs * 8 > r.remaining():
                raise MalformedClassFile(f"lookupswitch with {npairs} pairs exceeds code", at)
            pairs = tuple((r.s4(), r.s4()) for _ in range(npairs))
            operands = (default, pairs)
        else:  # wide
            opcode = r.u1()
            if opcode not in op.WIDENABLE:
                raise BadOpcode(f"opcode 0x{opcode:02x} cannot be widened", at)
            wide = True
            operands = (r.u2(), r.s2()) if opcode == 0x84 else (r.u2(),)
        out.append(Instruction(pc, opcode, operands, wide))
    return tuple(out)


def _parse_code(attr: Attribute, pool: _Pool, base: int) -> Code:
    r = _Reader(attr.data, base)
    max_stack, max_locals = r.u2(), r.u2()
    length = r.u4()
    code_base = r.offset
    code = r.take(length)
    instructions = decode_instructions(code, pool, code_base)
    handlers = []
    for _ in range(r.u2()):
        at = r.offset
        h = ExceptionHandler(r.u2(), r.u2(), r.u2(), r.u2())
        if h.catch_type:
            pool.get(h.catch_type, at, CLASS)
        handlers.append(h)
    attributes = _read_attributes(r, pool)
    if r.remaining():
        raise MalformedClassFile("trailing bytes in Code attribute", r.offset)
    return Code(max_stack, max_locals, code, instructions, tuple(handlers), tuple(attributes))


def _read_members(r: _Reader, pool: _Pool, with_code: bool) -> list[Member]:
    members = []
    for _ in range(r.u2()):
        at = r.offset
        flags, name_index, desc_index = r.u2(), r.u2(), r.u2()
        pool.get(name_index, at, UTF8)
        pool.get(desc_index, at, UTF8)
        attr_start = r.pos
        attributes = _read_attributes(r, pool)
        code = None
        if with_code:
            # Recover each attribute's payload offset for error reporting.
            pos = attr_start + 2
            for attr in attributes:
                payload = r.base + pos + 6
                if pool.entries[attr.name_index].args[0] == "Code":
                    if code is not None:
                        raise MalformedClassFile("duplicate Code attribute", payload)
                    code = _parse_code(attr, pool, payload)
                pos += 6 + len(attr.data)
        members.append(Member(flags, name_index, desc_index, tuple(attributes), code))
    return members


def parse_classfile(raw: bytes) -> ClassFile:
    """Parse ``raw`` into a ``ClassFile``; raise ``ClassFormatError`` on bad input."""
    if not raw:
        raise TruncatedInput("empty input", 0)
    r = _Reader(bytes(raw))
    magic = r.u4()
    if magic != MAGIC:
        raise BadMagic(f"bad magic 0x{magic:08x}", 0)
    minor, major = r.u2(), r.u2()
    if not MIN_MAJOR <= major <= MAX_MAJOR:
        raise UnsupportedVersion(f"major version {major} outside {MIN_MAJOR}-{MAX_MAJOR}", 6)

    count = r.u2()
    entries: list[Constant | None] = [None]
    offsets = [0]
    while len(entries) < count:
        at = r.offset
        entry, width = _read_constant(r)
        entries.append(entry)
        offsets.append(at)
        if width == 2:
            entries.append(None)
            offsets.append(at)
    if len(entries) != max(count, 1):
        raise MalformedClassFile("Long/Double entry overruns constant pool count", r.offset)
    pool = _Pool(entries)
    pool.validate(offsets)

    at = r.offset
    access_flags, this_class, super_class = r.u2(), r.u2(), r.u2()
    pool.get(this_class, at + 2, CLASS)
    if super_class:
        pool.get(super_class, at + 4, CLASS)
    interfaces = []
    for _ in range(r.u2()):
        at = r.offset
        index = r.u2()
        pool.get(index, at, CLASS)
        interfaces.append(index)
    fields = _read_members(r, pool, with_code=False)
    methods = _read_members(r, pool, with_code=True)
    attributes = _read_attributes(r, pool)
    if r.remaining():
        raise MalformedClassFile(f"{r.remaining()} trailing bytes", r.offset)
    return ClassFile(
        magic, minor, major, tuple(entries), access_flags, this_class, super_class,
        tuple(interfaces), tuple(fields), tuple(methods), tuple(attributes),
    )


# --------------------------------------------------------------------------
# writing


def _write_constant(c: Constant) -> bytes:
    t, a = c.tag, c.args
    if t == UTF8:
        data = encode_modified_utf8(a[0])
        return struct.pack(">BH", t, len(data)) + data
    if t == INTEGER:
        return struct.pack(">Bi", t, a[0])
    if t == FLOAT:
        return struct.pack(">BI", t, a[0])
    if t == LONG:
        return struct.pack(">Bq", t, a[0])
    if t == DOUBLE:
        return struct.pack(">BQ", t, a[0])
    if t in (CLASS, STRING, METHOD_TYPE, MODULE, PACKAGE):
        return struct.pack(">BH", t, a[0])
    if t == METHOD_HANDLE:
        return struct.pack(">BBH", t, a[0], a[1])
    return struct.pack(">BHH", t, a[0], a[1])


def _write_attributes(attrs) -> bytes:
    out = bytearray(struct.pack(">H", len(attrs)))
    for a in attrs:
        out += struct.pack(">HI", a.name_index, len(a.data)) + a.data
    return bytes(out)


def _write_members(members) -> bytes:
    out = bytearray(struct.pack(">H", len(members)))
    for m in members:
        out += struct.pack(">HHH", m.access_flags, m.name_index, m.descriptor_index)
        out += _write_attributes(m.attributes)
    return bytes(out)


def write_classfile(cf: ClassFile) -> bytes:
    """Serialize ``cf``. Attribute payloads (including Code) are written verbatim."""
    out = bytearray(struct.pack(">IHHH", cf.magic, cf.minor_version, cf.major_version,
                                len(cf.constant_pool)))
    for entry in cf.constant_pool[1:]:
        if entry is not None:
            out += _write_constant(entry)
    out += struct.pack(">HHH", cf.access_flags, cf.this_class, cf.super_class)
    out += struct.pack(">H", len(cf.interfaces))
    for i in cf.interfaces:
        out += struct.pack(">H", i)
    out += _write_members(cf.fields)
    out += _write_members(cf.methods)
    out += _write_attributes(cf.attributes)
    return bytes(out)
