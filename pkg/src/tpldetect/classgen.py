"""A small JVM classfile assembler.

Used to build fixture classes and the synthetic corpora without a Java
toolchain. Instructions are given as tuples ``(mnemonic, *operands)``;
``("label", name)`` marks a branch target and branch operands are label
names. Constant operands are symbolic:

* ``ldc``/``ldc_w``: ``("str", s)``, ``("int", v)``, ``("float", v)``, ``("class", name)``
* ``ldc2_w``: ``("long", v)`` or ``("double", v)``
* field instructions: ``(owner, name, descriptor)``
* invoke instructions: ``(owner, name, descriptor)``
* ``new``/``checkcast``/``instanceof``/``anewarray``: a class name
"""

from __future__ import annotations

import re
import struct

from . import classfile as cf
from . import opcodes as op

ACC_PUBLIC = 0x0001
ACC_STATIC = 0x0008
ACC_SUPER = 0x0020


class ClassBuilder:
    def __init__(self, name: str, super_name: str | None = "java/lang/Object",
                 major: int = 52, access: int = ACC_PUBLIC | ACC_SUPER):
        self.pool: list[bytes] = []
        self._index: dict[tuple, int] = {}
        self._next = 1
        self.major = major
        self.access = access
        self.this_class = self.class_ref(name)
        self.super_class = self.class_ref(super_name) if super_name else 0
        self.interfaces: list[int] = []
        self.fields: list[bytes] = []
        self.methods: list[bytes] = []

    # -- constant pool ----------------------------------------------------

    def _add(self, key: tuple, payload: bytes, width: int = 1) -> int:
        if key in self._index:
            return self._index[key]
        index = self._next
        self.pool.append(payload)
        self._index[key] = index
        self._next += width
        return index

    def utf8(self, text: str) -> int:
        data = cf.encode_modified_utf8(text)
        return self._add(("utf8", text), struct.pack(">BH", cf.UTF8, len(data)) + data)

    def class_ref(self, name: str) -> int:
        n = self.utf8(name)
        return self._add(("class", name), struct.pack(">BH", cf.CLASS, n))

    def string(self, text: str) -> int:
        n = self.utf8(text)
        return self._add(("string", text), struct.pack(">BH", cf.STRING, n))

    def integer(self, value: int) -> int:
        return self._add(("int", value), struct.pack(">Bi", cf.INTEGER, value))

    def float_(self, value: float) -> int:
        return self._add(("float", value), struct.pack(">Bf", cf.FLOAT, value))

    def long(self, value: int) -> int:
        return self._add(("long", value), struct.pack(">Bq", cf.LONG, value), width=2)

    def double(self, value: float) -> int:
        return self._add(("double", value), struct.pack(">Bd", cf.DOUBLE, value), width=2)

    def name_and_type(self, name: str, descriptor: str) -> int:
        n, d = self.utf8(name), self.utf8(descriptor)
        return self._add(("nat", name, descriptor), struct.pack(">BHH", cf.NAME_AND_TYPE, n, d))

    def member_ref(self, tag: int, owner: str, name: str, descriptor: str) -> int:
        c, nt = self.class_ref(owner), self.name_and_type(name, descriptor)
        return self._add((tag, owner, name, descriptor), struct.pack(">BHH", tag, c, nt))

    def constant(self, spec: tuple) -> int:
        kind, value = spec
        return {
            "str": self.string, "int": self.integer, "float": self.float_,
            "class": self.class_ref, "long": self.long, "double": self.double,
        }[kind](value)

    # -- members -----------------------------------------------------------

    def add_interface(self, name: str) -> None:
        self.interfaces.append(self.class_ref(name))

    def add_field(self, name: str, descriptor: str, access: int = 0x0002) -> None:
        self.fields.append(struct.pack(">HHHH", access, self.utf8(name), self.utf8(descriptor), 0))

    def add_method(self, name: str, descriptor: str, code: list[tuple] | None,
                   access: int = ACC_PUBLIC, max_stack: int = 8, max_locals: int = 8) -> None:
        head = struct.pack(">HHH", access, self.utf8(name), self.utf8(descriptor))
        if code is None:
            self.methods.append(head + struct.pack(">H", 0))
            return
        body = self.assemble(code)
        attr = struct.pack(">HHI", max_stack, max_locals, len(body)) + body + struct.pack(">HH", 0, 0)
        self.methods.append(head + struct.pack(">HHI", 1, self.utf8("Code"), len(attr)) + attr)

    # -- code --------------------------------------------------------------

    def _size(self, insn: tuple, pc: int) -> int:
        name = insn[0]
        if name == "label":
            return 0
        layout = op.LAYOUT[op.OPCODE[name]]
        pad = (4 - (pc + 1) % 4) % 4
        if layout == op.TABLESWITCH:
            return 1 + pad + 12 + 4 * len(insn[3])
        if layout == op.LOOKUPSWITCH:
            return 1 + pad + 8 + 8 * len(insn[2])
        return 1 + {
            op.NONE: 0, op.S1: 1, op.S2: 2, op.LOCAL: 1, op.CP1: 1, op.CP2: 2, op.BR2: 2,
            op.BR4: 4, op.IINC: 2, op.NEWARRAY: 1, op.INVOKEINTERFACE: 4,
            op.INVOKEDYNAMIC: 4, op.MULTIANEWARRAY: 3,
        }[layout]

    def _cp_operand(self, name: str, arg) -> int:
        if name in ("ldc", "ldc_w", "ldc2_w"):
            return self.constant(arg)
        if name in ("getstatic", "putstatic", "getfield", "putfield"):
            return self.member_ref(cf.FIELDREF, *arg)
        if name.startswith("invoke"):
            tag = cf.INTERFACE_METHODREF if name == "invokeinterface" else cf.METHODREF
            return self.member_ref(tag, *arg)
        return self.class_ref(arg)

    def assemble(self, code: list[tuple]) -> bytes:
        # ldc needs a u1 index; resolve constants first so sizes are known.
        insns = []
        for insn in code:
            if insn[0] == "ldc" and self._cp_operand("ldc", insn[1]) > 255:
                insn = ("ldc_w",) + tuple(insn[1:])
            insns.append(insn)
        labels, pc = {}, 0
        for insn in insns:
            if insn[0] == "label":
                labels[insn[1]] = pc
            pc += self._size(insn, pc)
        out = bytearray()
        for insn in insns:
            name, args = insn[0], insn[1:]
            if name == "label":
                continue
            pc = len(out)
            code_ = op.OPCODE[name]
            layout = op.LAYOUT[code_]
            out.append(code_)
            if layout == op.S1:
                out += struct.pack(">b", args[0])
            elif layout == op.S2:
                out += struct.pack(">h", args[0])
            elif layout in (op.LOCAL, op.NEWARRAY):
                out += struct.pack(">B", args[0])
            elif layout == op.CP1:
                out += struct.pack(">B", self._cp_operand(name, args[0]))
            elif layout == op.CP2:
                out += struct.pack(">H", self._cp_operand(name, args[0]))
            elif layout == op.BR2:
                out += struct.pack(">h", labels[args[0]] - pc)
            elif layout == op.BR4:
                out += struct.pack(">i", labels[args[0]] - pc)
            elif layout == op.IINC:
                out += struct.pack(">Bb", args[0], args[1])
            elif layout == op.INVOKEINTERFACE:
                count = 1 + _arg_slots(args[0][2])
                out += struct.pack(">HBB", self._cp_operand(name, args[0]), count, 0)
            elif layout == op.MULTIANEWARRAY:
                out += struct.pack(">HB", self.class_ref(args[0]), args[1])
            elif layout == op.TABLESWITCH:
                low, default, targets = args
                out += b"\0" * ((4 - (pc + 1) % 4) % 4)
                out += struct.pack(">iii", labels[default] - pc, low, low + len(targets) - 1)
                for t in targets:
                    out += struct.pack(">i", labels[t] - pc)
            elif layout == op.LOOKUPSWITCH:
                default, pairs = args
                out += b"\0" * ((4 - (pc + 1) % 4) % 4)
                out += struct.pack(">ii", labels[default] - pc, len(pairs))
                for match, t in sorted(pairs):
                    out += struct.pack(">ii", match, labels[t] - pc)
            elif layout != op.NONE:
                raise ValueError(f"unsupported instruction {name}")
        return bytes(out)

    # -- output ------------------------------------------------------------

    def to_bytes(self) -> bytes:
        out = bytearray(struct.pack(">IHHH", cf.MAGIC, 0, self.major, self._next))
        for payload in self.pool:
            out += payload
        out += struct.pack(">HHH", self.access, self.this_class, self.super_class)
        out += struct.pack(">H", len(self.interfaces))
        for i in self.interfaces:
            out += struct.pack(">H", i)
        for group in (self.fields, self.methods):
            out += struct.pack(">H", len(group))
            for blob in group:
                out += blob
        out += struct.pack(">H", 0)
        return bytes(out)


def _arg_slots(descriptor: str) -> int:
    params = descriptor[1:descriptor.index(")")]
    slots = 0
    for m in re.finditer(r"\[*(?:L[^;]*;|[BCDFIJSZ])", params):
        slots += 2 if m.group() in ("J", "D") else 1
    return slots
