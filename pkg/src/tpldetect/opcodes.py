"""JVM opcode table: mnemonic and operand layout for every defined opcode."""

from __future__ import annotations

# Operand layouts understood by the decoder in ``classfile``.
NONE = "none"
S1 = "s1"  # signed byte immediate (bipush)
S2 = "s2"  # signed short immediate (sipush)
LOCAL = "local"  # u1 local variable index
CP1 = "cp1"  # u1 constant pool index (ldc)
CP2 = "cp2"  # u2 constant pool index
BR2 = "br2"  # s2 branch offset
BR4 = "br4"  # s4 branch offset
IINC = "iinc"  # u1 index, s1 delta
NEWARRAY = "newarray"  # u1 primitive array type
INVOKEINTERFACE = "invokeinterface"  # u2 index, u1 count, u1 zero
INVOKEDYNAMIC = "invokedynamic"  # u2 index, u2 zero
MULTIANEWARRAY = "multianewarray"  # u2 index, u1 dimensions
TABLESWITCH = "tableswitch"
LOOKUPSWITCH = "lookupswitch"
WIDE = "wide"

_TABLE: list[tuple[int, str, str]] = [
    (0x00, "nop", NONE),
    (0x01, "aconst_null", NONE),
    (0x02, "iconst_m1", NONE),
    (0x03, "iconst_0", NONE),
    (0x04, "iconst_1", NONE),
    (0x05, "iconst_2", NONE),
    (0x06, "iconst_3", NONE),
    (0x07, "iconst_4", NONE),
    (0x08, "iconst_5", NONE),
    (0x09, "lconst_0", NONE),
    (0x0A, "lconst_1", NONE),
    (0x0B, "fconst_0", NONE),
    (0x0C, "fconst_1", NONE),
    (0x0D, "fconst_2", NONE),
    (0x0E, "dconst_0", NONE),
    (0x0F, "dconst_1", NONE),
    (0x10, "bipush", S1),
    (0x11, "sipush", S2),
    (0x12, "ldc", CP1),
    (0x13, "ldc_w", CP2),
    (0x14, "ldc2_w", CP2),
    (0x15, "iload", LOCAL),
    (0x16, "lload", LOCAL),
    (0x17, "fload", LOCAL),
    (0x18, "dload", LOCAL),
    (0x19, "aload", LOCAL),
]

for _base, _prefix in ((0x1A, "iload"), (0x1E, "lload"), (0x22, "fload"),
                       (0x26, "dload"), (0x2A, "aload")):
    for _i in range(4):
        _TABLE.append((_base + _i, f"{_prefix}_{_i}", NONE))

_TABLE += [
    (0x2E, "iaload", NONE),
    (0x2F, "laload", NONE),
    (0x30, "faload", NONE),
    (0x31, "daload", NONE),
    (0x32, "aaload", NONE),
    (0x33, "baload", NONE),
    (0x34, "caload", NONE),
    (0x35, "saload", NONE),
    (0x36, "istore", LOCAL),
    (0x37, "lstore", LOCAL),
    (0x38, "fstore", LOCAL),
    (0x39, "dstore", LOCAL),
    (0x3A, "astore", LOCAL),
]

for _base, _prefix in ((0x3B, "istore"), (0x3F, "lstore"), (0x43, "fstore"),
                       (0x47, "dstore"), (0x4B, "astore")):
    for _i in range(4):
        _TABLE.append((_base + _i, f"{_prefix}_{_i}", NONE))

_TABLE += [
    (0x4F, "iastore", NONE),
    (0x50, "lastore", NONE),
    (0x51, "fastore", NONE),
    (0x52, "dastore", NONE),
    (0x53, "aastore", NONE),
    (0x54, "bastore", NONE),
    (0x55, "castore", NONE),
    (0x56, "sastore", NONE),
    (0x57, "pop", NONE),
    (0x58, "pop2", NONE),
    (0x59, "dup", NONE),
    (0x5A, "dup_x1", NONE),
    (0x5B, "dup_x2", NONE),
    (0x5C, "dup2", NONE),
    (0x5D, "dup2_x1", NONE),
    (0x5E, "dup2_x2", NONE),
    (0x5F, "swap", NONE),
]

_ARITH = ["add", "sub", "mul", "div", "rem", "neg"]
_code = 0x60
for _op in _ARITH:
    for _t in "ilfd":
        _TABLE.append((_code, f"{_t}{_op}", NONE))
        _code += 1

_TABLE += [
    (0x78, "ishl", NONE),
    (0x79, "lshl", NONE),
    (0x7A, "ishr", NONE),
    (0x7B, "lshr", NONE),
    (0x7C, "iushr", NONE),
    (0x7D, "lushr", NONE),
    (0x7E, "iand", NONE),
    (0x7F, "land", NONE),
    (0x80, "ior", NONE),
    (0x81, "lor", NONE),
    (0x82, "ixor", NONE),
    (0x83, "lxor", NONE),
    (0x84, "iinc", IINC),
    (0x85, "i2l", NONE),
    (0x86, "i2f", NONE),
    (0x87, "i2d", NONE),
    (0x88, "l2i", NONE),
    (0x89, "l2f", NONE),
    (0x8A, "l2d", NONE),
    (0x8B, "f2i", NONE),
    (0x8C, "f2l", NONE),
    (0x8D, "f2d", NONE),
    (0x8E, "d2i", NONE),
    (0x8F, "d2l", NONE),
    (0x90, "d2f", NONE),
    (0x91, "i2b", NONE),
    (0x92, "i2c", NONE),
    (0x93, "i2s", NONE),
    (0x94, "lcmp", NONE),
    (0x95, "fcmpl", NONE),
    (0x96, "fcmpg", NONE),
    (0x97, "dcmpl", NONE),
    (0x98, "dcmpg", NONE),
    (0x99, "ifeq", BR2),
    (0x9A, "ifne", BR2),
    (0x9B, "iflt", BR2),
    (0x9C, "ifge", BR2),
    (0x9D, "ifgt", BR2),
    (0x9E, "ifle", BR2),
    (0x9F, "if_icmpeq", BR2),
    (0xA0, "if_icmpne", BR2),
    (0xA1, "if_icmplt", BR2),
    (0xA2, "if_icmpge", BR2),
    (0xA3, "if_icmpgt", BR2),
    (0xA4, "if_icmple", BR2),
    (0xA5, "if_acmpeq", BR2),
    (0xA6, "if_acmpne", BR2),
    (0xA7, "goto", BR2),
    (0xA8, "jsr", BR2),
    (0xA9, "ret", LOCAL),
    (0xAA, "tableswitch", TABLESWITCH),
    (0xAB, "lookupswitch", LOOKUPSWITCH),
    (0xAC, "ireturn", NONE),
    (0xAD, "lreturn", NONE),
    (0xAE, "freturn", NONE),
    (0xAF, "dreturn", NONE),
    (0xB0, "areturn", NONE),
    (0xB1, "return", NONE),
    (0xB2, "getstatic", CP2),
    (0xB3, "putstatic", CP2),
    (0xB4, "getfield", CP2),
    (0xB5, "putfield", CP2),
    (0xB6, "invokevirtual", CP2),
    (0xB7, "invokespecial", CP2),
    (0xB8, "invokestatic", CP2),
    (0xB9, "invokeinterface", INVOKEINTERFACE),
    (0xBA, "invokedynamic", INVOKEDYNAMIC),
    (0xBB, "new", CP2),
    (0xBC, "newarray", NEWARRAY),
    (0xBD, "anewarray", CP2),
    (0xBE, "arraylength", NONE),
    (0xBF, "athrow", NONE),
    (0xC0, "checkcast", CP2),
    (0xC1, "instanceof", CP2),
    (0xC2, "monitorenter", NONE),
    (0xC3, "monitorexit", NONE),
    (0xC4, "wide", WIDE),
    (0xC5, "multianewarray", MULTIANEWARRAY),
    (0xC6, "ifnull", BR2),
    (0xC7, "ifnonnull", BR2),
    (0xC8, "goto_w", BR4),
    (0xC9, "jsr_w", BR4),
]

MNEMONIC: dict[int, str] = {code: name for code, name, _ in _TABLE}
LAYOUT: dict[int, str] = {code: layout for code, _, layout in _TABLE}
OPCODE: dict[str, int] = {name: code for code, name, _ in _TABLE}

assert len(MNEMONIC) == len(_TABLE) == 202

# Primitive element types accepted by newarray.
NEWARRAY_TYPES = {
    4: "boolean",
    5: "char",
    6: "float",
    7: "double",
    8: "byte",
    9: "short",
    10: "int",
    11: "long",
}

# Opcodes that may follow ``wide`` (iinc takes a second u2 operand).
WIDENABLE = {0x15, 0x16, 0x17, 0x18, 0x19, 0x36, 0x37, 0x38, 0x39, 0x3A, 0xA9, 0x84}
