"""Instruction vocabulary and 16-bit binary codec.

Word layout: bits 15..10 opcode, 9..8 register, 7..0 address or immediate.
Fields an instruction does not use are encoded as zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Operands(enum.Enum):
    NONE = ()
    REG = ("reg",)
    REG_ADDR = ("reg", "addr")
    REG_SIMM = ("reg", "simm")
    REG_UIMM = ("reg", "uimm")
    SIMM = ("simm",)


class Op(enum.IntEnum):
    HALT = 0
    NOP = 1
    LD = 2
    LD_I = 3
    LDMI = 4
    ST = 5
    STMI = 6
    ADD = 7
    SUB = 8
    MUL = 9
    DIV = 10
    AND = 11
    OR = 12
    XOR = 13
    ABS = 14
    NOT = 15
    SLL = 16
    SRL = 17
    SRA = 18
    SLL_I = 19
    SRL_I = 20
    SRA_I = 21
    CMPEQ = 22
    CMPLT = 23
    CMPGT = 24
    JMPI = 25
    JMPI_CT = 26
    JMPI_CF = 27

    @property
    def mnemonic(self) -> str:
        return self.name.lower()

    @property
    def operands(self) -> Operands:
        return _LAYOUT[self]

    @property
    def is_jump(self) -> bool:
        return self in (Op.JMPI, Op.JMPI_CT, Op.JMPI_CF)


_LAYOUT = {
    Op.HALT: Operands.NONE,
    Op.NOP: Operands.NONE,
    Op.LD_I: Operands.REG_SIMM,
    Op.ABS: Operands.REG,
    Op.NOT: Operands.REG,
    Op.SLL_I: Operands.REG_UIMM,
    Op.SRL_I: Operands.REG_UIMM,
    Op.SRA_I: Operands.REG_UIMM,
    Op.JMPI: Operands.SIMM,
    Op.JMPI_CT: Operands.SIMM,
    Op.JMPI_CF: Operands.SIMM,
}
for _op in Op:
    _LAYOUT.setdefault(_op, Operands.REG_ADDR)

MNEMONICS = {op.mnemonic: op for op in Op}

_RANGES = {"reg": (0, 3), "addr": (0, 255), "simm": (-128, 127), "uimm": (0, 255)}


class IllegalOpcode(ValueError):
    def __init__(self, opcode: int):
        super().__init__(f"illegal opcode {opcode}")
        self.opcode = opcode


@dataclass(frozen=True)
class Instruction:
    """A decoded instruction. ``reg`` and ``arg`` are 0 when unused.

    ``arg`` holds the memory address, the immediate, or the jump offset
    (signed for ``simm`` operands).
    """

    op: Op
    reg: int = 0
    arg: int = 0

    def __post_init__(self):
        fields = self.op.operands.value
        if "reg" not in fields and self.reg != 0:
            raise ValueError(f"{self.op.mnemonic} takes no register")
        if len(fields) == 1 and fields[0] == "reg" or not fields:
            if self.arg != 0:
                raise ValueError(f"{self.op.mnemonic} takes no immediate/address")
        for name in fields:
            value = self.reg if name == "reg" else self.arg
            lo, hi = _RANGES[name]
            if not lo <= value <= hi:
                raise ValueError(f"{self.op.mnemonic}: {name} {value} outside [{lo}, {hi}]")

    @classmethod
    def make(cls, mnemonic: str, *operands: int) -> "Instruction":
        op = MNEMONICS[mnemonic] if isinstance(mnemonic, str) else Op(mnemonic)
        fields = op.operands.value
        if len(operands) != len(fields):
            raise ValueError(f"{op.mnemonic} expects {len(fields)} operand(s), got {len(operands)}")
        if fields and fields[0] == "reg":
            return cls(op, operands[0], operands[1] if len(operands) > 1 else 0)
        return cls(op, 0, operands[0] if operands else 0)

    def __str__(self) -> str:
        parts = [self.op.mnemonic]
        for name in self.op.operands.value:
            parts.append(f"r{self.reg}" if name == "reg" else str(self.arg))
        return " ".join(parts)


def encode(instr: Instruction) -> int:
    return (int(instr.op) << 10) | (instr.reg << 8) | (instr.arg & 0xFF)


def decode(code: int) -> Instruction:
    code &= 0xFFFF
    opcode = code >> 10
    try:
        op = Op(opcode)
    except ValueError:
        raise IllegalOpcode(opcode) from None
    fields = op.operands.value
    reg = (code >> 8) & 0b11 if "reg" in fields else 0
    low = code & 0xFF
    if "simm" in fields:
        arg = low - 256 if low >= 128 else low
    elif "addr" in fields or "uimm" in fields:
        arg = low
    else:
        arg = 0
    return Instruction(op, reg, arg)


HALT_CODE = encode(Instruction(Op.HALT))
