"""Two-pass assembler, disassembler and binary image I/O.

Grammar, one statement per line::

    [label ':'] [mnemonic operand*] [';' comment]

Operands are separated by whitespace or commas: ``rN`` registers, decimal
addresses and immediates (negative allowed where signed), or a label for
jump instructions. A label operand becomes the offset from the
already-incremented instruction counter to the label.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from redfin.isa import MNEMONICS, Instruction, decode, encode

_LABEL = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_REG = re.compile(r"r([0-9]+)\Z", re.IGNORECASE)


@dataclass
class AsmError(Exception):
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


class AsmErrors(ValueError):
    def __init__(self, errors: list[AsmError]):
        self.errors = errors
        super().__init__("\n".join(str(e) for e in errors))


def _int(token: str) -> int:
    return int(token, 10)


def parse(text: str) -> list[Instruction]:
    """Assemble source text; all problems are collected and raised together."""
    errors: list[AsmError] = []
    statements: list[tuple[int, str, list[str]]] = []
    labels: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        while ":" in line:
            name, line = line.split(":", 1)
            name, line = name.strip(), line.strip()
            if not _LABEL.match(name):
                errors.append(AsmError(lineno, f"bad label {name!r}"))
            elif name in labels:
                errors.append(AsmError(lineno, f"duplicate label {name!r}"))
            else:
                labels[name] = len(statements)
        if not line:
            continue
        tokens = line.replace(",", " ").split()
        statements.append((lineno, tokens[0].lower(), tokens[1:]))

    program: list[Instruction] = []
    for slot, (lineno, mnemonic, operands) in enumerate(statements):
        op = MNEMONICS.get(mnemonic)
        if op is None:
            errors.append(AsmError(lineno, f"unknown mnemonic {mnemonic!r}"))
            continue
        fields = op.operands.value
        if len(operands) != len(fields):
            errors.append(AsmError(lineno, f"{mnemonic} expects {len(fields)} operand(s), got {len(operands)}"))
            continue
        values = []
        try:
            for kind, tok in zip(fields, operands):
                if kind == "reg":
                    m = _REG.match(tok)
                    if not m:
                        raise AsmError(lineno, f"expected register, got {tok!r}")
                    values.append(int(m.group(1)))
                elif kind == "simm" and op.is_jump and _LABEL.match(tok) and not _REG.match(tok):
                    if tok not in labels:
                        raise AsmError(lineno, f"unresolved label {tok!r}")
                    values.append(labels[tok] - (slot + 1))
                else:
                    try:
                        values.append(_int(tok))
                    except ValueError:
                        raise AsmError(lineno, f"expected number, got {tok!r}") from None
            program.append(Instruction.make(op, *values))
        except AsmError as e:
            errors.append(e)
        except ValueError as e:
            errors.append(AsmError(lineno, str(e)))
    if errors:
        raise AsmErrors(errors)
    return program


def disassemble(program: Iterable[Instruction]) -> str:
    return "".join(f"{instr}\n" for instr in program)


def to_image(program: Sequence[Instruction]) -> bytes:
    return b"".join(encode(i).to_bytes(2, "little") for i in program)


def from_image(data: bytes) -> list[int]:
    if len(data) % 2:
        raise ValueError("program image has odd length")
    return [int.from_bytes(data[i : i + 2], "little") for i in range(0, len(data), 2)]


def load_program(path: str | Path) -> list[Instruction]:
    """Read a ``.s`` source or a ``.bin`` image."""
    path = Path(path)
    if path.suffix == ".bin":
        return [decode(w) for w in from_image(path.read_bytes())]
    return parse(path.read_text(encoding="utf-8"))
