"""Machine state space and boot/inspection helpers.

A state is an immutable 7-tuple (registers, memory, ic, ir, program, flags,
clock). The same class holds concrete states (plain ints, memory as a tuple)
and symbolic states (:class:`~redfin.symbolic.Node` values, memory as a
:class:`~redfin.symbolic.SymArray`). The program is always concrete.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence, Union

from redfin import bits
from redfin.isa import HALT_CODE, Instruction, encode
from redfin.symbolic import (
    BOOL,
    BV8,
    BV16,
    BV64,
    Node,
    SymArray,
    array_merge,
    array_read,
    array_write,
    const,
    ite,
)

NUM_REGISTERS = 4
MEMORY_SIZE = 256
PROGRAM_SIZE = 256


class Flag(enum.IntEnum):
    CONDITION = 0
    OVERFLOW = 1
    HALT = 2

    @classmethod
    def parse(cls, name: str) -> "Flag":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown flag {name!r}") from None


Value = Union[int, Node]


@dataclass(frozen=True)
class MachineState:
    registers: tuple
    memory: Union[tuple, SymArray]
    ic: Value
    ir: Value
    program: tuple
    flags: tuple
    clock: Value

    @property
    def symbolic(self) -> bool:
        return isinstance(self.memory, SymArray)

    def flag(self, f: Flag):
        return self.flags[f]

    def read_memory(self, address: int):
        if self.symbolic:
            return array_read(self.memory, const(address, BV8))
        return self.memory[address]


class CapacityError(ValueError):
    def __init__(self, what: str, index: int):
        super().__init__(f"{what} does not fit: element {index} is beyond capacity")
        self.index = index


def _program_words(program: Sequence) -> tuple:
    words = []
    for i, item in enumerate(program):
        if i >= PROGRAM_SIZE:
            raise CapacityError("program", i)
        words.append(encode(item) if isinstance(item, Instruction) else int(item) & 0xFFFF)
    return tuple(words) + (HALT_CODE,) * (PROGRAM_SIZE - len(words))


def boot(program: Sequence, data: Sequence = ()) -> MachineState:
    """Initial state: program at slot 0, ``data`` from cell 0, everything else zero.

    If any data element is a symbolic node the resulting state is symbolic.
    """
    words = _program_words(program)
    if len(data) > MEMORY_SIZE:
        raise CapacityError("data memory", MEMORY_SIZE)
    if not any(isinstance(d, Node) for d in data):
        memory = tuple(bits.wrap(int(d), 64) for d in data) + (0,) * (MEMORY_SIZE - len(data))
        return MachineState(
            registers=(0,) * NUM_REGISTERS,
            memory=memory,
            ic=0,
            ir=0,
            program=words,
            flags=(False,) * len(Flag),
            clock=0,
        )
    mem = SymArray.filled(const(0, BV64))
    for i, d in enumerate(data):
        v = d if isinstance(d, Node) else const(d, BV64)
        if v is not mem.base:
            mem = array_write(mem, const(i, BV8), v)
    zero = const(0, BV64)
    return MachineState(
        registers=(zero,) * NUM_REGISTERS,
        memory=mem,
        ic=const(0, BV8),
        ir=const(0, BV16),
        program=words,
        flags=(const(False, BOOL),) * len(Flag),
        clock=const(0, BV64),
    )


def lift(state: MachineState) -> MachineState:
    """Embed a concrete state into the symbolic representation."""
    if state.symbolic:
        return state
    mem = SymArray.filled(const(0, BV64))
    for i, v in enumerate(state.memory):
        if v:
            mem = array_write(mem, const(i, BV8), const(v, BV64))
    return MachineState(
        registers=tuple(const(r, BV64) for r in state.registers),
        memory=mem,
        ic=const(state.ic, BV8),
        ir=const(state.ir, BV16),
        program=state.program,
        flags=tuple(const(f, BOOL) for f in state.flags),
        clock=const(state.clock, BV64),
    )


def _concrete_scalar(v) -> int | bool:
    if isinstance(v, Node):
        if not v.is_const:
            raise ValueError("concrete dump requires concrete state")
        return v.param
    return v


def lower(state: MachineState) -> MachineState:
    """Inverse of :func:`lift` for symbolic states whose components all folded to constants."""
    if not state.symbolic:
        return state
    memory = tuple(_concrete_scalar(state.read_memory(a)) for a in range(MEMORY_SIZE))
    return MachineState(
        registers=tuple(_concrete_scalar(r) for r in state.registers),
        memory=memory,
        ic=_concrete_scalar(state.ic),
        ir=_concrete_scalar(state.ir),
        program=state.program,
        flags=tuple(bool(_concrete_scalar(f)) for f in state.flags),
        clock=_concrete_scalar(state.clock),
    )


@dataclass(frozen=True)
class Dump:
    memory: list[int]
    registers: list[int]
    flags: dict[str, bool]
    ic: int
    clock: int

    def lines(self) -> list[str]:
        out = [f"Memory dump: {self.memory}"]
        out += [f"R{i}: {v}" for i, v in enumerate(self.registers)]
        out.append("Flags: " + ", ".join(f"{k}={int(v)}" for k, v in self.flags.items()))
        out.append(f"IC: {self.ic}")
        out.append(f"Clock: {self.clock}")
        return out


def dump_state(state: MachineState, lo: int = 0, hi: int = 0) -> Dump:
    """Signed decimal view of memory[lo..hi] (inclusive), registers, flags, ic, clock."""
    if not 0 <= lo <= hi < MEMORY_SIZE:
        raise ValueError(f"bad dump range {lo}..{hi}")
    state = lower(state)
    return Dump(
        memory=[bits.to_signed(state.memory[a], 64) for a in range(lo, hi + 1)],
        registers=[bits.to_signed(r, 64) for r in state.registers],
        flags={f.name.capitalize(): bool(state.flags[f]) for f in Flag},
        ic=state.ic,
        clock=state.clock,
    )


def merge_states(cond, then: MachineState, other: MachineState) -> MachineState:
    """Componentwise if-then-else of two states sharing one program."""
    if then.program != other.program:
        raise ValueError("cannot merge states with different programs")
    if isinstance(cond, bool):
        return then if cond else other
    if cond.is_const:
        return then if cond.param else other
    if then is other:
        return then
    then, other = lift(then), lift(other)
    return replace(
        then,
        registers=tuple(ite(cond, a, b) for a, b in zip(then.registers, other.registers)),
        memory=array_merge(cond, then.memory, other.memory),
        ic=ite(cond, then.ic, other.ic),
        ir=ite(cond, then.ir, other.ir),
        flags=tuple(ite(cond, a, b) for a, b in zip(then.flags, other.flags)),
        clock=ite(cond, then.clock, other.clock),
    )
