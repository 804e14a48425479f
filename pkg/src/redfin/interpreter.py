"""State-transformer semantics of the instruction set.

The per-instruction transformers are written once against a small value
domain interface. :class:`ConcreteOps` computes with Python ints,
:class:`SymbolicOps` builds expression nodes; the domain is picked from the
state's representation. One :func:`step` is ``execute . increment . fetch``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from redfin import bits
from redfin.isa import IllegalOpcode, Instruction, Op, decode
from redfin.machine import Flag, MachineState, merge_states
from redfin.symbolic import (
    BV8,
    BV16,
    BV64,
    FALSE,
    TRUE,
    Node,
    apply,
    array_read,
    array_write,
    const,
    ite,
)

log = logging.getLogger(__name__)

DEFAULT_FORK_CAP = 16

_TWO_CYCLE = (Op.LD, Op.LDMI, Op.ST, Op.STMI)
DEFAULT_COSTS = MappingProxyType({op: 2 if op in _TWO_CYCLE else 1 for op in Op})


@dataclass(frozen=True)
class CycleModel:
    """Cycles per instruction, fetch cycle included.

    The default table is a calibration, not vendor timing data: memory
    transfers take two cycles and everything else one. With
    ``abs_negative_penalty`` an ``abs`` of a negative operand costs one more.
    """

    costs: Mapping[Op, int] = field(default=DEFAULT_COSTS)
    abs_negative_penalty: bool = False

    def __post_init__(self):
        for op in Op:
            if self.costs.get(op, 0) < 1:
                raise ValueError(f"cost of {op.mnemonic} must be >= 1")

    def cost(self, op: Op) -> int:
        return self.costs[op]


DEFAULT_MODEL = CycleModel()
PENALTY_MODEL = CycleModel(abs_negative_penalty=True)


class ConcreteOps:
    true = True
    false = False

    @staticmethod
    def const(v, width):
        return bits.wrap(v, width)

    @staticmethod
    def concrete(v):
        return v

    add = staticmethod(bits.add)
    sub = staticmethod(bits.sub)
    mul = staticmethod(bits.mul)
    sdiv = staticmethod(bits.sdiv)
    shl = staticmethod(bits.shl)
    lshr = staticmethod(bits.lshr)
    ashr = staticmethod(bits.ashr)
    slt = staticmethod(bits.slt)
    sgt = staticmethod(bits.sgt)
    neg = staticmethod(bits.neg)
    bvnot = staticmethod(bits.bvnot)
    sext = staticmethod(bits.sext)

    @staticmethod
    def extract(a, hi, lo):
        return bits.extract(a, hi, lo)

    @staticmethod
    def band_(a, b, w):
        return a & b

    @staticmethod
    def bor_(a, b, w):
        return a | b

    @staticmethod
    def bxor_(a, b, w):
        return a ^ b

    @staticmethod
    def eq(a, b):
        return a == b

    @staticmethod
    def lnot(a):
        return not a

    @staticmethod
    def land(a, b):
        return a and b

    @staticmethod
    def ite(c, a, b):
        return a if c else b

    @staticmethod
    def read(mem, addr):
        return mem[addr]

    @staticmethod
    def write(mem, addr, value):
        return mem[:addr] + (value,) + mem[addr + 1 :]


class SymbolicOps:
    true = TRUE
    false = FALSE

    @staticmethod
    def const(v, width):
        return const(v, width)

    @staticmethod
    def concrete(v: Node):
        return v.param if v.is_const else None

    def _bin(op):
        return staticmethod(lambda a, b, w: apply(op, a, b))

    add = _bin("add")
    sub = _bin("sub")
    mul = _bin("mul")
    sdiv = _bin("sdiv")
    shl = _bin("shl")
    lshr = _bin("lshr")
    ashr = _bin("ashr")
    slt = _bin("slt")
    sgt = _bin("sgt")
    band_ = _bin("and")
    bor_ = _bin("or")
    bxor_ = _bin("xor")
    del _bin

    @staticmethod
    def neg(a, w):
        return apply("neg", a)

    @staticmethod
    def bvnot(a, w):
        return apply("not", a)

    @staticmethod
    def sext(a, w, extra):
        return apply("sext", a, param=extra)

    @staticmethod
    def extract(a, hi, lo):
        return apply("extract", a, param=(hi, lo))

    @staticmethod
    def eq(a, b):
        return apply("eq", a, b)

    @staticmethod
    def lnot(a):
        return apply("not", a)

    @staticmethod
    def land(a, b):
        return apply("and", a, b)

    @staticmethod
    def ite(c, a, b):
        return ite(c, a, b)

    @staticmethod
    def read(mem, addr):
        return array_read(mem, addr)

    @staticmethod
    def write(mem, addr, value):
        return array_write(mem, addr, value)


def ops_for(state: MachineState):
    return SymbolicOps if state.symbolic else ConcreteOps


# ---------------------------------------------------------------------------
# the three transformers of one execution cycle


def fetch(state: MachineState) -> MachineState:
    """ir := program[ic]; one clock cycle."""
    ops = ops_for(state)
    ic = ops.concrete(state.ic)
    if ic is None:
        raise ValueError("fetch needs a concrete instruction counter")
    return replace(
        state,
        ir=ops.const(state.program[ic], BV16),
        clock=ops.add(state.clock, ops.const(1, BV64), BV64),
    )


def increment(state: MachineState) -> MachineState:
    ops = ops_for(state)
    return replace(state, ic=ops.add(state.ic, ops.const(1, BV8), BV8))


def _set_if(ops, cond, prior):
    return ops.ite(cond, ops.true, prior)


def _signed_overflow(ops, op: Op, x, y, z):
    zero = ops.const(0, BV64)
    sx, sy, sz = ops.slt(x, zero, BV64), ops.slt(y, zero, BV64), ops.slt(z, zero, BV64)
    if op is Op.ADD:
        return ops.land(ops.eq(sx, sy), ops.lnot(ops.eq(sz, sx)))
    if op is Op.SUB:
        return ops.land(ops.lnot(ops.eq(sx, sy)), ops.lnot(ops.eq(sz, sx)))
    wide = ops.mul(ops.sext(x, BV64, 64), ops.sext(y, BV64, 64), 128)
    return ops.lnot(ops.eq(wide, ops.sext(ops.extract(wide, 63, 0), BV64, 64)))


_ARITH = {Op.ADD: "add", Op.SUB: "sub", Op.MUL: "mul"}
_LOGIC = {Op.AND: "band_", Op.OR: "bor_", Op.XOR: "bxor_"}
_SHIFT = {
    Op.SLL: "shl", Op.SRL: "lshr", Op.SRA: "ashr",
    Op.SLL_I: "shl", Op.SRL_I: "lshr", Op.SRA_I: "ashr",
}
_COMPARE = {Op.CMPEQ: "eq", Op.CMPLT: "slt", Op.CMPGT: "sgt"}


def execute(instr: Instruction, state: MachineState, model: CycleModel = DEFAULT_MODEL) -> MachineState:
    """The instruction's own transformer, including its cycles beyond the fetch."""
    ops = ops_for(state)
    op, r, a = instr.op, instr.reg, instr.arg
    regs = list(state.registers)
    flags = list(state.flags)
    mem = state.memory
    ic = state.ic
    clock = state.clock

    def cell(addr):
        return ops.read(mem, ops.const(addr, BV8))

    def low_byte(v):
        return ops.extract(v, 7, 0)

    if op is Op.HALT:
        flags[Flag.HALT] = ops.true
    elif op is Op.NOP:
        pass
    elif op is Op.LD:
        regs[r] = cell(a)
    elif op is Op.LD_I:
        regs[r] = ops.const(a, BV64)
    elif op is Op.LDMI:
        regs[r] = ops.read(mem, low_byte(cell(a)))
    elif op is Op.ST:
        mem = ops.write(mem, ops.const(a, BV8), regs[r])
    elif op is Op.STMI:
        mem = ops.write(mem, low_byte(cell(a)), regs[r])
    elif op in _ARITH:
        x, y = regs[r], cell(a)
        z = getattr(ops, _ARITH[op])(x, y, BV64)
        flags[Flag.OVERFLOW] = _set_if(ops, _signed_overflow(ops, op, x, y, z), flags[Flag.OVERFLOW])
        regs[r] = z
    elif op is Op.DIV:
        regs[r] = ops.sdiv(regs[r], cell(a), BV64)
    elif op in _LOGIC:
        regs[r] = getattr(ops, _LOGIC[op])(regs[r], cell(a), BV64)
    elif op is Op.ABS:
        x = regs[r]
        negative = ops.slt(x, ops.const(0, BV64), BV64)
        result = ops.ite(negative, ops.neg(x, BV64), x)
        flags[Flag.OVERFLOW] = _set_if(ops, ops.slt(result, ops.const(0, BV64), BV64), flags[Flag.OVERFLOW])
        regs[r] = result
        if model.abs_negative_penalty:
            clock = ops.add(clock, ops.ite(negative, ops.const(1, BV64), ops.const(0, BV64)), BV64)
    elif op is Op.NOT:
        regs[r] = ops.bvnot(regs[r], BV64)
    elif op in _SHIFT:
        if op in (Op.SLL, Op.SRL, Op.SRA):
            amount = ops.band_(cell(a), ops.const(63, BV64), BV64)
        else:
            amount = ops.const(a & 63, BV64)
        regs[r] = getattr(ops, _SHIFT[op])(regs[r], amount, BV64)
    elif op in _COMPARE:
        x, y = regs[r], cell(a)
        flags[Flag.CONDITION] = ops.eq(x, y) if op is Op.CMPEQ else getattr(ops, _COMPARE[op])(x, y, BV64)
    elif op.is_jump:
        target = ops.add(ic, ops.const(a, BV8), BV8)
        if op is Op.JMPI:
            ic = target
        elif op is Op.JMPI_CT:
            ic = ops.ite(flags[Flag.CONDITION], target, ic)
        else:
            ic = ops.ite(flags[Flag.CONDITION], ic, target)
    else:  # pragma: no cover - Op is exhaustive
        raise AssertionError(op)

    extra = model.cost(op) - 1
    if extra:
        clock = ops.add(clock, ops.const(extra, BV64), BV64)
    return replace(state, registers=tuple(regs), memory=mem, ic=ic, flags=tuple(flags), clock=clock)


@dataclass(frozen=True)
class IllegalSlot:
    slot: int
    opcode: int


class ForkCapExceeded(RuntimeError):
    def __init__(self, targets: int | None, cap: int, site: tuple | None = None):
        self.targets = targets
        self.cap = cap
        self.site = site
        super().__init__(self._message())

    def _message(self) -> str:
        n = "up to 256" if self.targets is None else str(self.targets)
        msg = f"symbolic instruction counter has {n} feasible targets (cap {self.cap})"
        if self.site is not None:
            slot, instr = self.site
            msg += f"; made symbolic by '{instr}' at slot {slot}"
        return msg


def _ic_targets(ic: Node) -> list[int] | None:
    """Constant leaves of an ite tree, or None if some leaf is not a constant."""
    found: set[int] = set()
    stack = [ic]
    seen: set[int] = set()
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if n.is_const:
            found.add(n.param)
        elif n.op == "ite":
            stack.extend(n.args[1:])
        else:
            return None
    return sorted(found)


def fork_on_symbolic_ic(
    state: MachineState,
    model: CycleModel = DEFAULT_MODEL,
    cap: int = DEFAULT_FORK_CAP,
    diagnostics: list | None = None,
) -> MachineState:
    """Step every feasible concrete ic separately and merge the successors."""
    targets = _ic_targets(state.ic)
    if targets is None or len(targets) > cap:
        raise ForkCapExceeded(None if targets is None else len(targets), cap)
    outcomes = [step(replace(state, ic=const(t, BV8)), model, cap, diagnostics) for t in targets]
    merged = outcomes[-1]
    for t, out in zip(reversed(targets[:-1]), reversed(outcomes[:-1])):
        merged = merge_states(apply("eq", state.ic, const(t, BV8)), out, merged)
    return merged


def step(
    state: MachineState,
    model: CycleModel = DEFAULT_MODEL,
    cap: int = DEFAULT_FORK_CAP,
    diagnostics: list | None = None,
) -> MachineState:
    ops = ops_for(state)
    if ops.concrete(state.ic) is None:
        return fork_on_symbolic_ic(state, model, cap, diagnostics)
    slot = ops.concrete(state.ic)
    s = increment(fetch(state))
    try:
        instr = decode(state.program[slot])
    except IllegalOpcode as exc:
        log.warning("illegal opcode %d at slot %d; halting", exc.opcode, slot)
        if diagnostics is not None:
            diagnostics.append(IllegalSlot(slot, exc.opcode))
        flags = list(s.flags)
        flags[Flag.HALT] = ops.true
        return replace(s, flags=tuple(flags))
    return execute(instr, s, model)


def _is_true(v) -> bool:
    return v is True or (isinstance(v, Node) and v.is_const and v.param is True)


def simulate(
    steps: int,
    state: MachineState,
    model: CycleModel = DEFAULT_MODEL,
    cap: int = DEFAULT_FORK_CAP,
    diagnostics: list | None = None,
) -> MachineState:
    """Run at most ``steps`` cycles; a halted machine stays frozen.

    Each iteration is ``ite(halted, state, step(state))``. Because a halted
    state is a fixpoint, unrolling this left to right is the same as the
    recursive definition.
    """
    site = None
    for _ in range(steps):
        halted = state.flags[Flag.HALT]
        if _is_true(halted):
            break
        ic = ops_for(state).concrete(state.ic)
        if ic is not None:
            try:
                current = (ic, decode(state.program[ic]))
            except IllegalOpcode:
                current = None
        try:
            nxt = step(state, model, cap, diagnostics)
        except ForkCapExceeded as exc:
            raise ForkCapExceeded(exc.targets, exc.cap, site) from None
        state = merge_states(halted, state, nxt)
        if site is None and ic is not None and ops_for(state).concrete(state.ic) is None:
            site = current
    return state
