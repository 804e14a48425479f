"""Shared generators and checks for the property tests and the acceptance run."""

from __future__ import annotations

import random
import shutil

from redfin import bits
from redfin.hll import Abs, Bin, Const, Expr, Var
from redfin.interpreter import DEFAULT_MODEL, simulate
from redfin.isa import Instruction, Op, Operands
from redfin.machine import MEMORY_SIZE, boot
from redfin.smt import evaluate_model
from redfin.symbolic import Scope

HAVE_Z3 = shutil.which("z3") is not None

INT_MIN, INT_MAX = -(1 << 63), (1 << 63) - 1
BOUNDARY = [0, 1, 2, 3, 63, 64, 65, 127, 128, 255, 256, -1, -2, -64, INT_MIN, INT_MIN + 1, INT_MAX, INT_MAX - 1]

STRAIGHT_OPS = [op for op in Op if not op.is_jump and op != Op.HALT]
DATA_CELLS = 8


def random_instruction(rng: random.Random, ops=STRAIGHT_OPS, cells: int = DATA_CELLS) -> Instruction:
    op = rng.choice(ops)
    layout = op.operands
    reg = rng.randrange(4)
    if layout == Operands.NONE:
        return Instruction(op)
    if layout == Operands.REG:
        return Instruction(op, reg)
    if layout == Operands.REG_ADDR:
        return Instruction(op, reg, rng.randrange(cells))
    if layout == Operands.REG_SIMM:
        return Instruction(op, reg, rng.choice([rng.randint(-128, 127), -128, -1, 0, 1, 127]))
    if layout == Operands.REG_UIMM:
        return Instruction(op, reg, rng.choice([rng.randrange(256), 0, 1, 63, 64, 65, 255]))
    return Instruction(op, 0, rng.randint(-4, 4))


def random_program(rng: random.Random, length: int, ops=STRAIGHT_OPS) -> list[Instruction]:
    return [random_instruction(rng, ops) for _ in range(length)] + [Instruction(Op.HALT)]


def random_word(rng: random.Random) -> int:
    if rng.random() < 0.3:
        return rng.choice(BOUNDARY)
    if rng.random() < 0.3:
        return rng.randrange(DATA_CELLS)  # plausible indirect address
    return rng.randint(INT_MIN, INT_MAX)


def concrete_symbolic_agree(program, data, steps=None) -> bool:
    """Symbolic run with data cells as variables, evaluated at ``data``, equals the concrete run."""
    steps = steps or len(program) + 1
    conc = simulate(steps, boot(program, data), DEFAULT_MODEL)
    scope = Scope()
    names = [f"d{i}" for i in range(len(data))]
    sym = simulate(steps, boot(program, [scope.var(n) for n in names]), DEFAULT_MODEL)
    model = {n: bits.wrap(v, 64) for n, v in zip(names, data)}

    def ev(node):
        return evaluate_model(model, node)

    if [ev(r) for r in sym.registers] != list(conc.registers):
        return False
    if [ev(f) for f in sym.flags] != list(conc.flags):
        return False
    if (ev(sym.ic), ev(sym.ir), ev(sym.clock)) != (conc.ic, conc.ir, conc.clock):
        return False
    return all(ev(sym.read_memory(a)) == conc.memory[a] for a in range(MEMORY_SIZE))


def random_expr(rng: random.Random, depth: int, cells: int = 4) -> Expr:
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.75:
            return Var(rng.randrange(cells))
        return Const(rng.randint(-128, 127))
    if rng.random() < 0.2:
        return Abs(random_expr(rng, depth - 1, cells))
    op = rng.choice("+-*/")
    right = random_expr(rng, depth - 1, cells)
    if op == "/" and isinstance(right, Const) and right.value == 0:
        right = Const(1)
    return Bin(op, random_expr(rng, depth - 1, cells), right)
