"""Typed arithmetic expressions over memory cells, and their compiler.

Expressions overload ``+ - * // abs`` so one Python function can be applied
both to ints and to :class:`Expr` trees::

    def energy_estimate(t1, t2, p1, p2):
        return abs(t1 - t2) * (p1 + p2) // 2

On ints ``//`` is floor division; on expressions it means truncating signed
division (the ``div`` instruction). The two agree on non-negative operands.

Code generation keeps a software stack in memory. The stack-pointer cell
holds the address of the top occupied slot; pushing pre-decrements it, so
only cells strictly below the initial pointer are written.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from redfin import bits
from redfin.isa import Instruction, Op
from redfin.machine import MEMORY_SIZE
from redfin.symbolic import BV64, Node, apply, const, ite


class Expr:
    def __add__(self, other):
        return Bin("+", self, _wrap(other))

    def __radd__(self, other):
        return Bin("+", _wrap(other), self)

    def __sub__(self, other):
        return Bin("-", self, _wrap(other))

    def __rsub__(self, other):
        return Bin("-", _wrap(other), self)

    def __mul__(self, other):
        return Bin("*", self, _wrap(other))

    def __rmul__(self, other):
        return Bin("*", _wrap(other), self)

    def __floordiv__(self, other):
        return Bin("/", self, _wrap(other))

    def __rfloordiv__(self, other):
        return Bin("/", _wrap(other), self)

    def __abs__(self):
        return Abs(self)


def _wrap(x) -> "Expr":
    if isinstance(x, Expr):
        return x
    if isinstance(x, int):
        return Const(x)
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


@dataclass(frozen=True, eq=True)
class Var(Expr):
    """An IntegerVariable: the 64-bit word at a memory address."""

    address: int

    def __str__(self):
        return f"m[{self.address}]"


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True, eq=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True, eq=True)
class Abs(Expr):
    arg: Expr

    def __str__(self):
        return f"abs({self.arg})"


def energy_estimate(t1, t2, p1, p2):
    return abs(t1 - t2) * (p1 + p2) // 2


ENERGY = energy_estimate(Var(0), Var(1), Var(2), Var(3))


def variables(e: Expr) -> set[int]:
    if isinstance(e, Var):
        return {e.address}
    if isinstance(e, Bin):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Abs):
        return variables(e.arg)
    return set()


# ---------------------------------------------------------------------------
# evaluation

_CONCRETE = {"+": bits.add, "-": bits.sub, "*": bits.mul, "/": bits.sdiv}
_SYMBOLIC = {"+": "add", "-": "sub", "*": "mul", "/": "sdiv"}


def eval_expr(e: Expr, env: Mapping[int, int]) -> int:
    """Wrap-around evaluation; returns the signed 64-bit result."""
    return bits.to_signed(_eval(e, env), 64)


def _eval(e: Expr, env) -> int:
    if isinstance(e, Var):
        if e.address not in env:
            raise KeyError(f"no binding for m[{e.address}]")
        return bits.wrap(env[e.address], 64)
    if isinstance(e, Const):
        return bits.wrap(e.value, 64)
    if isinstance(e, Abs):
        x = _eval(e.arg, env)
        return bits.neg(x, 64) if bits.slt(x, 0, 64) else x
    return _CONCRETE[e.op](_eval(e.left, env), _eval(e.right, env), 64)


def sym_expr(e: Expr, env: Mapping[int, Node]) -> Node:
    """The same evaluation, building a symbolic term."""
    if isinstance(e, Var):
        if e.address not in env:
            raise KeyError(f"no binding for m[{e.address}]")
        return env[e.address]
    if isinstance(e, Const):
        return const(e.value, BV64)
    if isinstance(e, Abs):
        x = sym_expr(e.arg, env)
        return ite(apply("slt", x, const(0, BV64)), apply("neg", x), x)
    return apply(_SYMBOLIC[e.op], sym_expr(e.left, env), sym_expr(e.right, env))


# ---------------------------------------------------------------------------
# compilation


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class CompileTarget:
    result_register: int = 0
    stack_pointer_cell: int = 5
    temporary_cell: int = 4


_OPCODE = {"+": Op.ADD, "-": Op.SUB, "*": Op.MUL, "/": Op.DIV}
_COMMUTATIVE = {"+", "*"}


def stack_depth(e: Expr) -> int:
    if isinstance(e, Abs):
        return stack_depth(e.arg)
    if not isinstance(e, Bin):
        return 0
    if isinstance(e.right, Var):
        inner = 0
    elif isinstance(e.right, Const):
        inner = 1
    else:
        inner = 1 + stack_depth(e.right)
    return max(stack_depth(e.left), inner)


def compile_expr(e: Expr, target: CompileTarget = CompileTarget()) -> list[Instruction]:
    """Code leaving the value of ``e`` in the result register (no trailing halt).

    Right operands that are variables are used directly as memory operands.
    Compound right operands are computed after the left one has been pushed;
    the two then meet in the temporary cell (the stacked left value for
    commutative operators, the right value otherwise). Constant right
    operands are staged in the temporary cell, whose previous content is
    saved on the stack and put back afterwards.
    """
    r = target.result_register
    sp, tmp = target.stack_pointer_cell, target.temporary_cell
    if not 0 <= r <= 3:
        raise CompileError(f"bad result register r{r}")
    if sp == tmp:
        raise CompileError("stack pointer and temporary share a cell")
    clash = variables(e) & {sp, tmp}
    if clash:
        raise CompileError(f"expression reads reserved cell(s) {sorted(clash)}")
    capacity = MEMORY_SIZE - len(variables(e) | {sp, tmp})
    if stack_depth(e) > capacity:
        raise CompileError(f"stack depth {stack_depth(e)} exceeds {capacity} free cells")
    s1, s2 = (r + 1) % 4, (r + 2) % 4
    I = Instruction.make
    code: list[Instruction] = []

    def push(src, scratch):
        code.extend([I("ld_i", scratch, -1), I("add", scratch, sp), I("st", scratch, sp), I("stmi", src, sp)])

    def pop(dst, scratch):
        code.extend([I("ldmi", dst, sp), I("ld_i", scratch, 1), I("add", scratch, sp), I("st", scratch, sp)])

    def gen(e: Expr):
        if isinstance(e, Var):
            code.append(I("ld", r, e.address))
        elif isinstance(e, Const):
            if not -128 <= e.value <= 127:
                raise CompileError(f"constant {e.value} does not fit a signed byte")
            code.append(I("ld_i", r, e.value))
        elif isinstance(e, Abs):
            gen(e.arg)
            code.append(I("abs", r))
        else:
            op = _OPCODE[e.op]
            gen(e.left)
            if isinstance(e.right, Var):
                code.append(Instruction(op, r, e.right.address))
            elif isinstance(e.right, Const):
                if e.op == "/" and e.right.value == 0:
                    raise CompileError("division by constant zero")
                if not -128 <= e.right.value <= 127:
                    raise CompileError(f"constant {e.right.value} does not fit a signed byte")
                code.append(I("ld", s1, tmp))
                push(s1, s2)
                code.extend([I("ld_i", s1, e.right.value), I("st", s1, tmp), Instruction(op, r, tmp)])
                pop(s1, s2)
                code.append(I("st", s1, tmp))
            else:
                push(r, s1)
                gen(e.right)
                if e.op in _COMMUTATIVE:
                    pop(s1, s2)
                    code.append(I("st", s1, tmp))
                else:
                    code.append(I("st", r, tmp))
                    pop(r, s1)
                code.append(Instruction(op, r, tmp))

    gen(e)
    return code


def compile_program(e: Expr, target: CompileTarget = CompileTarget()) -> list[Instruction]:
    return compile_expr(e, target) + [Instruction(Op.HALT)]


# ---------------------------------------------------------------------------
# text syntax

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(&&|\|\||==|!=|<=|>=|[-+*/()\[\]<>=!,]))")


def tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise SyntaxError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        tokens.append(m.group(m.lastindex))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise SyntaxError(f"expected {expected or 'token'}, got {tok!r}")
        self.i += 1
        return tok

    def done(self):
        if self.peek() is not None:
            raise SyntaxError(f"trailing input at {self.peek()!r}")

    def number(self) -> int:
        sign = -1 if self.peek() == "-" and self.take() else 1
        tok = self.take()
        if not tok.isdigit():
            raise SyntaxError(f"expected integer, got {tok!r}")
        return sign * int(tok)

    def expr(self) -> Expr:
        e = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            e = Bin(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take()
            e = Bin(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        tok = self.peek()
        if tok == "abs":
            self.take()
            self.take("(")
            e = self.expr()
            self.take(")")
            return Abs(e)
        if tok == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if tok == "m":
            self.take()
            self.take("[")
            addr = self.number()
            self.take("]")
            return Var(addr)
        return Const(self.number())


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    p.done()
    return e
