"""Functional-correctness, equivalence and timing queries over symbolic runs.

Properties are written in a small goal language evaluated against the final
machine state::

    flag(Halt) && reg(r0) = ref && reg(r0) >= 0

Accessors: ``reg(rN)``, ``mem(N)`` (final memory), ``flag(Condition|Overflow|Halt)``,
``clock``, ``m[N]`` (initial memory), input names, ``ref`` (the reference
expression of the property), and the range helpers ``ms_of_years(N)`` and
``mw_of_watts(N)``. Comparisons are signed; ``/`` is truncating division.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from redfin import bits
from redfin.hll import Expr, parse_expr, sym_expr, tokenize, variables
from redfin.interpreter import (
    DEFAULT_FORK_CAP,
    DEFAULT_MODEL,
    PENALTY_MODEL,
    CycleModel,
    ForkCapExceeded,
    simulate,
)
from redfin.machine import Flag, MachineState, boot, lift
from redfin.smt import (
    Falsified,
    InconsistentModel,
    Optimum,
    Proven,
    Solver,
    Unknown,
    Verdict,
    optimize,
    prove,
)
from redfin.symbolic import BOOL, BV64, FALSE, TRUE, Node, Scope, apply, const

DAYS_PER_YEAR = 366


def milliseconds(years: int) -> int:
    """Upper bound on a span of ``years`` in ms, counting every year as 366 days."""
    if years < 0:
        raise ValueError("years must be non-negative")
    return years * DAYS_PER_YEAR * 86400 * 1000


def milliwatts(watts: int) -> int:
    if watts < 0:
        raise ValueError("watts must be non-negative")
    return watts * 1000


# ---------------------------------------------------------------------------
# goal language


class GoalError(ValueError):
    pass


class _GoalParser:
    def __init__(self, text: str):
        try:
            self.toks = tokenize(text)
        except SyntaxError as e:
            raise GoalError(str(e)) from None
        self.i = 0
        self.text = text

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise GoalError(f"in {self.text!r}: expected {expected or 'more input'}, got {tok!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.disj()
        if self.peek() is not None:
            raise GoalError(f"in {self.text!r}: trailing input at {self.peek()!r}")
        return node

    def disj(self):
        node = self.conj()
        while self.peek() == "||":
            self.take()
            node = ("or", node, self.conj())
        return node

    def conj(self):
        node = self.neg()
        while self.peek() == "&&":
            self.take()
            node = ("and", node, self.neg())
        return node

    def neg(self):
        if self.peek() == "!":
            self.take()
            return ("not", self.neg())
        return self.cmp()

    def cmp(self):
        node = self.arith()
        if self.peek() in ("=", "==", "!=", "<", "<=", ">", ">="):
            op = self.take()
            node = ("cmp", "=" if op == "==" else op, node, self.arith())
        return node

    def arith(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take()
            node = ("bin", op, node, self.factor())
        return node

    def integer(self) -> int:
        sign = 1
        if self.peek() == "-":
            self.take()
            sign = -1
        tok = self.take()
        if not tok.isdigit():
            raise GoalError(f"in {self.text!r}: expected integer, got {tok!r}")
        return sign * int(tok)

    def call_arg(self):
        self.take("(")
        tok = self.take()
        self.take(")")
        return tok

    def factor(self):
        tok = self.peek()
        if tok is None:
            raise GoalError(f"in {self.text!r}: unexpected end of input")
        if tok == "-":
            self.take()
            if self.peek() is not None and self.peek().isdigit():
                return ("int", -int(self.take()))
            return ("bin", "-", ("int", 0), self.factor())
        if tok.isdigit():
            return ("int", int(self.take()))
        if tok == "(":
            self.take()
            node = self.disj()
            self.take(")")
            return node
        self.take()
        if tok == "abs":
            self.take("(")
            node = self.arith()
            self.take(")")
            return ("abs", node)
        if tok == "m" and self.peek() == "[":
            self.take("[")
            addr = self.integer()
            self.take("]")
            return ("init", addr)
        if tok == "reg":
            name = self.call_arg()
            if len(name) != 2 or name[0] not in "rR" or name[1] not in "0123":
                raise GoalError(f"bad register {name!r}")
            return ("reg", int(name[1]))
        if tok == "mem":
            self.take("(")
            addr = self.integer()
            self.take(")")
            return ("mem", addr)
        if tok == "flag":
            return ("flag", Flag.parse(self.call_arg()))
        if tok in ("ms_of_years", "mw_of_watts"):
            self.take("(")
            n = self.integer()
            self.take(")")
            return ("int", milliseconds(n) if tok == "ms_of_years" else milliwatts(n))
        if tok == "clock":
            return ("clock",)
        if tok in ("true", "false"):
            return ("bool", tok == "true")
        if tok == "ref":
            return ("ref",)
        return ("input", tok)


def parse_goal(text: str):
    return _GoalParser(text).parse()


@dataclass
class GoalContext:
    inputs: dict[str, Node]
    initial: MachineState | None = None
    final: MachineState | None = None
    ref: Node | None = None


def _need(ctx_value, what):
    if ctx_value is None:
        raise GoalError(f"{what} is not available here")
    return ctx_value


def eval_goal(ast, ctx: GoalContext) -> Node:
    kind = ast[0]
    if kind == "int":
        if not -(1 << 63) <= ast[1] < (1 << 64):
            raise GoalError(f"integer {ast[1]} does not fit 64 bits")
        return const(ast[1], BV64)
    if kind == "bool":
        return TRUE if ast[1] else FALSE
    if kind == "input":
        if ast[1] not in ctx.inputs:
            raise GoalError(f"unknown name {ast[1]!r}")
        return ctx.inputs[ast[1]]
    if kind == "ref":
        return _need(ctx.ref, "ref")
    if kind == "init":
        return _need(ctx.initial, "m[...]").read_memory(ast[1])
    if kind == "reg":
        return _need(ctx.final, "reg(...)").registers[ast[1]]
    if kind == "mem":
        return _need(ctx.final, "mem(...)").read_memory(ast[1])
    if kind == "flag":
        return _need(ctx.final, "flag(...)").flags[ast[1]]
    if kind == "clock":
        return _need(ctx.final, "clock").clock
    if kind == "abs":
        x = _bv(eval_goal(ast[1], ctx))
        return apply("ite", apply("slt", x, const(0, BV64)), apply("neg", x), x)
    if kind == "bin":
        a, b = _bv(eval_goal(ast[2], ctx)), _bv(eval_goal(ast[3], ctx))
        return apply({"+": "add", "-": "sub", "*": "mul", "/": "sdiv"}[ast[1]], a, b)
    if kind == "cmp":
        op, a, b = ast[1], eval_goal(ast[2], ctx), eval_goal(ast[3], ctx)
        if op in ("=", "!="):
            if a.sort != b.sort:
                raise GoalError("comparing values of different sorts")
            out = apply("eq", a, b)
            return out if op == "=" else apply("not", out)
        a, b = _bv(a), _bv(b)
        if op == "<":
            return apply("slt", a, b)
        if op == ">":
            return apply("sgt", a, b)
        if op == "<=":
            return apply("not", apply("sgt", a, b))
        return apply("not", apply("slt", a, b))
    if kind in ("and", "or"):
        return apply(kind, _bool(eval_goal(ast[1], ctx)), _bool(eval_goal(ast[2], ctx)))
    if kind == "not":
        return apply("not", _bool(eval_goal(ast[1], ctx)))
    raise AssertionError(kind)


def _bv(n: Node) -> Node:
    if n.sort != BV64:
        raise GoalError("expected a number, got a boolean")
    return n


def _bool(n: Node) -> Node:
    if n.sort != BOOL:
        raise GoalError("expected a boolean, got a number")
    return n


# ---------------------------------------------------------------------------
# property specs


@dataclass
class PropertySpec:
    """Inputs bound to memory cells, constraints over them, a step bound and a goal.

    ``data`` gives the initial memory; input cells are overwritten by fresh
    symbolic variables. ``reference`` is an optional expression (in the
    ``m[N]`` syntax) that the goal can mention as ``ref``.
    """

    inputs: list[tuple[str, int]] = field(default_factory=list)
    constraints: list[str] = field(default_factory=list)
    steps: int = 100
    goal: str = "flag(Halt)"
    data: list[int] = field(default_factory=list)
    penalty: bool = False
    reference: str | None = None

    def __post_init__(self):
        self.inputs = [tuple(i) for i in self.inputs]
        cells = [c for _, c in self.inputs]
        if len(set(cells)) != len(cells):
            raise ValueError("input cells must be distinct")
        names = [n for n, _ in self.inputs]
        if len(set(names)) != len(names):
            raise ValueError("input names must be distinct")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "PropertySpec":
        inputs = [(i["name"], int(i["cell"])) for i in d.get("inputs", [])]
        known = {"inputs", "constraints", "steps", "goal", "data", "penalty", "reference"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown spec keys {sorted(unknown)}")
        kw = {k: d[k] for k in known - {"inputs"} if k in d}
        return cls(inputs=inputs, **kw)

    @classmethod
    def load(cls, path: str | Path) -> "PropertySpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def reference_expr(self) -> Expr | None:
        return parse_expr(self.reference) if self.reference else None


@dataclass
class _Query:
    scope: Scope
    inputs: dict[str, Node]
    data: list
    hypotheses: list[Node]


def _data_with(spec: PropertySpec, values: dict[str, object]) -> list:
    size = max([len(spec.data)] + [c + 1 for _, c in spec.inputs])
    data: list = list(spec.data) + [0] * (size - len(spec.data))
    for name, cell in spec.inputs:
        data[cell] = values[name]
    return data


def _query(spec: PropertySpec) -> _Query:
    scope = Scope()
    inputs = {name: scope.var(name, BV64) for name, _ in spec.inputs}
    data = _data_with(spec, inputs)
    initial = lift(boot([], data))
    ctx = GoalContext(inputs=inputs, initial=initial)
    hyps = [_bool(eval_goal(parse_goal(c), ctx)) for c in spec.constraints]
    return _Query(scope, inputs, data, hyps)


def _ref(spec: PropertySpec, initial: MachineState) -> Node | None:
    expr = spec.reference_expr()
    if expr is None:
        return None
    return sym_expr(expr, {a: initial.read_memory(a) for a in variables(expr)})


def _final_symbolic(program, data, spec, model, cap):
    start = lift(boot(program, data))
    final = simulate(spec.steps, start, model, cap)
    return start, final


def _context(spec, inputs, start, final) -> GoalContext:
    return GoalContext(inputs=inputs, initial=start, final=final, ref=_ref(spec, start))


def _complete(model: dict, spec: PropertySpec) -> dict:
    return {name: model.get(name, 0) for name, _ in spec.inputs}


def _concrete_context(program, spec, model: dict, cycle_model: CycleModel):
    """Replay a model on the concrete simulator and wrap the result for goal evaluation."""
    data = _data_with(spec, model)
    start = boot(program, data)
    final = simulate(spec.steps, start, cycle_model)
    inputs = {name: const(model[name], BV64) for name, _ in spec.inputs}
    return _context(spec, inputs, lift(start), lift(final))


def _cycle_model(spec: PropertySpec, penalty: bool | None = None) -> CycleModel:
    use = spec.penalty if penalty is None else penalty
    return PENALTY_MODEL if use else DEFAULT_MODEL


def verify(
    program: Sequence,
    spec: PropertySpec,
    solver: Solver | None = None,
    cap: int = DEFAULT_FORK_CAP,
) -> Verdict:
    """Prove the property's goal for every input satisfying its constraints.

    A counterexample is replayed on the concrete simulator and must violate
    the goal there too, otherwise :class:`InconsistentModel` is raised.
    """
    q = _query(spec)
    cm = _cycle_model(spec)
    try:
        start, final = _final_symbolic(program, q.data, spec, cm, cap)
    except ForkCapExceeded as e:
        return Unknown(reason=str(e))
    goal = _bool(eval_goal(parse_goal(spec.goal), _context(spec, q.inputs, start, final)))
    verdict = prove(goal, q.hypotheses, solver)
    if isinstance(verdict, Falsified):
        model = _complete(verdict.model, spec)
        ctx = _concrete_context(program, spec, model, cm)
        holds = eval_goal(parse_goal(spec.goal), ctx)
        hyps = [eval_goal(parse_goal(c), ctx) for c in spec.constraints]
        if holds.param or not all(h.param for h in hyps):
            raise InconsistentModel(f"concrete replay of {model} does not violate the goal")
        verdict.stats["confirmed"] = True
        return Falsified(model=model, stats=verdict.stats, script=verdict.script)
    return verdict


def check_equivalence(
    program_a: Sequence,
    program_b: Sequence,
    spec: PropertySpec,
    observable: str = "reg(r0)",
    solver: Solver | None = None,
    cap: int = DEFAULT_FORK_CAP,
) -> Verdict:
    """Prove that ``observable`` agrees on the final states of both programs."""
    q = _query(spec)
    cm = _cycle_model(spec)
    obs = parse_goal(observable)
    try:
        start_a, final_a = _final_symbolic(program_a, q.data, spec, cm, cap)
        start_b, final_b = _final_symbolic(program_b, q.data, spec, cm, cap)
    except ForkCapExceeded as e:
        return Unknown(reason=str(e))
    va = eval_goal(obs, _context(spec, q.inputs, start_a, final_a))
    vb = eval_goal(obs, _context(spec, q.inputs, start_b, final_b))
    if va.sort != vb.sort:
        raise GoalError("observable has different sorts on the two programs")
    verdict = prove(apply("eq", va, vb), q.hypotheses, solver)
    if isinstance(verdict, Falsified):
        model = _complete(verdict.model, spec)
        ca = eval_goal(obs, _concrete_context(program_a, spec, model, cm))
        cb = eval_goal(obs, _concrete_context(program_b, spec, model, cm))
        if ca is cb:
            raise InconsistentModel(f"concrete replay of {model} does not distinguish the programs")
        verdict.stats["confirmed"] = True
        verdict.stats["observed"] = [_signed(ca), _signed(cb)]
        return Falsified(model=model, stats=verdict.stats, script=verdict.script)
    return verdict


class NotHalting(RuntimeError):
    pass


def timing_bounds(
    program: Sequence,
    spec: PropertySpec,
    penalty: bool | None = None,
    solver: Solver | None = None,
    cap: int = DEFAULT_FORK_CAP,
    method: str = "auto",
) -> tuple[Verdict, Verdict]:
    """Best and worst final clock over all constrained inputs.

    Halting within ``spec.steps`` is proved first; otherwise the clock of an
    unfinished run would be meaningless and :class:`NotHalting` is raised.
    """
    q = _query(spec)
    cm = _cycle_model(spec, penalty)
    start, final = _final_symbolic(program, q.data, spec, cm, cap)
    halts = prove(final.flags[Flag.HALT], q.hypotheses, solver)
    if not isinstance(halts, Proven):
        raise NotHalting(f"program does not provably halt within {spec.steps} steps: {halts}")
    jobs = [("min", "Best case"), ("max", "Worst case")]
    with ThreadPoolExecutor(max_workers=2) as pool:
        futures = [
            pool.submit(optimize, final.clock, d, q.hypotheses, solver, name, method) for d, name in jobs
        ]
        results = [f.result() for f in futures]
    out = []
    for r in results:
        if isinstance(r, Optimum):
            model = _complete(r.model, spec)
            replay = _concrete_context(program, spec, model, cm).final.clock.param
            if replay != r.value:
                raise InconsistentModel(f"{r.objective}: replayed clock {replay} != {r.value}")
            r = Optimum(objective=r.objective, value=r.value, model=model, stats=r.stats, script=r.script)
        out.append(r)
    return out[0], out[1]


def _signed(n: Node):
    if n.sort == BOOL:
        return bool(n.param)
    return bits.to_signed(n.param, n.sort)


def format_verdict(v: Verdict) -> list[str]:
    """Human-readable report lines."""
    if isinstance(v, Proven):
        return ["Proven. Q.E.D."]
    if isinstance(v, Falsified):
        lines = ["Falsifiable. Counter-example:"]
        width = max((len(k) for k in v.model), default=0)
        lines += [f"  {k:<{width}} = {bits.to_signed(val, 64)}" for k, val in v.model.items()]
        return lines
    if isinstance(v, Optimum):
        lines = [f'Objective "{v.objective}":', "Optimal model:"]
        rows = [(k, bits.to_signed(val, 64)) for k, val in v.model.items()] + [(v.objective, v.value)]
        width = max(len(k) for k, _ in rows)
        lines += [f"  {k:<{width}} = {val}" for k, val in rows]
        return lines
    return [f"Unknown: {v.reason}"]


def verdict_json(v: Verdict) -> dict:
    out: dict = {"verdict": type(v).__name__}
    if isinstance(v, (Falsified, Optimum)):
        out["model"] = {k: bits.to_signed(val, 64) for k, val in v.model.items()}
    if isinstance(v, Optimum):
        out["objective"] = v.objective
        out["value"] = v.value
    if isinstance(v, Unknown):
        out["reason"] = v.reason
    out["stats"] = v.stats
    return out
