"""SMT-LIB 2 lowering and an external-solver driver.

Terms are emitted one ``define-fun`` per DAG node, in topological order, so
shared subterms are written once and identical DAGs give byte-identical
scripts. The solver is any SMT-LIB 2.6 executable that accepts a script path
on its command line (``z3`` by default, overridable with ``REDFIN_SOLVER``).
"""

from __future__ import annotations

import logging
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from redfin import bits
from redfin.symbolic import (
    BOOL,
    ArraySort,
    Node,
    apply,
    conj,
    const,
    walk,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 300.0

_BV_OPS = {
    "add": "bvadd", "sub": "bvsub", "mul": "bvmul", "sdiv": "bvsdiv",
    "and": "bvand", "or": "bvor", "xor": "bvxor", "not": "bvnot", "neg": "bvneg",
    "shl": "bvshl", "lshr": "bvlshr", "ashr": "bvashr",
    "slt": "bvslt", "sgt": "bvsgt", "ult": "bvult",
}
_BOOL_OPS = {"and": "and", "or": "or", "xor": "xor", "not": "not"}


def sort_text(sort) -> str:
    if isinstance(sort, ArraySort):
        return f"(Array (_ BitVec {sort.index_width}) (_ BitVec {sort.elem_width}))"
    if sort == BOOL:
        return "Bool"
    return f"(_ BitVec {sort})"


def const_text(n: Node) -> str:
    if n.sort == BOOL:
        return "true" if n.param else "false"
    if n.sort % 4 == 0:
        return f"#x{n.param:0{n.sort // 4}x}"
    return f"#b{n.param:0{n.sort}b}"


def _app(n: Node, name) -> str:
    args = " ".join(name(a) for a in n.args)
    op = n.op
    if op == "eq":
        return f"(= {args})"
    if op == "ite":
        return f"(ite {args})"
    if op == "select":
        return f"(select {args})"
    if op == "zext":
        return f"((_ zero_extend {n.param}) {args})"
    if op == "sext":
        return f"((_ sign_extend {n.param}) {args})"
    if op == "extract":
        return f"((_ extract {n.param[0]} {n.param[1]}) {args})"
    table = _BOOL_OPS if n.sort == BOOL and op in _BOOL_OPS else _BV_OPS
    if op not in table:
        raise AssertionError(f"cannot lower {op!r}")
    return f"({table[op]} {args})"


@dataclass
class SmtScript:
    logic: str
    declarations: list[Node]
    lines: list[str]
    definitions: int
    assertions: int
    objective: str | None = None

    @property
    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)


def lower(
    assertions: Sequence[Node],
    objective: Node | None = None,
    direction: str | None = None,
    extra_values: Iterable[Node] = (),
) -> SmtScript:
    """Build a complete script: declarations, definitions, asserts, check-sat, get-value."""
    for a in assertions:
        if a.sort != BOOL:
            raise TypeError("assertions must be boolean")
    roots = list(assertions) + ([objective] if objective is not None else [])
    order = walk(roots)
    names: dict[int, str] = {}
    decls = sorted((n for n in order if n.op == "var"), key=lambda n: n.param)
    has_select = any(n.op == "select" for n in order)
    logic = "QF_ABV" if has_select else "QF_BV"
    lines = ["(set-option :produce-models true)", f"(set-logic {logic})"]
    for v in decls:
        names[id(v)] = v.param
        lines.append(f"(declare-fun {v.param} () {sort_text(v.sort)})")

    def name(n: Node) -> str:
        if n.is_const:
            return const_text(n)
        return names[id(n)]

    count = 0
    for n in order:
        if n.args:
            count += 1
            names[id(n)] = f"${count}"
            lines.append(f"(define-fun ${count} () {sort_text(n.sort)} {_app(n, name)})")
    for a in assertions:
        lines.append(f"(assert {name(a)})")
    wanted = [name(v) for v in decls]
    obj_ref = None
    if objective is not None:
        obj_ref = name(objective)
        lines.append(f"({'minimize' if direction == 'min' else 'maximize'} {name(objective)})")
        wanted.insert(0, obj_ref)
    wanted += [name(v) for v in extra_values]
    lines.append("(check-sat)")
    if wanted:
        lines.append(f"(get-value ({' '.join(wanted)}))")
    return SmtScript(logic, decls, lines, count, len(assertions), obj_ref)


# ---------------------------------------------------------------------------
# s-expressions and models


def parse_sexprs(text: str) -> list:
    tokens: list[str] = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif c in "|\"":
            j = text.index(c, i + 1)
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "();":
                j += 1
            tokens.append(text[i:j])
            i = j
    out: list = []
    stack: list[list] = [out]
    for t in tokens:
        if t == "(":
            stack.append([])
        elif t == ")":
            if len(stack) == 1:
                raise ValueError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(t)
    if len(stack) != 1:
        raise ValueError("unbalanced '(' in solver output")
    return out


def parse_value(sx, sort):
    """Decode a model value: ``#b``, ``#x``, ``(_ bvN w)``, decimals, booleans, const/store arrays."""
    if isinstance(sort, ArraySort):
        return _parse_array(sx, sort)
    if sort == BOOL:
        if sx in ("true", "false"):
            return sx == "true"
        raise ValueError(f"bad boolean {sx!r}")
    if isinstance(sx, str):
        if sx.startswith("#b"):
            return int(sx[2:], 2)
        if sx.startswith("#x"):
            return int(sx[2:], 16)
        return bits.wrap(int(sx), sort)
    if len(sx) == 3 and sx[0] == "_" and sx[1].startswith("bv"):
        return bits.wrap(int(sx[1][2:]), sort)
    if len(sx) == 2 and sx[0] == "-":
        return bits.wrap(-parse_value(sx[1], sort), sort)
    raise ValueError(f"cannot parse value {sx!r}")


@dataclass(frozen=True)
class ArrayValue:
    default: int
    entries: tuple

    def __getitem__(self, index: int) -> int:
        for i, v in reversed(self.entries):
            if i == index:
                return v
        return self.default


def _parse_array(sx, sort: ArraySort):
    if isinstance(sx, list) and len(sx) == 2 and isinstance(sx[0], list) and sx[0][:2] == ["as", "const"]:
        return ArrayValue(parse_value(sx[1], sort.elem_width), ())
    if isinstance(sx, list) and len(sx) == 4 and sx[0] == "store":
        inner = _parse_array(sx[1], sort)
        if inner is None:
            return None
        entry = (parse_value(sx[2], sort.index_width), parse_value(sx[3], sort.elem_width))
        return ArrayValue(inner.default, inner.entries + (entry,))
    return None


class ModelError(KeyError):
    pass


def evaluate_model(model: dict, term: Node):
    """Substitute model values for variables and fold; returns an int (unsigned) or bool."""
    memo: dict[int, Node] = {}
    for n in walk([term]):
        if n.op == "var":
            if n.param not in model:
                raise ModelError(f"model has no value for {n.param!r}")
            if isinstance(n.sort, ArraySort):
                memo[id(n)] = n
            else:
                memo[id(n)] = const(model[n.param], n.sort)
        elif n.op == "select" and n.args[0].op == "var":
            arr = model[n.args[0].param]
            idx = memo[id(n.args[1])]
            if arr is None or not idx.is_const:
                raise ModelError(f"cannot evaluate array {n.args[0].param!r}")
            memo[id(n)] = const(arr[idx.param], n.sort)
        elif not n.args:
            memo[id(n)] = n
        else:
            memo[id(n)] = apply(n.op, *(memo[id(a)] for a in n.args), param=n.param)
    out = memo[id(term)]
    if not out.is_const:
        raise ModelError("term did not fold to a constant")
    return out.param


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True, kw_only=True)
class Verdict:
    stats: dict = field(default_factory=dict, compare=False)
    script: str | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True, kw_only=True)
class Proven(Verdict):
    pass


@dataclass(frozen=True, kw_only=True)
class Falsified(Verdict):
    model: dict


@dataclass(frozen=True, kw_only=True)
class Unknown(Verdict):
    reason: str


@dataclass(frozen=True, kw_only=True)
class Optimum(Verdict):
    objective: str
    value: int
    model: dict


class InconsistentModel(AssertionError):
    """The solver's model does not violate the goal when re-evaluated."""


# ---------------------------------------------------------------------------
# solver process


class Solver:
    def __init__(self, command: str | None = None, timeout: float = DEFAULT_TIMEOUT):
        command = command or os.environ.get("REDFIN_SOLVER") or "z3"
        self.argv = shlex.split(command)
        self.timeout = timeout

    @property
    def name(self) -> str:
        return os.path.basename(self.argv[0])

    def run(self, text: str) -> tuple[str, list, str]:
        """Returns (status, value s-expressions, raw output). Status may be 'error'/'timeout'."""
        with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as f:
            f.write(text)
            path = f.name
        try:
            proc = subprocess.run(
                self.argv + [path], capture_output=True, text=True, timeout=self.timeout
            )
        except subprocess.TimeoutExpired:
            return "timeout", [], ""
        except OSError as e:
            return "error", [], str(e)
        finally:
            os.unlink(path)
        out = proc.stdout
        lines = out.strip().splitlines()
        status = lines[0].strip() if lines else ""
        if status not in ("sat", "unsat", "unknown"):
            return "error", [], out + proc.stderr
        if status != "sat":
            # get-value after unsat/unknown is an error by design; ignore it
            return status, [], out
        rest = "\n".join(lines[1:])
        try:
            values = parse_sexprs(rest)
        except ValueError:
            return "error", [], out
        if any(isinstance(v, list) and v and v[0] == "error" for v in values):
            return "error", [], out
        return status, values, out


def _read_values(values: list, script: SmtScript, extra: Sequence[str] = ()) -> dict:
    if not values:
        return {}
    pairs = values[0]
    by_name = {p[0]: p[1] for p in pairs}
    model = {}
    for v in script.declarations:
        model[v.param] = parse_value(by_name[v.param], v.sort)
    for key in extra:
        model[key] = by_name[key]
    return model


def check_sat(assertions: Sequence[Node], solver: Solver | None = None):
    """('sat', model) / ('unsat', None) / ('unknown', reason), plus the script."""
    solver = solver or Solver()
    script = lower(assertions)
    status, values, raw = solver.run(script.text)
    if status == "sat":
        return "sat", _read_values(values, script), script
    if status == "unsat":
        return "unsat", None, script
    return "unknown", _reason(status, raw), script


def _reason(status: str, raw: str) -> str:
    if status == "timeout":
        return "timeout"
    if status == "unknown":
        return "solver returned unknown"
    return f"solver failure: {raw.strip()[:500]}"


def prove(goal: Node, hypotheses: Sequence[Node] = (), solver: Solver | None = None):
    """Validity of ``hypotheses => goal`` via unsatisfiability of its negation."""
    if goal.sort != BOOL:
        raise TypeError("goal must be boolean")
    t0 = time.perf_counter()
    negated = list(hypotheses) + [apply("not", goal)]
    status, payload, script = check_sat(negated, solver)
    stats = {
        "definitions": script.definitions,
        "assertions": script.assertions,
        "logic": script.logic,
        "seconds": round(time.perf_counter() - t0, 3),
    }
    if status == "unsat":
        return Proven(stats=stats, script=script.text)
    if status == "unknown":
        return Unknown(reason=payload, stats=stats, script=script.text)
    try:
        holds = evaluate_model(payload, conj(negated))
    except ModelError as e:
        log.info("counterexample not re-checked: %s", e)
    else:
        if holds is not True:
            raise InconsistentModel(f"model {payload} does not falsify the goal")
    return Falsified(model=payload, stats=stats, script=script.text)


def optimize(
    objective: Node,
    direction: str,
    hypotheses: Sequence[Node] = (),
    solver: Solver | None = None,
    name: str = "objective",
    method: str = "auto",
):
    """Unsigned min/max of a bitvector term under the hypotheses.

    ``method`` is ``native`` (solver minimize/maximize), ``search`` (binary
    search with plain satisfiability checks) or ``auto`` (native, falling back
    to search if the solver rejects optimization commands).
    """
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    if not isinstance(objective.sort, int) or objective.sort == BOOL:
        raise TypeError("objective must be a bitvector")
    solver = solver or Solver()
    t0 = time.perf_counter()
    if method in ("auto", "native"):
        verdict = _optimize_native(objective, direction, hypotheses, solver, name)
        if method == "native" or not (isinstance(verdict, Unknown) and verdict.reason.startswith("solver failure")):
            return _timed(verdict, t0)
    return _timed(_optimize_search(objective, direction, hypotheses, solver, name), t0)


def _timed(v: Verdict, t0: float) -> Verdict:
    v.stats["seconds"] = round(time.perf_counter() - t0, 3)
    return v


def _optimize_native(objective, direction, hypotheses, solver, name):
    script = lower(list(hypotheses), objective, direction)
    status, values, raw = solver.run(script.text)
    stats = {"definitions": script.definitions, "assertions": script.assertions, "method": "native"}
    if status == "unsat":
        return Unknown(reason="infeasible", stats=stats, script=script.text)
    if status != "sat":
        return Unknown(reason=_reason(status, raw), stats=stats, script=script.text)
    pairs = {p[0]: p[1] for p in values[0]}
    raw_value = pairs[script.objective]
    if isinstance(raw_value, str) and "oo" in raw_value:
        return Unknown(reason="unbounded", stats=stats)
    value = parse_value(raw_value, objective.sort)
    model = _read_values(values, script)
    return Optimum(objective=name, value=value, model=model, stats=stats, script=script.text)


def _optimize_search(objective, direction, hypotheses, solver, name):
    # mention the objective so its variables get declared and valued
    hyps = list(hypotheses) + [apply("eq", objective, objective)]
    status, model, _ = check_sat(hyps, solver)
    calls = 1
    stats = {"method": "search"}
    if status == "unsat":
        return Unknown(reason="infeasible", stats=stats)
    if status == "unknown":
        return Unknown(reason=model, stats=stats)
    best = evaluate_model(model, objective)
    best_model = model
    w = objective.sort
    lo, hi = (0, best) if direction == "min" else (best, bits.mask(w))
    while lo < hi:
        if direction == "min":
            mid = (lo + hi) // 2
            bound = apply("not", apply("ult", const(mid, w), objective))
        else:
            mid = (lo + hi + 1) // 2
            bound = apply("not", apply("ult", objective, const(mid, w)))
        status, model, _ = check_sat(hyps + [bound], solver)
        calls += 1
        if status == "unknown":
            return Unknown(reason=model, stats=stats)
        if status == "sat":
            best, best_model = evaluate_model(model, objective), model
            if direction == "min":
                hi = best
            else:
                lo = best
        elif direction == "min":
            lo = mid + 1
        else:
            hi = mid - 1
    stats["solver_calls"] = calls
    return Optimum(objective=name, value=best, model=best_model, stats=stats)
