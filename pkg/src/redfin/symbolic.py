"""Hash-consed symbolic expressions over bitvectors, booleans and arrays.

Every term is a :class:`Node`. Nodes are interned, so structurally equal terms
are the same Python object and can be compared with ``is``. Whenever all
operands of an operation are constants the result is folded to a constant
using :mod:`redfin.bits`, which is also what the concrete simulator uses.
Apart from folding, only two simplifications exist: ``ite`` with a constant
condition and ``ite`` with identical branches.

Sorts are plain ints: ``BOOL`` (0) or a bitvector width. Array-valued
variables carry an :class:`ArraySort`.
"""

from __future__ import annotations

import itertools
import re
import threading
import weakref
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

from redfin import bits

BOOL = 0
BV8 = 8
BV16 = 16
BV64 = 64


class ArraySort(NamedTuple):
    index_width: int
    elem_width: int


Sort = Union[int, ArraySort]


class SortError(TypeError):
    pass


class Node:
    """One vertex of the expression DAG. Construct via :func:`apply`."""

    __slots__ = ("op", "sort", "args", "param", "uid", "__weakref__")

    def __init__(self, op: str, sort: Sort, args: tuple, param, uid: int):
        self.op = op
        self.sort = sort
        self.args = args
        self.param = param
        self.uid = uid

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    @property
    def value(self):
        if self.op != "const":
            raise ValueError(f"not a constant: {self!r}")
        return self.param

    def __repr__(self) -> str:
        return _show(self, 3)


def _show(n: Node, depth: int) -> str:
    if n.op == "const":
        if n.sort == BOOL:
            return "true" if n.param else "false"
        return f"{bits.to_signed(n.param, n.sort)}:bv{n.sort}"
    if n.op == "var":
        return n.param
    if depth == 0:
        return "…"
    inner = " ".join(_show(a, depth - 1) for a in n.args)
    p = "" if n.param is None else f"[{n.param}]"
    return f"({n.op}{p} {inner})"


_table: "weakref.WeakValueDictionary[tuple, Node]" = weakref.WeakValueDictionary()
_lock = threading.Lock()
_uids = itertools.count()


def _intern(op: str, sort: Sort, args: tuple, param) -> Node:
    key = (op, sort, tuple(id(a) for a in args), param)
    with _lock:
        node = _table.get(key)
        if node is None:
            node = Node(op, sort, args, param, next(_uids))
            _table[key] = node
        return node


def const(value, sort: int = BV64) -> Node:
    if sort == BOOL:
        return _intern("const", BOOL, (), bool(value))
    return _intern("const", sort, (), bits.wrap(int(value), sort))


TRUE = const(True, BOOL)
FALSE = const(False, BOOL)

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\Z")


def _var(name: str, sort: Sort) -> Node:
    if not _NAME.match(name):
        raise ValueError(f"invalid variable name {name!r}")
    return _intern("var", sort, (), name)


class Scope:
    """Variable namespace of one verification query.

    Variables are interned by name, so two requests for the same name would
    silently alias; a scope rejects that.
    """

    def __init__(self):
        self.variables: dict[str, Node] = {}

    def var(self, name: str, sort: Sort = BV64) -> Node:
        if name in self.variables:
            raise ValueError(f"duplicate variable name {name!r} in query")
        node = _var(name, sort)
        self.variables[name] = node
        return node

    def array(self, name: str, index_width: int = BV8, elem_width: int = BV64) -> "SymArray":
        return SymArray(ArraySort(index_width, elem_width), self.var(name, ArraySort(index_width, elem_width)))


# op -> arity, operand kind, result kind
_BV_UNARY = {"neg", "not"}
_BV_BINARY = {"add", "sub", "mul", "sdiv", "and", "or", "xor", "shl", "lshr", "ashr"}
_BOOL_OK = {"not", "and", "or", "xor", "eq", "ite"}
_COMPARE = {"eq", "slt", "sgt", "ult"}

_FOLD_BV = {
    "add": bits.add,
    "sub": bits.sub,
    "mul": bits.mul,
    "sdiv": bits.sdiv,
    "and": lambda a, b, w: a & b,
    "or": lambda a, b, w: a | b,
    "xor": lambda a, b, w: a ^ b,
    "shl": bits.shl,
    "lshr": bits.lshr,
    "ashr": bits.ashr,
    "slt": bits.slt,
    "sgt": bits.sgt,
    "ult": bits.ult,
}


def _check(op: str, args: Sequence[Node], param) -> Sort:
    sorts = [a.sort for a in args]

    def need(cond, what="operand sorts"):
        if not cond:
            raise SortError(f"{op}: bad {what} {sorts}")

    if op in _BV_UNARY:
        need(len(args) == 1)
        need(isinstance(sorts[0], int) and (sorts[0] > 0 or op == "not"))
        return sorts[0]
    if op in _BV_BINARY:
        need(len(args) == 2 and sorts[0] == sorts[1] and isinstance(sorts[0], int))
        need(sorts[0] > 0 or op in _BOOL_OK)
        return sorts[0]
    if op in _COMPARE:
        need(len(args) == 2 and sorts[0] == sorts[1] and isinstance(sorts[0], int))
        need(sorts[0] > 0 or op == "eq")
        return BOOL
    if op == "ite":
        need(len(args) == 3 and sorts[0] == BOOL and sorts[1] == sorts[2])
        return sorts[1]
    if op in ("zext", "sext"):
        need(len(args) == 1 and isinstance(sorts[0], int) and sorts[0] > 0)
        need(isinstance(param, int) and param >= 0, "extension")
        return sorts[0] + param
    if op == "extract":
        need(len(args) == 1 and isinstance(sorts[0], int) and sorts[0] > 0)
        hi, lo = param
        need(0 <= lo <= hi < sorts[0], "extract range")
        return hi - lo + 1
    if op == "select":
        need(len(args) == 2 and isinstance(sorts[0], ArraySort))
        need(sorts[1] == sorts[0].index_width)
        return sorts[0].elem_width
    raise SortError(f"unknown operation {op!r}")


def _fold(op: str, args: Sequence[Node], param, sort: Sort) -> Node | None:
    if op == "ite":
        c, a, b = args
        if c.is_const:
            return a if c.param else b
        if a is b:
            return b
        return None
    if not all(a.is_const for a in args):
        return None
    vals = [a.param for a in args]
    w = args[0].sort
    if w == BOOL:
        if op == "not":
            return const(not vals[0], BOOL)
        if op == "and":
            return const(vals[0] and vals[1], BOOL)
        if op == "or":
            return const(vals[0] or vals[1], BOOL)
        if op in ("xor",):
            return const(vals[0] != vals[1], BOOL)
        if op == "eq":
            return const(vals[0] == vals[1], BOOL)
        return None
    if op == "neg":
        return const(bits.neg(vals[0], w), w)
    if op == "not":
        return const(bits.bvnot(vals[0], w), w)
    if op == "eq":
        return const(vals[0] == vals[1], BOOL)
    if op in _FOLD_BV:
        out = _FOLD_BV[op](vals[0], vals[1], w)
        return const(out, sort)
    if op == "zext":
        return const(bits.zext(vals[0], w, param), sort)
    if op == "sext":
        return const(bits.sext(vals[0], w, param), sort)
    if op == "extract":
        return const(bits.extract(vals[0], *param), sort)
    return None


def apply(op: str, *args: Node, param=None) -> Node:
    """Build (or fold) the node ``op(args)``; raises :class:`SortError` on ill-sorted input."""
    sort = _check(op, args, param)
    folded = _fold(op, args, param, sort)
    if folded is not None:
        return folded
    return _intern(op, sort, tuple(args), param)


def ite(cond: Node, then: Node, other: Node) -> Node:
    return apply("ite", cond, then, other)


def conj(terms: Iterable[Node]) -> Node:
    out = TRUE
    for t in terms:
        if out is TRUE:
            out = t
        else:
            out = apply("and", out, t)
    return out


def walk(roots: Iterable[Node]) -> list[Node]:
    """All nodes reachable from ``roots``, children before parents, deterministic."""
    order: list[Node] = []
    seen: set[int] = set()
    for root in roots:
        if id(root) in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for child in reversed(node.args):
                if id(child) not in seen:
                    stack.append((child, False))
    return order


def dag_size(roots: Iterable[Node]) -> int:
    return len(walk(roots))


def free_vars(roots: Iterable[Node]) -> list[Node]:
    return [n for n in walk(roots) if n.op == "var"]


def substitute(roots: Sequence[Node], mapping: dict[Node, Node]) -> list[Node]:
    """Replace leaves per ``mapping`` and rebuild, folding along the way."""
    memo: dict[int, Node] = {}
    for node in walk(roots):
        if node in mapping:
            memo[id(node)] = mapping[node]
        elif not node.args:
            memo[id(node)] = node
        else:
            memo[id(node)] = apply(node.op, *(memo[id(a)] for a in node.args), param=node.param)
    return [memo[id(r)] for r in roots]


# ---------------------------------------------------------------------------
# arrays


@dataclass(frozen=True)
class ArrayMerge:
    cond: Node
    then: "SymArray"
    other: "SymArray"


@dataclass(frozen=True, eq=False)
class SymArray:
    """Functional array: a base plus a write-ordered chain of stores.

    ``base`` is a constant node (every cell holds it), an array-sorted
    variable, or an :class:`ArrayMerge`. While every stored index is a
    constant the chain keeps at most one entry per index.
    """

    sort: ArraySort
    base: Union[Node, ArrayMerge]
    stores: tuple = ()

    def __post_init__(self):
        concrete = all(i.is_const for i, _ in self.stores)
        object.__setattr__(self, "_concrete", concrete)
        if concrete:
            object.__setattr__(self, "_index", {i.param: v for i, v in self.stores})

    @classmethod
    def filled(cls, default: Node, index_width: int = BV8) -> "SymArray":
        return cls(ArraySort(index_width, default.sort), default)

    @property
    def concrete_indices(self) -> bool:
        return self._concrete


def array_write(a: SymArray, index: Node, value: Node) -> SymArray:
    if index.sort != a.sort.index_width or value.sort != a.sort.elem_width:
        raise SortError(f"store: sorts {index.sort}/{value.sort} into {a.sort}")
    if index.is_const and a._concrete:
        kept = tuple(e for e in a.stores if e[0] is not index)
        return SymArray(a.sort, a.base, kept + ((index, value),))
    return SymArray(a.sort, a.base, a.stores + ((index, value),))


def _base_read(base, index: Node) -> Node:
    if isinstance(base, ArrayMerge):
        return ite(base.cond, array_read(base.then, index), array_read(base.other, index))
    if base.op == "var":
        return apply("select", base, index)
    return base


def array_read(a: SymArray, index: Node) -> Node:
    """Read-over-write resolution; symbolic indices become an ``ite`` chain."""
    if index.sort != a.sort.index_width:
        raise SortError(f"select: index sort {index.sort} for {a.sort}")
    if index.is_const and a._concrete:
        hit = a._index.get(index.param)
        return hit if hit is not None else _base_read(a.base, index)
    pending = []
    result = None
    for idx, val in reversed(a.stores):
        if idx.is_const and index.is_const:
            if idx.param == index.param:
                result = val
                break
            continue
        pending.append((idx, val))
    if result is None:
        result = _base_read(a.base, index)
    for idx, val in reversed(pending):
        result = ite(apply("eq", index, idx), val, result)
    return result


def array_merge(cond: Node, a: SymArray, b: SymArray) -> SymArray:
    if cond.is_const:
        return a if cond.param else b
    if a is b:
        return a
    if a.sort != b.sort:
        raise SortError("merging arrays of different sorts")
    if a.base is b.base and a._concrete and b._concrete:
        indices = sorted(set(a._index) | set(b._index))
        stores = []
        for i in indices:
            idx = const(i, a.sort.index_width)
            v = ite(cond, array_read(a, idx), array_read(b, idx))
            stores.append((idx, v))
        return SymArray(a.sort, a.base, tuple(stores))
    return SymArray(a.sort, ArrayMerge(cond, a, b))
