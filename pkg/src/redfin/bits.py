"""Scalar two's-complement bitvector arithmetic.

Values are carried as unsigned Python ints in ``[0, 2**width)``. These
functions are the single source of truth for wrap-around behaviour: the
concrete simulator calls them directly and the symbolic core uses them for
constant folding, so both engines agree bit for bit.

Division follows SMT-LIB ``bvsdiv``/``bvudiv`` (division by zero gives all
ones for a non-negative dividend and 1 for a negative one).
"""

from __future__ import annotations


def mask(width: int) -> int:
    return (1 << width) - 1


def wrap(value: int, width: int) -> int:
    """Reduce an arbitrary integer modulo ``2**width``."""
    return value & mask(width)


def to_signed(value: int, width: int) -> int:
    value &= mask(width)
    if value >> (width - 1):
        return value - (1 << width)
    return value


def add(a: int, b: int, width: int) -> int:
    return (a + b) & mask(width)


def sub(a: int, b: int, width: int) -> int:
    return (a - b) & mask(width)


def mul(a: int, b: int, width: int) -> int:
    return (a * b) & mask(width)


def neg(a: int, width: int) -> int:
    return (-a) & mask(width)


def bvnot(a: int, width: int) -> int:
    return ~a & mask(width)


def udiv(a: int, b: int, width: int) -> int:
    if b == 0:
        return mask(width)
    return a // b


def sdiv(a: int, b: int, width: int) -> int:
    sa, sb = to_signed(a, width), to_signed(b, width)
    if sb == 0:
        return mask(width) if sa >= 0 else 1
    q = abs(sa) // abs(sb)
    if (sa < 0) != (sb < 0):
        q = -q
    return q & mask(width)


def shl(a: int, amount: int, width: int) -> int:
    if amount >= width:
        return 0
    return (a << amount) & mask(width)


def lshr(a: int, amount: int, width: int) -> int:
    if amount >= width:
        return 0
    return a >> amount


def ashr(a: int, amount: int, width: int) -> int:
    amount = min(amount, width - 1)
    return (to_signed(a, width) >> amount) & mask(width)


def slt(a: int, b: int, width: int) -> bool:
    return to_signed(a, width) < to_signed(b, width)


def sgt(a: int, b: int, width: int) -> bool:
    return to_signed(a, width) > to_signed(b, width)


def ult(a: int, b: int, width: int) -> bool:
    return a < b


def zext(a: int, width: int, extra: int) -> int:
    return a


def sext(a: int, width: int, extra: int) -> int:
    return to_signed(a, width) & mask(width + extra)


def extract(a: int, hi: int, lo: int) -> int:
    return (a >> lo) & mask(hi - lo + 1)
