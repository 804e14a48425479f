"""Scalar bit-vector ops and symbolic constant folding, checked against z3's own simplifier."""

import itertools

import pytest
import z3
from hypothesis import given, strategies as st

from helpers import BOUNDARY
from redfin import bits
from redfin.symbolic import BOOL, BV8, apply, const

W = 64
words = st.one_of(st.sampled_from(BOUNDARY), st.integers(-(1 << 63), (1 << 64) - 1))


def bv(x, w=W):
    return z3.BitVecVal(x % (1 << w), w)


def z3_value(e):
    r = z3.simplify(e)
    return z3.is_true(r) if z3.is_bool(r) else r.as_long()


Z3_BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "sdiv": lambda a, b: a / b,
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "xor": lambda a, b: a ^ b,
    "shl": lambda a, b: a << b,
    "lshr": z3.LShR,
    "ashr": lambda a, b: a >> b,
    "slt": lambda a, b: a < b,
    "sgt": lambda a, b: a > b,
    "ult": z3.ULT,
    "eq": lambda a, b: a == b,
}
SCALAR = {
    "add": bits.add, "sub": bits.sub, "mul": bits.mul, "sdiv": bits.sdiv, "shl": bits.shl,
    "lshr": bits.lshr, "ashr": bits.ashr, "slt": bits.slt, "sgt": bits.sgt, "ult": bits.ult,
}


def trunc_div(a, b):
    """Reference signed division: round toward zero, SMT-LIB result for b = 0."""
    a, b = bits.to_signed(bits.wrap(a, W), W), bits.to_signed(bits.wrap(b, W), W)
    if b == 0:
        return bits.mask(W) if a >= 0 else 1
    q = abs(a) // abs(b)
    return bits.wrap(q if (a < 0) == (b < 0) else -q, W)


@pytest.mark.parametrize("op", sorted(Z3_BINARY))
def test_fold_matches_z3_on_boundary_pairs(op):
    for a, b in itertools.product(BOUNDARY, repeat=2):
        folded = apply(op, const(a), const(b))
        assert folded.is_const
        assert folded.param == z3_value(Z3_BINARY[op](bv(a), bv(b))), (op, a, b)


@pytest.mark.parametrize("op", sorted(SCALAR))
@given(a=words, b=words)
def test_scalar_ops_match_z3(op, a, b):
    a, b = bits.wrap(a, W), bits.wrap(b, W)
    assert SCALAR[op](a, b, W) == z3_value(Z3_BINARY[op](bv(a), bv(b)))


@given(a=words, b=words)
def test_sdiv_truncates(a, b):
    assert bits.sdiv(bits.wrap(a, W), bits.wrap(b, W), W) == trunc_div(a, b)


def test_sdiv_corner_cases():
    m = bits.mask(W)
    assert bits.sdiv(7, 0, W) == m
    assert bits.sdiv(bits.wrap(-7, W), 0, W) == 1
    assert bits.sdiv(bits.wrap(-7, W), 2, W) == bits.wrap(-3, W)
    assert bits.sdiv(1 << 63, m, W) == 1 << 63  # INT_MIN / -1 wraps


@given(a=words)
def test_unary_ops_match_z3(a):
    a = bits.wrap(a, W)
    assert bits.neg(a, W) == z3_value(-bv(a))
    assert bits.bvnot(a, W) == z3_value(~bv(a))
    assert apply("neg", const(a)).param == bits.neg(a, W)
    assert apply("not", const(a)).param == bits.bvnot(a, W)


@given(a=words, lo=st.integers(0, 63), span=st.integers(0, 63))
def test_extract_and_extend_match_z3(a, lo, span):
    a = bits.wrap(a, W)
    hi = min(63, lo + span)
    assert bits.extract(a, hi, lo) == z3_value(z3.Extract(hi, lo, bv(a)))
    assert bits.sext(a, W, 64) == z3_value(z3.SignExt(64, bv(a)))
    assert bits.zext(a, W, 64) == z3_value(z3.ZeroExt(64, bv(a)))
    assert apply("extract", const(a), param=(hi, lo)).param == bits.extract(a, hi, lo)


def test_shift_amount_at_or_beyond_width():
    assert bits.shl(1, 64, W) == 0
    assert bits.lshr(1 << 63, 64, W) == 0
    assert bits.ashr(1 << 63, 200, W) == bits.mask(W)
    assert bits.ashr(5, 64, W) == 0


def test_to_signed_and_wrap():
    assert bits.to_signed(bits.mask(W), W) == -1
    assert bits.to_signed(1 << 63, W) == -(1 << 63)
    assert bits.wrap(-1, 8) == 255
    assert bits.to_signed(127, 8) == 127


def test_boolean_fold():
    t, f = const(True, BOOL), const(False, BOOL)
    assert apply("and", t, f) is f
    assert apply("or", t, f) is t
    assert apply("not", f) is t
    assert apply("xor", t, t) is f
    assert apply("ite", t, const(1, BV8), const(2, BV8)).param == 1
