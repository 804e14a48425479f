import random

import pytest
from hypothesis import given, strategies as st

from helpers import random_expr
from redfin import bits
from redfin.hll import (
    ENERGY, Abs, Bin, CompileError, CompileTarget, Const, Var, compile_expr, compile_program, energy_estimate,
    eval_expr, parse_expr, stack_depth, sym_expr, variables,
)
from redfin.interpreter import simulate
from redfin.isa import Op
from redfin.machine import MEMORY_SIZE, boot
from redfin.smt import evaluate_model
from redfin.symbolic import Scope

SP, TMP, SP_INIT = 5, 4, 100
words = st.integers(-(1 << 63), (1 << 63) - 1)


def run_compiled(e, inputs, target=CompileTarget()):
    """Run the compiled program with cells 0..3 = inputs and the stack pointer at 100."""
    data = list(inputs) + [0] * (6 - len(inputs))
    data[target.stack_pointer_cell] = SP_INIT
    program = compile_program(e, target)
    steps = len(program) + 1
    return boot(program, data), simulate(steps, boot(program, data))


def test_energy_example_memory_dump_and_result():
    start, final = run_compiled(ENERGY, [10, 5, 3, 5])
    assert final.registers[0] == 20
    assert list(final.memory[:6]) == [10, 5, 3, 5, 5, 100]
    assert final.flags[2]


def test_energy_estimate_is_generic():
    assert energy_estimate(10, 5, 3, 5) == 20
    assert str(ENERGY) == "((abs((m[0] - m[1])) * (m[2] + m[3])) / 2)"
    assert eval_expr(ENERGY, {0: 10, 1: 5, 2: 3, 3: 5}) == 20


def test_known_overflowing_input_goes_negative():
    env = {0: 5190405167614263295, 1: 0, 2: 149927859193384455, 3: 157447350457463356}
    assert eval_expr(ENERGY, env) < 0


def _check_compiled(e, inputs, target=CompileTarget()):
    start, final = run_compiled(e, inputs, target)
    r, sp, tmp = target.result_register, target.stack_pointer_cell, target.temporary_cell
    assert final.flags[2], "program must halt"
    assert final.registers[r] == bits.wrap(eval_expr(e, dict(enumerate(inputs))), 64)
    assert final.memory[sp] == SP_INIT
    for a in range(MEMORY_SIZE):
        if a == tmp or a < SP_INIT and a >= SP_INIT - stack_depth(e):
            continue
        assert final.memory[a] == start.memory[a], f"cell {a} clobbered"


def test_compiler_on_1000_random_expressions():
    rng = random.Random(7)
    for _ in range(1000):
        e = random_expr(rng, rng.randint(0, 5))
        inputs = [rng.choice([rng.randint(-(1 << 63), (1 << 63) - 1), rng.randint(-100, 100), 0, -1]) for _ in range(4)]
        _check_compiled(e, inputs)


@given(st.randoms(use_true_random=False), st.lists(words, min_size=4, max_size=4), st.integers(0, 3))
def test_compiler_respects_target(rnd, inputs, reg):
    e = random_expr(rnd, 4)
    _check_compiled(e, inputs, CompileTarget(result_register=reg))


def test_stack_depth_and_code_shape():
    assert stack_depth(Var(0)) == 0
    assert stack_depth(Var(0) + Var(1)) == 0
    assert stack_depth(Var(0) + 1) == 1
    assert stack_depth(Var(0) * (Var(1) + Var(2))) == 1
    assert stack_depth(Var(0) - (Var(1) - (Var(2) - Var(3)))) == 2
    code = compile_expr(Var(0) + Var(1))
    assert [i.op for i in code] == [Op.LD, Op.ADD]
    assert compile_program(Var(0))[-1].op == Op.HALT


@pytest.mark.parametrize(
    "e,target",
    [
        (Var(0) // 0, CompileTarget()),
        (Var(0) + 300, CompileTarget()),
        (Const(-129), CompileTarget()),
        (Var(4) + Var(0), CompileTarget()),
        (Var(0), CompileTarget(stack_pointer_cell=4)),
        (Var(0), CompileTarget(result_register=4)),
    ],
)
def test_compile_errors(e, target):
    with pytest.raises(CompileError):
        compile_expr(e, target)


def test_stack_overflow_rejected():
    e = Var(0)
    for _ in range(260):
        e = Var(0) - e
    with pytest.raises(CompileError, match="stack depth"):
        compile_expr(e)


@given(st.randoms(use_true_random=False))
def test_parse_expr_roundtrips_str(rnd):
    e = random_expr(rnd, 5)
    assert parse_expr(str(e)) == e


def test_parse_expr_precedence():
    assert parse_expr("m[0] + m[1] * 2") == Bin("+", Var(0), Bin("*", Var(1), Const(2)))
    assert parse_expr("abs(m[0] - -3)") == Abs(Bin("-", Var(0), Const(-3)))
    assert variables(parse_expr("m[3] / (m[1] - m[3])")) == {1, 3}
    with pytest.raises(SyntaxError):
        parse_expr("m[0] +")


@given(st.randoms(use_true_random=False), st.lists(words, min_size=4, max_size=4))
def test_symbolic_evaluation_agrees(rnd, inputs):
    e = random_expr(rnd, 5)
    s = Scope()
    env = {a: s.var(f"v{a}") for a in range(4)}
    model = {f"v{a}": bits.wrap(v, 64) for a, v in enumerate(inputs)}
    got = evaluate_model(model, sym_expr(e, env))
    assert bits.to_signed(got, 64) == eval_expr(e, dict(enumerate(inputs)))


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 1000), st.integers(0, 1000))
def test_floor_and_truncating_division_agree_on_non_negative_inputs(t1, t2, p1, p2):
    assert energy_estimate(t1, t2, p1, p2) == eval_expr(ENERGY, {0: t1, 1: t2, 2: p1, 3: p2})
