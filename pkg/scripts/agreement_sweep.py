"""Differential sweep: concrete vs symbolic runs and compiled code vs the expression evaluator.

Reports counts of disagreements over random straight-line programs and
random expressions; both should be zero.

    python3 scripts/agreement_sweep.py --programs 5000 --exprs 5000 --seed 1
"""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from helpers import DATA_CELLS, concrete_symbolic_agree, random_expr, random_program, random_word  # noqa: E402
from redfin import bits  # noqa: E402
from redfin.hll import compile_program, eval_expr  # noqa: E402
from redfin.interpreter import simulate  # noqa: E402
from redfin.machine import boot  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--programs", type=int, default=2000)
    ap.add_argument("--exprs", type=int, default=2000)
    ap.add_argument("--max-length", type=int, default=16)
    ap.add_argument("--max-depth", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = random.Random(args.seed)

    t0 = time.perf_counter()
    bad = 0
    for _ in range(args.programs):
        program = random_program(rng, rng.randint(1, args.max_length))
        data = [random_word(rng) for _ in range(DATA_CELLS)]
        if not concrete_symbolic_agree(program, data):
            bad += 1
            print("disagreement:", [str(i) for i in program], data)
    print(f"programs: {args.programs} checked, {bad} disagreements, {time.perf_counter() - t0:.1f}s")

    t0 = time.perf_counter()
    bad = 0
    for _ in range(args.exprs):
        e = random_expr(rng, rng.randint(0, args.max_depth))
        inputs = [random_word(rng) for _ in range(4)]
        program = compile_program(e)
        final = simulate(len(program) + 1, boot(program, inputs + [0, 100]))
        if final.registers[0] != bits.wrap(eval_expr(e, dict(enumerate(inputs))), 64) or final.memory[5] != 100:
            bad += 1
            print("miscompiled:", e, inputs)
    print(f"expressions: {args.exprs} checked, {bad} miscompiled, {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
