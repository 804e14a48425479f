"""Reproduce the energy-estimation case study end to end.

Concrete run of the compiled expression, the naive and refined correctness
theorems, equivalence with the hand-written program, and best/worst-case
timing with the abs penalty enabled.

    python3 scripts/energy_case_study.py [--solver z3] [--json out.json]
"""

import argparse
import json
import time
from pathlib import Path

from redfin.assembler import disassemble, load_program
from redfin.hll import ENERGY, compile_program, eval_expr
from redfin.interpreter import simulate
from redfin.machine import boot, dump_state
from redfin.smt import Solver
from redfin.verifier import PropertySpec, check_equivalence, format_verdict, timing_bounds, verdict_json, verify

ROOT = Path(__file__).resolve().parent.parent / "programs"
DATA = [10, 5, 3, 5, 0, 100]


def banner(title):
    print(f"\n== {title} ==")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--solver", help="solver command (default $REDFIN_SOLVER or z3)")
    ap.add_argument("--json", help="write all verdicts here")
    args = ap.parse_args()
    solver = Solver(args.solver)
    hl = compile_program(ENERGY)
    ll = load_program(ROOT / "energy_ll.s")
    naive, refined, timing = (PropertySpec.load(ROOT / f"energy_{n}.json") for n in ("naive", "refined", "timing"))
    results = {}

    banner(f"compiled {ENERGY}: {len(hl)} instructions")
    print(disassemble(hl), end="")
    t0 = time.perf_counter()
    final = simulate(100, boot(hl, DATA))
    print("\n".join(dump_state(final, 0, 5).lines()))
    print(f"({time.perf_counter() - t0:.4f}s)")

    banner("theorem with p1, p2 >= 0 only")
    v = verify(hl, naive, solver)
    print("\n".join(format_verdict(v)))
    print(f"stats: {v.stats}")
    results["naive"] = verdict_json(v)
    printed = {0: 5190405167614263295, 1: 0, 2: 149927859193384455, 3: 157447350457463356}
    print(f"known overflowing input {list(printed.values())} evaluates to {eval_expr(ENERGY, printed)}")

    banner("theorem under mission bounds (30 years, 1 W)")
    v = verify(hl, refined, solver)
    print("\n".join(format_verdict(v)))
    print(f"stats: {v.stats}")
    results["refined"] = verdict_json(v)

    banner(f"equivalence: {len(ll)}-instruction hand-written vs {len(hl)}-instruction compiled")
    v = check_equivalence(ll, hl, refined, "reg(r0)", solver)
    print("\n".join(format_verdict(v)))
    print(f"stats: {v.stats}")
    results["equivalence"] = verdict_json(v)

    banner("timing of the hand-written program, abs costs +1 on negative input")
    best, worst = timing_bounds(ll, timing, penalty=True, solver=solver)
    for r in (best, worst):
        print("\n".join(format_verdict(r)))
    results["timing"] = {"best": verdict_json(best), "worst": verdict_json(worst)}

    if args.json:
        Path(args.json).write_text(json.dumps(results, indent=2))


if __name__ == "__main__":
    main()
