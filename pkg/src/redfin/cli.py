"""Command-line driver: assemble, run, verify, compare and time programs.

Exit codes: 0 success or proven, 1 falsified, 2 usage or input error,
3 unknown or solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from redfin.assembler import AsmErrors, disassemble, from_image, load_program, to_image
from redfin.hll import CompileError, CompileTarget, compile_program, parse_expr
from redfin.interpreter import DEFAULT_MODEL, PENALTY_MODEL, simulate
from redfin.isa import decode
from redfin.machine import boot, dump_state
from redfin.smt import Falsified, Optimum, Proven, Solver
from redfin.verifier import (
    GoalError,
    NotHalting,
    PropertySpec,
    check_equivalence,
    format_verdict,
    timing_bounds,
    verdict_json,
    verify,
)

EXIT_OK, EXIT_FALSIFIED, EXIT_USAGE, EXIT_UNKNOWN = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _parse_data(text: str) -> list[int]:
    if not text:
        return []
    try:
        return [int(x, 0) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad --data {text!r}: expected comma-separated integers") from None


def _parse_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            raise ValueError
        return int(lo), int(hi)
    except ValueError:
        raise UsageError(f"bad range {text!r}: expected LO..HI") from None


def _program(path: str):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return load_program(p)


def _spec(path: str) -> PropertySpec:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such spec file: {path}")
    try:
        return PropertySpec.load(p)
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"bad spec {path}: {e}") from None


def _solver(args) -> Solver:
    return Solver(args.solver, args.timeout)


def _exit_for(verdict) -> int:
    if isinstance(verdict, (Proven, Optimum)):
        return EXIT_OK
    if isinstance(verdict, Falsified):
        return EXIT_FALSIFIED
    return EXIT_UNKNOWN


def _report(args, payload: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print("\n".join(lines))


# ---------------------------------------------------------------------------
# subcommands


def cmd_asm(args) -> int:
    program = _program(args.input)
    Path(args.output).write_bytes(to_image(program))
    _report(args, {"instructions": len(program), "output": args.output},
            [f"{len(program)} instructions written to {args.output}"])
    return EXIT_OK


def cmd_disasm(args) -> int:
    p = Path(args.input)
    if not p.is_file():
        raise UsageError(f"no such file: {args.input}")
    try:
        program = [decode(w) for w in from_image(p.read_bytes())]
    except ValueError as e:
        raise UsageError(str(e)) from None
    sys.stdout.write(disassemble(program))
    return EXIT_OK


def cmd_compile(args) -> int:
    try:
        expr = parse_expr(args.expr)
        target = CompileTarget(args.result_register, args.stack_pointer, args.temporary)
        program = compile_program(expr, target)
    except (SyntaxError, CompileError) as e:
        raise UsageError(str(e)) from None
    text = f"; {expr}\n" + disassemble(program)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    program = _program(args.input)
    data = _parse_data(args.data)
    lo, hi = _parse_range(args.dump) if args.dump else (0, max(len(data) - 1, 0))
    model = PENALTY_MODEL if args.abs_penalty else DEFAULT_MODEL
    diagnostics: list = []
    t0 = time.perf_counter()
    final = simulate(args.steps, boot(program, data), model, diagnostics=diagnostics)
    elapsed = time.perf_counter() - t0
    try:
        dump = dump_state(final, lo, hi)
    except ValueError as e:
        raise UsageError(str(e)) from None
    for d in diagnostics:
        print(f"warning: illegal opcode {d.opcode} at slot {d.slot}; machine halted", file=sys.stderr)
    payload = {**vars(dump), "seconds": round(elapsed, 6)}
    _report(args, payload, dump.lines())
    return EXIT_OK


def cmd_verify(args) -> int:
    program = _program(args.input)
    spec = _spec(args.spec)
    verdict = verify(program, spec, _solver(args))
    if args.emit_smt and verdict.script:
        Path(args.emit_smt).write_text(verdict.script, encoding="utf-8")
    _report(args, verdict_json(verdict), format_verdict(verdict))
    return _exit_for(verdict)


def cmd_equiv(args) -> int:
    a, b = _program(args.first), _program(args.second)
    spec = _spec(args.spec)
    verdict = check_equivalence(a, b, spec, args.observable, _solver(args))
    if args.emit_smt and verdict.script:
        Path(args.emit_smt).write_text(verdict.script, encoding="utf-8")
    _report(args, verdict_json(verdict), format_verdict(verdict))
    return _exit_for(verdict)


def cmd_timing(args) -> int:
    program = _program(args.input)
    spec = _spec(args.spec)
    penalty = True if args.abs_penalty else None
    try:
        best, worst = timing_bounds(program, spec, penalty, _solver(args))
    except NotHalting as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNKNOWN
    payload = {"best": verdict_json(best), "worst": verdict_json(worst)}
    lines = []
    for v in (best, worst):
        lines += format_verdict(v)
    if isinstance(best, Optimum) and isinstance(worst, Optimum):
        lines.append(f"Best case = {best.value}")
        lines.append(f"Worst case = {worst.value}")
        payload["clock"] = {"best": best.value, "worst": worst.value}
    _report(args, payload, lines)
    return max(_exit_for(best), _exit_for(worst))


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="redfin", description=__doc__.splitlines()[0])
    ap.add_argument("--json", action="store_true", help="machine-readable reports")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def solver_opts(p):
        p.add_argument("--solver", help="solver command (default $REDFIN_SOLVER or z3)")
        p.add_argument("--timeout", type=float, default=300.0, help="seconds per solver call")
        p.add_argument("--json", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("asm", help="assemble source to a binary image")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("disasm", help="disassemble a binary image")
    p.add_argument("input")
    p.set_defaults(func=cmd_disasm)

    p = sub.add_parser("compile", help="compile an expression such as 'abs(m[0] - m[1]) / 2'")
    p.add_argument("expr")
    p.add_argument("-o", "--output")
    p.add_argument("--result-register", type=int, default=0)
    p.add_argument("--stack-pointer", type=int, default=5, help="cell holding the stack pointer")
    p.add_argument("--temporary", type=int, default=4, help="scratch memory cell")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run", help="run a program on concrete data")
    p.add_argument("input")
    p.add_argument("--data", default="", help="initial memory, e.g. 10,5,3,5,0,100")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--dump", help="memory range LO..HI to print")
    p.add_argument("--abs-penalty", action="store_true", help="abs on a negative operand costs one extra cycle")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="prove a property spec")
    p.add_argument("input")
    p.add_argument("--spec", required=True)
    p.add_argument("--emit-smt", help="also write the solver script here")
    solver_opts(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("equiv", help="prove two programs agree on an observable")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--spec", required=True)
    p.add_argument("--observable", default="reg(r0)")
    p.add_argument("--emit-smt")
    solver_opts(p)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("timing", help="best and worst case clock")
    p.add_argument("input")
    p.add_argument("--spec", required=True)
    p.add_argument("--abs-penalty", action="store_true")
    solver_opts(p)
    p.set_defaults(func=cmd_timing)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, AsmErrors, GoalError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
