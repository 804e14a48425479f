"""A 16-bit-instruction, 64-bit-data accumulator machine with a symbolic twin.

The same instruction semantics run on concrete integers and on symbolic
terms; symbolic runs are handed to an SMT solver for proofs, equivalence
checks and best/worst-case timing.
"""

from redfin.assembler import parse as assemble
from redfin.hll import ENERGY, compile_program, energy_estimate, eval_expr
from redfin.interpreter import DEFAULT_MODEL, PENALTY_MODEL, CycleModel, simulate, step
from redfin.isa import Instruction, Op, decode, encode
from redfin.machine import Flag, MachineState, boot, dump_state
from redfin.verifier import PropertySpec, check_equivalence, timing_bounds, verify

__all__ = [
    "assemble", "ENERGY", "compile_program", "energy_estimate", "eval_expr",
    "DEFAULT_MODEL", "PENALTY_MODEL", "CycleModel", "simulate", "step",
    "Instruction", "Op", "decode", "encode",
    "Flag", "MachineState", "boot", "dump_state",
    "PropertySpec", "check_equivalence", "timing_bounds", "verify",
]
