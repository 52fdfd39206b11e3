"""Shared helpers: running generated programs concretely and through the encoder."""

from __future__ import annotations

import random

from leakbound.bitblast import Encoder, lits_value
from leakbound.frontend import load_source
from leakbound.interp import Interpreter, make_ref
from leakbound.oracle import NondetStream
from leakbound.sat import SAT, Solver
from leakbound.ssa.build import to_ssa
from leakbound.unroll import unwind

from progen import MAX_TRIPS

UNWIND_K = MAX_TRIPS + 1


class Compiled:
    """A generated program in both forms: typed AST (for the interpreter) and SSA + CNF."""

    def __init__(self, text: str, entry: str = "f", arch: int = 32):
        self.prog = load_source(text, arch, entry)
        self.entry = entry
        self.info = self.prog.function(entry)
        self.ssa = to_ssa(unwind(self.prog, UNWIND_K))
        self.enc = Encoder(self.ssa)
        self.outputs = {"__return": self.enc.enc(self.ssa.outputs["__return"])}
        if "*out" in self.ssa.outputs:
            self.outputs["*out"] = self.enc.enc(self.ssa.outputs["*out"])
        self._solver = None

    def random_case(self, rng: random.Random):
        """``(param values, nondet stream)`` drawn uniformly."""
        args = {}
        for name, t in self.info.params:
            t = t.elem if t.kind == "ptr" else t
            args[name] = rng.getrandbits(8 if t.kind == "bool" else t.width) & (1 if t.kind == "bool" else -1)
        stream = [rng.getrandbits(32) for _ in range(40)]
        return args, stream

    def interpret(self, args: dict, stream) -> dict:
        interp = Interpreter(self.prog, on_assert="record")
        call_args, holders = [], {}
        for name, t in self.info.params:
            if t.kind == "ptr":
                holder, ref = make_ref(args[name])
                holders[name] = holder
                call_args.append(ref)
            else:
                call_args.append(args[name])
        ret = interp.call(self.entry, call_args, NondetStream(stream))
        out = {"__return": ret}
        if "*out" in self.outputs:
            out["*out"] = holders["out"][0]
        return out

    def ssa_inputs(self, args: dict, stream) -> dict:
        fixed = {}
        for label, name in self.ssa.params.items():
            fixed[label] = args[name.lstrip("*")]
        it = iter(stream)
        return self.ssa.inputs_from_streams(fixed, lambda copy: it)

    def evaluate(self, args: dict, stream) -> dict:
        inputs = self.ssa_inputs(args, stream)
        env = self.ssa.evaluate(inputs)
        return {k: self.ssa.eval_expr(self.ssa.outputs[k], env, inputs) for k in self.outputs}

    def sat_evaluate(self, args: dict, stream) -> dict:
        """Outputs read from a model of the CNF with every input fixed (as solver assumptions)."""
        inputs = self.ssa_inputs(args, stream)
        if self._solver is None:
            cnf = self.enc.instance([], "none")
            self._solver = Solver(cnf.variable_count, cnf.clauses, cnf.decision_order(), check_models=False)
        units = []
        for label, bits in self.enc.inputs.items():
            v = inputs.get(label, 0)
            units += [b if (v >> i) & 1 else -b for i, b in enumerate(bits)]
        res = self._solver.solve(units)
        assert res.status == SAT, "fixing every input must leave the formula satisfiable"
        return {k: lits_value(lits, res.model) for k, lits in self.outputs.items()}


def mask_outputs(out: dict, widths: dict) -> dict:
    return {k: v & ((1 << widths[k]) - 1) for k, v in out.items()}
