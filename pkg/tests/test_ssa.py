"""Loop unwinding and SSA construction."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import Compiled
from leakbound.frontend import load_source
from leakbound.lang import ast as A
from leakbound.ssa import expr as X
from leakbound.ssa.build import to_ssa
from leakbound.ssa.program import UNWIND
from leakbound.unroll import UnwindConfig, has_loops, unwind
from progen import generate

MODULO_DUMP = """\
# ssa entry=modulo arch=32
param param:h -> h
param param:l -> l
modulo::h#1 := nondet(param:h):8  # param; modulo::h copy=0 line=7
modulo::l#1 := nondet(param:l):1  # param; modulo::l copy=0 line=7
modulo::o#1 := 0:32  # assign; modulo::o copy=0 line=8
modulo::h#2 := ({0:24, nondet(param:h):8} & 15:32)[7:0]  # assign; modulo::h copy=0 line=9
modulo::o#2 := (({0:24, modulo::h#2} %s 4:32) + {0:31, nondet(param:l):1})  # assign; modulo::o copy=0 line=10
modulo::__ret#1 := modulo::o#2  # assign; modulo::__ret copy=0 line=11
output h = modulo::h#2
output l = nondet(param:l):1
output o = modulo::o#2
output __return = modulo::o#2
"""


def test_modulo_dump_is_stable(corpus):
    prog, _ = corpus("modulo")
    assert to_ssa(prog).dump() == MODULO_DUMP


def test_unwinding_removes_loops(corpus):
    prog, _ = corpus("loop3")
    assert has_loops(prog.ast)
    flat = unwind(prog, UnwindConfig(k=3))
    assert not has_loops(flat.ast)
    checks = [n for n in A.walk(flat.ast) if isinstance(n, A.UnwindCheck)]
    assert [c.loop for c in checks] == ["loop3.1"]
    assert unwind(flat, 5) is flat           # nothing left to unroll
    with pytest.raises(ValueError):
        UnwindConfig(k=0)
    with pytest.raises(ValueError):
        unwind(prog, 0)


def test_ssa_requires_loop_free_input(corpus):
    prog, _ = corpus("loop3")
    with pytest.raises(Exception, match="loop"):
        to_ssa(prog)


@pytest.mark.parametrize("k, reachable", [(2, True), (3, False), (4, False)])
def test_unwinding_obligation_reachability(corpus, k, reachable):
    """The unwinding check fires exactly when the loop needs more than k iterations."""
    prog, _ = corpus("loop3")
    ssa = to_ssa(unwind(prog, k))
    fired = []
    for h in range(256):
        inputs = {"param:h": h}
        env = ssa.evaluate(inputs)
        # a check whose guard folds to false may be dropped altogether
        fired.append(any(not ssa.eval_expr(ob.holds, env, inputs) for ob in ssa.obligations(UNWIND)))
    assert any(fired) == reachable
    if reachable:
        assert all(fired)                   # the loop always runs 3 times


def test_nondet_sites_in_execution_order():
    prog = load_source("""
int f(u8 h) {
    u8 a;
    u8 b = input();
    if (h) a = input();
    return a + b;
}
""")
    ssa = to_ssa(prog)
    origins = [s.origin for s in ssa.nondets]
    assert origins[0] == "uninitialized a"
    assert origins[1:] == ["input", "input"]
    values = iter([10, 20, 30])
    inputs = ssa.inputs_from_streams({"param:h": 0}, lambda copy: values)
    env = ssa.evaluate(inputs)
    # h == 0: the guarded input() is skipped and reads 0; a keeps its first value
    assert ssa.eval_expr(ssa.outputs["__return"], env, inputs) == 30
    assert [v for _, v in ssa.taken_sites(env, inputs)] == [10, 20]


def test_expression_builders_fold_constants():
    a = X.var("a", 8)
    assert X.add(X.const(250, 8), X.const(10, 8)).attr == 4
    assert X.and_(a, X.const(0, 8)).attr == 0
    assert X.evaluate(X.extract(X.const(0xABCD, 16), 4, 8), {}) == 0xBC
    assert X.evaluate(X.sext(X.const(0x80, 8), 16), {}) == 0xFF80
    assert X.evaluate(X.udiv(X.const(7, 8), X.const(0, 8)), {}) == 0xFF
    assert X.evaluate(X.urem(X.const(7, 8), X.const(0, 8)), {}) == 7


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 1_000_000), st.integers(0, 2 ** 32))
def test_ssa_evaluation_matches_interpreter(seed, case_seed):
    c = Compiled(generate(seed, heavy=0.3).text)
    widths = {k: len(v) for k, v in c.outputs.items()}
    rng = random.Random(case_seed)
    for _ in range(5):
        args, stream = c.random_case(rng)
        want = {k: v & ((1 << widths[k]) - 1) for k, v in c.interpret(args, stream).items()}
        assert c.evaluate(args, stream) == want
