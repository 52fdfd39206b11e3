"""Concrete interpreter and brute-force oracle."""

import pytest
from hypothesis import given, settings, strategies as st

from leakbound.errors import (
    AssertionFailure, AssumptionViolated, BudgetExceeded, ConcreteError, StepBudgetExceeded,
)
from leakbound.frontend import load_source
from leakbound.lang.harness import resolve_harness
from leakbound.metrics import merge_relations
from leakbound.oracle import (
    NondetStream, enumerate_relation, from_pattern, oracle_capacity, run_concrete, to_pattern,
)


def harnessed(text, arch=32):
    prog = load_source(text, arch)
    return prog, resolve_harness(prog)


SEMANTICS = harnessed("""
#pragma leak high h
#pragma leak observe __return
int f(u8 h) {
    u8 a[4] = {0};
    int x = -1;
    a[0] = 1;
    assume(h < 200);
    assert(h < 100);
    return (x >> 1) + (u8)(h + 250) + a[h & 7];
}
""")


@pytest.mark.parametrize("name, expected", [
    ("getpass", ((0,), 1)),
    ("getpass_echo", ((1,), 256)),
    ("loop3", ((), 4)),
    ("modulo", ((0,), 4)),
    ("password", ((0,), 2)),
    ("underflow_small", ((101,), 256)),
    ("underflow_small_patched", ((-128,), 1)),
])
def test_oracle_capacity_frozen(corpus, name, expected):
    assert oracle_capacity(*corpus(name)) == expected


def test_modulo_classes(corpus):
    prog, hs = corpus("modulo")
    rel = enumerate_relation(prog, hs, l=(1,), high_domain=[(h,) for h in range(16)])
    assert set(rel.classes) == {frozenset((h,) for h in range(r, 16, 4)) for r in range(4)}
    assert dict(zip(rel.observations, map(len, rel.classes))) == {(1,): 4, (2,): 4, (3,): 4, (4,): 4}


def test_password_classes(corpus):
    rel = enumerate_relation(*corpus("password"), l=(7,))
    assert rel.class_of((7,)) == frozenset({(7,)})
    assert len(rel.class_of((8,))) == 255


def test_wraparound_shift_cast_and_out_of_bounds():
    prog, hs = SEMANTICS
    # -1 >> 1 stays -1; (u8)255 = 255; a[5] is out of bounds and reads 0
    assert run_concrete(prog, hs, (5,)) == (254,)
    # (u8)(6 + 250) wraps to 0; a[6] reads 0
    assert run_concrete(prog, hs, (6,)) == (-1,)


def test_assertions_and_assumptions():
    prog, hs = SEMANTICS
    with pytest.raises(AssertionFailure, match="line 9"):
        run_concrete(prog, hs, (150,))
    with pytest.raises(AssumptionViolated, match="line 8"):
        run_concrete(prog, hs, (220,))
    # the oracle drops assumption violations and ignores assertion failures
    rel = enumerate_relation(prog, hs)
    assert (len(rel.domain), rel.class_count) == (200, 175)


def test_step_budget():
    prog, hs = harnessed("""
#pragma leak high h
#pragma leak observe __return
int f(u8 h) { int i = 0; while (h != 3) { i++; } return i; }
""")
    assert run_concrete(prog, hs, (3,)) == (0,)
    with pytest.raises(StepBudgetExceeded):
        run_concrete(prog, hs, (1,), max_steps=10_000)


def test_nondeterminism_requires_a_stream_and_is_enumerated():
    prog, hs = harnessed("""
#pragma leak high h
#pragma leak observe __return
int f(u8 h) { u8 c = input(); if (h > 1) return c & 1; return 7; }
""")
    with pytest.raises(ConcreteError, match="no value stream"):
        run_concrete(prog, hs, (0,))
    assert run_concrete(prog, hs, (2,), nondet=[3]) == (1,)
    rel = enumerate_relation(prog, hs, high_domain=[(0,), (2,)])
    # points are (h, choice); h=2 splits on the parity of the choice
    assert sorted(rel.observations) == [(0,), (1,), (7,)]
    assert len(rel.domain) == 512
    assert rel.class_of((2, 5)) == frozenset((2, c) for c in range(1, 256, 2))


def test_copy_to_user_padding_order(corpus):
    prog, hs = corpus("sigaltstack", 64)
    # the uninitialized local is drawn first, the 4 padding bytes second
    (image,) = run_concrete(prog, hs, (5,), (70,), nondet=[0, 0xDEADBEEF])
    assert image == bytes.fromhex("4000000000000000" "01000000" "8000000000000000" "efbeadde")
    (image,) = run_concrete(prog, hs, (5,), (7,), nondet=[0])
    assert image[8:12] == bytes(4) and image[20:] == bytes(4)


def test_enumeration_budget(corpus):
    prog, hs = corpus("password")
    with pytest.raises(BudgetExceeded):
        oracle_capacity(prog, hs, budget=1000)
    with pytest.raises(BudgetExceeded):
        enumerate_relation(prog, hs, l=(1,), budget=10)


def test_nondet_stream_records_requests():
    s = NondetStream([300, 5])
    assert [s(8), s(4), s(16)] == [44, 5, 0]
    assert s.trace == [(8, 44), (4, 5), (16, 0)]
    assert s.choices == (44, 5, 0)


@given(st.integers(-128, 127))
def test_pattern_round_trip_signed(v):
    prog, hs = harnessed("#pragma leak high h\n#pragma leak observe __return\nint f(s8 h) { return h; }")
    (_, t), = hs.high_params
    assert from_pattern(to_pattern(v, t, 32), t, 32) == v
    assert run_concrete(prog, hs, (v,)) == (v,)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 255), min_size=1, max_size=40, unique=True), st.integers(1, 5))
def test_sharded_enumeration_merges_to_the_same_relation(corpus, highs, shards):
    """Splitting the secret domain into shards and merging gives the unsharded relation."""
    prog, hs = corpus("modulo")
    points = [(h,) for h in highs]
    whole = enumerate_relation(prog, hs, l=(0,), high_domain=points)
    parts = [enumerate_relation(prog, hs, l=(0,), high_domain=points[i::shards]) for i in range(shards)]
    parts = [p for p in parts if p.classes]
    assert merge_relations(parts) == whole
    assert merge_relations(reversed(parts)) == whole
