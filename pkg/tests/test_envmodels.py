"""Padding model and builtin library functions."""

import pytest
from hypothesis import given, strategies as st

from leakbound.envmodels import arch_align, padding_bytes
from leakbound.envmodels import builtins as B
from leakbound.errors import MemoryModelError
from leakbound.frontend import load_source
from leakbound.lang.harness import resolve_harness
from leakbound.oracle import run_concrete
from leakbound.policy import check_policy


def test_padding_examples():
    assert padding_bytes(20, 8) == 4
    assert padding_bytes(12, 4) == 0
    assert padding_bytes(7, 4) == 1
    assert padding_bytes(16, 8) == 0
    assert (arch_align(32), arch_align(64)) == (4, 8)


@pytest.mark.parametrize("args", [(0, 4), (5, 2), (5, 16)])
def test_padding_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        padding_bytes(*args)


def test_unknown_architecture():
    with pytest.raises(ValueError):
        arch_align(16)


@given(st.integers(1, 10_000), st.sampled_from([4, 8]))
def test_padding_rounds_up_to_alignment(size, align):
    pad = padding_bytes(size, align)
    assert 0 <= pad < align
    assert (size + pad) % align == 0


def test_registry():
    names = [s.name for s in B.list_builtins()]
    assert names == ["assert", "assume", "copy_to_user", "input", "memcmp", "memcpy", "memset"]
    assert B.lookup("memcmp").signature() == "s32 memcmp(void *, void *, size_t)"
    assert B.lookup("printf") is None
    assert B.lookup("copy_to_user").writes == (0,)


def test_concrete_semantics():
    ops = B.ConcreteOps(64, nondet=lambda w: 0xAABBCCDD)
    assert B.sem_memcmp(ops, [1, 2, 3], [1, 2, 4], 2).value == 0
    assert B.sem_memcmp(ops, [1, 2, 3], [1, 2, 4], 3).value == 0xFFFFFFFF
    assert B.sem_memset(ops, [9, 9, 9], 0x1FF, 2).dst == [0xFF, 0xFF, 9]
    assert B.sem_memcpy(ops, [0, 0, 0], [5, 6, 7], 2).dst == [5, 6, 0]
    # 20 bytes copied on a 64-bit target: 4 nondeterministic padding bytes follow
    res = B.sem_copy_to_user(ops, [0] * 24, list(range(1, 21)), 20)
    assert res.dst == list(range(1, 21)) + [0xDD, 0xCC, 0xBB, 0xAA]
    assert res.value == 0
    # on 32 bits the same copy needs no padding and draws nothing
    quiet = B.ConcreteOps(32)
    assert B.sem_copy_to_user(quiet, [0] * 20, [1] * 20, 20).dst == [1] * 20
    with pytest.raises(MemoryModelError, match="destination region has 2 bytes"):
        B.sem_memcpy(ops, [0, 0], [1, 2, 3], 3)
    with pytest.raises(MemoryModelError, match="no nondeterministic value source"):
        B.ConcreteOps(64).nondet(8)


LEAK = """
#pragma leak high k
#pragma leak observe out
struct rec { u16 a; u8 b; };
int f(struct rec *out, u8 k) {
    struct rec r;
    r.a = 1;
    r.b = 2;
    copy_to_user(out, &r, sizeof(r));
    return 0;
}
"""


@pytest.mark.parametrize("arch", [32, 64])
def test_padding_leak_is_found_and_replayed(arch):
    """copy_to_user fills the 1 (32-bit) or 5 (64-bit) bytes after a 3-byte record with nondeterministic data."""
    prog = load_source(LEAK, arch)
    hs = resolve_harness(prog)
    (obs,) = hs.observables
    assert obs.byte_length == (4 if arch == 32 else 8)
    (image,) = run_concrete(prog, hs, (0,), nondet=[0, 0x77])
    assert image[:3] == bytes([1, 0, 2]) and image[3] == 0x77
    assert check_policy(prog, hs, 1).status == "Violated"
