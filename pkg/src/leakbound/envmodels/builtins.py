"""Registry of builtin functions with a single, backend-neutral semantics.

Each builtin's behaviour is written once against a small *operations* interface
(``ops``).  The concrete interpreter supplies integer operations; the SSA
builder supplies expression-building operations.  Both therefore evaluate the
same specification, which is what the differential tests check.

Memory builtins operate on byte lists.  The caller (interpreter or SSA builder)
slices the bytes of the argument regions out of the objects they live in and
splices the returned destination bytes back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from ..errors import MemoryModelError
from ..lang.types import BOOL, INT, VOID, TypeSpec
from .padding import arch_align, padding_bytes

# argument kinds understood by the type checker
REGION = "region"   # &lvalue, array lvalue or pointer parameter
SCALAR = "scalar"   # converted to the declared scalar type
SIZE = "size"       # compile-time constant byte count
COND = "cond"       # any scalar, tested against zero


@dataclass(frozen=True)
class BuiltinSpec:
    name: str
    params: tuple            # ((kind, TypeSpec | None), ...)
    ret: TypeSpec
    doc: str
    semantics: Optional[Callable] = None
    nondet: str = ""         # description of nondeterministic outputs
    statement_only: bool = False
    writes: tuple = ()       # indices of REGION params that are written

    def signature(self) -> str:
        args = []
        for kind, t in self.params:
            if kind == REGION:
                args.append("void *")
            elif kind == SIZE:
                args.append("size_t")
            elif t is not None:
                args.append(str(t))
            else:
                args.append("int")
        return f"{self.ret} {self.name}({', '.join(args)})"


class MemResult:
    """Outcome of a memory builtin: the new destination bytes and a return value."""

    __slots__ = ("dst", "value")

    def __init__(self, dst, value):
        self.dst = dst
        self.value = value


def _check_len(name, region, n, what):
    if len(region) < n:
        raise MemoryModelError(f"{name}: {what} region has {len(region)} bytes, {n} requested")


def sem_memcmp(ops, a, b, n):
    """0 when the first ``n`` bytes agree, -1 otherwise (not lexicographic)."""
    _check_len("memcmp", a, n, "first")
    _check_len("memcmp", b, n, "second")
    same = ops.all_of([ops.eq(a[i], b[i]) for i in range(n)])
    return MemResult(None, ops.ite(same, ops.const(0, 32), ops.const(-1, 32)))


def sem_memset(ops, dst, c, n):
    _check_len("memset", dst, n, "destination")
    byte = ops.extract(c, 0, 8)
    return MemResult([byte] * n + list(dst[n:]), None)


def sem_memcpy(ops, dst, src, n):
    _check_len("memcpy", dst, n, "destination")
    _check_len("memcpy", src, n, "source")
    return MemResult(list(src[:n]) + list(dst[n:]), None)


def sem_copy_to_user(ops, dst, src, n):
    """Copy ``n`` bytes, then expose the trailing alignment padding.

    The padding following an ``n``-byte object is a single nondeterministic
    value of ``padding_bytes(n, align)`` bytes.  Bytes that fall outside the
    destination region are dropped.
    """
    _check_len("copy_to_user", dst, n, "destination")
    _check_len("copy_to_user", src, n, "source")
    out = list(src[:n]) + list(dst[n:])
    pad = padding_bytes(n, arch_align(ops.arch)) if n else 0
    if pad:
        value = ops.nondet(8 * pad, "copy_to_user.padding")
        for i in range(pad):
            if n + i < len(out):
                out[n + i] = ops.extract(value, 8 * i, 8)
    return MemResult(out, ops.const(0, 32))


REGISTRY: dict[str, BuiltinSpec] = {}


def _register(spec: BuiltinSpec):
    REGISTRY[spec.name] = spec


_register(BuiltinSpec(
    "input", (), VOID,
    "nondeterministic value of the assignment target's type",
    nondet="all bits of the result",
))
_register(BuiltinSpec(
    "assume", ((COND, BOOL),), VOID,
    "restrict attention to executions where the condition holds",
    statement_only=True,
))
_register(BuiltinSpec(
    "assert", ((COND, BOOL),), VOID,
    "claim checked by the model checker",
    statement_only=True,
))
_register(BuiltinSpec(
    "memcmp", ((REGION, None), (REGION, None), (SIZE, None)), INT,
    "0 if the first n bytes are equal, -1 otherwise",
    semantics=sem_memcmp,
))
_register(BuiltinSpec(
    "memset", ((REGION, None), (SCALAR, INT), (SIZE, None)), VOID,
    "set n bytes of the destination to the low byte of c",
    semantics=sem_memset, statement_only=True, writes=(0,),
))
_register(BuiltinSpec(
    "memcpy", ((REGION, None), (REGION, None), (SIZE, None)), VOID,
    "copy n bytes from source to destination (regions must not overlap)",
    semantics=sem_memcpy, statement_only=True, writes=(0,),
))
_register(BuiltinSpec(
    "copy_to_user", ((REGION, None), (REGION, None), (SIZE, None)), INT,
    "copy n bytes, then fill trailing alignment padding with nondeterministic bytes; returns 0",
    semantics=sem_copy_to_user, nondet="padding_bytes(n, align) trailing bytes", writes=(0,),
))


def lookup(name: str) -> Optional[BuiltinSpec]:
    return REGISTRY.get(name)


def list_builtins() -> list[BuiltinSpec]:
    return [REGISTRY[k] for k in sorted(REGISTRY)]


class ConcreteOps:
    """Integer implementation of the operations interface.

    Values are unsigned bit patterns; booleans are 0/1.
    """

    def __init__(self, arch: int = 32, nondet: Callable[[int], int] | None = None):
        self.arch = arch
        self._nondet = nondet

    def const(self, value: int, width: int) -> int:
        return value & ((1 << width) - 1)

    def eq(self, a: int, b: int) -> int:
        return int(a == b)

    def all_of(self, bits) -> int:
        return int(all(bits))

    def ite(self, c: int, a: int, b: int) -> int:
        return a if c else b

    def extract(self, v: int, lo: int, width: int) -> int:
        return (v >> lo) & ((1 << width) - 1)

    def nondet(self, width: int, label: str = "") -> int:
        if self._nondet is None:
            raise MemoryModelError(f"no nondeterministic value source for {label or 'input'}")
        return self._nondet(width) & ((1 << width) - 1)
