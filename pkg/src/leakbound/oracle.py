"""Brute-force ground truth: run the entry function on every input point and
group secrets by what an observer sees."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .errors import AssumptionViolated, BudgetExceeded, ConcreteError
from .interp import DEFAULT_MAX_STEPS, Interpreter, make_ref, object_bits, value_bits
from .lang.harness import HarnessSpec
from .lang.typecheck import TypedProgram
from .lang.types import TypeSpec, image_size, normalize, value_range
from .metrics import EquivalenceRelation

DEFAULT_BUDGET = 1 << 20


# -- value conversion ---------------------------------------------------------------


def to_pattern(value, t: TypeSpec, arch: int) -> int:
    """Encode a user-level value (int, or bytes for aggregates) as a bit pattern.

    Aggregates given as bytes may be ``sizeof`` or padded-image long.
    """
    if t.kind == "ptr":
        t = t.elem
    if t.kind == "bool":
        return 1 if value else 0
    if isinstance(value, (bytes, bytearray)):
        if t.is_scalar:
            raise ConcreteError(f"bytes given for scalar type {t}")
        if len(value) not in (image_size(t, arch), value_bits(t) // 8):
            raise ConcreteError(f"{t} needs {image_size(t, arch)} bytes, got {len(value)}")
        return int.from_bytes(value, "little")
    return int(value) & ((1 << object_bits(t, arch)) - 1)


def from_pattern(bits: int, t: TypeSpec, arch: int):
    """Decode a pattern to a user-level value: normalized int, or the padded byte image."""
    if t.is_scalar:
        return normalize(bits, t)
    n = image_size(t, arch)
    return (bits & ((1 << (8 * n)) - 1)).to_bytes(n, "little")


def type_domain(t: TypeSpec, arch: int) -> Iterable:
    """Every value of ``t`` (aggregates: all ``sizeof`` byte contents, zero padding)."""
    if t.kind == "ptr":
        t = t.elem
    if t.is_scalar:
        return value_range(t)
    nbytes = value_bits(t) // 8
    size = image_size(t, arch)
    return (v.to_bytes(size, "little") for v in range(1 << (8 * nbytes)))


def type_domain_size(t: TypeSpec) -> int:
    if t.kind == "ptr":
        t = t.elem
    return 1 << value_bits(t)


# -- running ------------------------------------------------------------------------


class NondetStream:
    """Value stream for nondeterministic choices.

    Replays ``prefix`` and then answers 0, recording every request as
    ``(width, value)`` so the caller can enumerate choice sequences.
    """

    def __init__(self, prefix: Sequence[int] = ()):
        self.prefix = list(prefix)
        self.trace: list[tuple[int, int]] = []

    def __call__(self, width: int) -> int:
        i = len(self.trace)
        v = self.prefix[i] if i < len(self.prefix) else 0
        v &= (1 << width) - 1
        self.trace.append((width, v))
        return v

    @property
    def choices(self) -> tuple:
        return tuple(v for _, v in self.trace)


@dataclass
class RunResult:
    observations: tuple
    choices: tuple = ()                       # nondeterministic values consumed
    failed_asserts: list = field(default_factory=list)
    ret: int = 0


class HarnessRunner:
    """Binds harness roles to the entry function's parameters for repeated runs."""

    def __init__(self, prog: TypedProgram, harness: HarnessSpec, max_steps: int = DEFAULT_MAX_STEPS,
                 on_assert: str = "raise"):
        self.prog = prog
        self.harness = harness
        self.interp = Interpreter(prog, max_steps=max_steps, on_assert=on_assert)
        self.info = prog.function(harness.entry)

    def run(self, h: Sequence, l: Sequence, nondet: Optional[Callable[[int], int]] = None) -> RunResult:
        hs = self.harness
        if len(h) != len(hs.high_params):
            raise ConcreteError(f"expected {len(hs.high_params)} high values, got {len(h)}")
        if len(l) != len(hs.low_params):
            raise ConcreteError(f"expected {len(hs.low_params)} low values, got {len(l)}")
        arch = self.prog.arch
        given = dict(zip(hs.high_names, h))
        given.update(zip(hs.low_names, l))
        args, holders = [], {}
        for name, t in self.info.params:
            v = to_pattern(given[name], t, arch) if name in given else 0
            if t.kind == "ptr":
                holder, ref = make_ref(v)
                holders[name] = holder
                args.append(ref)
            else:
                args.append(v)
        ret = self.interp.call(hs.entry, args, nondet)
        obs = []
        for o in hs.observables:
            bits = ret if o.is_return else holders[o.name][0]
            obs.append(from_pattern(bits, o.ty, arch))
        choices = nondet.choices if isinstance(nondet, NondetStream) else ()
        return RunResult(tuple(obs), choices, list(self.interp.failed_asserts), ret)


def run_concrete(prog: TypedProgram, harness: HarnessSpec, h: Sequence, l: Sequence = (),
                 max_steps: int = DEFAULT_MAX_STEPS, nondet=None) -> tuple:
    """Observation tuple of one run.

    ``nondet`` resolves nondeterministic values: a callable ``width -> int``
    or a sequence consumed in execution order.  Assertion failures raise
    :class:`~leakbound.errors.AssertionFailure`.
    """
    if nondet is not None and not callable(nondet):
        nondet = NondetStream(nondet)
    return HarnessRunner(prog, harness, max_steps).run(h, l, nondet).observations


def _next_prefix(trace) -> Optional[list]:
    """Odometer step over a recorded choice trace, or None when exhausted."""
    for i in range(len(trace) - 1, -1, -1):
        width, v = trace[i]
        if v < (1 << width) - 1:
            return [val for _, val in trace[:i]] + [v + 1]
    return None


def enumerate_points(runner: HarnessRunner, l: Sequence, high_domain: Iterable, budget: list):
    """Yield ``(point, observations)`` for each high tuple and each nondeterministic choice sequence.

    A point is the high tuple, extended with the consumed choices when the
    run was nondeterministic.  Runs violating an ``assume`` are skipped.
    ``budget`` is a one-element list counting the remaining runs.
    """
    for h in high_domain:
        h = tuple(h)
        prefix: Optional[list] = []
        while prefix is not None:
            if budget[0] <= 0:
                raise BudgetExceeded("oracle enumeration budget exhausted")
            budget[0] -= 1
            stream = NondetStream(prefix)
            try:
                res = runner.run(h, l, stream)
            except AssumptionViolated:
                res = None
            if res is not None:
                yield (h + stream.choices if stream.trace else h), res.observations
            prefix = _next_prefix(stream.trace)


def default_high_domain(prog: TypedProgram, harness: HarnessSpec):
    return itertools.product(*(list(type_domain(t, prog.arch)) for _, t in harness.high_params))


def default_low_domain(prog: TypedProgram, harness: HarnessSpec):
    return itertools.product(*(list(type_domain(t, prog.arch)) for _, t in harness.low_params))


def domain_size(types) -> int:
    n = 1
    for t in types:
        n *= type_domain_size(t)
    return n


def enumerate_relation(prog: TypedProgram, harness: HarnessSpec, l: Sequence = (),
                       high_domain: Optional[Iterable] = None, budget: int = DEFAULT_BUDGET,
                       max_steps: int = DEFAULT_MAX_STEPS) -> EquivalenceRelation:
    """The relation of high points indistinguishable for the fixed low input ``l``.

    Assertions inside the analysed code do not stop enumeration; assumption
    violations remove the point from the domain.
    """
    if high_domain is None:
        if domain_size(t for _, t in harness.high_params) > budget:
            raise BudgetExceeded("high domain exceeds the enumeration budget")
        high_domain = default_high_domain(prog, harness)
    runner = HarnessRunner(prog, harness, max_steps, on_assert="record")
    left = [budget]
    return EquivalenceRelation.from_observations(enumerate_points(runner, tuple(l), high_domain, left), tuple(l))


def oracle_capacity(prog: TypedProgram, harness: HarnessSpec, low_domain: Optional[Iterable] = None,
                    high_domain: Optional[Iterable] = None, budget: int = DEFAULT_BUDGET,
                    max_steps: int = DEFAULT_MAX_STEPS) -> tuple:
    """``(best_low, class_count)`` maximizing the class count over low inputs.

    Ties keep the first low input in enumeration order.  ``budget`` bounds the
    total number of runs across all low inputs.
    """
    if low_domain is None:
        if domain_size(t for _, t in harness.low_params) * domain_size(t for _, t in harness.high_params) > budget:
            raise BudgetExceeded("input domain exceeds the enumeration budget")
        low_domain = default_low_domain(prog, harness)
    highs = list(high_domain) if high_domain is not None else list(default_high_domain(prog, harness))
    runner = HarnessRunner(prog, harness, max_steps, on_assert="record")
    left = [budget]
    best_low, best = None, 0
    for l in low_domain:
        l = tuple(l)
        seen = set()
        for _, obs in enumerate_points(runner, l, highs, left):
            seen.add(obs)
        if len(seen) > best:
            best_low, best = l, len(seen)
    if best_low is None:
        raise ConcreteError("no execution satisfies the program's assumptions")
    return best_low, best
