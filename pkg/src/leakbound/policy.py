"""Checking "at most N distinctions" policies by self-composition.

For a policy bound ``N`` a driver function runs the analysed entry ``N+1``
times on the same public input and independent secrets.  It assumes the
first ``N`` observations are pairwise different and asserts that the last
one equals one of them.  A failing assertion is an input showing ``N+1``
distinguishable classes of secrets; when the assertion can never fail, the
secret is split into at most ``N`` classes for every public input.

:func:`measure_capacity` searches for the smallest bound that verifies; its
base-2 logarithm is the capacity of the channel.
"""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field
from typing import Optional

from .bitblast import Encoder, lits_value
from .envmodels import builtins as B
from .errors import (
    AssumptionViolated, BudgetExceeded, ConcreteError, DriverSizeError, InsufficientBound,
    InternalSoundnessError, LeakboundError,
)
from .lang import ast as A
from .lang.harness import BYTE_EQ, HarnessSpec, resolve_harness
from .lang.parser import SourceUnit, parse
from .lang.typecheck import TypedProgram, typecheck
from .lang.types import TypeSpec, normalize, type_name
from .oracle import HarnessRunner, NondetStream, from_pattern
from .sat import SAT, UNKNOWN, solve
from .ssa.build import to_ssa
from .ssa.program import UNWIND, SsaProgram
from .unroll import unwind

DEFAULT_SIZE_BUDGET = 2_000_000


@dataclass
class AnalysisConfig:
    """Settings shared by policy checks and capacity searches."""

    k: int = 8                          # loop unwinding bound
    unwinding_assertions: bool = True   # prove that k covers every execution
    arch: Optional[int] = None          # re-check the program for this word size
    conflict_budget: Optional[int] = None
    restarts: bool = False
    vacuity: bool = True                # check that the driver's assumptions are satisfiable
    size_budget: int = DEFAULT_SIZE_BUDGET
    replay: bool = True                 # validate counterexamples concretely


# -- verdicts ------------------------------------------------------------------------


@dataclass
class TraceStep:
    state: int
    file: str
    line: int
    function: str
    copy: int
    var: str
    value: object

    def format(self) -> str:
        value = self.value.hex() if isinstance(self.value, bytes) else self.value
        return (f"State {self.state} file {self.file} line {self.line} function {self.function} copy {self.copy}\n"
                f"----------------------------------------------------\n"
                f"  {self.function}::{self.var}={value}")


@dataclass
class Counterexample:
    """``N+1`` runs sharing the public input with pairwise different observations."""

    n: int
    low_values: tuple
    high_values: list           # per run: tuple of high parameter values
    observations: list          # per run: tuple of observed values
    nondet: list = field(default_factory=list)   # per run: nondeterministic values consumed
    trace: list = field(default_factory=list)

    def format_trace(self) -> str:
        return "\n\n".join(step.format() for step in self.trace)


@dataclass
class Violated:
    counterexample: Counterexample
    name = "Violated"


@dataclass
class VerifiedBounded:
    k: int
    name = "VerifiedBounded"


@dataclass
class VerifiedComplete:
    name = "VerifiedComplete"


@dataclass
class Vacuous:
    """Fewer than ``N`` distinctions are possible; ``max_feasible`` is the largest count found."""

    max_feasible: int
    name = "Vacuous"


@dataclass
class PolicyCheckResult:
    n: int
    verdict: object
    stats: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return self.verdict.name

    @property
    def violated(self) -> bool:
        return isinstance(self.verdict, Violated)

    @property
    def counterexample(self) -> Optional[Counterexample]:
        return self.verdict.counterexample if self.violated else None


# -- driver synthesis ----------------------------------------------------------------------


@dataclass
class DriverProgram:
    base: TypedProgram
    harness: HarnessSpec
    n: int
    name: str
    text: str                    # source of the driver function alone
    prog: TypedProgram           # base program plus driver, entered at the driver
    high_vars: list              # per run: driver variable per high parameter
    low_vars: list               # driver variable per low parameter
    obs_vars: list               # per run: driver variable per observable


def _type_text(t: TypeSpec, prog: TypedProgram) -> str:
    if t.kind == "record":
        for tag, st in prog.structs.items():
            if st == t:
                return f"struct {tag}"
        for name, st in prog.typedefs.items():
            if st == t:
                return name
        raise LeakboundError(f"cannot name type {t} in the driver")
    return type_name(t)


def _decl_text(t: TypeSpec, name: str, prog: TypedProgram) -> str:
    if t.kind == "array":
        return _decl_text(t.elem, f"{name}[{t.length}]", prog)
    return f"{_type_text(t, prog)} {name}"


def _zero(t: TypeSpec) -> str:
    return "0" if t.is_scalar else "{0}"


def _balanced(terms: list[str], op: str) -> str:
    """Join with ``op`` as a balanced tree (keeps expression nesting logarithmic)."""
    if len(terms) == 1:
        return terms[0]
    mid = len(terms) // 2
    return f"({_balanced(terms[:mid], op)} {op} {_balanced(terms[mid:], op)})"


def _program_size(prog: TypedProgram) -> int:
    return sum(1 for _ in A.walk(prog.ast))


def _fresh_function_name(prog: TypedProgram) -> str:
    for cand in ("main", "__driver_main", "__leakbound_driver"):
        if cand not in prog.functions:
            return cand
    i = 2
    while f"__leakbound_driver{i}" in prog.functions:
        i += 1
    return f"__leakbound_driver{i}"


def synthesize_driver(prog: TypedProgram, harness: HarnessSpec, n: int,
                      size_budget: int = DEFAULT_SIZE_BUDGET) -> DriverProgram:
    """Build and type-check the self-composition driver for bound ``n``."""
    if n < 1:
        raise ValueError("the policy bound must be at least 1")
    size = (n + 1) * _program_size(prog) + n * (n - 1) // 2
    if size > size_budget:
        raise DriverSizeError(f"a driver for N={n} has about {size} nodes, over the budget of {size_budget}")
    info = prog.function(harness.entry)
    name = _fresh_function_name(prog)
    taken = set(prog.functions) | set(prog.typedefs) | set(B.REGISTRY)
    prefix = "lb_" if any(re.fullmatch(r"[hloz]\d*(_\w*)?", t) for t in taken) else ""
    multi_h = len(harness.high_params) > 1
    multi_l = len(harness.low_params) > 1
    multi_o = len(harness.observables) > 1

    def hname(i, p):
        return f"{prefix}h{i}_{p}" if multi_h else f"{prefix}h{i}"

    def lname(p):
        return f"{prefix}l_{p}" if multi_l else f"{prefix}l"

    def oname(i, o):
        if not multi_o:
            return f"{prefix}o{i}"
        return f"{prefix}o{i}_{'ret' if o.is_return else o.name}"

    lines = [f"void {name}(void) {{"]
    for p, t in harness.low_params:
        lines.append(f"    {_decl_text(t.elem if t.kind == 'ptr' else t, lname(p), prog)} = input();")
    roles = {p: "high" for p in harness.high_names}
    roles.update({p: "low" for p in harness.low_names})
    roles.update({o.name: "obs" for o in harness.observables if not o.is_return})
    ret_obs = next((o for o in harness.observables if o.is_return), None)

    def eq(i, j):
        parts = []
        for o in harness.observables:
            a, b = oname(i, o), oname(j, o)
            if o.eq_kind == BYTE_EQ:
                parts.append(f"memcmp(&{a}, &{b}, {o.byte_length}) == 0")
            else:
                parts.append(f"{a} == {b}")
        return " && ".join(parts) if len(parts) == 1 else "(" + " && ".join(f"({x})" for x in parts) + ")"

    high_vars, obs_vars = [], []
    for i in range(1, n + 2):
        if i == n + 1:
            for a in range(1, n + 1):
                for b in range(a + 1, n + 1):
                    lines.append(f"    assume(!({eq(a, b)}));")
        args = []
        for p, t in info.params:
            role = roles.get(p, "none")
            elem = t.elem if t.kind == "ptr" else t
            if role == "high":
                v = hname(i, p)
                lines.append(f"    {_decl_text(elem, v, prog)} = input();")
            elif role == "low":
                if t.kind == "ptr":
                    v = f"{prefix}l{i}_{p}"
                    if elem.is_scalar:
                        lines.append(f"    {_decl_text(elem, v, prog)} = {lname(p)};")
                    else:
                        lines.append(f"    {_decl_text(elem, v, prog)} = {{0}};")
                        lines.append(f"    memcpy(&{v}, &{lname(p)}, sizeof({v}));")
                else:
                    v = lname(p)
            elif role == "obs":
                v = oname(i, harness.observable(p))
                lines.append(f"    {_decl_text(elem, v, prog)} = {_zero(elem)};")
            elif t.kind == "ptr":
                v = f"{prefix}z{i}_{p}"
                lines.append(f"    {_decl_text(elem, v, prog)} = {_zero(elem)};")
            else:
                v = "0"
            args.append(f"&{v}" if t.kind == "ptr" else v)
        call = f"{harness.entry}({', '.join(args)})"
        if ret_obs is not None:
            lines.append(f"    {_decl_text(ret_obs.ty, oname(i, ret_obs), prog)} = {call};")
        else:
            lines.append(f"    {call};")
        high_vars.append([hname(i, p) for p in harness.high_names])
        obs_vars.append([oname(i, o) for o in harness.observables])
    claim = _balanced([eq(n + 1, j) for j in range(1, n + 1)], "||")
    lines.append(f"    assert({claim});")
    lines.append("}")
    text = "\n".join(lines) + "\n"

    base_text = prog.source.text if prog.source is not None else _pretty_base(prog)
    if not base_text.endswith("\n"):
        base_text += "\n"
    path = prog.source.path if prog.source is not None else "<input>"
    unit = SourceUnit(path, base_text + text)
    combined = typecheck(parse(unit), prog.arch, name, unit)
    return DriverProgram(prog, harness, n, name, text, combined, high_vars,
                         [lname(p) for p in harness.low_names], obs_vars)


def _pretty_base(prog: TypedProgram) -> str:
    from .lang.printer import pretty
    return pretty(prog.source_ast)


# -- checking ----------------------------------------------------------------------------


def _solve(cnf, cfg: AnalysisConfig, stats: dict, key: str):
    res = solve(cnf, cfg.conflict_budget, cfg.restarts)
    stats[key] = dict(res.stats, **cnf.stats)
    if res.status == UNKNOWN:
        raise BudgetExceeded(f"solver conflict budget exhausted during the {key} query")
    return res


def _prepare(prog, harness, cfg: AnalysisConfig):
    """Re-check ``prog`` (and re-size its observables) when another word size is requested."""
    if cfg.arch is not None and cfg.arch != prog.arch:
        prog = typecheck(prog.source_ast, cfg.arch, prog.entry, prog.source)
        harness = resolve_harness(prog)
    return prog, harness


def _encode_driver(driver: DriverProgram, cfg: AnalysisConfig, stats: dict):
    t0 = time.perf_counter()
    loopfree = unwind(driver.prog, cfg.k)
    ssa = to_ssa(loopfree, free_params=False)
    enc = Encoder(ssa)
    stats["encode_time"] = round(time.perf_counter() - t0, 6)
    stats["ssa_steps"] = len(ssa.steps)
    return ssa, enc


def check_policy(prog: TypedProgram, harness: HarnessSpec, n: int,
                 config: Optional[AnalysisConfig] = None) -> PolicyCheckResult:
    """Decide whether ``prog`` distinguishes at most ``n`` classes of secrets.

    Raises :class:`InsufficientBound` when no counterexample exists within the
    unwinding bound but some execution needs more iterations.
    """
    cfg = config or AnalysisConfig()
    prog, harness = _prepare(prog, harness, cfg)
    stats: dict = {"n": n, "k": cfg.k}
    t0 = time.perf_counter()
    driver = synthesize_driver(prog, harness, n, cfg.size_budget)
    ssa, enc = _encode_driver(driver, cfg, stats)

    res = _solve(enc.policy_instance(assume_unwinding=True), cfg, stats, "policy")
    if res.status == SAT:
        cex = decode_counterexample(driver, ssa, enc, res.model, validate=cfg.replay)
        stats["time"] = round(time.perf_counter() - t0, 6)
        return PolicyCheckResult(n, Violated(cex), stats)

    has_unwind = bool(ssa.obligations(UNWIND))
    if cfg.unwinding_assertions and has_unwind:
        ures = _solve(enc.unwinding_instance(), cfg, stats, "unwinding")
        if ures.status == SAT:
            raise InsufficientBound(cfg.k, stats)

    if cfg.vacuity and n >= 2:
        vres = _solve(enc.assumptions_instance(), cfg, stats, "vacuity")
        if vres.status != SAT:
            m = _max_feasible(prog, harness, n, cfg)
            stats["time"] = round(time.perf_counter() - t0, 6)
            return PolicyCheckResult(n, Vacuous(m), stats)

    stats["time"] = round(time.perf_counter() - t0, 6)
    verdict = VerifiedComplete() if cfg.unwinding_assertions else VerifiedBounded(cfg.k)
    return PolicyCheckResult(n, verdict, stats)


def _assumptions_feasible(prog, harness, m: int, cfg: AnalysisConfig) -> bool:
    driver = synthesize_driver(prog, harness, m, cfg.size_budget)
    _, enc = _encode_driver(driver, cfg, {})
    return _solve(enc.assumptions_instance(), cfg, {}, "vacuity").status == SAT


def vacuity_check(prog: TypedProgram, harness: HarnessSpec, n: int,
                  config: Optional[AnalysisConfig] = None) -> Optional[int]:
    """``None`` if ``n`` pairwise different observations are possible, else the largest feasible count."""
    cfg = config or AnalysisConfig()
    prog, harness = _prepare(prog, harness, cfg)
    if n < 2 or _assumptions_feasible(prog, harness, n, cfg):
        return None
    return _max_feasible(prog, harness, n, cfg)


def _max_feasible(prog, harness, n: int, cfg: AnalysisConfig) -> int:
    """Largest ``m < n`` whose distinctness assumptions are satisfiable.

    Feasibility is monotone in ``m``, so a binary search over ``[1, n-1]``
    suffices; ``m = 1`` only needs some execution to satisfy the program's
    own assumptions.
    """
    if not _assumptions_feasible(prog, harness, 1, cfg):
        return 0
    lo, hi = 1, n - 1          # lo feasible; answer in [lo, hi]
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _assumptions_feasible(prog, harness, mid, cfg):
            lo = mid
        else:
            hi = mid - 1
    return lo


# -- counterexamples -------------------------------------------------------------------------


def _first_def(ssa: SsaProgram, function: str, var: str) -> Optional[str]:
    for name, v in ssa.vars.items():
        if v.function == function and v.copy == 0 and v.source == var:
            return name
    return None


def decode_counterexample(driver: DriverProgram, ssa: SsaProgram, enc: Encoder, model,
                          validate: bool = True) -> Counterexample:
    """Read the runs out of a satisfying assignment and replay them concretely."""
    base, hs, arch = driver.base, driver.harness, driver.base.arch
    inputs = {label: lits_value(bits, model) for label, bits in enc.inputs.items()}
    env = ssa.evaluate(inputs)

    def var_value(var: str, t: TypeSpec, final: bool):
        if final:
            bits = ssa.eval_expr(ssa.outputs[var], env, inputs)
        else:
            bits = env[_first_def(ssa, driver.name, var)]
        return from_pattern(bits, t.elem if t.kind == "ptr" else t, arch)

    low = tuple(var_value(v, t, False) for v, (_, t) in zip(driver.low_vars, hs.low_params))
    highs, observations, streams = [], [], []
    for i in range(driver.n + 1):
        highs.append(tuple(var_value(v, t, False) for v, (_, t) in zip(driver.high_vars[i], hs.high_params)))
        observations.append(tuple(var_value(v, o.ty, True) for v, o in zip(driver.obs_vars[i], hs.observables)))
        streams.append(tuple(val for _, val in ssa.taken_sites(env, inputs, copy=i + 1)))
    cex = Counterexample(driver.n, low, highs, observations, streams, _trace(ssa, env, inputs, base))
    if validate:
        replay_counterexample(base, hs, cex)
    return cex


def _trace(ssa: SsaProgram, env: dict, inputs: dict, base: TypedProgram) -> list:
    steps = []
    path = base.path
    for st in ssa.assignments:
        v = ssa.vars[st.name]
        if v.kind in ("phi", "nondet") or v.source.startswith("__"):
            continue
        if not ssa.eval_expr(st.guard, env, inputs):
            continue
        value = env[st.name]
        t = v.ty
        if t is not None and t.kind != "ptr":
            value = from_pattern(value, t, base.arch) if not t.is_scalar else normalize(value, t)
        steps.append(TraceStep(len(steps) + 1, path, v.line, v.function, v.copy, v.source, value))
    return steps


def replay_counterexample(prog: TypedProgram, harness: HarnessSpec, cex: Counterexample) -> None:
    """Re-run every run with the interpreter; raise if the counterexample does not hold up."""
    runner = HarnessRunner(prog, harness, on_assert="record")
    for i, (h, expected, stream) in enumerate(zip(cex.high_values, cex.observations, cex.nondet)):
        try:
            got = runner.run(h, cex.low_values, NondetStream(stream)).observations
        except (AssumptionViolated, ConcreteError) as exc:
            raise InternalSoundnessError(f"replay of run {i + 1} failed: {exc}") from exc
        if got != expected:
            raise InternalSoundnessError(
                f"replay of run {i + 1} observed {got!r}, the model predicted {expected!r}")
    if len(set(cex.observations)) != len(cex.observations):
        raise InternalSoundnessError("counterexample observations are not pairwise different")


# -- capacity ------------------------------------------------------------------------------------


@dataclass
class CapacityReport:
    lower_bound_bits: float
    class_count_found: int
    exact: bool
    probes: list = field(default_factory=list)    # (N, verdict name)
    note: str = ""

    @property
    def n_star(self) -> int:
        return self.class_count_found

    def summary(self) -> str:
        kind = "exact" if self.exact else "lower bound"
        return f"N*={self.class_count_found}, {self.lower_bound_bits:.3f} bits, {kind}"


def measure_capacity(prog: TypedProgram, harness: HarnessSpec, config: Optional[AnalysisConfig] = None,
                     n_max: int = 64) -> CapacityReport:
    """Smallest verified bound ``N*`` by doubling and then bisection.

    Every probe below ``N*`` produced a counterexample with that many plus one
    classes, so ``log2(N*)`` bits is always a sound lower bound; it is exact
    when the refutation at ``N*`` carried unwinding assertions.
    """
    cfg = config or AnalysisConfig()
    cfg = AnalysisConfig(**{**cfg.__dict__, "vacuity": False})
    prog, harness = _prepare(prog, harness, cfg)
    probes: list = []
    results: dict = {}

    def probe(n):
        try:
            r = check_policy(prog, harness, n, cfg)
            name = r.status
        except InsufficientBound:
            name = "InsufficientBound"
        except BudgetExceeded:
            name = "BudgetExceeded"
        probes.append((n, name))
        results[n] = name
        return name

    violated = 0               # largest N with a counterexample
    bound = None               # smallest N verified
    n = 1
    while True:
        v = probe(n)
        if v != "Violated":
            break
        violated = n
        if n >= n_max:
            break
        n = min(2 * n, n_max)
    if results[n] == "Violated":
        found = violated + 1
        return CapacityReport(math.log2(found), found, False, probes,
                              f"still violated at the search limit N={n_max}")
    if results[n] not in ("VerifiedComplete", "VerifiedBounded"):
        found = violated + 1
        return CapacityReport(math.log2(found), found, False, probes,
                              f"probe at N={n} was inconclusive ({results[n]})")
    bound = n
    lo = violated + 1
    while lo < bound:
        mid = (lo + bound) // 2
        v = probe(mid)
        if v == "Violated":
            violated = mid
            lo = mid + 1
        elif v in ("VerifiedComplete", "VerifiedBounded"):
            bound = mid
        else:
            found = violated + 1
            return CapacityReport(math.log2(found), found, False, probes,
                                  f"probe at N={mid} was inconclusive ({v})")
    exact = results[bound] == "VerifiedComplete"
    return CapacityReport(math.log2(bound), bound, exact, probes)
