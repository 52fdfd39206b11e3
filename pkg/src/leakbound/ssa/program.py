"""The SSA program: single assignments, obligations and nondeterministic sites."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .expr import SExpr, evaluate, format_expr

# obligation kinds
ASSUME = "assume"
ASSERT = "assert"        # assertion inside analysed code
PROPERTY = "property"    # the driver's claim
UNWIND = "unwind"        # holds when the loop condition is false (guard => !cond)


@dataclass
class SsaVar:
    name: str
    width: int
    source: str          # source variable (or builtin label)
    function: str
    copy: int            # 0 = top level, i = i-th top-level call
    line: int
    kind: str = "assign"  # assign | phi | nondet | param
    ty: object = None     # source TypeSpec, when known


@dataclass
class Assignment:
    name: str
    expr: SExpr
    guard: SExpr          # path condition under which the source statement ran


@dataclass
class Obligation:
    kind: str
    guard: SExpr
    cond: SExpr
    line: int
    copy: int = 0
    label: str = ""

    @property
    def holds(self) -> SExpr:
        """The formula ``guard => cond`` (``guard => !cond`` for unwinding checks)."""
        from .expr import implies, not_
        return implies(self.guard, not_(self.cond) if self.kind == UNWIND else self.cond)


@dataclass
class NondetSite:
    name: str            # the SSA variable defined by the site; also the input label
    width: int
    guard: SExpr
    copy: int
    seq: int
    origin: str          # e.g. 'input', 'uninitialized x', 'copy_to_user.padding'
    line: int


@dataclass
class SsaProgram:
    entry: str
    arch: int
    steps: list = field(default_factory=list)        # Assignment | Obligation, program order
    vars: dict = field(default_factory=dict)         # name -> SsaVar
    nondets: list = field(default_factory=list)      # NondetSite in execution order
    outputs: dict = field(default_factory=dict)      # entry-frame variable -> final SExpr
    params: dict = field(default_factory=dict)       # entry parameter -> input label (free entries)

    @property
    def assignments(self) -> list:
        return [s for s in self.steps if isinstance(s, Assignment)]

    def obligations(self, *kinds: str) -> list:
        return [s for s in self.steps if isinstance(s, Obligation) and (not kinds or s.kind in kinds)]

    def site(self, name: str) -> NondetSite:
        for s in self.nondets:
            if s.name == name:
                return s
        raise KeyError(name)

    # -- evaluation ------------------------------------------------------------------

    def evaluate(self, inputs: dict) -> dict:
        """Values of every SSA name given values for all free inputs (missing ones read 0)."""
        env: dict = {}
        cache: dict = {}
        inputs = _Defaulting(inputs)
        for st in self.steps:
            if isinstance(st, Assignment):
                env[st.name] = evaluate(st.expr, env, inputs, cache)
        return env

    def eval_expr(self, e: SExpr, env: dict, inputs: dict) -> int:
        return evaluate(e, env, _Defaulting(inputs))

    def inputs_from_streams(self, fixed: dict, stream_for: Callable[[int], Iterable[int]]) -> dict:
        """Resolve nondeterministic sites in execution order.

        ``fixed`` gives values for free labels (entry parameters); each site
        whose guard holds takes the next value from ``stream_for(copy)``.
        Sites on paths not taken read 0.
        """
        inputs = _Defaulting(dict(fixed))
        streams: dict = {}
        env: dict = {}
        cache: dict = {}
        pending = {s.name: s for s in self.nondets}
        for st in self.steps:
            if not isinstance(st, Assignment):
                continue
            site = pending.get(st.name)
            if site is not None:
                g = evaluate(site.guard, env, inputs, cache)
                if g:
                    it = streams.get(site.copy)
                    if it is None:
                        it = streams[site.copy] = iter(stream_for(site.copy))
                    inputs[site.name] = next(it, 0) & ((1 << site.width) - 1)
                else:
                    inputs[site.name] = 0
            env[st.name] = evaluate(st.expr, env, inputs, cache)
        return dict(inputs)

    def taken_sites(self, env: dict, inputs: dict, copy: Optional[int] = None) -> list:
        """``(site, value)`` for sites executed under the given valuation, in order."""
        out = []
        for s in self.nondets:
            if copy is not None and s.copy != copy:
                continue
            if evaluate(s.guard, env, _Defaulting(inputs)):
                out.append((s, inputs.get(s.name, 0)))
        return out

    # -- text dump ----------------------------------------------------------------------

    def dump(self) -> str:
        """Stable line-oriented rendering used by ``--dump-ssa``."""
        lines = [f"# ssa entry={self.entry} arch={self.arch}"]
        for label, name in self.params.items():
            lines.append(f"param {label} -> {name}")
        sites = {s.name: s for s in self.nondets}
        for st in self.steps:
            if isinstance(st, Assignment):
                v = self.vars[st.name]
                where = f"{v.function}::{v.source} copy={v.copy} line={v.line}"
                if st.name in sites:
                    s = sites[st.name]
                    lines.append(f"{st.name} := nondet:{s.width}  # {s.origin}; seq={s.seq}; {where}")
                else:
                    lines.append(f"{st.name} := {format_expr(st.expr)}  # {v.kind}; {where}")
            else:
                tag = f" {st.label}" if st.label else ""
                lines.append(f"{st.kind}{tag} [{format_expr(st.guard)}] {format_expr(st.cond)}"
                             f"  # copy={st.copy} line={st.line}")
        for name, e in self.outputs.items():
            lines.append(f"output {name} = {format_expr(e)}")
        return "\n".join(lines) + "\n"


class _Defaulting(dict):
    def __missing__(self, key):
        return 0
