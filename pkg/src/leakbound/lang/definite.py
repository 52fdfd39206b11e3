"""Definite-assignment analysis.

A local declared without an initializer holds a nondeterministic value.  When
every path writes the whole variable before anything reads it, that value is
dead, and both the interpreter and the symbolic encoder skip creating it.
This keeps the nondeterministic choice space (which the oracle enumerates)
limited to values that can actually influence an execution.
"""

from __future__ import annotations

from . import ast as A

_ALL = None  # "every variable" -- the state after a return


def _inter(a, b):
    if a is _ALL:
        return b
    if b is _ALL:
        return a
    return a & b


class _Analysis:
    def __init__(self):
        self.candidates: set[str] = set()
        self.needs: set[str] = set()

    def read(self, e, da):
        for n in A.walk(e):
            if isinstance(n, A.Name) and n.id in self.candidates and da is not _ALL and n.id not in da:
                self.needs.add(n.id)

    def stmts(self, stmts, da):
        for s in stmts:
            da = self.stmt(s, da)
        return da

    def stmt(self, s, da):
        if da is _ALL:
            return da
        if isinstance(s, A.Block):
            return self.stmts(s.stmts, da)
        if isinstance(s, A.Decl):
            if s.init is None:
                self.candidates.add(s.name)
                return da - {s.name}
            if not isinstance(s.init, A.ZeroInit):
                self.read(s.init, da)
            return da | {s.name}
        if isinstance(s, A.Assign):
            self.read(s.value, da)
            if isinstance(s.target, A.Name):
                return da | {s.target.id}
            self.read(s.target, da)
            return da
        if isinstance(s, A.If):
            self.read(s.cond, da)
            then = self.stmt(s.then, da)
            other = da if s.other is None else self.stmt(s.other, da)
            return _inter(then, other)
        if isinstance(s, A.While):
            self.read(s.cond, da)
            self.stmt(s.body, da)
            return da
        if isinstance(s, A.For):
            if s.init is not None:
                da = self.stmt(s.init, da)
            if s.cond is not None:
                self.read(s.cond, da)
            after_body = self.stmt(s.body, da)
            if s.step is not None and after_body is not _ALL:
                self.stmt(s.step, after_body)
            return da
        if isinstance(s, A.Return):
            if s.value is not None:
                self.read(s.value, da)
            return _ALL
        if isinstance(s, (A.ExprStmt, A.UnwindCheck)):
            self.read(s.expr if isinstance(s, A.ExprStmt) else s.cond, da)
            return da
        raise TypeError(type(s).__name__)


def nondet_locals(fn: A.FunctionDef) -> frozenset:
    """Names of locals whose initial (nondeterministic) value may be observed."""
    an = _Analysis()
    an.stmt(fn.body, frozenset())
    return frozenset(an.needs)
