"""Loop unwinding.

Every ``while``/``for`` loop becomes ``k`` nested ``if`` copies of its body.
An :class:`~leakbound.lang.ast.UnwindCheck` on the loop condition follows the
last copy; it marks the executions that would need more than ``k``
iterations.  Later stages decide whether it acts as an assertion (the
unwinding assertion) or as an assumption that cuts those executions off.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .lang import ast as A
from .lang.typecheck import TypedProgram
from .lang.types import BOOL


@dataclass(frozen=True)
class UnwindConfig:
    k: int = 8
    unwinding_assertions: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("the unwinding bound must be at least 1")


def has_loops(node) -> bool:
    return any(isinstance(n, (A.While, A.For)) for n in A.walk(node))


class _Unroller:
    def __init__(self, fname: str, k: int):
        self.fname = fname
        self.k = k
        self.count = 0

    def stmt(self, s):
        if isinstance(s, A.Block):
            return dataclasses.replace(s, stmts=[self.stmt(x) for x in s.stmts])
        if isinstance(s, A.If):
            other = None if s.other is None else self.stmt(s.other)
            return dataclasses.replace(s, then=self.stmt(s.then), other=other)
        if isinstance(s, A.For):
            cond = s.cond if s.cond is not None else A.IntLit(1, loc=s.loc, ty=BOOL)
            body = A.Block([s.body] + ([s.step] if s.step is not None else []), loc=s.body.loc)
            loop = self.loop(cond, body, s.loc)
            return A.Block(([s.init] if s.init is not None else []) + [loop], loc=s.loc)
        if isinstance(s, A.While):
            return self.loop(s.cond, s.body, s.loc)
        return s

    def loop(self, cond, body, loc):
        self.count += 1
        label = f"{self.fname}.{self.count}"
        body = self.stmt(body)  # inner loops first; copies share the result
        inner: A.Stmt = A.UnwindCheck(cond, label, loc=loc)
        for _ in range(self.k):
            inner = A.If(cond, A.Block([body, inner], loc=loc), None, loc=loc)
        return inner


def unwind(prog: TypedProgram, cfg: UnwindConfig | int) -> TypedProgram:
    """A loop-free copy of ``prog`` with every loop unrolled ``k`` times.

    Programs without loops are returned unchanged.
    """
    k = cfg.k if isinstance(cfg, UnwindConfig) else int(cfg)
    if k < 1:
        raise ValueError("the unwinding bound must be at least 1")
    if not has_loops(prog.ast):
        return prog
    functions, items = {}, []
    for item in prog.ast.items:
        if isinstance(item, A.FunctionDef):
            new = dataclasses.replace(item, body=_Unroller(item.name, k).stmt(item.body))
            functions[item.name] = dataclasses.replace(prog.functions[item.name], node=new)
            items.append(new)
        else:
            items.append(item)
    return dataclasses.replace(prog, ast=A.Ast(items), functions=functions)
