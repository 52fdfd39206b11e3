"""Standalone C rendering of a self-composition driver.

The output includes ``leakbound_stubs.h`` (see :func:`stub_header`), which
supplies the dialect's type names, ``nondet_*`` input stubs, ``assume`` and
a ``copy_to_user`` padding model, so the driver can be handed to an
external bounded model checker.
"""

from __future__ import annotations

import dataclasses
from importlib import resources

from .errors import LeakboundError
from .lang import ast as A
from .lang.printer import format_item
from .lang.types import type_name
from .policy import DriverProgram

STUB_HEADER = "leakbound_stubs.h"


def stub_header() -> str:
    """Text of the support header."""
    return (resources.files("leakbound") / "data" / STUB_HEADER).read_text(encoding="utf-8")


def _input_call(e) -> bool:
    return isinstance(e, A.Call) and e.func == "input"


def _nondet_fill(target) -> A.ExprStmt:
    return A.ExprStmt(A.Call("nondet_fill", (A.Unary("&", target), A.SizeOf(target))))


class _Rewriter:
    def expr(self, e):
        if _input_call(e):
            if e.ty is None or not e.ty.is_scalar:
                raise LeakboundError("input() of an aggregate type is only supported as a whole value")
            return A.Call(f"nondet_{type_name(e.ty)}", ())
        if not dataclasses.is_dataclass(e) or isinstance(e, A.TypeName):
            return e
        changes = {}
        for f in dataclasses.fields(e):
            if f.name in ("ty", "loc"):
                continue
            v = getattr(e, f.name)
            if isinstance(v, tuple):
                nv = tuple(self.expr(x) for x in v)
            elif dataclasses.is_dataclass(v):
                nv = self.expr(v)
            else:
                continue
            changes[f.name] = nv
        return dataclasses.replace(e, **changes)

    def stmts(self, s) -> list:
        if isinstance(s, A.Block):
            out = []
            for x in s.stmts:
                out.extend(self.stmts(x))
            return [dataclasses.replace(s, stmts=out)]
        if isinstance(s, A.Decl):
            if _input_call(s.init) and not s.init.ty.is_scalar:
                return [dataclasses.replace(s, init=None), _nondet_fill(A.Name(s.name))]
            return [dataclasses.replace(s, init=None if s.init is None else self.expr(s.init))]
        if isinstance(s, A.Assign):
            if _input_call(s.value) and not s.value.ty.is_scalar:
                return [_nondet_fill(s.target)]
            return [dataclasses.replace(s, target=self.expr(s.target), value=self.expr(s.value))]
        if isinstance(s, A.If):
            other = None if s.other is None else self.one(s.other)
            return [dataclasses.replace(s, cond=self.expr(s.cond), then=self.one(s.then), other=other)]
        if isinstance(s, A.While):
            return [dataclasses.replace(s, cond=self.expr(s.cond), body=self.one(s.body))]
        if isinstance(s, A.For):
            return [dataclasses.replace(
                s, init=None if s.init is None else self.one(s.init),
                cond=None if s.cond is None else self.expr(s.cond),
                step=None if s.step is None else self.one(s.step), body=self.one(s.body))]
        if isinstance(s, A.Return):
            return [dataclasses.replace(s, value=None if s.value is None else self.expr(s.value))]
        if isinstance(s, A.ExprStmt):
            return [dataclasses.replace(s, expr=self.expr(s.expr))]
        return [s]

    def one(self, s):
        out = self.stmts(s)
        return out[0] if len(out) == 1 else A.Block(out, loc=s.loc)


def _word_fields(item: A.StructDef) -> A.StructDef:
    """Pointers stored in records are address-sized integers in the model."""
    fields = tuple((A.TypeName("lb_word", 0, tn.dims) if tn.pointers else tn, name)
                   for tn, name in item.fields)
    return dataclasses.replace(item, fields=fields)


def emit_driver_c(driver: DriverProgram) -> str:
    """ANSI C (C99) text of the base program plus its driver."""
    rw = _Rewriter()
    lines = [
        f"/* Self-composition driver for policy N={driver.n} on '{driver.harness.entry}'",
        f"   (arch {driver.base.arch}); generated by leakbound. */",
        f"#define LB_ARCH {driver.base.arch}",
        f'#include "{STUB_HEADER}"',
        "",
    ]
    if driver.base.source is not None:
        for _, text in driver.base.source.pragmas:
            lines.append(f"/* {text.strip()} */")
        lines.append("")
    for item in driver.prog.ast.items:
        if isinstance(item, A.StructDef):
            item = _word_fields(item)
        elif isinstance(item, A.Typedef) and item.type.pointers and not item.type.base.startswith("struct"):
            pass
        elif isinstance(item, A.FunctionDef):
            body = rw.one(item.body)
            if item.name == driver.name:
                body = dataclasses.replace(body, stmts=list(body.stmts) + [A.Return(A.IntLit(0))])
                item = dataclasses.replace(item, ret=A.TypeName("int"), body=body)
            else:
                item = dataclasses.replace(item, body=body)
        lines.extend(format_item(item))
        lines.append("")
    return "\n".join(lines)
