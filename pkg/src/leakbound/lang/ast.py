"""Syntax tree for the analysed C dialect.

Positions (``loc``) and the type annotation filled in by the checker (``ty``)
are excluded from equality, so a re-parsed pretty-print compares equal to the
original tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


def _loc():
    return field(default=(0, 0), compare=False, repr=False)


def _ty():
    return field(default=None, compare=False, repr=False)


@dataclass
class TypeName:
    """A type as written: base specifier, pointer depth, array dimensions."""

    base: str
    pointers: int = 0
    dims: tuple = ()


# -- expressions --------------------------------------------------------------


@dataclass
class IntLit:
    value: int
    suffix: str = ""
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class Name:
    id: str
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class Member:
    base: "Expr"
    field: str
    arrow: bool = False
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class Index:
    base: "Expr"
    index: "Expr"
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class Unary:
    op: str
    operand: "Expr"
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class Cond:
    cond: "Expr"
    then: "Expr"
    other: "Expr"
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class Cast:
    to: Optional[TypeName]
    expr: "Expr"
    implicit: bool = False
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class Call:
    func: str
    args: tuple = ()
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class SizeOf:
    target: Union[TypeName, "Expr"]
    loc: tuple = _loc()
    ty: object = _ty()
    value: int = field(default=0, compare=False, repr=False)


@dataclass
class ZeroInit:
    """The ``{0}`` initializer."""

    loc: tuple = _loc()
    ty: object = _ty()


Expr = Union[IntLit, Name, Member, Index, Unary, Binary, Cond, Cast, Call, SizeOf, ZeroInit]


# -- statements ---------------------------------------------------------------


@dataclass
class Block:
    stmts: list = field(default_factory=list)
    loc: tuple = _loc()


@dataclass
class Decl:
    type: TypeName
    name: str
    init: Optional[Expr] = None
    loc: tuple = _loc()
    ty: object = _ty()


@dataclass
class Assign:
    target: Expr
    value: Expr
    loc: tuple = _loc()


@dataclass
class If:
    cond: Expr
    then: "Stmt"
    other: Optional["Stmt"] = None
    loc: tuple = _loc()


@dataclass
class While:
    cond: Expr
    body: "Stmt"
    loc: tuple = _loc()


@dataclass
class For:
    init: Optional["Stmt"]
    cond: Optional[Expr]
    step: Optional["Stmt"]
    body: "Stmt"
    loc: tuple = _loc()


@dataclass
class Return:
    value: Optional[Expr] = None
    loc: tuple = _loc()


@dataclass
class ExprStmt:
    expr: Expr
    loc: tuple = _loc()


@dataclass
class UnwindCheck:
    """Inserted by loop unwinding after the last copy of a loop body."""

    cond: Expr
    loop: str = ""
    loc: tuple = _loc()


Stmt = Union[Block, Decl, Assign, If, While, For, Return, ExprStmt, UnwindCheck]


# -- top level ----------------------------------------------------------------


@dataclass
class Param:
    type: TypeName
    name: str
    loc: tuple = _loc()


@dataclass
class StructDef:
    name: str
    fields: tuple  # ((TypeName, name), ...)
    loc: tuple = _loc()


@dataclass
class Typedef:
    name: str
    type: TypeName
    loc: tuple = _loc()


@dataclass
class FunctionDef:
    ret: TypeName
    name: str
    params: tuple
    body: Block
    loc: tuple = _loc()


@dataclass
class Ast:
    items: list = field(default_factory=list)

    @property
    def functions(self) -> list[FunctionDef]:
        return [it for it in self.items if isinstance(it, FunctionDef)]

    def function(self, name: str) -> FunctionDef:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)


def walk(node):
    """Yield ``node`` and every syntax node below it, depth first."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        for child in reversed(list(children(n))):
            stack.append(child)


def children(n):
    if isinstance(n, Ast):
        yield from n.items
    elif isinstance(n, FunctionDef):
        yield n.body
    elif isinstance(n, Block):
        yield from n.stmts
    elif isinstance(n, Decl):
        if n.init is not None:
            yield n.init
    elif isinstance(n, Assign):
        yield n.target
        yield n.value
    elif isinstance(n, If):
        yield n.cond
        yield n.then
        if n.other is not None:
            yield n.other
    elif isinstance(n, While):
        yield n.cond
        yield n.body
    elif isinstance(n, For):
        for c in (n.init, n.cond, n.step, n.body):
            if c is not None:
                yield c
    elif isinstance(n, Return):
        if n.value is not None:
            yield n.value
    elif isinstance(n, ExprStmt):
        yield n.expr
    elif isinstance(n, UnwindCheck):
        yield n.cond
    elif isinstance(n, Member):
        yield n.base
    elif isinstance(n, Index):
        yield n.base
        yield n.index
    elif isinstance(n, Unary):
        yield n.operand
    elif isinstance(n, Binary):
        yield n.left
        yield n.right
    elif isinstance(n, Cond):
        yield n.cond
        yield n.then
        yield n.other
    elif isinstance(n, Cast):
        yield n.expr
    elif isinstance(n, Call):
        yield from n.args
    elif isinstance(n, SizeOf):
        if not isinstance(n.target, TypeName):
            yield n.target
