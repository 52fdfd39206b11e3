"""Type checking: resolve surface types, annotate every expression, make
implicit conversions explicit, and enforce the dialect's static rules."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..envmodels import builtins as B
from ..errors import TypeCheckError
from . import arith
from . import ast as A
from .definite import nondet_locals
from .parser import SourceUnit, parse_pragmas
from .types import (
    BOOL, INT, SIZE_T, VOID, TypeSpec, array_of, common_type, image_size,
    int_type, normalize, pointer_to, promote, record, sizeof,
)

MAX_MUL_WIDTH = 32

_FIXED_NAMES = {
    "char": int_type(8, True), "signed char": int_type(8, True), "unsigned char": int_type(8, False),
    "short": int_type(16, True), "unsigned short": int_type(16, False),
    "int": INT, "unsigned int": int_type(32, False),
    "long long": int_type(64, True), "unsigned long long": int_type(64, False),
    "_Bool": BOOL, "bool": BOOL, "void": VOID,
    "size_t": SIZE_T, "loff_t": int_type(64, True), "u_char": int_type(8, False),
}
for _w in (8, 16, 32, 64):
    _FIXED_NAMES[f"u{_w}"] = _FIXED_NAMES[f"uint{_w}_t"] = int_type(_w, False)
    _FIXED_NAMES[f"s{_w}"] = _FIXED_NAMES[f"int{_w}_t"] = int_type(_w, True)


@dataclass
class FunctionInfo:
    name: str
    ret: TypeSpec
    params: list  # [(name, TypeSpec)]
    locals: dict = field(default_factory=dict)  # name -> TypeSpec, declaration order
    node: Optional[A.FunctionDef] = None
    calls: list = field(default_factory=list)   # callee names in call order

    def param_type(self, name: str) -> TypeSpec:
        for p, t in self.params:
            if p == name:
                return t
        raise KeyError(name)

    def var_type(self, name: str) -> TypeSpec:
        for p, t in self.params:
            if p == name:
                return t
        return self.locals[name]


@dataclass
class TypedProgram:
    ast: A.Ast                  # annotated copy
    entry: str
    arch: int
    functions: dict             # name -> FunctionInfo
    structs: dict               # tag -> TypeSpec
    typedefs: dict              # name -> TypeSpec
    source_ast: A.Ast = None    # the unannotated tree the annotation was built from
    source: Optional[SourceUnit] = None
    nondet_locals: dict = field(default_factory=dict)  # function -> locals starting nondeterministic

    def function(self, name: Optional[str] = None) -> FunctionInfo:
        return self.functions[name or self.entry]

    @property
    def path(self) -> str:
        return self.source.path if self.source else "<input>"


# -- helpers shared with later stages ------------------------------------------


def strip_implicit(e):
    while isinstance(e, A.Cast) and e.implicit:
        e = e.expr
    return e


def const_value(e) -> Optional[int]:
    """Value (as a normalized Python int) of a typed constant expression, else None."""
    if isinstance(e, A.IntLit):
        return normalize(e.value, e.ty)
    if isinstance(e, A.SizeOf):
        return e.value
    if isinstance(e, A.Cast):
        v = const_value(e.expr)
        if v is None:
            return None
        src = e.expr.ty
        return normalize(arith.convert(v & _mask_of(src), src, e.ty), e.ty)
    if isinstance(e, A.Unary) and e.op in ("-", "~", "+", "!"):
        v = const_value(e.operand)
        if v is None:
            return None
        t = e.operand.ty
        return normalize(arith.unop(e.op, v & _mask_of(t), t.bits), e.ty)
    if isinstance(e, A.Binary):
        a, b = const_value(e.left), const_value(e.right)
        if a is None or b is None:
            if e.op == "&&" and a == 0 or e.op == "||" and a not in (None, 0):
                return int(e.op == "||")
            return None
        lt, rt = e.left.ty, e.right.ty
        av, bv = a & _mask_of(lt), b & _mask_of(rt)
        if e.op in ("&&", "||"):
            return int((av != 0 and bv != 0) if e.op == "&&" else (av != 0 or bv != 0))
        if e.op in ("<<", ">>"):
            return normalize(arith.shift(e.op, av, bv, lt.bits, lt.signed), e.ty)
        if e.op in ("==", "!=", "<", "<=", ">", ">="):
            return arith.compare(e.op, av, bv, lt.bits, lt.kind == "int" and lt.signed)
        return normalize(arith.binop(e.op, av, bv, e.ty.bits, e.ty.signed), e.ty)
    if isinstance(e, A.Cond):
        c = const_value(e.cond)
        if c is None:
            return None
        return const_value(e.then if c else e.other)
    return None


def _mask_of(t: TypeSpec) -> int:
    return (1 << t.bits) - 1


@dataclass(frozen=True)
class StaticPlace:
    """An lvalue whose byte position inside its root object is known statically."""

    root: str          # variable name (the pointer parameter's name when deref)
    deref: bool        # root is a pointer parameter being dereferenced
    offset: int        # byte offset inside the root object
    ty: TypeSpec

    subobject: bool = False

    @property
    def whole(self) -> bool:
        return not self.subobject


def static_place(e) -> Optional[StaticPlace]:
    """Resolve a typed lvalue to a :class:`StaticPlace`, or None if an index is dynamic."""
    e = strip_implicit(e)
    if isinstance(e, A.Name):
        if e.ty.kind == "ptr":
            return StaticPlace(e.id, True, 0, e.ty.elem)
        return StaticPlace(e.id, False, 0, e.ty)
    if isinstance(e, A.Unary) and e.op == "*":
        inner = static_place(e.operand)
        return inner
    if isinstance(e, A.Member):
        base = static_place(e.base)
        if base is None:
            return None
        rec = base.ty
        off, ft = rec.field(e.field)
        return StaticPlace(base.root, base.deref, base.offset + off, ft, True)
    if isinstance(e, A.Index):
        base = static_place(e.base)
        idx = const_value(e.index)
        if base is None or idx is None:
            return None
        elem = base.ty.elem
        return StaticPlace(base.root, base.deref, base.offset + idx * sizeof(elem), elem, True)
    return None


def region_length(place: StaticPlace, arch: int) -> int:
    """Bytes addressable through a region argument.

    A whole object includes its trailing padding; a sub-object is exactly
    ``sizeof`` bytes.
    """
    if place.whole:
        return image_size(place.ty, arch)
    return sizeof(place.ty)


def is_lvalue(e) -> bool:
    if isinstance(e, A.Name):
        return True
    if isinstance(e, A.Unary) and e.op == "*":
        return True
    if isinstance(e, (A.Member,)):
        return e.arrow or is_lvalue(e.base)
    if isinstance(e, A.Index):
        return is_lvalue(e.base)
    return False


def _always_exits(s) -> bool:
    if isinstance(s, A.Return):
        return True
    if isinstance(s, A.Block):
        return bool(s.stmts) and _always_exits(s.stmts[-1])
    if isinstance(s, A.If):
        return s.other is not None and _always_exits(s.then) and _always_exits(s.other)
    return False


def _assigned_names(nodes) -> set:
    out = set()
    for n in nodes:
        if n is None:
            continue
        for m in A.walk(n):
            if isinstance(m, A.Assign):
                t = m.target
                if isinstance(t, A.Name):
                    out.add(t.id)
            elif isinstance(m, A.Decl):
                out.add(m.name)
    return out


def _is_zero(e) -> bool:
    return isinstance(e, A.IntLit) and e.value == 0


def _pos_facts(c) -> set:
    """Variables certainly non-zero when the (untyped) condition ``c`` holds."""
    if isinstance(c, A.Name):
        return {c.id}
    if isinstance(c, A.Unary) and c.op == "!":
        return _neg_facts(c.operand)
    if isinstance(c, A.Binary):
        if c.op == "&&":
            return _pos_facts(c.left) | _pos_facts(c.right)
        if c.op == "!=":
            if isinstance(c.left, A.Name) and _is_zero(c.right):
                return {c.left.id}
            if isinstance(c.right, A.Name) and _is_zero(c.left):
                return {c.right.id}
        if c.op == ">" and isinstance(c.left, A.Name) and _is_zero(c.right):
            return {c.left.id}
        if c.op == "<" and isinstance(c.right, A.Name) and _is_zero(c.left):
            return {c.right.id}
    return set()


def _neg_facts(c) -> set:
    """Variables certainly non-zero when ``c`` is false."""
    if isinstance(c, A.Unary) and c.op == "!":
        return _pos_facts(c.operand)
    if isinstance(c, A.Binary):
        if c.op == "||":
            return _neg_facts(c.left) | _neg_facts(c.right)
        if c.op == "==":
            if isinstance(c.left, A.Name) and _is_zero(c.right):
                return {c.left.id}
            if isinstance(c.right, A.Name) and _is_zero(c.left):
                return {c.right.id}
        if c.op == "<=" and isinstance(c.left, A.Name) and _is_zero(c.right):
            return {c.left.id}
    return set()


def literal_type(value: int, suffix: str, arch: int = 32) -> TypeSpec:
    unsigned = "u" in suffix
    longs = suffix.count("l")
    width = 32 if longs == 0 else (arch if longs == 1 else 64)
    for w in sorted({width, 64}):
        if not unsigned and value < (1 << (w - 1)):
            return int_type(w, True)
        if (unsigned or w == 64) and value < (1 << w):
            return int_type(w, False)
    raise ValueError(f"integer literal {value} does not fit in 64 bits")


# -- the checker ------------------------------------------------------------------


class _Env:
    def __init__(self, info: FunctionInfo, addr_taken: set):
        self.info = info
        self.scopes: list[dict] = [dict(info.params)]
        self.declared = {p for p, _ in info.params}
        self.facts: frozenset = frozenset()
        self.addr_taken = addr_taken

    def lookup(self, name):
        for s in reversed(self.scopes):
            if name in s:
                return s[name]
        return None

    def with_facts(self, names, region_nodes):
        """Facts to add for ``region_nodes``: drop names assigned or address-taken."""
        names = set(names) - _assigned_names(region_nodes) - self.addr_taken
        return self.facts | names


class Checker:
    def __init__(self, ast: A.Ast, arch: int, path: str = ""):
        if arch not in (32, 64):
            raise TypeCheckError(f"unsupported architecture {arch}")
        self.arch = arch
        self.path = path
        self.src = ast
        self.structs: dict[str, TypeSpec] = {}
        self.typedefs: dict[str, TypeSpec] = {}
        self.functions: dict[str, FunctionInfo] = {}
        self.nondet: dict[str, frozenset] = {}

    def error(self, msg, node=None):
        line, col = getattr(node, "loc", (0, 0)) if node is not None else (0, 0)
        raise TypeCheckError(msg, line, col, path=self.path)

    # -- type names ---------------------------------------------------------------

    def base_type(self, base: str, node, in_record=False) -> TypeSpec:
        if base in ("long", "unsigned long"):
            return int_type(self.arch, base == "long")
        if base in _FIXED_NAMES:
            return _FIXED_NAMES[base]
        if base in self.typedefs:
            return self.typedefs[base]
        if base.startswith("struct "):
            tag = base[7:]
            if tag not in self.structs:
                self.error(f"incomplete type 'struct {tag}'", node)
            return self.structs[tag]
        self.error(f"unknown type '{base}'", node)

    def resolve(self, tn: A.TypeName, node=None, in_record=False) -> TypeSpec:
        t = self.base_type(tn.base, node or tn)
        if tn.pointers:
            if in_record or t.kind == "ptr":
                # a pointer stored in memory is an opaque address of the target word size
                return self._with_dims(int_type(self.arch, False), tn, node)
            if tn.pointers > 1:
                self.error("pointers to pointers are not supported", node)
            if tn.dims:
                self.error("arrays of pointers are not supported", node)
            return pointer_to(t)
        return self._with_dims(t, tn, node)

    def _with_dims(self, t, tn, node):
        for d in reversed(tn.dims):
            n = const_value(self.expr(d, None))
            if n is None or n < 1:
                self.error("array length must be a positive constant", node)
            if t.kind == "void":
                self.error("array of void", node)
            t = array_of(t, n)
        return t

    # -- program --------------------------------------------------------------------

    def check(self, entry: Optional[str]) -> TypedProgram:
        items = []
        for item in self.src.items:
            if isinstance(item, A.StructDef):
                if item.name in self.structs:
                    self.error(f"redefinition of struct {item.name}", item)
                fields = []
                for tn, fname in item.fields:
                    ft = self.resolve(tn, item, in_record=True)
                    if ft.kind == "void":
                        self.error(f"field {fname} has type void", item)
                    fields.append((fname, ft))
                if not fields:
                    self.error(f"struct {item.name} has no fields", item)
                try:
                    self.structs[item.name] = record(item.name, fields)
                except ValueError as exc:
                    self.error(str(exc), item)
                items.append(item)
            elif isinstance(item, A.Typedef):
                t = self.resolve(item.type, item)
                previous = self.typedefs.get(item.name, _FIXED_NAMES.get(item.name))
                if previous is not None and previous != t:
                    # identical redefinitions (e.g. of size_t) are harmless
                    self.error(f"conflicting redefinition of type '{item.name}'", item)
                self.typedefs[item.name] = t
                items.append(item)
            elif isinstance(item, A.FunctionDef):
                if item.name in self.functions or B.lookup(item.name):
                    self.error(f"redefinition of function '{item.name}'", item)
                ret = self.resolve(item.ret, item)
                if ret.kind == "ptr":
                    self.error("functions may not return pointers", item)
                if ret.kind == "array":
                    self.error("functions may not return arrays", item)
                params = []
                for p in item.params:
                    pt = self.resolve(p.type, p)
                    if pt.kind == "void":
                        self.error(f"parameter {p.name} has type void", p)
                    if pt.kind == "array":
                        self.error(f"array parameter {p.name} is not supported; pass a pointer to a struct", p)
                    if pt.kind == "ptr" and pt.elem.kind == "void":
                        self.error(f"pointer parameter {p.name} must point to a complete type", p)
                    if p.name in [q for q, _ in params]:
                        self.error(f"duplicate parameter {p.name}", p)
                    params.append((p.name, pt))
                self.functions[item.name] = FunctionInfo(item.name, ret, params)
                items.append(item)
        if not self.functions:
            self.error("program defines no functions")
        typed_items = []
        for item in items:
            if isinstance(item, A.FunctionDef):
                typed_items.append(self.function(item))
            else:
                typed_items.append(item)
        self.check_recursion()
        if entry is None:
            entry = list(self.functions)[-1]
        if entry not in self.functions:
            self.error(f"entry function '{entry}' is not defined")
        return TypedProgram(A.Ast(typed_items), entry, self.arch, self.functions,
                            self.structs, self.typedefs, source_ast=self.src,
                            nondet_locals=self.nondet)

    def check_recursion(self):
        state = {}

        def visit(f, stack):
            state[f] = 1
            for g in self.functions[f].calls:
                if state.get(g) == 1:
                    self.error(f"recursion is not supported ({' -> '.join(stack + [g])})",
                               self.functions[f].node)
                if g not in state:
                    visit(g, stack + [g])
            state[f] = 2

        for f in self.functions:
            if f not in state:
                visit(f, [f])

    def function(self, fn: A.FunctionDef) -> A.FunctionDef:
        info = self.functions[fn.name]
        addr_taken = set()
        for n in A.walk(fn.body):
            if isinstance(n, A.Unary) and n.op == "&":
                root = n.operand
                while isinstance(root, (A.Member, A.Index)):
                    root = root.base
                if isinstance(root, A.Name):
                    addr_taken.add(root.id)
        env = _Env(info, addr_taken)
        body = self.block(fn.body, env, new_scope=False)
        typed = dataclasses.replace(fn, body=body)
        info.node = typed
        self.nondet[fn.name] = nondet_locals(typed)
        return typed

    # -- statements -----------------------------------------------------------------

    def block(self, b: A.Block, env: _Env, new_scope=True) -> A.Block:
        if new_scope:
            env.scopes.append({})
        saved = env.facts
        out = []
        for i, s in enumerate(b.stmts):
            out.append(self.stmt(s, env))
            if isinstance(s, A.If) and s.other is None and _always_exits(s.then):
                env.facts = env.with_facts(_neg_facts(s.cond), b.stmts[i + 1:])
        env.facts = saved
        if new_scope:
            env.scopes.pop()
        return dataclasses.replace(b, stmts=out)

    def branch(self, s, env: _Env, facts):
        saved = env.facts
        env.facts = facts
        env.scopes.append({})
        try:
            if isinstance(s, A.Block):
                return self.block(s, env, new_scope=False)
            return self.stmt(s, env)
        finally:
            env.scopes.pop()
            env.facts = saved

    def stmt(self, s, env: _Env):
        if isinstance(s, A.Block):
            return self.block(s, env)
        if isinstance(s, A.Decl):
            return self.decl(s, env)
        if isinstance(s, A.Assign):
            target = self.expr(s.target, env)
            if not is_lvalue(s.target):
                self.error("assignment target is not an lvalue", s)
            if target.ty.kind == "ptr":
                self.error("pointer parameters cannot be reassigned", s)
            if target.ty.kind == "array":
                self.error("arrays are not assignable", s)
            return dataclasses.replace(s, target=target, value=self.rhs(s.value, target.ty, env, s))
        if isinstance(s, A.If):
            cond = self.cond(s.cond, env)
            then = self.branch(s.then, env, env.with_facts(_pos_facts(s.cond), [s.then]))
            other = None
            if s.other is not None:
                other = self.branch(s.other, env, env.with_facts(_neg_facts(s.cond), [s.other]))
            return dataclasses.replace(s, cond=cond, then=then, other=other)
        if isinstance(s, A.While):
            cond = self.cond(s.cond, env)
            body = self.branch(s.body, env, env.with_facts(_pos_facts(s.cond), [s.body]))
            return dataclasses.replace(s, cond=cond, body=body)
        if isinstance(s, A.For):
            env.scopes.append({})
            init = None if s.init is None else self.stmt(s.init, env)
            cond = None if s.cond is None else self.cond(s.cond, env)
            facts = env.facts if s.cond is None else env.with_facts(_pos_facts(s.cond), [s.body, s.step])
            body = self.branch(s.body, env, facts)
            saved = env.facts
            env.facts = facts
            step = None if s.step is None else self.stmt(s.step, env)
            env.facts = saved
            env.scopes.pop()
            return dataclasses.replace(s, init=init, cond=cond, step=step, body=body)
        if isinstance(s, A.Return):
            ret = env.info.ret
            if s.value is None:
                if ret.kind != "void":
                    self.error(f"function '{env.info.name}' must return a value", s)
                return s
            if ret.kind == "void":
                self.error(f"void function '{env.info.name}' returns a value", s)
            return dataclasses.replace(s, value=self.rhs(s.value, ret, env, s))
        if isinstance(s, A.ExprStmt):
            e = s.expr
            if isinstance(e, A.Call) and e.func == "input":
                self.error("input() may only be used as the value of an assignment", s)
            return dataclasses.replace(s, expr=self.expr(e, env, stmt_level=True))
        if isinstance(s, A.UnwindCheck):
            return dataclasses.replace(s, cond=self.cond(s.cond, env))
        self.error(f"unsupported statement {type(s).__name__}", s)

    def decl(self, s: A.Decl, env: _Env):
        if s.name in env.declared:
            self.error(f"redeclaration of '{s.name}'", s)
        if s.name in self.functions or B.lookup(s.name):
            self.error(f"'{s.name}' names a function", s)
        t = self.resolve(s.type, s)
        if t.kind == "ptr":
            self.error("local pointer variables are not supported", s)
        if t.kind == "void":
            self.error(f"variable '{s.name}' has type void", s)
        init = None
        if s.init is not None:
            if isinstance(s.init, A.ZeroInit):
                init = dataclasses.replace(s.init, ty=t)
            else:
                if t.kind == "array" and not (isinstance(s.init, A.Call) and s.init.func == "input"):
                    self.error("arrays can only be initialized with {0} or input()", s)
                init = self.rhs(s.init, t, env, s)
        env.declared.add(s.name)
        env.scopes[-1][s.name] = t
        env.info.locals[s.name] = t
        return dataclasses.replace(s, init=init, ty=t)

    def rhs(self, value, t: TypeSpec, env: _Env, stmt):
        """Type ``value`` for storage into an object of type ``t``."""
        if isinstance(value, A.Call) and value.func == "input" and value.func not in self.functions:
            if value.args:
                self.error("input() takes no arguments", value)
            return dataclasses.replace(value, ty=t)
        if isinstance(value, A.ZeroInit):
            self.error("{0} is only allowed in a declaration", value)
        v = self.expr(value, env)
        if t.is_scalar:
            return self.convert(self.scalar(v), t)
        if v.ty != t:
            self.error(f"cannot assign {v.ty} to {t}", stmt)
        return v

    def cond(self, c, env) -> A.Expr:
        return self.convert(self.scalar(self.expr(c, env)), BOOL)

    # -- expressions ----------------------------------------------------------------

    def convert(self, e, t: TypeSpec):
        if e.ty == t:
            return e
        return A.Cast(None, e, True, loc=e.loc, ty=t)

    def scalar(self, e):
        if e.ty is None or not e.ty.is_scalar:
            self.error(f"scalar value expected, found {e.ty}", e)
        return e

    def expr(self, e, env: Optional[_Env], stmt_level=False):
        if isinstance(e, A.IntLit):
            try:
                return dataclasses.replace(e, ty=literal_type(e.value, e.suffix, self.arch))
            except ValueError as exc:
                self.error(str(exc), e)
        if isinstance(e, A.SizeOf):
            if isinstance(e.target, A.TypeName):
                t = self.resolve(e.target, e)
                target = e.target
            else:
                target = self.expr(e.target, env)
                t = target.ty
            if t.kind in ("ptr", "void"):
                self.error(f"sizeof applied to {t}", e)
            return dataclasses.replace(e, target=target, value=sizeof(t), ty=SIZE_T)
        if env is None:
            self.error("constant expression expected", e)
        if isinstance(e, A.Name):
            t = env.lookup(e.id)
            if t is None:
                if e.id in self.functions or B.lookup(e.id):
                    self.error(f"function '{e.id}' used as a value", e)
                self.error(f"undeclared identifier '{e.id}'", e)
            return dataclasses.replace(e, ty=t)
        if isinstance(e, A.Member):
            base = self.expr(e.base, env)
            rec = base.ty
            if e.arrow:
                if rec.kind != "ptr" or rec.elem.kind != "record":
                    self.error("'->' applied to a non-pointer-to-struct", e)
                rec = rec.elem
            elif rec.kind != "record":
                self.error(f"member access on non-struct type {rec}", e)
            if not is_lvalue(e.base) and not e.arrow:
                self.error("member access requires an lvalue", e)
            try:
                _, ft = rec.field(e.field)
            except KeyError:
                self.error(f"struct {rec.name} has no field '{e.field}'", e)
            return dataclasses.replace(e, base=base, ty=ft)
        if isinstance(e, A.Index):
            base = self.expr(e.base, env)
            if base.ty.kind != "array":
                self.error(f"subscripted value of type {base.ty} is not an array", e)
            if not is_lvalue(e.base):
                self.error("subscript requires an lvalue array", e)
            idx = self.scalar(self.expr(e.index, env))
            iv = const_value(idx)
            if iv is not None and not 0 <= iv < base.ty.length:
                self.error(f"index {iv} out of bounds for {base.ty}", e)
            return dataclasses.replace(e, base=base, index=idx, ty=base.ty.elem)
        if isinstance(e, A.Unary):
            if e.op == "&":
                self.error("'&' is only allowed on arguments of function calls", e)
            if e.op == "*":
                operand = self.expr(e.operand, env)
                if operand.ty.kind != "ptr":
                    self.error("dereference of a non-pointer", e)
                return dataclasses.replace(e, operand=operand, ty=operand.ty.elem)
            operand = self.scalar(self.expr(e.operand, env))
            if e.op == "!":
                return dataclasses.replace(e, operand=operand, ty=BOOL)
            t = promote(operand.ty)
            return dataclasses.replace(e, operand=self.convert(operand, t), ty=t)
        if isinstance(e, A.Binary):
            return self.binary(e, env)
        if isinstance(e, A.Cond):
            c = self.cond(e.cond, env)
            saved = env.facts
            env.facts = env.with_facts(_pos_facts(e.cond), [])
            then = self.scalar(self.expr(e.then, env))
            env.facts = saved
            env.facts = env.with_facts(_neg_facts(e.cond), [])
            other = self.scalar(self.expr(e.other, env))
            env.facts = saved
            t = BOOL if then.ty == BOOL and other.ty == BOOL else common_type(then.ty, other.ty)
            return dataclasses.replace(e, cond=c, then=self.convert(then, t), other=self.convert(other, t), ty=t)
        if isinstance(e, A.Cast):
            t = self.resolve(e.to, e)
            if not t.is_scalar:
                self.error(f"cast to non-scalar type {t}", e)
            inner = self.scalar(self.expr(e.expr, env))
            return dataclasses.replace(e, expr=inner, ty=t)
        if isinstance(e, A.Call):
            return self.call(e, env, stmt_level)
        if isinstance(e, A.ZeroInit):
            self.error("{0} is only allowed in a declaration", e)
        self.error(f"unsupported expression {type(e).__name__}", e)

    def binary(self, e: A.Binary, env):
        op = e.op
        left = self.scalar(self.expr(e.left, env))
        if op in ("&&", "||"):
            saved = env.facts
            if op == "&&":
                env.facts = env.with_facts(_pos_facts(e.left), [])
            else:
                env.facts = env.with_facts(_neg_facts(e.left), [])
            right = self.scalar(self.expr(e.right, env))
            env.facts = saved
            return dataclasses.replace(e, left=self.convert(left, BOOL), right=self.convert(right, BOOL), ty=BOOL)
        right = self.scalar(self.expr(e.right, env))
        if op in ("<<", ">>"):
            lt, rt = promote(left.ty), promote(right.ty)
            return dataclasses.replace(e, left=self.convert(left, lt), right=self.convert(right, rt), ty=lt)
        t = common_type(left.ty, right.ty)
        left, right = self.convert(left, t), self.convert(right, t)
        if op in ("==", "!=", "<", "<=", ">", ">="):
            return dataclasses.replace(e, left=left, right=right, ty=BOOL)
        if op == "*" and t.width > MAX_MUL_WIDTH and const_value(left) is None and const_value(right) is None:
            self.error(f"multiplication of two non-constant {t.width}-bit operands is not supported "
                       f"(limit {MAX_MUL_WIDTH} bits)", e)
        if op in ("/", "%"):
            d = const_value(right)
            if d is None:
                base = strip_implicit(right)
                if not (isinstance(base, A.Name) and base.id in env.facts):
                    self.error("division by a non-constant divisor must be guarded by a non-zero test", e)
            elif d == 0:
                self.error("division by zero", e)
        return dataclasses.replace(e, left=left, right=right, ty=t)

    def call(self, e: A.Call, env: _Env, stmt_level: bool):
        if e.func in self.functions:
            info = self.functions[e.func]
            if len(e.args) != len(info.params):
                self.error(f"'{e.func}' expects {len(info.params)} arguments, got {len(e.args)}", e)
            args = []
            for arg, (pname, pt) in zip(e.args, info.params):
                args.append(self.user_arg(arg, pt, env, e, pname))
            if info.ret.kind == "void" and not stmt_level:
                self.error(f"void function '{e.func}' used as a value", e)
            env.info.calls.append(e.func)
            return dataclasses.replace(e, args=tuple(args), ty=info.ret)
        spec = B.lookup(e.func)
        if spec is None:
            self.error(f"call to undefined function '{e.func}'", e)
        if e.func == "input":
            self.error("input() may only be used as the value of an assignment", e)
        if spec.statement_only and not stmt_level:
            self.error(f"'{e.func}' can only be used as a statement", e)
        if len(e.args) != len(spec.params):
            self.error(f"'{e.func}' expects {len(spec.params)} arguments, got {len(e.args)}", e)
        args, places, n = [], [], None
        for arg, (kind, pt) in zip(e.args, spec.params):
            if kind == B.COND:
                args.append(self.cond(arg, env))
            elif kind == B.SCALAR:
                args.append(self.convert(self.scalar(self.expr(arg, env)), pt))
            elif kind == B.SIZE:
                typed = self.scalar(self.expr(arg, env))
                n = const_value(typed)
                if n is None or n < 0:
                    self.error(f"the size argument of '{e.func}' must be a non-negative constant", arg)
                args.append(A.IntLit(n, loc=arg.loc, ty=SIZE_T))
            else:
                typed, place = self.region_arg(arg, env, e)
                args.append(typed)
                places.append(place)
        if n is not None:
            for place in places:
                if region_length(place, self.arch) < n:
                    self.error(f"'{e.func}' accesses {n} bytes of a {region_length(place, self.arch)}-byte region", e)
        if e.func == "memcpy" and n:
            d, s = places
            if (d.root, d.deref) == (s.root, s.deref) and d.offset < s.offset + n and s.offset < d.offset + n:
                self.error("memcpy regions overlap", e)
        return dataclasses.replace(e, args=tuple(args), ty=spec.ret)

    def region_arg(self, arg, env, call):
        if isinstance(arg, A.Unary) and arg.op == "&":
            if not is_lvalue(arg.operand):
                self.error("'&' requires an lvalue", arg)
            inner = self.expr(arg.operand, env)
            if inner.ty.kind == "ptr":
                self.error("cannot take the address of a pointer parameter", arg)
            typed = dataclasses.replace(arg, operand=inner, ty=pointer_to(inner.ty))
        else:
            typed = self.expr(arg, env)
            if typed.ty.kind not in ("ptr", "array") or not is_lvalue(arg):
                self.error(f"argument of '{call.func}' must be an address, an array or a pointer parameter", arg)
            inner = typed
        place = static_place(inner)
        if place is None:
            self.error(f"memory arguments of '{call.func}' must have constant offsets", arg)
        return typed, place

    def user_arg(self, arg, pt: TypeSpec, env, call, pname):
        if pt.kind == "ptr":
            if isinstance(arg, A.Unary) and arg.op == "&":
                typed, place = self.region_arg(arg, env, call)
                if typed.ty != pt:
                    self.error(f"argument '{pname}' of '{call.func}' expects {pt}, got {typed.ty}", arg)
                return typed
            typed = self.expr(arg, env)
            if typed.ty != pt or not isinstance(arg, A.Name):
                self.error(f"argument '{pname}' of '{call.func}' expects the address of a {pt.elem}", arg)
            return typed
        if isinstance(arg, A.Call) and arg.func == "input":
            return dataclasses.replace(arg, ty=pt)
        typed = self.expr(arg, env)
        if pt.is_scalar:
            return self.convert(self.scalar(typed), pt)
        if typed.ty != pt:
            self.error(f"argument '{pname}' of '{call.func}' expects {pt}, got {typed.ty}", arg)
        return typed


def typecheck(ast: A.Ast, arch: int = 32, entry: Optional[str] = None,
              source: Optional[SourceUnit] = None) -> TypedProgram:
    """Annotate ``ast`` for target ``arch``.

    The entry function is ``entry`` if given, else the one named by an
    ``#pragma leak entry`` line, else the last function in the file.
    """
    if entry is None and source is not None:
        named = [p for p in parse_pragmas(source) if p.role == "entry"]
        if len(named) > 1:
            raise TypeCheckError("more than one entry pragma", named[1].line, 1, path=source.path)
        if named:
            entry = named[0].target
    prog = Checker(ast, arch, source.path if source else "").check(entry)
    prog.source = source
    return prog
