"""Symbolic execution of a loop-free typed program into SSA form.

Calls are inlined, giving every invocation fresh SSA names.  Branches are
executed on copies of the variable environment and merged at the join with
``ite`` selections (the phi nodes).  An early ``return`` clears the frame's
*alive* condition; writes performed while it may be false keep the old value
on the paths that already returned.

Nondeterministic values are created exactly where the concrete interpreter
draws them, in the same order, so a satisfying assignment can be replayed
by feeding the values of the executed sites to the interpreter.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..envmodels import builtins as B
from ..errors import EncodeError
from ..interp import object_bits, value_bits
from ..lang import ast as A
from ..lang.typecheck import TypedProgram, region_length, static_place
from ..lang.types import TypeSpec, sizeof
from ..unroll import has_loops
from . import expr as X
from .program import (
    ASSERT, ASSUME, PROPERTY, UNWIND, Assignment, NondetSite, Obligation, SsaProgram, SsaVar,
)


@dataclass
class Place:
    """A location inside a variable's bit-vector: ``(condition, bit offset)`` cases.

    Cases are mutually exclusive; when none holds the access is out of bounds.
    """

    key: tuple
    cases: tuple
    ty: TypeSpec


class _Frame:
    __slots__ = ("fid", "fname", "copy", "ptrs", "info", "nondet")

    def __init__(self, fid, fname, copy, info, nondet):
        self.fid = fid
        self.fname = fname
        self.copy = copy
        self.ptrs: dict = {}
        self.info = info
        self.nondet = nondet


def _var_type(frame: _Frame, var: str):
    info = frame.info
    if var == "__ret":
        return info.ret
    if var.startswith("*"):
        return info.param_type(var[1:]).elem
    try:
        return info.var_type(var)
    except KeyError:
        return None


def _has_effects(e) -> bool:
    """True if evaluating ``e`` may change state or create nondeterministic values."""
    for n in A.walk(e):
        if isinstance(n, A.Call) and n.func not in ("memcmp",):
            return True
    return False


class SymOps:
    """Expression-building implementation of the builtin operations interface."""

    def __init__(self, builder: "Builder", line: int, what: str):
        self.b = builder
        self.arch = builder.arch
        self.line = line
        self.what = what

    def const(self, value, width):
        return X.const(value, width)

    def eq(self, a, b):
        return X.eq(a, b)

    def all_of(self, bits):
        return X.all_of(bits)

    def ite(self, c, a, b):
        return X.ite(c, a, b)

    def extract(self, v, lo, width):
        return X.extract(v, lo, width)

    def nondet(self, width, label=""):
        return self.b.fresh_nondet(width, label or self.what, label or self.what, self.line)


class Builder:
    def __init__(self, prog: TypedProgram, property_copy: int = 0):
        if has_loops(prog.ast):
            raise EncodeError("unwind loops before converting to SSA")
        self.prog = prog
        self.arch = prog.arch
        self.ssa = SsaProgram(prog.entry, prog.arch)
        self.env: dict = {}
        self.alive = X.TRUE
        self.path = X.TRUE
        self.counters: dict = {}
        self.instances = 0
        self.calls = 0
        self.seq = 0
        self.stack: list[_Frame] = []

    # -- naming and assignment -------------------------------------------------------

    def _name(self, frame: _Frame, var: str) -> str:
        base = f"{frame.fid}::{var}"
        n = self.counters.get(base, 0) + 1
        self.counters[base] = n
        return f"{base}#{n}"

    def define(self, key, value: X.SExpr, line: int, kind: str = "assign", frame=None) -> X.SExpr:
        """Record ``key := value`` and make it the variable's current value."""
        frame = frame or self._owner(key)
        name = self._name(frame, key[1])
        self.ssa.vars[name] = SsaVar(name, value.width, key[1], frame.fname, frame.copy, line, kind,
                                     _var_type(frame, key[1]))
        self.ssa.steps.append(Assignment(name, value, X.and_(self.path, self.alive)))
        if value.op in ("const", "var", "nondet"):
            cur = value
        else:
            cur = X.var(name, value.width)
        self.env[key] = cur
        return cur

    def _owner(self, key) -> _Frame:
        for f in reversed(self.stack):
            if f.fid == key[0]:
                return f
        return self.stack[-1]

    def write(self, key, value: X.SExpr, line: int):
        """Guarded update: paths that already returned keep the old value."""
        if self.alive is not X.TRUE and key in self.env:
            value = X.ite(self.alive, value, self.env[key])
        return self.define(key, value, line)

    def fresh_nondet(self, width: int, var: str, origin: str, line: int) -> X.SExpr:
        frame = self.stack[-1]
        name = self._name(frame, var)
        self.seq += 1
        guard = X.and_(self.path, self.alive)
        site = NondetSite(name, width, guard, frame.copy, self.seq, origin, line)
        self.ssa.nondets.append(site)
        self.ssa.vars[name] = SsaVar(name, width, var, frame.fname, frame.copy, line, "nondet",
                                     _var_type(frame, var))
        v = X.nondet(name, width)
        self.ssa.steps.append(Assignment(name, v, guard))
        return v

    def obligation(self, kind: str, cond: X.SExpr, line: int, label: str = ""):
        frame = self.stack[-1]
        guard = X.and_(self.path, self.alive)
        self.ssa.steps.append(Obligation(kind, guard, cond, line, frame.copy, label))

    # -- entry -------------------------------------------------------------------------

    def run_entry(self, free_params: bool = True):
        """Execute the entry function; its parameters become free inputs."""
        info = self.prog.function()
        frame = self._push(info, copy=0)
        for pname, pt in info.params:
            line = info.node.loc[0]
            if pt.kind == "ptr":
                key = (frame.fid, "*" + pname)
                w = object_bits(pt.elem, self.arch)
                label = f"param:*{pname}"
                self.env[key] = X.nondet(label, w) if free_params else X.const(0, w)
                self.ssa.params[label] = key[1]
                frame.ptrs[pname] = Place(key, ((X.TRUE, 0),), pt.elem)
            else:
                label = f"param:{pname}"
                w = object_bits(pt, self.arch)
                v = X.nondet(label, value_bits(pt)) if free_params else X.const(0, value_bits(pt))
                self.ssa.params[label] = pname
                self.define((frame.fid, pname), X.zext(v, w), line, kind="param")
        if info.ret.kind != "void":
            self.env[(frame.fid, "__ret")] = X.const(0, value_bits(info.ret))
        self.block(info.node.body)
        out = {}
        for (fid, var), v in self.env.items():
            if fid == frame.fid:
                out[var] = v
        ret = out.pop("__ret", None)
        if ret is not None:
            out["__return"] = ret
        self.ssa.outputs = out
        self.stack.pop()
        return self.ssa

    def _push(self, info, copy: int) -> _Frame:
        self.instances += 1
        fid = info.name if not self.stack else f"{info.name}@{self.instances}"
        frame = _Frame(fid, info.name, copy, info, self.prog.nondet_locals.get(info.name, frozenset()))
        self.stack.append(frame)
        return frame

    # -- statements -----------------------------------------------------------------------

    def block(self, b):
        for s in b.stmts:
            if self.alive is X.FALSE or self.path is X.FALSE:
                return
            self.stmt(s)

    def stmt(self, s):
        if self.alive is X.FALSE or self.path is X.FALSE:
            return
        frame = self.stack[-1]
        line = s.loc[0]
        if isinstance(s, A.Block):
            self.block(s)
        elif isinstance(s, A.Decl):
            self.decl(s, frame, line)
        elif isinstance(s, A.Assign):
            t = s.target.ty
            v = self.rhs(s.value, t, line)
            self.store(s.target, v, line)
        elif isinstance(s, A.If):
            c = self.expr(s.cond)
            self.branch(c, lambda: self.stmt(s.then),
                        (lambda: self.stmt(s.other)) if s.other is not None else None, line)
        elif isinstance(s, A.Return):
            if s.value is not None:
                v = self.rhs(s.value, s.value.ty, line)
                self.write((frame.fid, "__ret"), v, line)
            self.alive = X.FALSE
        elif isinstance(s, A.ExprStmt):
            e = s.expr
            if isinstance(e, A.Call) and e.func in ("assume", "assert") and e.func not in self.prog.functions:
                c = self.expr(e.args[0])
                kind = ASSUME if e.func == "assume" else (PROPERTY if len(self.stack) == 1 else ASSERT)
                self.obligation(kind, c, line)
            else:
                self.expr(e)
        elif isinstance(s, A.UnwindCheck):
            c = self.expr(s.cond)
            self.obligation(UNWIND, c, line, s.loop)
        else:
            raise EncodeError(f"cannot encode {type(s).__name__}")

    def decl(self, s: A.Decl, frame: _Frame, line: int):
        t = s.ty
        w = object_bits(t, self.arch)
        key = (frame.fid, s.name)
        if s.init is None:
            if s.name in frame.nondet:
                v = self.fresh_nondet(value_bits(t), s.name, f"uninitialized {s.name}", line)
                self.define(key, X.zext(v, w), line)
            else:
                self.define(key, X.const(0, w), line)
        elif isinstance(s.init, A.ZeroInit):
            self.define(key, X.const(0, w), line)
        else:
            v = self.rhs(s.init, t, line, var=s.name)
            self.define(key, X.zext(v, w), line)

    def rhs(self, value, t: TypeSpec, line: int, var: str = "input"):
        if isinstance(value, A.Call) and value.func == "input" and value.func not in self.prog.functions:
            return self.fresh_nondet(value_bits(t), var, "input", line)
        return self.expr(value)

    def branch(self, c: X.SExpr, then, other, line: int):
        """Run ``then``/``other`` under ``c``/``!c`` and merge the resulting states."""
        if c is X.TRUE:
            then()
            return
        if c is X.FALSE:
            if other is not None:
                other()
            return
        env0, alive0, path0 = self.env, self.alive, self.path
        self.env = dict(env0)
        self.path = X.and_(path0, c)
        then()
        env_t, alive_t = self.env, self.alive
        self.env, self.alive = dict(env0), alive0
        self.path = X.and_(path0, X.not_(c))
        if other is not None:
            other()
        env_e, alive_e = self.env, self.alive
        self.path, self.alive = path0, alive0
        merged = dict(env_e)
        for key, vt in env_t.items():
            ve = env_e.get(key)
            if ve is None or ve is vt:
                merged[key] = vt
        self.env = merged
        for key, vt in env_t.items():
            ve = env_e.get(key)
            if ve is not None and ve is not vt:
                self.define(key, X.ite(c, vt, ve), line, kind="phi")
        self.alive = X.ite(c, alive_t, alive_e)

    # -- places ------------------------------------------------------------------------------

    def place(self, e) -> Place:
        if isinstance(e, A.Cast) and e.implicit:
            return self.place(e.expr)
        frame = self.stack[-1]
        if isinstance(e, A.Name):
            if e.ty.kind == "ptr":
                return frame.ptrs[e.id]
            return Place((frame.fid, e.id), ((X.TRUE, 0),), e.ty)
        if isinstance(e, A.Unary) and e.op == "*":
            return self.place(e.operand)
        if isinstance(e, A.Member):
            base = self.place(e.base)
            rec = e.base.ty.elem if e.arrow else e.base.ty
            off, ft = rec.field(e.field)
            return Place(base.key, tuple((c, o + 8 * off) for c, o in base.cases), ft)
        if isinstance(e, A.Index):
            base = self.place(e.base)
            arr = e.base.ty
            stride = 8 * sizeof(arr.elem)
            k = self.expr(e.index)
            if k.is_const:
                idx = k.value
                it = e.index.ty
                if it.kind == "int" and it.signed and idx >> (it.bits - 1):
                    return Place(base.key, (), arr.elem)
                if idx >= arr.length:
                    return Place(base.key, (), arr.elem)
                return Place(base.key, tuple((c, o + idx * stride) for c, o in base.cases), arr.elem)
            cases = []
            for c, o in base.cases:
                for i in range(arr.length):
                    hit = X.eq(k, X.const(i, k.width))
                    cases.append((X.and_(c, hit), o + i * stride))
            return Place(base.key, tuple(cases), arr.elem)
        raise EncodeError(f"not an lvalue: {type(e).__name__}")

    def _width_at(self, pl: Place, obj: X.SExpr, off: int) -> int:
        if pl.ty.kind == "bool":
            return min(8, obj.width - off)
        return value_bits(pl.ty)

    def load_place(self, pl: Place) -> X.SExpr:
        obj = self.env[pl.key]
        w = value_bits(pl.ty)
        res = X.const(0, w)
        for c, off in reversed(pl.cases):
            rw = self._width_at(pl, obj, off)
            v = X.extract(obj, off, rw)
            if pl.ty.kind == "bool":
                v = X.ne(v, X.const(0, rw))
            res = X.ite(c, v, res)
        return res

    def store_place(self, pl: Place, v: X.SExpr, line: int):
        if not pl.cases:
            return  # out-of-bounds writes are dropped
        obj = self.env[pl.key]
        new = obj
        for c, off in pl.cases:
            rw = self._width_at(pl, obj, off)
            piece = X.zext(v, rw) if pl.ty.kind == "bool" else v
            new = X.ite(c, X.splice(new, off, piece), new)
        self.write(pl.key, new, line)

    def store(self, target, v: X.SExpr, line: int):
        t = target.ty
        if isinstance(target, A.Name) and t.kind != "ptr":
            key = (self.stack[-1].fid, target.id)
            if t.is_scalar:
                self.write(key, v, line)
            else:
                self.write(key, X.splice(self.env[key], 0, v), line)
            return
        self.store_place(self.place(target), v, line)

    # -- expressions -------------------------------------------------------------------------------

    def expr(self, e) -> X.SExpr:
        if isinstance(e, A.IntLit):
            return X.const(e.value, e.ty.bits)
        if isinstance(e, A.SizeOf):
            return X.const(e.value, e.ty.bits)
        if isinstance(e, A.Name) and e.ty.kind != "ptr":
            obj = self.env[(self.stack[-1].fid, e.id)]
            return X.extract(obj, 0, value_bits(e.ty))
        if isinstance(e, (A.Name, A.Member, A.Index)):
            return self.load_place(self.place(e))
        if isinstance(e, A.Cast):
            return self.cast(self.expr(e.expr), e.expr.ty, e.ty)
        if isinstance(e, A.Unary):
            if e.op == "*":
                return self.load_place(self.place(e))
            a = self.expr(e.operand)
            if e.op == "-":
                return X.neg(a)
            if e.op == "~":
                return X.not_(a)
            if e.op == "!":
                return X.eq(a, X.const(0, a.width))
            if e.op == "+":
                return a
            raise EncodeError(f"unary {e.op}")
        if isinstance(e, A.Binary):
            return self.binary(e)
        if isinstance(e, A.Cond):
            c = self.expr(e.cond)
            if not (_has_effects(e.then) or _has_effects(e.other)):
                return X.ite(c, self.expr(e.then), self.expr(e.other))
            return self._conditional(c, e.then, e.other, e.loc[0])
        if isinstance(e, A.Call):
            return self.call(e)
        raise EncodeError(f"cannot encode {type(e).__name__}")

    def _conditional(self, c, then_e, other_e, line):
        """Value of ``c ? then_e : other_e`` when the arms have side effects."""
        out = {}

        def run(arm, which):
            out[which] = self.expr(arm)

        self.branch(c, lambda: run(then_e, "t"), lambda: run(other_e, "e"), line)
        w = (out.get("t") or out.get("e")).width
        return X.ite(c, out.get("t", X.const(0, w)), out.get("e", X.const(0, w)))

    @staticmethod
    def cast(a: X.SExpr, src: TypeSpec, dst: TypeSpec) -> X.SExpr:
        if dst.kind == "bool":
            if src.kind == "bool":
                return a
            return X.ne(a, X.const(0, a.width))
        if src.kind == "bool" or not src.signed or dst.width <= src.width:
            return X.zext(a, dst.width)
        return X.sext(a, dst.width)

    def binary(self, e: A.Binary) -> X.SExpr:
        op = e.op
        if op in ("&&", "||"):
            a = self.expr(e.left)
            if not _has_effects(e.right):
                b = self.expr(e.right)
                return X.and_(a, b) if op == "&&" else X.or_(a, b)
            if op == "&&":
                return self._conditional(a, e.right, A.IntLit(0, loc=e.loc, ty=e.ty), e.loc[0])
            return self._conditional(a, A.IntLit(1, loc=e.loc, ty=e.ty), e.right, e.loc[0])
        a, b = self.expr(e.left), self.expr(e.right)
        lt = e.left.ty
        signed = lt.kind == "int" and lt.signed
        if op == "<<":
            return X.shl(a, b)
        if op == ">>":
            return X.ashr(a, b) if signed else X.lshr(a, b)
        if op == "==":
            return X.eq(a, b)
        if op == "!=":
            return X.ne(a, b)
        if op in ("<", "<=", ">", ">="):
            if op in (">", ">="):
                a, b = b, a
            strict = op in ("<", ">")
            if signed:
                return X.slt(a, b) if strict else X.sle(a, b)
            return X.ult(a, b) if strict else X.ule(a, b)
        simple = {"+": X.add, "-": X.sub, "*": X.mul, "&": X.and_, "|": X.or_, "^": X.xor}
        if op in simple:
            return simple[op](a, b)
        if op == "/":
            return X.sdiv(a, b) if signed else X.udiv(a, b)
        if op == "%":
            return X.srem(a, b) if signed else X.urem(a, b)
        raise EncodeError(f"binary {op}")

    # -- calls -----------------------------------------------------------------------------------------

    def call(self, e: A.Call) -> X.SExpr:
        if e.func in self.prog.functions:
            return self.inline(e)
        spec = B.lookup(e.func)
        if spec is None or spec.semantics is None:
            raise EncodeError(f"builtin '{e.func}' cannot be encoded here")
        return self.memory_builtin(e, spec)

    def inline(self, e: A.Call) -> X.SExpr:
        info = self.prog.functions[e.func]
        line = e.loc[0]
        args = []
        for arg, (pname, pt) in zip(e.args, info.params):
            if pt.kind == "ptr":
                inner = arg.operand if isinstance(arg, A.Unary) and arg.op == "&" else arg
                args.append(self.place(inner))
            else:
                args.append(self.rhs(arg, pt, line, var=pname))
        caller = self.stack[-1]
        if len(self.stack) == 1:
            self.calls += 1
            copy = self.calls
        else:
            copy = caller.copy
        frame = self._push(info, copy)
        for (pname, pt), v in zip(info.params, args):
            if pt.kind == "ptr":
                frame.ptrs[pname] = v
            else:
                self.define((frame.fid, pname), X.zext(v, object_bits(pt, self.arch)), line, kind="param")
        ret_key = (frame.fid, "__ret")
        if info.ret.kind != "void":
            self.env[ret_key] = X.const(0, value_bits(info.ret))
        alive0 = self.alive
        self.block(info.node.body)
        self.alive = alive0
        self.stack.pop()
        result = self.env.get(ret_key, X.const(0, 1))
        # the callee's locals are dead from here on
        for key in [k for k in self.env if k[0] == frame.fid]:
            del self.env[key]
        return result

    def memory_builtin(self, e: A.Call, spec) -> X.SExpr:
        line = e.loc[0]
        regions, values, n = [], [], 0
        for arg, (kind, _) in zip(e.args, spec.params):
            if kind == B.REGION:
                inner = arg.operand if isinstance(arg, A.Unary) and arg.op == "&" else arg
                length = region_length(static_place(inner), self.arch)
                regions.append((self.place(inner), length))
            elif kind == B.SIZE:
                n = arg.value
            else:
                values.append(self.expr(arg))
        byte_lists = []
        for pl, length in regions:
            obj = self.env[pl.key]
            (_, off), = pl.cases
            byte_lists.append([X.extract(obj, off + 8 * j, 8) if off + 8 * j + 8 <= obj.width
                               else X.const(0, 8) for j in range(length)])
        args = byte_lists[:1] + values + byte_lists[1:] if values else byte_lists
        res = spec.semantics(SymOps(self, line, e.func), *args, n)
        for w in spec.writes:
            pl, length = regions[w]
            obj = self.env[pl.key]
            (_, off), = pl.cases
            keep = max(0, min(length, (obj.width - off) // 8))
            if keep:
                self.write(pl.key, X.splice(obj, off, X.concat(res.dst[:keep])), line)
        return res.value if res.value is not None else X.const(0, value_bits(spec.ret) if spec.ret.is_scalar else 1)


def to_ssa(prog: TypedProgram, free_params: bool = True) -> SsaProgram:
    """SSA form of the loop-free program's entry function.

    With ``free_params`` the entry's parameters (and the objects its pointer
    parameters refer to) are free inputs labelled ``param:<name>``; otherwise
    they start at zero.
    """
    return Builder(prog).run_entry(free_params)
