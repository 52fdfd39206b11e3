"""Closure-compiled concrete interpreter for typed programs.

Every value is held as an unsigned bit pattern.  Scalars use their own width
(``bool`` is a single bit); aggregates are little-endian byte images packed
into one Python integer, ``8 * image_size`` bits wide for a standalone object.

An aggregate *value* (the result of reading a struct, or of a call returning
one) is ``sizeof`` bytes wide: trailing padding belongs to the object, not
the value, so struct assignment leaves the destination's padding alone.

Pointers exist only as parameters; a pointer is a reference
``(holder, index, bit_offset)`` naming the slot ``holder[index]`` that holds
the pointee's object and the position of the pointee inside it.
"""

from __future__ import annotations

from typing import Callable, Optional

from .envmodels import builtins as B
from .errors import (
    AssertionFailure, AssumptionViolated, ConcreteError, MemoryModelError,
    StepBudgetExceeded, UnwindingAssertionFailure,
)
from .lang import arith
from .lang import ast as A
from .lang.typecheck import TypedProgram, region_length, static_place
from .lang.types import TypeSpec, image_size, sizeof

RET = object()  # statement result signalling an executed return

DEFAULT_MAX_STEPS = 1_000_000


def value_bits(t: TypeSpec) -> int:
    """Width of a *value* of type ``t``."""
    if t.is_scalar:
        return t.bits
    return 8 * sizeof(t)


def object_bits(t: TypeSpec, arch: int) -> int:
    """Width of a standalone object of type ``t``."""
    if t.is_scalar:
        return t.bits
    return 8 * image_size(t, arch)


def _mask(w: int) -> int:
    return (1 << w) - 1


class Interpreter:
    """Executes functions of a :class:`TypedProgram`.

    ``nondet`` is a callable ``width -> int`` consulted for every
    nondeterministic value in execution order: uninitialized locals that may
    be read, ``input()``, and padding exposed by ``copy_to_user``.
    """

    def __init__(self, prog: TypedProgram, max_steps: int = DEFAULT_MAX_STEPS, on_assert: str = "raise"):
        if on_assert not in ("raise", "record"):
            raise ValueError(on_assert)
        self.prog = prog
        self.arch = prog.arch
        self.max_steps = max_steps
        self.on_assert = on_assert
        self.nondet: Optional[Callable[[int], int]] = None
        self.failed_asserts: list[int] = []
        self._steps = [0]
        self._compiled: dict[str, Callable] = {}
        self._ops = B.ConcreteOps(self.arch, self._draw)

    # -- public API -------------------------------------------------------------

    def call(self, fname: str, args: list, nondet: Optional[Callable[[int], int]] = None):
        """Run ``fname`` with slot values ``args``; returns the return-value pattern.

        Scalars and struct values are bit patterns; pointer parameters take
        references built with :func:`make_ref`.
        """
        self.nondet = nondet
        self.failed_asserts = []
        self._steps[0] = 0
        return self._function(fname)(args)

    def _draw(self, width: int) -> int:
        if self.nondet is None:
            raise ConcreteError("the program needs nondeterministic values but no value stream was supplied")
        return self.nondet(width) & _mask(width)

    # -- functions ----------------------------------------------------------------

    def _function(self, name: str):
        fn = self._compiled.get(name)
        if fn is None:
            fn = self._compile_function(name)
        return fn

    def _compile_function(self, name: str):
        info = self.prog.functions[name]
        slots = {"__ret": 0}
        for p, _ in info.params:
            slots[p] = len(slots)
        for v in info.locals:
            slots[v] = len(slots)
        types = dict(info.params)
        types.update(info.locals)
        ctx = _FnCtx(name, slots, types, self.prog.nondet_locals.get(name, frozenset()))
        body_holder = []
        nslots = len(slots)
        nparams = len(info.params)

        def run(args):
            if len(args) != nparams:
                raise ConcreteError(f"{name} expects {nparams} arguments")
            fr = [0] * nslots
            fr[1:1 + nparams] = args
            body_holder[0](fr)
            return fr[0]

        # register before compiling the body: bodies refer to callees lazily
        self._compiled[name] = run
        body_holder.append(self._stmt(info.node.body, ctx))
        return run

    # -- statements -----------------------------------------------------------------

    def _tick(self):
        steps, limit = self._steps, self.max_steps

        def tick():
            steps[0] += 1
            if steps[0] > limit:
                raise StepBudgetExceeded(f"step budget of {limit} exhausted")
        return tick

    def _stmt(self, s, ctx):
        if isinstance(s, A.Block):
            parts = [self._stmt(x, ctx) for x in s.stmts]
            if len(parts) == 1:
                return parts[0]

            def block(fr):
                for p in parts:
                    if p(fr) is RET:
                        return RET
                return None
            return block
        tick = self._tick()
        if isinstance(s, A.Decl):
            return self._decl(s, ctx, tick)
        if isinstance(s, A.Assign):
            store = self._store(s.target, ctx)
            val = self._rhs(s.value, s.target.ty, ctx, whole_object=False)

            def assign(fr):
                tick()
                store(fr, val(fr))
            return assign
        if isinstance(s, A.If):
            cond = self._expr(s.cond, ctx)
            then = self._stmt(s.then, ctx)
            other = self._stmt(s.other, ctx) if s.other is not None else None
            if other is None:
                def if_(fr):
                    tick()
                    if cond(fr):
                        return then(fr)
                    return None
            else:
                def if_(fr):
                    tick()
                    if cond(fr):
                        return then(fr)
                    return other(fr)
            return if_
        if isinstance(s, A.While):
            cond = self._expr(s.cond, ctx)
            body = self._stmt(s.body, ctx)

            def while_(fr):
                tick()
                while cond(fr):
                    tick()
                    if body(fr) is RET:
                        return RET
                return None
            return while_
        if isinstance(s, A.For):
            init = self._stmt(s.init, ctx) if s.init is not None else None
            cond = self._expr(s.cond, ctx) if s.cond is not None else (lambda fr: 1)
            step = self._stmt(s.step, ctx) if s.step is not None else None
            body = self._stmt(s.body, ctx)

            def for_(fr):
                tick()
                if init is not None:
                    init(fr)
                while cond(fr):
                    tick()
                    if body(fr) is RET:
                        return RET
                    if step is not None:
                        step(fr)
                return None
            return for_
        if isinstance(s, A.Return):
            if s.value is None:
                def ret_void(fr):
                    tick()
                    return RET
                return ret_void
            val = self._rhs(s.value, s.value.ty, ctx, whole_object=False)

            def ret(fr):
                tick()
                fr[0] = val(fr)
                return RET
            return ret
        if isinstance(s, A.ExprStmt):
            e = s.expr
            if isinstance(e, A.Call) and e.func in ("assume", "assert"):
                cond = self._expr(e.args[0], ctx)
                line = s.loc[0]
                if e.func == "assume":
                    def assume(fr):
                        tick()
                        if not cond(fr):
                            raise AssumptionViolated(line)
                    return assume
                failed = self.failed_asserts
                raising = self.on_assert == "raise"

                def assert_(fr):
                    tick()
                    if not cond(fr):
                        if raising:
                            raise AssertionFailure(line)
                        failed.append(line)
                return assert_
            f = self._expr(e, ctx)

            def expr_stmt(fr):
                tick()
                f(fr)
            return expr_stmt
        if isinstance(s, A.UnwindCheck):
            cond = self._expr(s.cond, ctx)
            line = s.loc[0]

            def unwind_check(fr):
                if cond(fr):
                    raise UnwindingAssertionFailure(line)
            return unwind_check
        raise ConcreteError(f"cannot execute {type(s).__name__}")

    def _decl(self, s: A.Decl, ctx, tick):
        i = ctx.slots[s.name]
        t = s.ty
        vbits = value_bits(t)
        draw = self._draw
        if s.init is None:
            if s.name in ctx.nondet:
                def decl_nondet(fr):
                    tick()
                    fr[i] = draw(vbits)
                return decl_nondet

            def decl(fr):
                tick()
                fr[i] = 0
            return decl
        if isinstance(s.init, A.ZeroInit):
            def decl_zero(fr):
                tick()
                fr[i] = 0
            return decl_zero
        val = self._rhs(s.init, t, ctx, whole_object=True)

        def decl_init(fr):
            tick()
            fr[i] = val(fr)
        return decl_init

    def _rhs(self, value, t: TypeSpec, ctx, whole_object: bool):
        """Closure computing the value to store (``input()`` draws a fresh value)."""
        if isinstance(value, A.Call) and value.func == "input" and value.func not in self.prog.functions:
            bits = value_bits(t)
            draw = self._draw
            return lambda fr: draw(bits)
        return self._expr(value, ctx)

    # -- places ---------------------------------------------------------------------

    def _place(self, e, ctx):
        """Closure returning a reference ``(holder, idx, bitoff)`` or None when out of bounds."""
        if isinstance(e, A.Cast) and e.implicit:
            return self._place(e.expr, ctx)
        if isinstance(e, A.Name):
            i = ctx.slots[e.id]
            if e.ty.kind == "ptr":
                return lambda fr: fr[i]
            return lambda fr: (fr, i, 0)
        if isinstance(e, A.Unary) and e.op == "*":
            return self._place(e.operand, ctx)
        if isinstance(e, A.Member):
            base = self._place(e.base, ctx)
            rec = e.base.ty.elem if e.arrow else e.base.ty
            off = 8 * rec.field(e.field)[0]

            def member(fr):
                r = base(fr)
                if r is None:
                    return None
                return (r[0], r[1], r[2] + off)
            return member
        if isinstance(e, A.Index):
            base = self._place(e.base, ctx)
            idx = self._expr(e.index, ctx)
            arr = e.base.ty
            stride = 8 * sizeof(arr.elem)
            n = arr.length
            it = e.index.ty
            signed = it.kind == "int" and it.signed
            w = it.bits

            def index(fr):
                r = base(fr)
                k = idx(fr)
                if signed and k >> (w - 1):
                    return None
                if r is None or k >= n:
                    return None
                return (r[0], r[1], r[2] + k * stride)
            return index
        raise ConcreteError(f"not an lvalue: {type(e).__name__}")

    def _store(self, target, ctx):
        t = target.ty
        if isinstance(target, A.Name):
            i = ctx.slots[target.id]
            if t.is_scalar:
                def store_scalar(fr, v):
                    fr[i] = v
                return store_scalar
            keep = ~_mask(value_bits(t))

            def store_whole(fr, v):
                fr[i] = (fr[i] & keep) | v
            return store_whole
        place = self._place(target, ctx)
        m = _mask(value_bits(t) if t.kind != "bool" else 8)

        def store(fr, v):
            r = place(fr)
            if r is None:
                return  # out-of-bounds writes are dropped
            holder, k, off = r
            holder[k] = (holder[k] & ~(m << off)) | (v << off)
        return store

    def _load(self, e, ctx):
        t = e.ty
        if isinstance(e, A.Name) and e.ty.kind != "ptr":
            i = ctx.slots[e.id]
            if t.is_scalar:
                return lambda fr: fr[i]
            m = _mask(value_bits(t))
            return lambda fr: fr[i] & m
        place = self._place(e, ctx)
        if t.kind == "bool":
            def load_bool(fr):
                r = place(fr)
                if r is None:
                    return 0
                return 1 if (r[0][r[1]] >> r[2]) & 0xFF else 0
            return load_bool
        m = _mask(value_bits(t))

        def load(fr):
            r = place(fr)
            if r is None:
                return 0  # out-of-bounds reads yield zero
            return (r[0][r[1]] >> r[2]) & m
        return load

    # -- expressions ----------------------------------------------------------------

    def _expr(self, e, ctx):
        if isinstance(e, A.IntLit):
            v = e.value & _mask(e.ty.bits)
            return lambda fr: v
        if isinstance(e, A.SizeOf):
            v = e.value
            return lambda fr: v
        if isinstance(e, (A.Name, A.Member, A.Index)):
            return self._load(e, ctx)
        if isinstance(e, A.Cast):
            return self._cast(self._expr(e.expr, ctx), e.expr.ty, e.ty)
        if isinstance(e, A.Unary):
            if e.op == "*":
                return self._load(e, ctx)
            f = self._expr(e.operand, ctx)
            w = e.ty.bits
            m = _mask(w)
            if e.op == "-":
                return lambda fr: -f(fr) & m
            if e.op == "~":
                return lambda fr: ~f(fr) & m
            if e.op == "!":
                return lambda fr: 0 if f(fr) else 1
            if e.op == "+":
                return f
            raise ConcreteError(f"unary {e.op}")
        if isinstance(e, A.Binary):
            return self._binary(e, ctx)
        if isinstance(e, A.Cond):
            c, a, b = self._expr(e.cond, ctx), self._expr(e.then, ctx), self._expr(e.other, ctx)
            return lambda fr: a(fr) if c(fr) else b(fr)
        if isinstance(e, A.Call):
            return self._call(e, ctx)
        raise ConcreteError(f"cannot evaluate {type(e).__name__}")

    @staticmethod
    def _cast(f, src: TypeSpec, dst: TypeSpec):
        if dst.kind == "bool":
            return lambda fr: 1 if f(fr) else 0
        md = _mask(dst.width)
        if src.kind == "bool" or not src.signed or dst.width <= src.width:
            if src.kind != "bool" and dst.width >= src.width:
                return f
            return lambda fr: f(fr) & md
        sb = 1 << (src.width - 1)
        return lambda fr: ((f(fr) ^ sb) - sb) & md

    def _binary(self, e: A.Binary, ctx):
        op = e.op
        a, b = self._expr(e.left, ctx), self._expr(e.right, ctx)
        if op == "&&":
            return lambda fr: 1 if a(fr) and b(fr) else 0
        if op == "||":
            return lambda fr: 1 if a(fr) or b(fr) else 0
        lt = e.left.ty
        w = lt.bits
        signed = lt.kind == "int" and lt.signed
        m = _mask(w)
        if op in ("<<", ">>"):
            shift = arith.shift
            return lambda fr: shift(op, a(fr), b(fr), w, signed)
        if op in ("==", "!="):
            if op == "==":
                return lambda fr: 1 if a(fr) == b(fr) else 0
            return lambda fr: 1 if a(fr) != b(fr) else 0
        if op in ("<", "<=", ">", ">="):
            if signed:
                sb = 1 << (w - 1)
                a0, b0 = a, b
                a = lambda fr: a0(fr) ^ sb  # noqa: E731  (order-preserving flip)
                b = lambda fr: b0(fr) ^ sb  # noqa: E731
            if op == "<":
                return lambda fr: 1 if a(fr) < b(fr) else 0
            if op == "<=":
                return lambda fr: 1 if a(fr) <= b(fr) else 0
            if op == ">":
                return lambda fr: 1 if a(fr) > b(fr) else 0
            return lambda fr: 1 if a(fr) >= b(fr) else 0
        if op == "+":
            return lambda fr: (a(fr) + b(fr)) & m
        if op == "-":
            return lambda fr: (a(fr) - b(fr)) & m
        if op == "*":
            return lambda fr: (a(fr) * b(fr)) & m
        if op == "&":
            return lambda fr: a(fr) & b(fr)
        if op == "|":
            return lambda fr: a(fr) | b(fr)
        if op == "^":
            return lambda fr: a(fr) ^ b(fr)
        if op in ("/", "%"):
            divide, rem = arith.divide, op == "%"
            return lambda fr: divide(a(fr), b(fr), w, signed, rem)
        raise ConcreteError(f"binary {op}")

    def _call(self, e: A.Call, ctx):
        if e.func in self.prog.functions:
            info = self.prog.functions[e.func]
            args = []
            for arg, (_, pt) in zip(e.args, info.params):
                if pt.kind == "ptr":
                    inner = arg.operand if isinstance(arg, A.Unary) and arg.op == "&" else arg
                    args.append(self._place(inner, ctx))
                elif isinstance(arg, A.Call) and arg.func == "input" and arg.func not in self.prog.functions:
                    args.append(self._rhs(arg, pt, ctx, whole_object=True))
                else:
                    args.append(self._expr(arg, ctx))
            name = e.func
            resolve = self._function

            def call(fr):
                return resolve(name)([f(fr) for f in args])
            return call
        spec = B.lookup(e.func)
        if spec is None or spec.semantics is None:
            raise ConcreteError(f"builtin '{e.func}' cannot be evaluated here")
        return self._memory_builtin(e, spec, ctx)

    def _memory_builtin(self, e: A.Call, spec: B.BuiltinSpec, ctx):
        regions, scalars = [], []
        for arg, (kind, _) in zip(e.args, spec.params):
            if kind == B.REGION:
                inner = arg.operand if isinstance(arg, A.Unary) and arg.op == "&" else arg
                place = static_place(inner)
                regions.append((self._place(inner, ctx), region_length(place, self.arch)))
            elif kind == B.SIZE:
                scalars.append(("size", arg.value))
            else:
                scalars.append(("value", self._expr(arg, ctx)))
        n = [v for k, v in scalars if k == "size"][0]
        values = [v for k, v in scalars if k == "value"]
        sem = spec.semantics
        ops = self._ops
        writes = spec.writes
        name = e.func

        def builtin(fr):
            refs = [(p(fr), length) for p, length in regions]
            byte_lists = []
            for (holder, k, off), length in refs:
                v = holder[k] >> off
                byte_lists.append([(v >> (8 * j)) & 0xFF for j in range(length)])
            if name == "memcpy":
                (h0, k0, o0), _ = refs[0]
                (h1, k1, o1), _ = refs[1]
                if h0 is h1 and k0 == k1 and n and o0 < o1 + 8 * n and o1 < o0 + 8 * n:
                    raise MemoryModelError("memcpy regions overlap")
            args = byte_lists[:1] + [f(fr) for f in values] + byte_lists[1:] if values else byte_lists
            res = sem(ops, *args, n)
            for w in writes:
                (holder, k, off), length = refs[w]
                img = 0
                for j, byte in enumerate(res.dst):
                    img |= byte << (8 * j)
                m = _mask(8 * length)
                holder[k] = (holder[k] & ~(m << off)) | (img << off)
            return res.value if res.value is not None else 0
        return builtin


class _FnCtx:
    __slots__ = ("name", "slots", "types", "nondet")

    def __init__(self, name, slots, types, nondet):
        self.name = name
        self.slots = slots
        self.types = types
        self.nondet = nondet


def make_ref(value: int):
    """A fresh object holding ``value`` and a pointer to it."""
    holder = [value]
    return holder, (holder, 0, 0)
