"""Hash-consed bit-vector expressions for the SSA form.

Nodes are interned: structurally equal expressions are the same object, so
identity comparison and ``id``-keyed caches are safe.  Constructors fold
constants and apply a handful of local simplifications; nothing here needs
a solver.
"""

from __future__ import annotations

import hashlib
import weakref

from ..lang import arith


class SExpr:
    __slots__ = ("op", "width", "args", "attr", "digest", "__weakref__")

    def __init__(self, op: str, width: int, args: tuple, attr):
        self.op = op
        self.width = width
        self.args = args
        self.attr = attr
        # structural fingerprint: orders commutative operands independently of
        # allocation history, so SSA dumps and CNF numbering are reproducible
        text = f"{op}|{width}|{attr!r}|" + ",".join(str(a.digest) for a in args)
        self.digest = int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    @property
    def value(self) -> int:
        if self.op != "const":
            raise ValueError("not a constant")
        return self.attr

    def __repr__(self) -> str:
        return format_expr(self)


_TABLE: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()


def _mk(op: str, width: int, args: tuple = (), attr=None) -> SExpr:
    key = (op, width, tuple(id(a) for a in args), attr)
    node = _TABLE.get(key)
    if node is None:
        node = SExpr(op, width, args, attr)
        _TABLE[key] = node
    return node


def _m(w: int) -> int:
    return (1 << w) - 1


def const(value: int, width: int) -> SExpr:
    return _mk("const", width, (), value & _m(width))


TRUE = None  # set below (kept alive by module globals)
FALSE = None


def var(name: str, width: int) -> SExpr:
    """Reference to an SSA name."""
    return _mk("var", width, (), name)


def nondet(label: str, width: int) -> SExpr:
    """A free input, identified by ``label``."""
    return _mk("nondet", width, (), label)


# -- boolean ------------------------------------------------------------------------


def not_(a: SExpr) -> SExpr:
    if a.is_const:
        return const(~a.value, a.width)
    if a.op == "not":
        return a.args[0]
    return _mk("not", a.width, (a,))


def _assoc(op, a, b, absorb, ident):
    if a.width != b.width:
        raise ValueError(f"{op}: width mismatch {a.width} vs {b.width}")
    w = a.width
    if a.is_const and b.is_const:
        return const({"and": a.value & b.value, "or": a.value | b.value,
                      "xor": a.value ^ b.value}[op], w)
    for x, y in ((a, b), (b, a)):
        if x.is_const:
            if absorb is not None and x.value == absorb(w):
                return x
            if x.value == ident(w):
                return y
    if a is b:
        return const(0, w) if op == "xor" else a
    if op != "xor" and (a.op == "not" and a.args[0] is b or b.op == "not" and b.args[0] is a):
        return const(0 if op == "and" else _m(w), w)
    if a.digest > b.digest:
        a, b = b, a
    return _mk(op, w, (a, b))


def and_(a: SExpr, b: SExpr) -> SExpr:
    return _assoc("and", a, b, lambda w: 0, _m)


def or_(a: SExpr, b: SExpr) -> SExpr:
    return _assoc("or", a, b, _m, lambda w: 0)


def xor(a: SExpr, b: SExpr) -> SExpr:
    return _assoc("xor", a, b, None, lambda w: 0)


def all_of(items) -> SExpr:
    out = TRUE
    for x in items:
        out = and_(out, x)
    return out


def any_of(items) -> SExpr:
    out = FALSE
    for x in items:
        out = or_(out, x)
    return out


def implies(a: SExpr, b: SExpr) -> SExpr:
    return or_(not_(a), b)


# -- arithmetic -----------------------------------------------------------------------


def _check(a, b, op):
    if a.width != b.width:
        raise ValueError(f"{op}: width mismatch {a.width} vs {b.width}")


def neg(a: SExpr) -> SExpr:
    if a.is_const:
        return const(-a.value, a.width)
    return _mk("neg", a.width, (a,))


def add(a, b):
    _check(a, b, "add")
    if a.is_const and b.is_const:
        return const(a.value + b.value, a.width)
    if a.is_const and a.value == 0:
        return b
    if b.is_const and b.value == 0:
        return a
    if a.digest > b.digest:
        a, b = b, a
    return _mk("add", a.width, (a, b))


def sub(a, b):
    _check(a, b, "sub")
    if a.is_const and b.is_const:
        return const(a.value - b.value, a.width)
    if b.is_const and b.value == 0:
        return a
    if a is b:
        return const(0, a.width)
    return _mk("sub", a.width, (a, b))


def mul(a, b):
    _check(a, b, "mul")
    if a.is_const and b.is_const:
        return const(a.value * b.value, a.width)
    for x, y in ((a, b), (b, a)):
        if x.is_const and x.value == 0:
            return x
        if x.is_const and x.value == 1:
            return y
    if a.digest > b.digest:
        a, b = b, a
    return _mk("mul", a.width, (a, b))


def _div(op, a, b):
    _check(a, b, op)
    if a.is_const and b.is_const:
        signed = op in ("sdiv", "srem")
        return const(arith.divide(a.value, b.value, a.width, signed, op.endswith("rem")), a.width)
    return _mk(op, a.width, (a, b))


def udiv(a, b):
    return _div("udiv", a, b)


def urem(a, b):
    return _div("urem", a, b)


def sdiv(a, b):
    return _div("sdiv", a, b)


def srem(a, b):
    return _div("srem", a, b)


def _shift(op, a, b):
    if a.is_const and b.is_const:
        name = {"shl": "<<", "lshr": ">>", "ashr": ">>"}[op]
        return const(arith.shift(name, a.value, b.value, a.width, op == "ashr"), a.width)
    if b.is_const and b.value == 0:
        return a
    return _mk(op, a.width, (a, b))


def shl(a, b):
    return _shift("shl", a, b)


def lshr(a, b):
    return _shift("lshr", a, b)


def ashr(a, b):
    return _shift("ashr", a, b)


# -- comparisons (1-bit results) --------------------------------------------------------


def eq(a, b):
    _check(a, b, "eq")
    if a is b:
        return TRUE
    if a.is_const and b.is_const:
        return TRUE if a.value == b.value else FALSE
    if a.width == 1:
        if a.is_const:
            a, b = b, a
        if b.is_const:
            return a if b.value else not_(a)
    # ite with constant arms against a constant: decide by the condition
    for x, y in ((a, b), (b, a)):
        if y.is_const and x.op == "ite" and x.args[1].is_const and x.args[2].is_const:
            t, e = x.args[1].value == y.value, x.args[2].value == y.value
            c = x.args[0]
            if t and e:
                return TRUE
            if t:
                return c
            if e:
                return not_(c)
            return FALSE
    if a.digest > b.digest:
        a, b = b, a
    return _mk("eq", 1, (a, b))


def ne(a, b):
    return not_(eq(a, b))


def _cmp(op, a, b):
    _check(a, b, op)
    if a.is_const and b.is_const:
        signed = op.startswith("s")
        name = {"ult": "<", "ule": "<=", "slt": "<", "sle": "<="}[op]
        return TRUE if arith.compare(name, a.value, b.value, a.width, signed) else FALSE
    if a is b:
        return TRUE if op.endswith("le") else FALSE
    return _mk(op, 1, (a, b))


def ult(a, b):
    return _cmp("ult", a, b)


def ule(a, b):
    return _cmp("ule", a, b)


def slt(a, b):
    return _cmp("slt", a, b)


def sle(a, b):
    return _cmp("sle", a, b)


# -- structure ------------------------------------------------------------------------


def ite(c: SExpr, a: SExpr, b: SExpr) -> SExpr:
    if c.width != 1:
        raise ValueError("ite condition must be one bit")
    _check(a, b, "ite")
    if c.is_const:
        return a if c.value else b
    if a is b:
        return a
    if c.op == "not":
        return ite(c.args[0], b, a)
    if a.width == 1 and a.is_const and b.is_const:
        return c if a.value else not_(c)
    if a.width == 1:
        if a.is_const:
            return or_(c, b) if a.value else and_(not_(c), b)
        if b.is_const:
            return or_(not_(c), a) if b.value else and_(c, a)
    # ite(c, ite(c, x, y), z) == ite(c, x, z)
    if a.op == "ite" and a.args[0] is c:
        return ite(c, a.args[1], b)
    if b.op == "ite" and b.args[0] is c:
        return ite(c, a, b.args[2])
    return _mk("ite", a.width, (c, a, b))


def extract(a: SExpr, lo: int, width: int) -> SExpr:
    """Bits ``lo .. lo+width-1`` of ``a``."""
    if lo < 0 or width < 1 or lo + width > a.width:
        raise ValueError(f"extract [{lo}+{width}] from {a.width} bits")
    if lo == 0 and width == a.width:
        return a
    if a.is_const:
        return const(a.value >> lo, width)
    if a.op == "extract":
        return extract(a.args[0], a.attr + lo, width)
    if a.op == "concat":
        pos = 0
        for part in a.args:
            if pos <= lo and lo + width <= pos + part.width:
                return extract(part, lo - pos, width)
            pos += part.width
        # spans several parts: rebuild from the overlapping pieces
        pieces, pos = [], 0
        for part in a.args:
            s, e = max(lo, pos), min(lo + width, pos + part.width)
            if s < e:
                pieces.append(extract(part, s - pos, e - s))
            pos += part.width
        return concat(pieces)
    if a.op in ("zext", "sext") and lo + width <= a.args[0].width:
        return extract(a.args[0], lo, width)
    if a.op == "zext" and lo >= a.args[0].width:
        return const(0, width)
    if a.op == "ite" and (a.args[1].is_const or a.args[2].is_const or
                          a.args[1].op in ("concat", "ite") or a.args[2].op in ("concat", "ite")):
        return ite(a.args[0], extract(a.args[1], lo, width), extract(a.args[2], lo, width))
    return _mk("extract", width, (a,), lo)


def concat(parts) -> SExpr:
    """Concatenate ``parts`` listed from least to most significant."""
    flat = []
    for p in parts:
        if p.op == "concat":
            flat.extend(p.args)
        else:
            flat.append(p)
    merged = []
    for p in flat:
        if merged:
            q = merged[-1]
            if p.is_const and q.is_const:
                merged[-1] = const(q.value | (p.value << q.width), q.width + p.width)
                continue
            if (p.op == "extract" and q.op == "extract" and p.args[0] is q.args[0]
                    and q.attr + q.width == p.attr):
                merged[-1] = extract(q.args[0], q.attr, q.width + p.width)
                continue
        merged.append(p)
    if len(merged) == 1:
        return merged[0]
    return _mk("concat", sum(p.width for p in merged), tuple(merged))


def zext(a: SExpr, width: int) -> SExpr:
    if width == a.width:
        return a
    if width < a.width:
        return extract(a, 0, width)
    if a.is_const:
        return const(a.value, width)
    return concat([a, const(0, width - a.width)])


def sext(a: SExpr, width: int) -> SExpr:
    if width == a.width:
        return a
    if width < a.width:
        return extract(a, 0, width)
    if a.is_const:
        return const(arith.signed_value(a.value, a.width), width)
    return _mk("sext", width, (a,))


def splice(obj: SExpr, lo: int, v: SExpr) -> SExpr:
    """``obj`` with bits ``lo .. lo+v.width-1`` replaced by ``v``."""
    parts = []
    if lo > 0:
        parts.append(extract(obj, 0, lo))
    parts.append(v)
    hi = lo + v.width
    if hi < obj.width:
        parts.append(extract(obj, hi, obj.width - hi))
    return concat(parts)


def bool_to_byte(b: SExpr) -> SExpr:
    return zext(b, 8)


TRUE = const(1, 1)
FALSE = const(0, 1)


# -- evaluation and printing ----------------------------------------------------------------


def evaluate(e: SExpr, env: dict, inputs: dict | None = None, cache: dict | None = None) -> int:
    """Concrete value of ``e``; ``env`` maps SSA names, ``inputs`` nondet labels."""
    if cache is None:
        cache = {}
    stack = [e]
    while stack:
        n = stack[-1]
        if id(n) in cache:
            stack.pop()
            continue
        pending = [a for a in n.args if id(a) not in cache]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        cache[id(n)] = _eval_node(n, [cache[id(a)] for a in n.args], env, inputs)
    return cache[id(e)]


def _eval_node(n: SExpr, vals, env, inputs) -> int:
    op, w = n.op, n.width
    m = _m(w)
    if op == "const":
        return n.attr
    if op == "var":
        return env[n.attr]
    if op == "nondet":
        return (inputs or {})[n.attr] & m
    if op == "not":
        return ~vals[0] & m
    if op == "neg":
        return -vals[0] & m
    if op in ("and", "or", "xor"):
        a, b = vals
        return a & b if op == "and" else a | b if op == "or" else a ^ b
    if op in ("add", "sub", "mul"):
        a, b = vals
        return (a + b if op == "add" else a - b if op == "sub" else a * b) & m
    if op in ("udiv", "urem", "sdiv", "srem"):
        return arith.divide(vals[0], vals[1], w, op[0] == "s", op.endswith("rem"))
    if op in ("shl", "lshr", "ashr"):
        name = "<<" if op == "shl" else ">>"
        return arith.shift(name, vals[0], vals[1], w, op == "ashr")
    if op == "eq":
        return int(vals[0] == vals[1])
    if op in ("ult", "ule", "slt", "sle"):
        aw = n.args[0].width
        name = "<" if op.endswith("lt") else "<="
        return arith.compare(name, vals[0], vals[1], aw, op[0] == "s")
    if op == "ite":
        return vals[1] if vals[0] else vals[2]
    if op == "extract":
        return (vals[0] >> n.attr) & m
    if op == "concat":
        out, pos = 0, 0
        for a, v in zip(n.args, vals):
            out |= v << pos
            pos += a.width
        return out
    if op == "zext":
        return vals[0]
    if op == "sext":
        return arith.signed_value(vals[0], n.args[0].width) & m
    raise ValueError(f"unknown op {op}")


_INFIX = {"add": "+", "sub": "-", "mul": "*", "and": "&", "or": "|", "xor": "^", "eq": "==",
          "ult": "<u", "ule": "<=u", "slt": "<s", "sle": "<=s", "udiv": "/u", "urem": "%u",
          "sdiv": "/s", "srem": "%s", "shl": "<<", "lshr": ">>u", "ashr": ">>s"}


def format_expr(e: SExpr, depth: int = 0) -> str:
    if e.op == "const":
        return f"{e.attr}:{e.width}"
    if e.op == "var":
        return e.attr
    if e.op == "nondet":
        return f"nondet({e.attr}):{e.width}"
    if depth > 40:
        return "..."
    sub_ = [format_expr(a, depth + 1) for a in e.args]
    if e.op in _INFIX:
        return f"({sub_[0]} {_INFIX[e.op]} {sub_[1]})"
    if e.op == "not":
        return f"~{sub_[0]}"
    if e.op == "neg":
        return f"-{sub_[0]}"
    if e.op == "ite":
        return f"({sub_[0]} ? {sub_[1]} : {sub_[2]})"
    if e.op == "extract":
        return f"{sub_[0]}[{e.attr + e.width - 1}:{e.attr}]"
    if e.op == "concat":
        return "{" + ", ".join(reversed(sub_)) + "}"
    if e.op in ("zext", "sext"):
        return f"{e.op}{e.width}({sub_[0]})"
    return f"{e.op}({', '.join(sub_)})"
