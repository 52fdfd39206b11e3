"""Bit-blasting SSA programs into CNF.

Gates are Tseitin-encoded with constant folding and structural hashing, so
identical sub-circuits (common across the self-composed copies) are built
once.  Literal ``1`` is the constant true (fixed by a unit clause) and ``-1``
the constant false.

The instance for a query is the circuit's definitional clauses (the ``C``
part) followed by goal clauses (the negated property); ``partition`` records
where the goal clauses start.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import EncodeError
from .ssa.expr import SExpr
from .ssa.program import ASSUME, PROPERTY, UNWIND, Assignment, Obligation, SsaProgram

T = 1
F = -1


class Circuit:
    """A growing set of definitional clauses with hashed gates."""

    def __init__(self):
        self.nvars = 1
        self.clauses: list[list[int]] = [[T]]
        self._and: dict = {}
        self._xor: dict = {}
        self._ite: dict = {}
        self._maj: dict = {}

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def new_vars(self, n: int) -> list[int]:
        start = self.nvars + 1
        self.nvars += n
        return list(range(start, start + n))

    # -- gates ----------------------------------------------------------------------

    def AND(self, a: int, b: int) -> int:
        if a == F or b == F or a == -b:
            return F
        if a == T or a == b:
            return b
        if b == T:
            return a
        if a > b:
            a, b = b, a
        key = (a, b)
        v = self._and.get(key)
        if v is None:
            v = self.new_var()
            self.clauses += ([-v, a], [-v, b], [v, -a, -b])
            self._and[key] = v
        return v

    def OR(self, a: int, b: int) -> int:
        return -self.AND(-a, -b)

    def XOR(self, a: int, b: int) -> int:
        if a == F:
            return b
        if b == F:
            return a
        if a == T:
            return -b
        if b == T:
            return -a
        if a == b:
            return F
        if a == -b:
            return T
        sign = 1
        if a < 0:
            a, sign = -a, -sign
        if b < 0:
            b, sign = -b, -sign
        if a > b:
            a, b = b, a
        key = (a, b)
        v = self._xor.get(key)
        if v is None:
            v = self.new_var()
            self.clauses += ([-v, a, b], [-v, -a, -b], [v, -a, b], [v, a, -b])
            self._xor[key] = v
        return v * sign

    def ITE(self, c: int, t: int, e: int) -> int:
        if c == T:
            return t
        if c == F:
            return e
        if t == e:
            return t
        if c < 0:
            c, t, e = -c, e, t
        if t == T or t == c:
            return self.OR(c, e)
        if t == F or t == -c:
            return self.AND(-c, e)
        if e == F or e == c:
            return self.AND(c, t)
        if e == T or e == -c:
            return self.OR(-c, t)
        if t == -e:
            return -self.XOR(c, t)
        return self._ite_gate(c, t, e)

    def _ite_gate(self, c, t, e):
        key = (c, t, e)
        v = self._ite.get(key)
        if v is None:
            nkey = (c, -t, -e)
            w = self._ite.get(nkey)
            if w is not None:
                return -w
            v = self.new_var()
            self.clauses += ([-c, -t, v], [-c, t, -v], [c, -e, v], [c, e, -v], [-t, -e, v], [t, e, -v])
            self._ite[key] = v
        return v

    def MAJ(self, a: int, b: int, c: int) -> int:
        for x, y, z in ((a, b, c), (a, c, b), (b, c, a)):
            if z == T:
                return self.OR(x, y)
            if z == F:
                return self.AND(x, y)
            if x == y:
                return x
            if x == -y:
                return z
        a, b, c = sorted((a, b, c))
        key = (a, b, c)
        v = self._maj.get(key)
        if v is None:
            w = self._maj.get((-c, -b, -a))
            if w is not None:
                return -w
            v = self.new_var()
            self.clauses += ([-a, -b, v], [-a, -c, v], [-b, -c, v], [a, b, -v], [a, c, -v], [b, c, -v])
            self._maj[key] = v
        return v

    def and_all(self, lits) -> int:
        lits = list(lits)
        if not lits:
            return T
        while len(lits) > 1:
            nxt = [self.AND(lits[i], lits[i + 1]) for i in range(0, len(lits) - 1, 2)]
            if len(lits) % 2:
                nxt.append(lits[-1])
            lits = nxt
        return lits[0]

    def or_all(self, lits) -> int:
        return -self.and_all(-x for x in lits)

    # -- bit-vectors (lists of literals, least significant first) -----------------------

    @staticmethod
    def const(value: int, width: int) -> list[int]:
        return [T if (value >> i) & 1 else F for i in range(width)]

    def add(self, a, b, cin=F):
        out, c = [], cin
        for x, y in zip(a, b):
            out.append(self.XOR(self.XOR(x, y), c))
            c = self.MAJ(x, y, c)
        return out

    def sub(self, a, b):
        return self.add(a, [-y for y in b], T)

    def neg(self, a):
        return self.sub([F] * len(a), a)

    def mul(self, a, b):
        w = len(a)
        if sum(1 for x in a if x in (T, F)) > sum(1 for x in b if x in (T, F)):
            a, b = b, a
        acc = [F] * w
        for i, bit in enumerate(b):
            if bit == F:
                continue
            partial = [F] * i + [self.AND(x, bit) for x in a[:w - i]]
            acc = self.add(acc, partial)
        return acc

    def eq(self, a, b) -> int:
        return self.and_all(-self.XOR(x, y) for x, y in zip(a, b))

    def ult(self, a, b) -> int:
        """a < b (unsigned): no carry out of a + ~b + 1."""
        c = T
        for x, y in zip(a, b):
            c = self.MAJ(x, -y, c)
        return -c

    def slt(self, a, b) -> int:
        return self.ult(a[:-1] + [-a[-1]], b[:-1] + [-b[-1]])

    def ite(self, c, a, b):
        return [self.ITE(c, x, y) for x, y in zip(a, b)]

    def udivrem(self, a, b):
        """Restoring division; x/0 yields all ones and x%0 yields x."""
        w = len(a)
        if all(x in (T, F) for x in b):
            d = sum(1 << i for i, x in enumerate(b) if x == T)
            if d and d & (d - 1) == 0:
                k = d.bit_length() - 1
                return a[k:] + [F] * k, a[:k] + [F] * (w - k)
        r = [F] * (w + 1)
        bx = list(b) + [F]
        q = [F] * w
        for i in range(w - 1, -1, -1):
            r = [a[i]] + r[:w]
            ge = -self.ult(r, bx)
            diff = self.sub(r, bx)
            r = self.ite(ge, diff, r)
            q[i] = ge
        return q, r[:w]

    def sdivrem(self, a, b):
        w = len(a)
        sa, sb = a[-1], b[-1]
        ua = self.ite(sa, self.neg(a), a)
        ub = self.ite(sb, self.neg(b), b)
        q, r = self.udivrem(ua, ub)
        qs = self.XOR(sa, sb)
        q = self.ite(qs, self.neg(q), q)
        r = self.ite(sa, self.neg(r), r)
        zero = self.eq(b, [F] * w)
        return self.ite(zero, [T] * w, q), self.ite(zero, a, r)

    def shift(self, kind: str, a, amount):
        w = len(a)
        fill = a[-1] if kind == "ashr" else F
        stages = 0
        while (1 << stages) < w:
            stages += 1
        cur = list(a)
        for j in range(min(stages, len(amount))):
            s = 1 << j
            bit = amount[j]
            if kind == "shl":
                shifted = [F] * s + cur[:w - s]
            else:
                shifted = cur[s:] + [fill] * s
            cur = self.ite(bit, shifted, cur)
        # amounts >= w flush the value
        wa = len(amount)
        if wa > stages or (1 << stages) != w:
            limit = self.const(w - 1, max(wa, (w - 1).bit_length()))
            amt = list(amount) + [F] * (len(limit) - wa)
            over = self.ult(limit, amt)
            cur = self.ite(over, [fill] * w, cur)
        return cur


@dataclass
class CnfInstance:
    variable_count: int
    clauses: list
    varmap: dict = field(default_factory=dict)   # SSA name -> list of literals (LSB first)
    partition: int = 0                           # clauses[:partition] encode C, the rest the goal
    inputs: dict = field(default_factory=dict)   # input label -> list of variables
    goal: str = ""

    @property
    def constraint_clauses(self) -> list:
        return self.clauses[:self.partition]

    @property
    def goal_clauses(self) -> list:
        return self.clauses[self.partition:]

    def decision_order(self) -> list[int]:
        """Input variables first, then the rest; ascending within each group."""
        ins = sorted({v for vs in self.inputs.values() for v in vs})
        seen = set(ins)
        return ins + [v for v in range(1, self.variable_count + 1) if v not in seen]

    @property
    def stats(self) -> dict:
        return {"variables": self.variable_count, "clauses": len(self.clauses)}


class Encoder:
    """Bit-blasts an :class:`SsaProgram`; goals are added per query."""

    def __init__(self, ssa: SsaProgram, circuit: Optional[Circuit] = None):
        self.ssa = ssa
        self.c = circuit or Circuit()
        self.bits: dict = {}        # SSA name -> literals
        self.inputs: dict = {}      # nondet label -> variables
        self._memo: dict = {}
        self._keep: list = []       # keeps memoized nodes alive (ids stay unique)
        self.obligations: list = []  # (Obligation, holds literal)
        for st in ssa.steps:
            if isinstance(st, Assignment):
                self.bits[st.name] = self.enc(st.expr)
            elif isinstance(st, Obligation):
                g = self.enc(st.guard)[0]
                cond = self.enc(st.cond)[0]
                if st.kind == UNWIND:
                    cond = -cond
                self.obligations.append((st, self.c.OR(-g, cond)))

    # -- expressions ------------------------------------------------------------------

    def enc(self, e: SExpr) -> list[int]:
        memo = self._memo
        r = memo.get(id(e))
        if r is not None:
            return r
        stack = [e]
        while stack:
            n = stack[-1]
            if id(n) in memo:
                stack.pop()
                continue
            pending = [a for a in n.args if id(a) not in memo]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            memo[id(n)] = self._node(n, [memo[id(a)] for a in n.args])
            self._keep.append(n)
        return memo[id(e)]

    def _node(self, n: SExpr, args) -> list[int]:
        c, op, w = self.c, n.op, n.width
        if op == "const":
            return c.const(n.attr, w)
        if op == "var":
            try:
                return self.bits[n.attr]
            except KeyError:
                raise EncodeError(f"use of undefined SSA name {n.attr}") from None
        if op == "nondet":
            vs = self.inputs.get(n.attr)
            if vs is None:
                vs = self.inputs[n.attr] = c.new_vars(w)
            return vs
        if op == "not":
            return [-x for x in args[0]]
        if op == "neg":
            return c.neg(args[0])
        if op == "and":
            return [c.AND(x, y) for x, y in zip(*args)]
        if op == "or":
            return [c.OR(x, y) for x, y in zip(*args)]
        if op == "xor":
            return [c.XOR(x, y) for x, y in zip(*args)]
        if op == "add":
            return c.add(*args)
        if op == "sub":
            return c.sub(*args)
        if op == "mul":
            return c.mul(*args)
        if op in ("udiv", "urem"):
            q, r = c.udivrem(*args)
            return q if op == "udiv" else r
        if op in ("sdiv", "srem"):
            q, r = c.sdivrem(*args)
            return q if op == "sdiv" else r
        if op in ("shl", "lshr", "ashr"):
            return c.shift(op, args[0], args[1])
        if op == "eq":
            return [c.eq(*args)]
        if op == "ult":
            return [c.ult(*args)]
        if op == "ule":
            return [-c.ult(args[1], args[0])]
        if op == "slt":
            return [c.slt(*args)]
        if op == "sle":
            return [-c.slt(args[1], args[0])]
        if op == "ite":
            return c.ite(args[0][0], args[1], args[2])
        if op == "extract":
            return args[0][n.attr:n.attr + w]
        if op == "concat":
            out = []
            for a in args:
                out.extend(a)
            return out
        if op == "zext":
            return args[0] + [F] * (w - len(args[0]))
        if op == "sext":
            return args[0] + [args[0][-1]] * (w - len(args[0]))
        raise EncodeError(f"unsupported operator {op}")

    # -- goals ---------------------------------------------------------------------------

    def violation(self, claims: tuple, assumptions: tuple) -> int:
        """Literal true iff some claim fails after all earlier assumptions held."""
        prefix = T
        bad = []
        for st, holds in self.obligations:
            if st.kind in claims:
                bad.append(self.c.AND(prefix, -holds))
            if st.kind in assumptions:
                prefix = self.c.AND(prefix, holds)
        return self.c.or_all(bad)

    def assumptions_hold(self, kinds: tuple) -> int:
        return self.c.and_all(h for st, h in self.obligations if st.kind in kinds)

    def instance(self, goal_units: list[int], goal: str = "") -> CnfInstance:
        part = len(self.c.clauses)
        clauses = list(self.c.clauses) + [[u] for u in goal_units]
        return CnfInstance(self.c.nvars, clauses, dict(self.bits), part, dict(self.inputs), goal)

    # standard queries

    def policy_instance(self, assume_unwinding: bool = True) -> CnfInstance:
        """C with: some driver claim fails (executions beyond the bound cut off)."""
        kinds = (ASSUME, UNWIND) if assume_unwinding else (ASSUME,)
        return self.instance([self.violation((PROPERTY,), kinds)], "policy")

    def unwinding_instance(self) -> CnfInstance:
        """C with: some unwinding assertion fails."""
        return self.instance([self.violation((UNWIND,), (ASSUME,))], "unwinding")

    def assumptions_instance(self) -> CnfInstance:
        """C with: every assumption (including unwinding ones) holds."""
        return self.instance([self.assumptions_hold((ASSUME, UNWIND))], "assumptions")

    def value_of(self, name: str, model) -> int:
        return lits_value(self.bits[name], model)


def lits_value(lits, model) -> int:
    """Integer value of a literal list under ``model`` (``model[v]`` is a bool)."""
    out = 0
    for i, lit in enumerate(lits):
        v = model[abs(lit)]
        if (lit > 0) == bool(v):
            out |= 1 << i
    return out


def encode(ssa: SsaProgram, goal: str = "policy", assume_unwinding: bool = True) -> CnfInstance:
    """CNF for ``ssa`` conjoined with the requested goal.

    ``goal`` is ``policy`` (C and the negated driver property), ``unwinding``
    (C and a failing unwinding assertion), ``assumptions`` (C and all
    assumptions) or ``none`` (C alone).
    """
    enc = Encoder(ssa)
    if goal == "policy":
        return enc.policy_instance(assume_unwinding)
    if goal == "unwinding":
        return enc.unwinding_instance()
    if goal == "assumptions":
        return enc.assumptions_instance()
    if goal == "none":
        return enc.instance([], "none")
    raise ValueError(f"unknown goal {goal!r}")
