"""A deterministic CDCL SAT solver.

Two watched literals (with dedicated binary-clause lists), first-UIP clause
learning with local minimization, non-chronological backjumping, a fixed
decision order with phase saving, and optional Luby restarts.  Identical
inputs always produce identical results, including the model.

Literals are DIMACS integers externally; internally literal ``l`` is coded
as ``2*|l| + (l < 0)`` so that negation is ``code ^ 1``.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import LeakboundError

SAT = "SAT"
UNSAT = "UNSAT"
UNKNOWN = "UNKNOWN"

BUDGET_ENV = "LEAKBOUND_SOLVER_BUDGET"


class ModelCheckError(LeakboundError):
    """The solver produced an assignment that violates a clause."""


@dataclass
class SatResult:
    status: str
    model: Optional[list] = None   # model[v] is True/False for v >= 1; index 0 unused
    stats: dict = field(default_factory=dict)

    @property
    def sat(self) -> bool:
        return self.status == SAT

    def value(self, lit: int) -> bool:
        v = self.model[abs(lit)]
        return v if lit > 0 else not v


def default_budget() -> Optional[int]:
    raw = os.environ.get(BUDGET_ENV)
    if raw is None or raw.strip() == "":
        return None
    n = int(raw)
    return n if n > 0 else None


def _luby(i: int) -> int:
    """The i-th element (1-based) of the Luby sequence 1 1 2 1 1 2 4 ..."""
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


class Solver:
    """CDCL search over a fixed clause database.

    The database is built once; :meth:`solve` may be called repeatedly with
    different assumption literals (treated as the first decisions, as in
    MiniSat).  Clauses learned in one call stay valid for the next.
    """

    def __init__(self, nvars: int, clauses: Sequence[Sequence[int]], order: Optional[Sequence[int]] = None,
                 conflict_budget: Optional[int] = None, restarts: bool = False, restart_base: int = 100,
                 check_models: bool = True):
        self.nvars = nvars
        self.input_clauses = clauses
        self.order = list(order) if order is not None else list(range(1, nvars + 1))
        if len(self.order) != nvars or set(self.order) != set(range(1, nvars + 1)):
            raise ValueError("decision order must be a permutation of the variables")
        self.budget = conflict_budget
        self.restarts = restarts
        self.restart_base = restart_base
        self.check_models = check_models
        self.stats = {"decisions": 0, "propagations": 0, "conflicts": 0, "learned": 0, "restarts": 0}
        self._build()

    def _build(self):
        n = self.nvars
        nl = 2 * (n + 1)
        self.val = [0] * nl                 # per literal code: 1 true, -1 false, 0 unassigned
        self.level = [0] * (n + 1)
        self.reason = [-1] * (n + 1)
        self.phase = [False] * (n + 1)      # saved phase; False = negative first
        self.watches = [[] for _ in range(nl)]
        self.bins = [[] for _ in range(nl)]  # bins[c]: (other, clause) for binary clauses containing c
        self.clauses: list[list[int]] = []
        self.trail: list[int] = []
        self.lim: list[int] = []
        self.qhead = 0
        self.pos = [0] * (n + 1)
        for i, v in enumerate(self.order):
            self.pos[v] = i
        self.inconsistent = False           # the clauses alone are unsatisfiable
        self.units: list[int] = []
        clauses, bins, watches = self.clauses, self.bins, self.watches
        for c in self.input_clauses:
            lits = []
            for l in c:
                if l == 0 or abs(l) > n:
                    raise ValueError(f"literal {l} out of range")
                code = 2 * l if l > 0 else -2 * l + 1
                lits.append(code)
            if len(lits) > 1:
                uniq = set(lits)
                if any(x ^ 1 in uniq for x in uniq):
                    continue            # tautology
                if len(uniq) != len(lits):
                    lits = list(dict.fromkeys(lits))
            if not lits:
                self.inconsistent = True
                continue
            if len(lits) == 1:
                self.units.append(lits[0])
                continue
            cr = len(clauses)
            clauses.append(lits)
            if len(lits) == 2:
                bins[lits[0]].append((lits[1], cr))
                bins[lits[1]].append((lits[0], cr))
            else:
                watches[lits[0]].append(cr)
                watches[lits[1]].append(cr)

    # -- main loop --------------------------------------------------------------------

    def solve(self, assumptions: Sequence[int] = ()) -> SatResult:
        """Search for a model in which every assumption literal is true.

        ``UNSAT`` means no such model exists (the clauses alone may still be
        satisfiable when assumptions were given).
        """
        t0 = time.perf_counter()
        for l in assumptions:
            if l == 0 or abs(l) > self.nvars:
                raise ValueError(f"assumption literal {l} out of range")
        res = self._solve([2 * l if l > 0 else -2 * l + 1 for l in assumptions])
        self.stats["time"] = round(time.perf_counter() - t0, 6)
        res.stats = dict(self.stats)
        if res.status == SAT and self.check_models:
            self._self_check(res.model, assumptions)
        return res

    def _self_check(self, model, assumptions=()):
        for c in self.input_clauses:
            if not any(model[abs(l)] == (l > 0) for l in c):
                raise ModelCheckError(f"model violates clause {list(c)}")
        for l in assumptions:
            if model[abs(l)] != (l > 0):
                raise ModelCheckError(f"model violates assumption {l}")

    def _solve(self, assumptions: list) -> SatResult:
        if self.inconsistent:
            return SatResult(UNSAT)
        n = self.nvars
        val, level, reason, phase = self.val, self.level, self.reason, self.phase
        watches, bins, clauses = self.watches, self.bins, self.clauses
        trail, lim, pos = self.trail, self.lim, self.pos
        order = self.order
        stats = self.stats

        def assign(code, cr):
            val[code] = 1
            val[code ^ 1] = -1
            v = code >> 1
            level[v] = len(lim)
            reason[v] = cr
            trail.append(code)

        for u in self.units:
            if val[u] == -1:
                self.inconsistent = True
                return SatResult(UNSAT)
            if val[u] == 0:
                assign(u, -1)
        self.units = []

        qhead = self.qhead

        def propagate():
            nonlocal qhead
            props = 0
            while qhead < len(trail):
                fl = trail[qhead] ^ 1      # the literal that just became false
                qhead += 1
                props += 1
                for other, cr in bins[fl]:
                    vo = val[other]
                    if vo == 1:
                        continue
                    if vo == -1:
                        stats["propagations"] += props
                        return cr
                    assign(other, cr)
                ws = watches[fl]
                i = j = 0
                m = len(ws)
                while i < m:
                    cr = ws[i]
                    c = clauses[cr]
                    if c[0] == fl:
                        c[0] = c[1]
                        c[1] = fl
                    first = c[0]
                    if val[first] == 1:
                        ws[j] = cr
                        j += 1
                        i += 1
                        continue
                    for k in range(2, len(c)):
                        lk = c[k]
                        if val[lk] != -1:
                            c[1] = lk
                            c[k] = fl
                            watches[lk].append(cr)
                            break
                    else:
                        ws[j] = cr
                        j += 1
                        i += 1
                        if val[first] == -1:
                            while i < m:
                                ws[j] = ws[i]
                                j += 1
                                i += 1
                            del ws[j:]
                            stats["propagations"] += props
                            return cr
                        assign(first, cr)
                        continue
                    i += 1
                del ws[j:]
            stats["propagations"] += props
            return -1

        seen = bytearray(n + 1)

        def analyze(confl):
            dl = len(lim)
            learnt = [0]
            path = 0
            p = -1
            idx = len(trail) - 1
            cr = confl
            while True:
                for q in clauses[cr]:
                    if q == p:
                        continue
                    v = q >> 1
                    if not seen[v] and level[v] > 0:
                        seen[v] = 1
                        if level[v] >= dl:
                            path += 1
                        else:
                            learnt.append(q)
                while not seen[trail[idx] >> 1]:
                    idx -= 1
                p = trail[idx]
                idx -= 1
                v = p >> 1
                seen[v] = 0
                path -= 1
                if path == 0:
                    break
                cr = reason[v]
            learnt[0] = p ^ 1
            # local minimization: drop literals implied by the rest of the clause
            kept = [learnt[0]]
            for q in learnt[1:]:
                r = reason[q >> 1]
                if r == -1:
                    kept.append(q)
                    continue
                for x in clauses[r]:
                    xv = x >> 1
                    if xv != q >> 1 and not seen[xv] and level[xv] > 0:
                        kept.append(q)
                        break
            for q in learnt[1:]:
                seen[q >> 1] = 0
            # backjump level and second watch
            bt = 0
            if len(kept) > 1:
                bi = 1
                for i in range(1, len(kept)):
                    if level[kept[i] >> 1] > level[kept[bi] >> 1]:
                        bi = i
                kept[1], kept[bi] = kept[bi], kept[1]
                bt = level[kept[1] >> 1]
            return kept, bt

        ptr = 0

        def backtrack(lv):
            nonlocal qhead, ptr
            if len(lim) <= lv:
                return
            stop = lim[lv]
            for i in range(len(trail) - 1, stop - 1, -1):
                code = trail[i]
                v = code >> 1
                val[code] = 0
                val[code ^ 1] = 0
                reason[v] = -1
                phase[v] = not (code & 1)
                if pos[v] < ptr:
                    ptr = pos[v]
            del trail[stop:]
            del lim[lv:]
            qhead = len(trail)

        def finish(result):
            backtrack(0)
            self.qhead = qhead
            return result

        if propagate() != -1:
            self.inconsistent = True
            return finish(SatResult(UNSAT))

        budget = None if self.budget is None else stats["conflicts"] + self.budget
        restart_i = 1
        next_restart = self.restart_base * _luby(restart_i) if self.restarts else None
        since_restart = 0
        norder = len(order)
        nassume = len(assumptions)
        while True:
            confl = propagate()
            if confl != -1:
                stats["conflicts"] += 1
                since_restart += 1
                if not lim:
                    self.inconsistent = True
                    return finish(SatResult(UNSAT))
                if budget is not None and stats["conflicts"] > budget:
                    return finish(SatResult(UNKNOWN))
                learnt, bt = analyze(confl)
                backtrack(bt)
                if len(learnt) == 1:
                    assign(learnt[0], -1)
                else:
                    cr = len(clauses)
                    clauses.append(learnt)
                    stats["learned"] += 1
                    if len(learnt) == 2:
                        bins[learnt[0]].append((learnt[1], cr))
                        bins[learnt[1]].append((learnt[0], cr))
                    else:
                        watches[learnt[0]].append(cr)
                        watches[learnt[1]].append(cr)
                    assign(learnt[0], cr)
                continue
            if next_restart is not None and since_restart >= next_restart:
                stats["restarts"] += 1
                restart_i += 1
                next_restart = self.restart_base * _luby(restart_i)
                since_restart = 0
                backtrack(0)
                continue
            if len(lim) < nassume:
                # assumptions occupy the first decision levels
                a = assumptions[len(lim)]
                if val[a] == -1:
                    return finish(SatResult(UNSAT))
                lim.append(len(trail))
                if val[a] == 0:
                    assign(a, -1)
                continue
            while ptr < norder and val[2 * order[ptr]] != 0:
                ptr += 1
            if ptr == norder:
                model = [False] * (n + 1)
                for v in range(1, n + 1):
                    model[v] = val[2 * v] == 1
                return finish(SatResult(SAT, model))
            v = order[ptr]
            stats["decisions"] += 1
            lim.append(len(trail))
            assign(2 * v + (0 if phase[v] else 1), -1)


def solve(cnf, conflict_budget: Optional[int] = None, restarts: bool = False) -> SatResult:
    """Solve a :class:`~leakbound.bitblast.CnfInstance` (or ``(nvars, clauses)`` pair).

    The conflict budget defaults to ``$LEAKBOUND_SOLVER_BUDGET`` (unlimited
    when unset); exhausting it yields an ``UNKNOWN`` result.
    """
    if conflict_budget is None:
        conflict_budget = default_budget()
    if isinstance(cnf, tuple):
        nvars, clauses = cnf
        order = None
    else:
        nvars, clauses = cnf.variable_count, cnf.clauses
        order = cnf.decision_order()
    return Solver(nvars, clauses, order, conflict_budget, restarts).solve()
