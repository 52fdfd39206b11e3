"""DIMACS CNF export and import."""

from __future__ import annotations

import io
from typing import Optional, TextIO

from .errors import LeakboundError


def export_dimacs(cnf, sink: Optional[TextIO] = None, with_map: bool = True) -> str:
    """Render ``cnf`` as DIMACS text, writing it to ``sink`` when given.

    The variable map precedes the header as ``c map <name>[<bit>] <literal>``
    comment lines; the literal may be negative (an inverted gate output).
    """
    out = io.StringIO()
    if with_map:
        for name, lits in getattr(cnf, "varmap", {}).items():
            for i, lit in enumerate(lits):
                out.write(f"c map {name}[{i}] {lit}\n")
    out.write(f"p cnf {cnf.variable_count} {len(cnf.clauses)}\n")
    for c in cnf.clauses:
        out.write(" ".join(map(str, c)))
        out.write(" 0\n" if c else "0\n")
    text = out.getvalue()
    if sink is not None:
        try:
            sink.write(text)
        except OSError as exc:
            raise LeakboundError(f"cannot write DIMACS output: {exc}") from exc
    return text


def parse_dimacs(text: str) -> tuple[int, list[list[int]]]:
    """``(variable_count, clauses)`` from DIMACS text; comment lines are skipped."""
    nvars, nclauses = None, None
    clauses, cur = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise LeakboundError(f"bad DIMACS header: {line!r}")
            nvars, nclauses = int(parts[2]), int(parts[3])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(lit)
    if cur:
        clauses.append(cur)
    if nvars is None:
        raise LeakboundError("missing 'p cnf' header")
    if len(clauses) != nclauses:
        raise LeakboundError(f"header announces {nclauses} clauses, found {len(clauses)}")
    return nvars, clauses
