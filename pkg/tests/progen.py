"""Random mini-C programs for differential tests.

Programs use scalar parameters of mixed widths, an optional ``u8 *out``
result pointer, uninitialized locals, ``input()``, branches, bounded loops,
a helper function and the full operator set.  Every generated program is
loop-bounded by construction (at most ``MAX_TRIPS`` iterations per loop).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

SCALARS = ["u8", "s8", "u16", "s16", "int", "unsigned int", "_Bool"]
ARITH = ["+", "-", "&", "|", "^", "<<", ">>"]
HEAVY = ["*", "/", "%"]         # large circuits: drawn less often
COMPARE = ["==", "!=", "<", "<=", ">", ">="]
MAX_TRIPS = 3


@dataclass
class GenProgram:
    text: str
    entry: str
    params: list                    # (name, type text)
    has_out: bool
    uses_input: bool = False
    notes: list = field(default_factory=list)


class _Gen:
    def __init__(self, rng: random.Random, heavy: float):
        self.rng = rng
        self.heavy = heavy
        self.uses_input = False

    def lit(self) -> str:
        r = self.rng.random()
        if r < 0.5:
            return str(self.rng.randint(0, 9))
        if r < 0.8:
            return str(self.rng.choice([15, 16, 31, 127, 128, 255, 256, 1000, 65535]))
        return str(self.rng.randint(0, 2 ** 31 - 1)) + self.rng.choice(["", "u"])

    def expr(self, names: list, depth: int) -> str:
        rng = self.rng
        if depth <= 0 or rng.random() < 0.25:
            return rng.choice(names) if names and rng.random() < 0.75 else self.lit()
        r = rng.random()
        a = self.expr(names, depth - 1)
        if r < 0.45:
            op = rng.choice(HEAVY) if rng.random() < self.heavy else rng.choice(ARITH)
            b = self.expr(names, depth - 1)
            if op in ("<<", ">>") and rng.random() < 0.7:
                b = str(rng.randint(0, 9))
            if op in ("/", "%"):
                # the type checker insists on a visible non-zero divisor
                if rng.random() < 0.5 or not names:
                    return f"({a} {op} {rng.randint(1, 9)})"
                d = rng.choice(names)
                return f"({d} != 0 ? {a} {op} {d} : {self.expr(names, depth - 1)})"
            return f"({a} {op} {b})"
        if r < 0.6:
            return f"({a} {rng.choice(COMPARE)} {self.expr(names, depth - 1)})"
        if r < 0.68:
            return f"({a} {rng.choice(['&&', '||'])} {self.expr(names, depth - 1)})"
        if r < 0.78:
            return f"{rng.choice(['-', '~', '!'])}({a})"
        if r < 0.9:
            return f"(({rng.choice(SCALARS)}) {a})"
        return f"({a} ? {self.expr(names, depth - 1)} : {self.expr(names, depth - 1)})"

    def stmts(self, names: list, depth: int, loop_vars: list, out: bool) -> list[str]:
        rng = self.rng
        lines = []
        for _ in range(rng.randint(1, 4)):
            r = rng.random()
            target = rng.choice(names)
            if r < 0.4:
                lines.append(f"{target} = {self.expr(names, 3)};")
            elif r < 0.5:
                op = rng.choice(["+=", "-=", "*=", "&=", "|=", "^=", ">>=", "<<="])
                rhs = str(rng.randint(0, 5)) if op in (">>=", "<<=") else self.expr(names, 2)
                lines.append(f"{target} {op} {rhs};")
            elif r < 0.55:
                lines.append(f"{target}{rng.choice(['++', '--'])};")
            elif r < 0.62:
                self.uses_input = True
                lines.append(f"{target} = input();")
            elif r < 0.67 and out:
                lines.append(f"*out = {self.expr(names, 2)};")
            elif r < 0.87 and depth > 0:
                cond = self.expr(names, 2)
                then = self.stmts(names, depth - 1, loop_vars, out)
                lines.append(f"if ({cond}) {{")
                lines += ["    " + x for x in then]
                if rng.random() < 0.5:
                    lines.append("} else {")
                    lines += ["    " + x for x in self.stmts(names, depth - 1, loop_vars, out)]
                lines.append("}")
            elif depth > 0 and loop_vars:
                i = loop_vars[0]
                trips = rng.randint(0, MAX_TRIPS)
                inner = [n for n in names if n != i]
                body = self.stmts(inner, depth - 1, loop_vars[1:], out)
                lines.append(f"for ({i} = 0; {i} < {trips}; {i}++) {{")
                lines += ["    " + x for x in body]
                lines.append("}")
            else:
                lines.append(f"{target} = {self.expr(names, 2)};")
        return lines


def generate(seed: int, heavy: float = 0.1) -> GenProgram:
    """A random, loop-bounded program whose entry function is ``f``.

    ``heavy`` is the share of binary arithmetic drawn from ``* / %``.
    """
    rng = random.Random(seed)
    g = _Gen(rng, heavy)
    params = [(f"p{i}", rng.choice(SCALARS)) for i in range(rng.randint(1, 3))]
    has_out = rng.random() < 0.4
    ret = rng.choice(SCALARS)
    locals_ = [(f"v{i}", rng.choice(SCALARS)) for i in range(rng.randint(0, 3))]
    names = [n for n, _ in params] + [n for n, _ in locals_]
    lines = []
    helper = rng.random() < 0.4
    if helper:
        ht = rng.choice(SCALARS)
        lines += [f"{ht} g({ht} a, {ht} b) {{",
                  f"    if ({g.expr(['a', 'b'], 2)}) return {g.expr(['a', 'b'], 2)};",
                  f"    return {g.expr(['a', 'b'], 2)};",
                  "}", ""]
    plist = [f"{t} {n}" for n, t in params] + (["u8 *out"] if has_out else [])
    lines.append(f"{ret} f({', '.join(plist)}) {{")
    for n, t in locals_:
        if rng.random() < 0.7:
            lines.append(f"    {t} {n} = {g.expr([x for x, _ in params], 2)};")
        else:
            lines.append(f"    {t} {n};")
    loop_vars = []
    if rng.random() < 0.5:
        lines.append("    int i0;")
        loop_vars.append("i0")
        if rng.random() < 0.5:
            lines.append("    int i1;")
            loop_vars.append("i1")
    body = g.stmts(names, 2, loop_vars, has_out)
    if helper:
        a, b = rng.choice(names), rng.choice(names)
        body.append(f"{rng.choice(names)} = g({a}, {b});")
    lines += ["    " + x for x in body]
    lines.append(f"    return {g.expr(names, 3)};")
    lines.append("}")
    return GenProgram("\n".join(lines) + "\n", "f", params, has_out, g.uses_input)
