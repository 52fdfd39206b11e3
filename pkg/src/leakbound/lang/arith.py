"""Reference bit-vector arithmetic on unsigned bit patterns.

These functions define the scalar semantics shared by constant folding in the
type checker and by the concrete interpreter; the bit-blaster is tested
against them.  Every operand and result is an unsigned integer holding the
two's-complement bit pattern of the given width.
"""

from __future__ import annotations

from .types import TypeSpec


def mask(width: int) -> int:
    return (1 << width) - 1


def signed_value(v: int, width: int) -> int:
    if v >> (width - 1) & 1:
        return v - (1 << width)
    return v


def convert(v: int, src: TypeSpec, dst: TypeSpec) -> int:
    """Re-interpret the pattern ``v`` of type ``src`` as type ``dst``."""
    if dst.kind == "bool":
        return int(v != 0)
    if src.kind == "bool" or not src.signed:
        return v & mask(dst.width)
    return signed_value(v, src.width) & mask(dst.width)


def divide(a: int, b: int, width: int, signed: bool, rem: bool) -> int:
    """C division (truncating toward zero); x/0 is all ones, x%0 is x."""
    m = mask(width)
    if b == 0:
        return a if rem else m
    if not signed:
        return (a % b) if rem else (a // b)
    sa, sb = signed_value(a, width), signed_value(b, width)
    q = abs(sa) // abs(sb)
    if (sa < 0) != (sb < 0):
        q = -q
    if rem:
        return (sa - q * sb) & m
    return q & m


def binop(op: str, a: int, b: int, width: int, signed: bool) -> int:
    m = mask(width)
    if op == "+":
        return (a + b) & m
    if op == "-":
        return (a - b) & m
    if op == "*":
        return (a * b) & m
    if op == "/":
        return divide(a, b, width, signed, rem=False)
    if op == "%":
        return divide(a, b, width, signed, rem=True)
    if op == "&":
        return a & b
    if op == "|":
        return a | b
    if op == "^":
        return a ^ b
    raise ValueError(op)


def shift(op: str, a: int, amount: int, width: int, signed: bool) -> int:
    """Shift ``a`` by an unsigned ``amount``; amounts >= width flush to 0 or the sign."""
    m = mask(width)
    if op == "<<":
        return (a << amount) & m if amount < width else 0
    if signed and a >> (width - 1) & 1:
        if amount >= width:
            return m
        return (signed_value(a, width) >> amount) & m
    return a >> amount if amount < width else 0


def compare(op: str, a: int, b: int, width: int, signed: bool) -> int:
    if signed:
        a, b = signed_value(a, width), signed_value(b, width)
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    raise ValueError(op)


def unop(op: str, a: int, width: int) -> int:
    if op == "-":
        return -a & mask(width)
    if op == "~":
        return ~a & mask(width)
    if op == "+":
        return a
    if op == "!":
        return int(a == 0)
    raise ValueError(op)
