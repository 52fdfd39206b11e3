"""Pretty-printer producing re-parseable source text."""

from __future__ import annotations

from . import ast as A

_PREC = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "==": 6, "!=": 6, "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8, "+": 9, "-": 9, "*": 10, "/": 10, "%": 10,
}
_UNARY_PREC = 11
_POSTFIX_PREC = 12
_ATOM_PREC = 13


def _prec(e) -> int:
    if isinstance(e, A.Cast) and e.implicit:
        return _prec(e.expr)
    if isinstance(e, A.Cond):
        return 0
    if isinstance(e, A.Binary):
        return _PREC[e.op]
    if isinstance(e, (A.Unary, A.Cast, A.SizeOf)):
        return _UNARY_PREC
    if isinstance(e, (A.Member, A.Index, A.Call)):
        return _POSTFIX_PREC
    if isinstance(e, A.IntLit) and e.value < 0:
        return _UNARY_PREC
    return _ATOM_PREC


def format_type(t: A.TypeName, name: str = "") -> str:
    s = t.base
    if t.pointers:
        s += " " + "*" * t.pointers
        if name:
            s += name
    elif name:
        s += " " + name
    for d in t.dims:
        s += f"[{format_expr(d)}]"
    return s


def format_expr(e) -> str:
    if isinstance(e, A.IntLit):
        suffix = e.suffix.upper()
        return f"{e.value}{suffix}"
    if isinstance(e, A.Name):
        return e.id
    if isinstance(e, A.ZeroInit):
        return "{0}"
    if isinstance(e, A.Cast):
        if e.implicit:
            return format_expr(e.expr)
        return f"({format_type(e.to)}){_wrap(e.expr, _UNARY_PREC)}"
    if isinstance(e, A.SizeOf):
        if isinstance(e.target, A.TypeName):
            return f"sizeof({format_type(e.target)})"
        return f"sizeof({format_expr(e.target)})"
    if isinstance(e, A.Unary):
        inner = _wrap(e.operand, _UNARY_PREC)
        if inner[:1] == e.op[-1:] and e.op in ("-", "+", "&"):
            inner = " " + inner
        return e.op + inner
    if isinstance(e, A.Binary):
        p = _PREC[e.op]
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
    if isinstance(e, A.Cond):
        return f"{_wrap(e.cond, 1)} ? {format_expr(e.then)} : {format_expr(e.other)}"
    if isinstance(e, A.Member):
        return f"{_wrap(e.base, _POSTFIX_PREC)}{'->' if e.arrow else '.'}{e.field}"
    if isinstance(e, A.Index):
        return f"{_wrap(e.base, _POSTFIX_PREC)}[{format_expr(e.index)}]"
    if isinstance(e, A.Call):
        return f"{e.func}({', '.join(format_expr(a) for a in e.args)})"
    raise TypeError(f"cannot print {type(e).__name__}")


def _wrap(e, min_prec: int) -> str:
    s = format_expr(e)
    if _prec(e) < min_prec:
        return f"({s})"
    return s


def _simple(s) -> str:
    """Statement text without the trailing semicolon (for-loop headers)."""
    if isinstance(s, A.Assign):
        return f"{format_expr(s.target)} = {format_expr(s.value)}"
    if isinstance(s, A.ExprStmt):
        return format_expr(s.expr)
    if isinstance(s, A.Decl):
        init = "" if s.init is None else f" = {format_expr(s.init)}"
        return f"{format_type(s.type, s.name)}{init}"
    raise TypeError(f"cannot print {type(s).__name__} inline")


def format_stmt(s, indent: int = 0) -> list[str]:
    pad = "    " * indent
    if isinstance(s, A.Block):
        lines = [pad + "{"]
        for st in s.stmts:
            lines.extend(format_stmt(st, indent + 1))
        lines.append(pad + "}")
        return lines
    if isinstance(s, (A.Assign, A.ExprStmt, A.Decl)):
        return [pad + _simple(s) + ";"]
    if isinstance(s, A.Return):
        if s.value is None:
            return [pad + "return;"]
        return [pad + f"return {format_expr(s.value)};"]
    if isinstance(s, A.If):
        lines = [pad + f"if ({format_expr(s.cond)})"]
        lines.extend(_branch(s.then, indent))
        if s.other is not None:
            lines.append(pad + "else")
            lines.extend(_branch(s.other, indent))
        return lines
    if isinstance(s, A.While):
        return [pad + f"while ({format_expr(s.cond)})"] + _branch(s.body, indent)
    if isinstance(s, A.For):
        init = "" if s.init is None else _simple(s.init)
        cond = "" if s.cond is None else format_expr(s.cond)
        step = "" if s.step is None else _simple(s.step)
        return [pad + f"for ({init}; {cond}; {step})"] + _branch(s.body, indent)
    if isinstance(s, A.UnwindCheck):
        return [pad + f"__unwind_check({format_expr(s.cond)});"]
    raise TypeError(f"cannot print {type(s).__name__}")


def _branch(s, indent):
    if isinstance(s, A.Block):
        return format_stmt(s, indent)
    return format_stmt(s, indent + 1)


def format_item(item) -> list[str]:
    if isinstance(item, A.StructDef):
        lines = [f"struct {item.name} {{"]
        for tn, name in item.fields:
            lines.append(f"    {format_type(tn, name)};")
        lines.append("};")
        return lines
    if isinstance(item, A.Typedef):
        return [f"typedef {format_type(item.type, item.name)};"]
    if isinstance(item, A.FunctionDef):
        params = ", ".join(format_type(p.type, p.name) for p in item.params)
        return [f"{format_type(item.ret, item.name)}({params})"] + format_stmt(item.body)
    raise TypeError(f"cannot print {type(item).__name__}")


def pretty(ast: A.Ast, pragmas=()) -> str:
    """Render a whole program; ``pragmas`` are emitted first, verbatim."""
    lines = [p if isinstance(p, str) else p[1] for p in pragmas]
    if lines:
        lines.append("")
    for i, item in enumerate(ast.items):
        if i:
            lines.append("")
        lines.extend(format_item(item))
    return "\n".join(lines) + "\n"
