"""Recursive-descent parser for the C dialect (``*.mc`` files)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ParseError
from . import ast as A
from .lexer import Token, tokenize

# surface names that need no typedef in the source
BUILTIN_TYPE_NAMES = {
    "size_t", "loff_t", "u_char", "bool",
    "u8", "u16", "u32", "u64", "s8", "s16", "s32", "s64",
    "uint8_t", "uint16_t", "uint32_t", "uint64_t",
    "int8_t", "int16_t", "int32_t", "int64_t",
}

_IGNORED_QUALIFIERS = {"const", "volatile", "static", "__user"}
_BASIC = {"void", "char", "short", "int", "long", "signed", "unsigned", "_Bool"}

_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]

_COMPOUND = {"+=": "+", "-=": "-", "*=": "*", "/=": "/", "%=": "%", "&=": "&",
             "|=": "|", "^=": "^", "<<=": "<<", ">>=": ">>"}


@dataclass
class SourceUnit:
    path: str
    text: str
    pragmas: list = field(default_factory=list)  # [(line, text)]

    @classmethod
    def from_file(cls, path) -> "SourceUnit":
        p = Path(path)
        return cls(str(p), p.read_text(encoding="utf-8"))

    @classmethod
    def from_text(cls, text: str, path: str = "<input>") -> "SourceUnit":
        return cls(path, text)


def _canonical_basic(words: list[str], tok: Token, path: str) -> str:
    unsigned = "unsigned" in words
    signed = "signed" in words
    if unsigned and signed:
        raise ParseError("both signed and unsigned", tok.line, tok.col, path=path)
    rest = [w for w in words if w not in ("signed", "unsigned")]
    longs = rest.count("long")
    rest = [w for w in rest if w != "long"]
    if "int" in rest and (longs or "short" in rest):
        rest.remove("int")
    if len(rest) > 1 or longs > 2 or (longs and rest):
        raise ParseError(f"invalid type specifier '{' '.join(words)}'", tok.line, tok.col, path=path)
    base = rest[0] if rest else ("long" if longs == 1 else "long long" if longs == 2 else "int")
    if base in ("void", "_Bool") and (signed or unsigned):
        raise ParseError(f"invalid type specifier '{' '.join(words)}'", tok.line, tok.col, path=path)
    if unsigned:
        return "unsigned " + base
    if signed and base == "char":
        return "signed char"
    return base


class Parser:
    def __init__(self, source: SourceUnit):
        self.source = source
        self.path = source.path
        self.tokens, pragmas = tokenize(source.text, source.path)
        source.pragmas = pragmas
        self.pos = 0
        self.typedefs = set(BUILTIN_TYPE_NAMES)

    # -- token helpers --------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text in texts

    def error(self, expected, message=None):
        t = self.tok
        if message is None:
            message = "unexpected end of input" if t.kind == "eof" else f"unexpected token '{t.text}'"
        raise ParseError(message, t.line, t.col, expected, path=self.path)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error([text])
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "id":
            self.error(["identifier"])
        return self.advance()

    @staticmethod
    def loc(t: Token):
        return (t.line, t.col)

    # -- types ----------------------------------------------------------------

    def starts_type(self, t: Token | None = None) -> bool:
        t = t or self.tok
        if t.kind == "kw":
            return t.text in _BASIC or t.text in ("struct", "const", "volatile", "static", "union")
        return t.kind == "id" and (t.text in self.typedefs or t.text == "__user")

    def type_specifier(self):
        """Parse a specifier; returns (base name, inline StructDef or None)."""
        start = self.tok
        words: list[str] = []
        base = None
        inline = None
        while True:
            t = self.tok
            if t.text in _IGNORED_QUALIFIERS and t.kind in ("kw", "id"):
                self.advance()
            elif t.kind == "kw" and t.text in _BASIC and base is None:
                words.append(self.advance().text)
            elif t.kind == "kw" and t.text == "union":
                self.error([], "unions are not supported")
            elif t.kind == "kw" and t.text == "struct" and not words and base is None:
                self.advance()
                tag = self.expect_ident()
                base = f"struct {tag.text}"
                if self.at("{"):
                    inline = A.StructDef(tag.text, self.struct_body(), loc=self.loc(tag))
            elif t.kind == "id" and t.text in self.typedefs and not words and base is None:
                base = self.advance().text
            else:
                break
        if words:
            base = _canonical_basic(words, start, self.path)
        if base is None:
            self.error(["type name"])
        return base, inline

    def struct_body(self) -> tuple:
        self.expect("{")
        fields = []
        while not self.at("}"):
            base, inline = self.type_specifier()
            if inline is not None:
                self.error([], "nested struct definitions are not supported")
            while True:
                tn, name = self.declarator(base)
                fields.append((tn, name.text))
                if not self.at(","):
                    break
                self.advance()
            self.expect(";")
        self.expect("}")
        return tuple(fields)

    def declarator(self, base: str):
        ptrs = 0
        while self.at("*"):
            self.advance()
            ptrs += 1
            while self.tok.text in _IGNORED_QUALIFIERS:
                self.advance()
        name = self.expect_ident()
        dims = []
        while self.at("["):
            self.advance()
            dims.append(self.expression())
            self.expect("]")
        return A.TypeName(base, ptrs, tuple(dims)), name

    def type_name(self) -> A.TypeName:
        base, inline = self.type_specifier()
        if inline is not None:
            self.error([], "struct definitions are not allowed here")
        ptrs = 0
        while self.at("*"):
            self.advance()
            ptrs += 1
        dims = []
        while self.at("["):
            self.advance()
            dims.append(self.expression())
            self.expect("]")
        return A.TypeName(base, ptrs, tuple(dims))

    # -- top level ------------------------------------------------------------

    def parse(self) -> A.Ast:
        items = []
        while self.tok.kind != "eof":
            items.extend(self.top_level())
        return A.Ast(items)

    def top_level(self) -> list:
        start = self.tok
        if self.at("typedef"):
            self.advance()
            base, inline = self.type_specifier()
            tn, name = self.declarator(base)
            self.expect(";")
            self.typedefs.add(name.text)
            out = [inline] if inline is not None else []
            out.append(A.Typedef(name.text, tn, loc=self.loc(start)))
            return out
        if not self.starts_type():
            self.error(["type name", "typedef", "struct"])
        base, inline = self.type_specifier()
        if inline is not None:
            self.expect(";")
            return [inline]
        if self.at(";") and base.startswith("struct "):
            self.advance()
            return []
        tn, name = self.declarator(base)
        if not self.at("("):
            self.error(["("], "global variables are not supported")
        params = self.params()
        body = self.block()
        return [A.FunctionDef(tn, name.text, params, body, loc=self.loc(name))]

    def params(self) -> tuple:
        self.expect("(")
        params = []
        if self.at("void") and self.peek().text == ")":
            self.advance()
        while not self.at(")"):
            t = self.tok
            base, inline = self.type_specifier()
            if inline is not None:
                self.error([], "struct definitions are not allowed in parameters")
            tn, name = self.declarator(base)
            params.append(A.Param(tn, name.text, loc=self.loc(t)))
            if not self.at(","):
                break
            self.advance()
        self.expect(")")
        return tuple(params)

    # -- statements -----------------------------------------------------------

    def block(self) -> A.Block:
        start = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error(["}"])
            stmts.extend(self.statement())
        self.expect("}")
        return A.Block(stmts, loc=self.loc(start))

    def statement(self) -> list:
        t = self.tok
        loc = self.loc(t)
        if self.at("{"):
            return [self.block()]
        if self.at(";"):
            self.advance()
            return []
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            then = self.sub_statement()
            other = None
            if self.at("else"):
                self.advance()
                other = self.sub_statement()
            return [A.If(cond, then, other, loc=loc)]
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            return [A.While(cond, self.sub_statement(), loc=loc)]
        if self.at("for"):
            self.advance()
            self.expect("(")
            init = None
            if self.starts_type():
                decls = self.declaration()
                if len(decls) != 1:
                    self.error([], "a for-initializer may declare one variable")
                init = decls[0]
            elif not self.at(";"):
                init = self.simple_statement()
                self.expect(";")
            else:
                self.advance()
            cond = None if self.at(";") else self.expression()
            self.expect(";")
            step = None if self.at(")") else self.simple_statement()
            self.expect(")")
            return [A.For(init, cond, step, self.sub_statement(), loc=loc)]
        if self.at("return"):
            self.advance()
            value = None if self.at(";") else self.expression()
            self.expect(";")
            return [A.Return(value, loc=loc)]
        if self.at("goto", "break", "continue"):
            self.error([], f"'{t.text}' is not supported")
        if self.starts_type() and not (t.kind == "id" and self.peek().text in ("=", "(", "[", ".", "->", ";")):
            return self.declaration()
        s = self.simple_statement()
        self.expect(";")
        return [s]

    def sub_statement(self) -> A.Stmt:
        stmts = self.statement()
        if len(stmts) == 1:
            return stmts[0]
        return A.Block(stmts, loc=self.loc(self.tok))

    def declaration(self) -> list:
        base, inline = self.type_specifier()
        if inline is not None:
            self.error([], "struct definitions are only allowed at top level")
        decls = []
        while True:
            tn, name = self.declarator(base)
            init = None
            if self.at("="):
                self.advance()
                if self.at("{"):
                    brace = self.advance()
                    zero = self.tok
                    if zero.kind != "num" or zero.value != 0:
                        self.error(["0"], "only the {0} initializer is supported")
                    self.advance()
                    self.expect("}")
                    init = A.ZeroInit(loc=self.loc(brace))
                else:
                    init = self.expression()
            decls.append(A.Decl(tn, name.text, init, loc=self.loc(name)))
            if not self.at(","):
                break
            self.advance()
        self.expect(";")
        return decls

    def simple_statement(self) -> A.Stmt:
        t = self.tok
        loc = self.loc(t)
        if self.at("++", "--"):
            op = self.advance().text
            target = self.unary()
            self._check_lvalue(target, t)
            return A.Assign(target, A.Binary(op[0], target, A.IntLit(1, loc=loc), loc=loc), loc=loc)
        expr = self.expression()
        if self.at("="):
            self._check_lvalue(expr, t)
            self.advance()
            return A.Assign(expr, self.expression(), loc=loc)
        if self.tok.kind == "op" and self.tok.text in _COMPOUND:
            self._check_lvalue(expr, t)
            op = _COMPOUND[self.advance().text]
            return A.Assign(expr, A.Binary(op, expr, self.expression(), loc=loc), loc=loc)
        if self.at("++", "--"):
            self._check_lvalue(expr, t)
            op = self.advance().text
            return A.Assign(expr, A.Binary(op[0], expr, A.IntLit(1, loc=loc), loc=loc), loc=loc)
        return A.ExprStmt(expr, loc=loc)

    def _check_lvalue(self, e, t: Token):
        if not isinstance(e, (A.Name, A.Member, A.Index)) and not (isinstance(e, A.Unary) and e.op == "*"):
            raise ParseError("assignment target is not an lvalue", t.line, t.col, path=self.path)

    # -- expressions ----------------------------------------------------------

    def expression(self) -> A.Expr:
        cond = self.binary(0)
        if self.at("?"):
            t = self.advance()
            then = self.expression()
            self.expect(":")
            other = self.expression()
            return A.Cond(cond, then, other, loc=self.loc(t))
        return cond

    def binary(self, level: int) -> A.Expr:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            t = self.advance()
            right = self.binary(level + 1)
            left = A.Binary(t.text, left, right, loc=self.loc(t))
        return left

    def unary(self) -> A.Expr:
        t = self.tok
        loc = self.loc(t)
        if self.at("-", "+", "!", "~", "*", "&"):
            self.advance()
            return A.Unary(t.text, self.unary(), loc=loc)
        if self.at("sizeof"):
            self.advance()
            if self.at("(") and self.starts_type(self.peek()):
                self.advance()
                tn = self.type_name()
                self.expect(")")
                return A.SizeOf(tn, loc=loc)
            return A.SizeOf(self.unary(), loc=loc)
        if self.at("(") and self.starts_type(self.peek()):
            self.advance()
            tn = self.type_name()
            self.expect(")")
            return A.Cast(tn, self.unary(), loc=loc)
        return self.postfix()

    def postfix(self) -> A.Expr:
        e = self.primary()
        while True:
            t = self.tok
            if self.at("["):
                self.advance()
                idx = self.expression()
                self.expect("]")
                e = A.Index(e, idx, loc=self.loc(t))
            elif self.at(".", "->"):
                self.advance()
                name = self.expect_ident()
                e = A.Member(e, name.text, t.text == "->", loc=self.loc(t))
            elif self.at("("):
                if not isinstance(e, A.Name):
                    self.error([], "only named functions can be called")
                self.advance()
                args = []
                while not self.at(")"):
                    args.append(self.expression())
                    if not self.at(","):
                        break
                    self.advance()
                self.expect(")")
                e = A.Call(e.id, tuple(args), loc=e.loc)
            else:
                return e

    def primary(self) -> A.Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return A.IntLit(t.value, t.suffix, loc=self.loc(t))
        if t.kind == "id":
            self.advance()
            return A.Name(t.text, loc=self.loc(t))
        if self.at("("):
            self.advance()
            e = self.expression()
            self.expect(")")
            return e
        self.error(["identifier", "integer", "("])


def parse(source: SourceUnit | str) -> A.Ast:
    """Parse a source unit (or raw text) into an :class:`~leakbound.lang.ast.Ast`.

    Pragma lines are stored back on the source unit.
    """
    if isinstance(source, str):
        source = SourceUnit.from_text(source)
    return Parser(source).parse()


@dataclass(frozen=True)
class Pragma:
    role: str    # 'high', 'low', 'observe' or 'entry'
    target: str
    line: int


PRAGMA_ROLES = ("high", "low", "observe", "entry")


def parse_pragmas(source: SourceUnit) -> list[Pragma]:
    """Decode ``#pragma leak <role> <id>`` lines; other pragmas are ignored.

    Works on parsed and unparsed source units alike.
    """
    out = []
    lines = source.pragmas if source.pragmas else tokenize(source.text, source.path)[1]
    for line, text in lines:
        words = text[1:].split()
        if len(words) < 2 or words[0] != "pragma" or words[1] != "leak":
            continue
        if len(words) != 4 or words[2] not in PRAGMA_ROLES:
            raise ParseError(
                "malformed harness pragma; expected '#pragma leak high|low|observe|entry <identifier>'",
                line, 1, path=source.path,
            )
        out.append(Pragma(words[2], words[3], line))
    return out
