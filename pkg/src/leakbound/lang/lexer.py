from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError

KEYWORDS = {
    "if", "else", "while", "for", "return", "struct", "typedef", "sizeof",
    "void", "char", "short", "int", "long", "signed", "unsigned", "_Bool",
    "const", "volatile", "static", "goto", "union", "break", "continue",
}

# longest first
PUNCTUATORS = [
    "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&",
    "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "(", ")", "[", "]",
    "{", "}", ",", ";", ":", "?", ".", "&", "*", "+", "-", "~", "!", "/", "%",
    "<", ">", "^", "|", "=",
]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<hash>\#[^\n]*)
  | (?P<num>0[xX][0-9a-fA-F]+[uUlL]*|[0-9]+[uUlL]*)
  | (?P<char>'(?:\\.|\\x[0-9a-fA-F]+|[^'\\])')
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>""" + "|".join(re.escape(p) for p in PUNCTUATORS) + r""")
    """,
    re.VERBOSE | re.DOTALL,
)

_ESCAPES = {"n": 10, "t": 9, "r": 13, "0": 0, "\\": 92, "'": 39, '"': 34, "a": 7, "b": 8, "f": 12, "v": 11}


@dataclass
class Token:
    kind: str  # 'id', 'kw', 'num', 'op', 'eof'
    text: str
    line: int
    col: int
    value: int = 0
    suffix: str = ""


def _char_value(lit: str) -> int:
    body = lit[1:-1]
    if body.startswith("\\x"):
        return int(body[2:], 16) & 0xFF
    if body.startswith("\\"):
        if body[1] not in _ESCAPES:
            raise ValueError(body)
        return _ESCAPES[body[1]]
    return ord(body)


def tokenize(text: str, path: str = ""):
    """Split ``text`` into tokens; returns ``(tokens, pragmas)``.

    ``#pragma`` lines are collected as ``(line, text)`` pairs; any other
    preprocessor line is rejected.
    """
    tokens: list[Token] = []
    pragmas: list[tuple[int, str]] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col, path=path)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "bcomment":
            nls = tok.count("\n")
            if nls:
                line += nls
                line_start = pos + tok.rfind("\n") + 1
        elif kind == "hash":
            words = tok[1:].split(None, 1)
            if not words or words[0] != "pragma":
                raise ParseError("preprocessor directives are not supported", line, col, path=path)
            pragmas.append((line, tok.strip()))
        elif kind == "num":
            digits = tok.rstrip("uUlL")
            suffix = tok[len(digits):].lower()
            if suffix not in ("", "u", "l", "ul", "lu", "ll", "ull", "llu"):
                raise ParseError(f"bad integer suffix in {tok}", line, col, path=path)
            if digits.startswith(("0x", "0X")):
                value = int(digits, 16)
            elif len(digits) > 1 and digits.startswith("0"):
                value = int(digits, 8)
            else:
                value = int(digits)
            suffix = "u" * ("u" in suffix) + "l" * suffix.count("l")
            tokens.append(Token("num", tok, line, col, value, suffix))
        elif kind == "char":
            try:
                value = _char_value(tok)
            except ValueError:
                raise ParseError(f"bad character literal {tok}", line, col, path=path) from None
            tokens.append(Token("num", tok, line, col, value, ""))
        elif kind == "id":
            tokens.append(Token("kw" if tok in KEYWORDS else "id", tok, line, col))
        elif kind == "punct":
            tokens.append(Token("op", tok, line, col))
        pos = m.end()
    tokens.append(Token("eof", "<end of input>", line, pos - line_start + 1))
    return tokens, pragmas
