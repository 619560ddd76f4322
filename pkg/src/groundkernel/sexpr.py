"""S-expression reader and writer.

All artifact files (bases, terms, formulas, derivations, extensions) share
one surface syntax: atoms are symbols or integers, lists are parenthesized.
Comments run from ';' to end of line.
"""

from __future__ import annotations


class SexprError(Exception):
    def __init__(self, message: str, pos: int | None = None):
        if pos is not None:
            message = f"{message} (at offset {pos})"
        super().__init__(message)
        self.pos = pos


_DELIMS = "()"


def _skip_ws(s: str, i: int) -> int:
    while i < len(s):
        c = s[i]
        if c == ";":
            while i < len(s) and s[i] != "\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            break
    return i


def _read(s: str, i: int):
    i = _skip_ws(s, i)
    if i >= len(s):
        raise SexprError("unexpected end of input", i)
    if s[i] == "(":
        items = []
        i += 1
        while True:
            i = _skip_ws(s, i)
            if i >= len(s):
                raise SexprError("unbalanced '('", i)
            if s[i] == ")":
                return items, i + 1
            item, i = _read(s, i)
            items.append(item)
    if s[i] == ")":
        raise SexprError("unbalanced ')'", i)
    j = i
    while j < len(s) and not s[j].isspace() and s[j] not in _DELIMS and s[j] != ";":
        j += 1
    tok = s[i:j]
    try:
        return int(tok), j
    except ValueError:
        return tok, j


def read(text: str):
    """Parse one S-expression; trailing non-whitespace is an error."""
    expr, i = _read(text, 0)
    i = _skip_ws(text, i)
    if i != len(text):
        raise SexprError("trailing input after expression", i)
    return expr


def read_all(text: str) -> list:
    """Parse a sequence of S-expressions."""
    out = []
    i = _skip_ws(text, 0)
    while i < len(text):
        expr, i = _read(text, i)
        out.append(expr)
        i = _skip_ws(text, i)
    return out


def write(expr) -> str:
    if isinstance(expr, list | tuple):
        return "(" + " ".join(write(e) for e in expr) + ")"
    return str(expr)
