"""Minimal SMT-LIB s-expression reader and writer.

Atoms come back as :class:`Symbol` (a ``str`` subclass) or ``int`` for
numerals; lists come back as :class:`SList`. Both remember the line and
column they started on so callers can report precise errors.
"""

from __future__ import annotations


class SexprError(ValueError):
    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(f"{message}{where}")


class Symbol(str):
    line: int = 0
    col: int = 0

    def __new__(cls, text, line=0, col=0):
        obj = super().__new__(cls, text)
        obj.line = line
        obj.col = col
        return obj


class SList(list):
    line: int = 0
    col: int = 0

    def __init__(self, items=(), line=0, col=0):
        super().__init__(items)
        self.line = line
        self.col = col


class String(str):
    """A ``"..."`` literal (only ever produced by solver output)."""


_DELIMS = set("()\"; \t\r\n|")


def _tokenize(text):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line, col = line + 1, 1
            i += 1
        elif c.isspace():
            i += 1
            col += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c, line, col
            i += 1
            col += 1
        elif c == '"':
            j = i + 1
            buf = []
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        buf.append('"')
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            if j >= n:
                raise SexprError("unterminated string literal", line, col)
            yield String("".join(buf)), line, col
            consumed = text[i : j + 1]
            line += consumed.count("\n")
            col = col + len(consumed) if "\n" not in consumed else len(consumed) - consumed.rfind("\n")
            i = j + 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SexprError("unterminated quoted symbol", line, col)
            yield Symbol(text[i : j + 1], line, col), line, col
            col += j + 1 - i
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in _DELIMS:
                j += 1
            yield text[i:j], line, col
            col += j - i
            i = j


def _atom(tok, line, col):
    if isinstance(tok, (String, Symbol)):
        return tok
    if tok.isdigit():
        return int(tok)
    return Symbol(tok, line, col)


def parse_all(text: str) -> list:
    """Parse every top-level s-expression in ``text``."""
    stack = [SList()]
    for tok, line, col in _tokenize(text):
        if tok == "(" and not isinstance(tok, (String, Symbol)):
            stack.append(SList(line=line, col=col))
        elif tok == ")" and not isinstance(tok, (String, Symbol)):
            if len(stack) == 1:
                raise SexprError("unbalanced ')'", line, col)
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(_atom(tok, line, col))
    if len(stack) != 1:
        opened = stack[-1]
        raise SexprError("unclosed '('", opened.line, opened.col)
    return list(stack[0])


def parse_one(text: str):
    items = parse_all(text)
    if not items:
        raise SexprError("empty expression", 1, 1)
    if len(items) > 1:
        extra = items[1]
        raise SexprError("trailing input after expression", getattr(extra, "line", None), getattr(extra, "col", None))
    return items[0]


def dumps(expr) -> str:
    if isinstance(expr, list):
        return "(" + " ".join(dumps(e) for e in expr) + ")"
    if isinstance(expr, String):
        return '"' + expr.replace('"', '""') + '"'
    if isinstance(expr, bool):
        return "true" if expr else "false"
    return str(expr)
