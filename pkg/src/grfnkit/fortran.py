"""Front-end for a free-form Fortran subset.

Supported: REAL/INTEGER/LOGICAL scalars and arrays, assignments,
IF/ELSE IF/ELSE blocks, DO loops with integer bounds, SUBROUTINE /
FUNCTION / PROGRAM / MODULE units (modules may CONTAIN subprograms),
CALL with positional arguments, USE, the intrinsics listed in
``ir.INTRINSICS``, and list-directed or formatted I/O statements kept
as opaque no-ops. Fixed-form comment markers (``C`` or ``*`` in column
1) are honored; everything else is free-form. Identifiers are
uppercase-normalized.

A line whose column 1 is ``C`` followed by whitespace is always read as
a fixed-form comment, so an assignment to a scalar named ``C`` must be
indented.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from . import ir
from .errors import FortranSyntaxError, UnsupportedFeatureError

_IO_KEYWORDS = frozenset(
    {"READ", "WRITE", "PRINT", "OPEN", "CLOSE", "FORMAT", "REWIND",
     "BACKSPACE", "ENDFILE", "INQUIRE", "FLUSH"}
)

# Recognized so we can reject them with a dedicated error code instead of
# a generic syntax error.
_UNSUPPORTED_KEYWORDS = frozenset(
    {"EQUIVALENCE", "COMMON", "GOTO", "GO", "POINTER", "TARGET",
     "ALLOCATABLE", "ALLOCATE", "DEALLOCATE", "ENTRY", "SELECT", "CASE",
     "WHERE", "FORALL", "INTERFACE", "DATA", "SAVE", "PARAMETER",
     "DIMENSION", "CHARACTER", "COMPLEX", "TYPE", "CYCLE", "EXIT",
     "NAMELIST", "EXTERNAL", "INTRINSIC", "BLOCK", "ASSOCIATE"}
)

_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_NUM_RE = re.compile(r"(?:\d+\.\d*|\.\d+|\d+)(?:[EDed][+-]?\d+)?")
_DOTTED_RE = re.compile(r"\.[A-Za-z]+\.")

# Dotted operators normalized to their symbolic spelling.
_DOTTED_OPS = {
    ".GT.": ">", ".GE.": ">=", ".LT.": "<", ".LE.": "<=",
    ".EQ.": "==", ".NE.": "/=", ".AND.": "AND", ".OR.": "OR", ".NOT.": "NOT",
}

_BINOP_TAGS = {
    "+": "ADD", "-": "SUB", "*": "MUL", "/": "DIV", "**": "POW",
    ">": "GT", ">=": "GE", "<": "LT", "<=": "LE", "==": "EQ", "/=": "NE",
    "AND": "AND", "OR": "OR",
}


# ---------------------------------------------------------------------------
# Line scanning: comments, continuations

@dataclass(frozen=True)
class _CommentLine:
    number: int
    content: str
    inline: bool


@dataclass
class _CodeLine:
    number: int
    text: str


def _is_fixed_comment(line: str) -> bool:
    if not line:
        return False
    if line[0] == "*":
        return True
    if line[0] in "Cc" and (len(line) == 1 or line[1] in " \t"):
        return True
    return False


def _split_inline(line: str) -> tuple[str, str | None]:
    quote: str | None = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "!":
            return line[:i], line[i + 1:].strip()
    return line, None


def _scan(text: str) -> tuple[list[_CodeLine], list[_CommentLine]]:
    code: list[_CodeLine] = []
    comments: list[_CommentLine] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped.startswith("!"):
            comments.append(_CommentLine(number, stripped[1:].strip(), inline=False))
            continue
        if _is_fixed_comment(raw):
            comments.append(_CommentLine(number, raw[1:].strip(), inline=False))
            continue
        body, inline = _split_inline(raw)
        if inline is not None:
            comments.append(_CommentLine(number, inline, inline=True))
        if body.strip():
            code.append(_CodeLine(number, body.strip()))
    return code, comments


def _merge_continuations(code: list[_CodeLine]) -> list[_CodeLine]:
    out: list[_CodeLine] = []
    for line in code:
        if out and out[-1].text.endswith("&"):
            prev = out[-1]
            piece = line.text.lstrip("&").strip()
            prev.text = prev.text[:-1].rstrip() + " " + piece
        else:
            out.append(_CodeLine(line.number, line.text))
    return out


def extract_comments(text: str) -> list[ir.CommentBlock]:
    """Collect every comment in the text into placement-tagged blocks.

    Total function: any text is accepted. Full-line comments on adjacent
    lines form one block; an inline comment is its own block anchored to
    its statement's line.
    """
    code, comments = _scan(text)
    code_numbers = sorted(c.number for c in code)

    blocks: list[ir.CommentBlock] = []
    run: list[_CommentLine] = []

    def flush() -> None:
        if not run:
            return
        last = run[-1].number
        following = next((n for n in code_numbers if n > last), None)
        if following is not None:
            blocks.append(ir.CommentBlock(tuple(c.content for c in run), following, ir.HEADER))
        else:
            preceding = next((n for n in reversed(code_numbers) if n < run[0].number), None)
            anchor = preceding if preceding is not None else run[0].number
            blocks.append(ir.CommentBlock(tuple(c.content for c in run), anchor, ir.TRAILING))
        run.clear()

    for c in comments:
        if c.inline:
            flush()
            blocks.append(ir.CommentBlock((c.content,), c.number, ir.INLINE))
            continue
        if run and c.number != run[-1].number + 1:
            flush()
        run.append(c)
    flush()

    blocks.sort(key=lambda b: (b.anchor, b.placement, b.lines))
    return blocks


# ---------------------------------------------------------------------------
# Tokenizer

@dataclass(frozen=True)
class Token:
    kind: str  # NAME | NUM | OP | LP | RP | COMMA
    text: str
    line: int
    col: int


def _tokenize(line: _CodeLine) -> list[Token]:
    toks: list[Token] = []
    text = line.text
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t":
            i += 1
            continue
        col = i + 1
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUM_RE.match(text, i)
            assert m is not None
            toks.append(Token("NUM", m.group(0), line.number, col))
            i = m.end()
            continue
        if ch == ".":
            m = _DOTTED_RE.match(text, i)
            if m:
                word = m.group(0).upper()
                if word not in _DOTTED_OPS:
                    raise FortranSyntaxError(f"unknown operator {word}", line.number, col)
                toks.append(Token("OP", _DOTTED_OPS[word], line.number, col))
                i = m.end()
                continue
            raise FortranSyntaxError("unexpected '.'", line.number, col)
        if ch.isalpha():
            m = _NAME_RE.match(text, i)
            assert m is not None
            toks.append(Token("NAME", m.group(0).upper(), line.number, col))
            i = m.end()
            continue
        two = text[i:i + 2]
        if two in ("**", ">=", "<=", "==", "/=", "::"):
            toks.append(Token("OP", two, line.number, col))
            i += 2
            continue
        if ch in "+-*/><=":
            toks.append(Token("OP", ch, line.number, col))
            i += 1
            continue
        if ch == "(":
            toks.append(Token("LP", ch, line.number, col))
            i += 1
            continue
        if ch == ")":
            toks.append(Token("RP", ch, line.number, col))
            i += 1
            continue
        if ch == ",":
            toks.append(Token("COMMA", ch, line.number, col))
            i += 1
            continue
        raise FortranSyntaxError(f"unexpected character {ch!r}", line.number, col)
    return toks


class _Cursor:
    """Token cursor for one logical line."""

    def __init__(self, tokens: list[Token], line: int):
        self.tokens = tokens
        self.pos = 0
        self.line = line

    def peek(self, offset: int = 0) -> Token | None:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise FortranSyntaxError("unexpected end of statement", self.line)
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise FortranSyntaxError(f"expected {want}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def require_end(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise FortranSyntaxError(f"unexpected trailing {tok.text!r}", tok.line, tok.col)


# ---------------------------------------------------------------------------
# Expression parsing (precedence climbing, see render.FORTRAN_PREC)

from .render import FORTRAN_PREC  # noqa: E402  (shared precedence table)


def _parse_expr(cur: _Cursor, decls: dict[str, ir.Declaration], min_prec: int = 1) -> ir.Expression:
    lhs = _parse_prefix(cur, decls)
    while True:
        tok = cur.peek()
        if tok is None or tok.kind != "OP" or tok.text not in _BINOP_TAGS:
            return lhs
        tag = _BINOP_TAGS[tok.text]
        prec = FORTRAN_PREC[tag]
        if prec < min_prec:
            return lhs
        cur.next()
        next_min = prec if tag == "POW" else prec + 1  # POW is right-associative
        rhs = _parse_expr(cur, decls, next_min)
        lhs = ir.Binary(tag, lhs, rhs)


def _parse_prefix(cur: _Cursor, decls: dict[str, ir.Declaration]) -> ir.Expression:
    tok = cur.peek()
    if tok is None:
        raise FortranSyntaxError("missing expression", cur.line)
    if tok.kind == "OP" and tok.text == "-":
        cur.next()
        return ir.Unary("NEG", _parse_expr(cur, decls, FORTRAN_PREC["NEG"]))
    if tok.kind == "OP" and tok.text == "+":
        cur.next()
        return _parse_expr(cur, decls, FORTRAN_PREC["NEG"])
    if tok.kind == "OP" and tok.text == "NOT":
        cur.next()
        return ir.Unary("NOT", _parse_expr(cur, decls, FORTRAN_PREC["NOT"]))
    return _parse_atom(cur, decls)


def _parse_atom(cur: _Cursor, decls: dict[str, ir.Declaration]) -> ir.Expression:
    tok = cur.next()
    if tok.kind == "NUM":
        return ir.Num(tok.text)
    if tok.kind == "LP":
        inner = _parse_expr(cur, decls)
        cur.expect("RP")
        return inner
    if tok.kind == "NAME":
        name = tok.text
        nxt = cur.peek()
        if nxt is not None and nxt.kind == "LP":
            args = _parse_arglist(cur, decls)
            decl = decls.get(name)
            if decl is not None and decl.is_array:
                return ir.Var(name, args)
            return ir.Call(name, args)
        return ir.Var(name)
    raise FortranSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)


def _parse_arglist(cur: _Cursor, decls: dict[str, ir.Declaration]) -> tuple[ir.Expression, ...]:
    cur.expect("LP")
    args: list[ir.Expression] = []
    if cur.peek() is not None and cur.peek().kind == "RP":
        cur.next()
        return ()
    while True:
        args.append(_parse_expr(cur, decls))
        tok = cur.next()
        if tok.kind == "RP":
            return tuple(args)
        if tok.kind != "COMMA":
            raise FortranSyntaxError(f"expected ',' or ')', found {tok.text!r}", tok.line, tok.col)


# ---------------------------------------------------------------------------
# Unit and statement parsing

class _UnitParser:
    def __init__(self, lines: list[_CodeLine], path: str | None):
        self.lines = lines
        self.pos = 0
        self.path = path

    def at_end(self) -> bool:
        return self.pos >= len(self.lines)

    def peek_tokens(self) -> list[Token]:
        return _tokenize(self.lines[self.pos])

    def take(self) -> tuple[_CodeLine, list[Token]]:
        line = self.lines[self.pos]
        self.pos += 1
        return line, _tokenize(line)

    # -- unit level ---------------------------------------------------------

    def parse_unit(self, parent: str | None = None) -> list[ir.Container]:
        line, toks = self.take()
        cur = _Cursor(toks, line.number)
        head = cur.expect("NAME")

        kind: str
        name: str
        params: tuple[str, ...] = ()
        if head.text in (ir.PROGRAM, ir.MODULE):
            kind = head.text
            name = cur.expect("NAME").text
            cur.require_end()
        elif head.text == ir.SUBROUTINE:
            kind = ir.SUBROUTINE
            name = cur.expect("NAME").text
            params = self._parse_params(cur)
        elif head.text == ir.FUNCTION:
            kind = ir.FUNCTION
            name = cur.expect("NAME").text
            params = self._parse_params(cur)
        elif head.text in ir.BASE_TYPES or head.text == "DOUBLE":
            if head.text == "DOUBLE":
                cur.expect("NAME", "PRECISION")
            nxt = cur.expect("NAME")
            if nxt.text != ir.FUNCTION:
                raise FortranSyntaxError(
                    "expected a program unit (PROGRAM/SUBROUTINE/FUNCTION/MODULE)",
                    head.line, head.col, self.path)
            kind = ir.FUNCTION
            name = cur.expect("NAME").text
            params = self._parse_params(cur)
        else:
            raise FortranSyntaxError(
                f"expected a program unit, found {head.text!r}",
                head.line, head.col, self.path)

        decls: dict[str, ir.Declaration] = {}
        uses: list[str] = []
        body, contained = self._parse_body(kind, name, decls, uses, params)
        container = ir.Container(
            name=name, kind=kind, params=params,
            locals=tuple(decls.values()), body=tuple(body),
            uses=tuple(uses), parent=parent,
        )
        return [container] + contained

    def _parse_params(self, cur: _Cursor) -> tuple[str, ...]:
        if cur.at_end():
            return ()
        cur.expect("LP")
        params: list[str] = []
        tok = cur.next()
        if tok.kind != "RP":
            while True:
                if tok.kind != "NAME":
                    raise FortranSyntaxError("expected parameter name",
                                             tok.line, tok.col, self.path)
                params.append(tok.text)
                tok = cur.next()
                if tok.kind == "RP":
                    break
                if tok.kind != "COMMA":
                    raise FortranSyntaxError("expected ',' or ')' in parameter list",
                                             tok.line, tok.col, self.path)
                tok = cur.next()
        cur.require_end()
        return tuple(params)

    def _parse_body(self, kind, name, decls, uses, params):
        """Parse declarations then executable statements until END."""
        body: list[ir.Statement] = []
        contained: list[ir.Container] = []
        in_decls = True
        while True:
            if self.at_end():
                raise FortranSyntaxError(f"missing END for {kind} {name}", self.lines[-1].number,
                                         path=self.path)
            toks = self.peek_tokens()
            words = [t.text for t in toks if t.kind == "NAME"][:2]
            plain = not _is_assignment(toks)
            if plain and words and words[0] == "END" and (len(toks) == 1 or toks[1].kind == "NAME"):
                tail = [t.text for t in toks[1:]]
                if not tail or tail[0] == kind:
                    if len(tail) > 1 and tail[1] != name:
                        raise FortranSyntaxError(
                            f"END names {tail[1]}, expected {name}",
                            toks[0].line, toks[0].col, self.path)
                    self.take()
                    return body, contained
                if tail[0] in ir.CONTAINER_KINDS:
                    raise FortranSyntaxError(
                        f"mismatched END {tail[0]} while parsing {kind} {name}",
                        toks[0].line, toks[0].col, self.path)
            if plain and words and words[0] == "CONTAINS" and len(toks) == 1:
                if kind != ir.MODULE:
                    raise UnsupportedFeatureError(
                        "CONTAINS is only supported inside MODULE units",
                        toks[0].line, path=self.path)
                self.take()
                while True:
                    if self.at_end():
                        raise FortranSyntaxError(f"missing END for {kind} {name}",
                                                 self.lines[-1].number, path=self.path)
                    nxt = self.peek_tokens()
                    nwords = [t.text for t in nxt if t.kind == "NAME"][:1]
                    if nwords == ["END"]:
                        break
                    contained.extend(self.parse_unit(parent=name))
                continue

            if in_decls and self._try_declaration(decls, uses):
                continue
            in_decls = False
            body.append(self._parse_statement(decls))

    def _try_declaration(self, decls, uses) -> bool:
        line = self.lines[self.pos]
        toks = _tokenize(line)
        if not toks or toks[0].kind != "NAME":
            return False
        head = toks[0].text
        if head == "USE":
            cur = _Cursor(toks, line.number)
            cur.next()
            uses.append(cur.expect("NAME").text)
            cur.require_end()
            self.take()
            return True
        if head == "IMPLICIT":
            self.take()  # IMPLICIT NONE accepted and ignored
            return True
        if head in ir.BASE_TYPES or head == "DOUBLE":
            # Not a declaration if this is an assignment to a variable
            # that happens to be named REAL etc.; declarations always have
            # another name or '::' after the type keyword.
            if len(toks) > 1 and toks[1].kind == "OP" and toks[1].text == "=":
                return False
            if len(toks) > 1 and toks[1].kind == "NAME" and toks[1].text == "FUNCTION":
                return False
            self._parse_declaration(decls)
            return True
        return False

    def _parse_declaration(self, decls) -> None:
        line, toks = self.take()
        cur = _Cursor(toks, line.number)
        base = cur.expect("NAME").text
        if base == "DOUBLE":
            cur.expect("NAME", "PRECISION")
            base = ir.REAL
        tok = cur.peek()
        if tok is not None and tok.kind == "OP" and tok.text == "::":
            cur.next()
        elif tok is not None and tok.kind == "COMMA":
            raise UnsupportedFeatureError(
                "declaration attributes (DIMENSION, INTENT, ...) are not supported",
                tok.line, tok.col, self.path)
        while True:
            nm = cur.expect("NAME")
            dims: tuple[ir.Expression, ...] = ()
            if cur.peek() is not None and cur.peek().kind == "LP":
                dims = _parse_arglist(cur, decls)
            if nm.text in decls:
                raise FortranSyntaxError(f"duplicate declaration of {nm.text}",
                                         nm.line, nm.col, self.path)
            decls[nm.text] = ir.Declaration(nm.text, base, dims)
            if cur.at_end():
                return
            cur.expect("COMMA")

    # -- statement level ----------------------------------------------------

    def _parse_statement(self, decls) -> ir.Statement:
        line, toks = self.take()
        return self._statement_from_tokens(line, toks, decls)

    def _statement_from_tokens(self, line, toks, decls) -> ir.Statement:
        if not toks:
            raise FortranSyntaxError("empty statement", line.number, path=self.path)
        first = toks[0]

        if first.kind == "NUM":
            # Numeric statement label: only labeled FORMAT lines are kept.
            rest = toks[1:]
            if rest and rest[0].kind == "NAME" and rest[0].text == "FORMAT":
                return ir.OpaqueIO(line.text, line=line.number)
            raise UnsupportedFeatureError("statement labels are not supported",
                                          first.line, first.col, self.path)
        if first.kind != "NAME":
            raise FortranSyntaxError(f"unexpected token {first.text!r}",
                                     first.line, first.col, self.path)

        if _is_assignment(toks):
            return self._parse_assign(line, toks, decls)

        head = first.text
        if head in _IO_KEYWORDS:
            return ir.OpaqueIO(line.text, line=line.number)
        if head in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeatureError(f"{head} is outside the supported subset",
                                          first.line, first.col, self.path)
        cur = _Cursor(toks, line.number)
        cur.next()
        if head == "IF":
            return self._parse_if(line, cur, decls)
        if head == "DO":
            return self._parse_do(line, cur, decls)
        if head == "CALL":
            callee = cur.expect("NAME").text
            args: tuple[ir.Expression, ...] = ()
            if not cur.at_end():
                args = _parse_arglist(cur, decls)
            cur.require_end()
            return ir.CallStmt(callee, args, line=line.number)
        if head in ("RETURN", "STOP"):
            return ir.Return(line=line.number)
        raise FortranSyntaxError(f"unrecognized statement {head!r}",
                                 first.line, first.col, self.path)

    def _parse_assign(self, line, toks, decls) -> ir.Assign:
        cur = _Cursor(toks, line.number)
        nm = cur.expect("NAME")
        indices: tuple[ir.Expression, ...] = ()
        if cur.peek() is not None and cur.peek().kind == "LP":
            indices = _parse_arglist(cur, decls)
        cur.expect("OP", "=")
        rhs = _parse_expr(cur, decls)
        cur.require_end()
        return ir.Assign(ir.Var(nm.text, indices), rhs, line=line.number)

    def _parse_if(self, line, cur, decls) -> ir.If:
        cur.expect("LP")
        cond = _parse_expr(cur, decls)
        cur.expect("RP")
        tok = cur.peek()
        if tok is not None and not (tok.kind == "NAME" and tok.text == "THEN"):
            # One-line logical IF: the guarded statement follows on the line.
            rest = cur.tokens[cur.pos:]
            stmt = self._statement_from_tokens(
                _CodeLine(line.number, line.text), rest, decls)
            if isinstance(stmt, (ir.If, ir.Do)):
                raise FortranSyntaxError("block statement not allowed in one-line IF",
                                         line.number, path=self.path)
            return ir.If(cond, (stmt,), (), line=line.number)
        cur.expect("NAME", "THEN")
        cur.require_end()
        then = self._parse_block(decls, until=("ELSE", "ELSEIF", "ENDIF"))
        return self._finish_if(line, cond, then, decls)

    def _finish_if(self, line, cond, then, decls) -> ir.If:
        term_line, toks = self.take()
        words = [t.text for t in toks if t.kind == "NAME"]
        if words[:2] == ["END", "IF"] or words[:1] == ["ENDIF"]:
            return ir.If(cond, tuple(then), (), line=line.number)
        if words[:2] == ["ELSE", "IF"] or words[:1] == ["ELSEIF"]:
            cur = _Cursor(toks, term_line.number)
            cur.next()
            nxt = cur.peek()
            if nxt is not None and nxt.kind == "NAME" and nxt.text == "IF":
                cur.next()
            cur.expect("LP")
            inner_cond = _parse_expr(cur, decls)
            cur.expect("RP")
            cur.expect("NAME", "THEN")
            cur.require_end()
            inner_then = self._parse_block(decls, until=("ELSE", "ELSEIF", "ENDIF"))
            inner = self._finish_if(term_line, inner_cond, inner_then, decls)
            return ir.If(cond, tuple(then), (inner,), line=line.number)
        if words[:1] == ["ELSE"]:
            orelse = self._parse_block(decls, until=("ENDIF",))
            end_line, end_toks = self.take()
            ewords = [t.text for t in end_toks if t.kind == "NAME"]
            if not (ewords[:2] == ["END", "IF"] or ewords[:1] == ["ENDIF"]):
                raise FortranSyntaxError("expected END IF", end_line.number, path=self.path)
            return ir.If(cond, tuple(then), tuple(orelse), line=line.number)
        raise FortranSyntaxError("expected ELSE or END IF", term_line.number, path=self.path)

    def _parse_do(self, line, cur, decls) -> ir.Do:
        var_tok = cur.expect("NAME")
        if var_tok.text == "WHILE":
            raise UnsupportedFeatureError("DO WHILE is not supported",
                                          var_tok.line, var_tok.col, self.path)
        cur.expect("OP", "=")
        lo = _parse_expr(cur, decls)
        cur.expect("COMMA")
        hi = _parse_expr(cur, decls)
        stride: ir.Expression | None = None
        if not cur.at_end():
            cur.expect("COMMA")
            stride = _parse_expr(cur, decls)
            cur.require_end()
        body = self._parse_block(decls, until=("ENDDO",))
        end_line, end_toks = self.take()
        words = [t.text for t in end_toks if t.kind == "NAME"]
        if not (words[:2] == ["END", "DO"] or words[:1] == ["ENDDO"]):
            raise FortranSyntaxError("expected END DO", end_line.number, path=self.path)
        return ir.Do(var_tok.text, lo, hi, stride, tuple(body), line=line.number)

    def _parse_block(self, decls, until: tuple[str, ...]) -> list[ir.Statement]:
        out: list[ir.Statement] = []
        while True:
            if self.at_end():
                raise FortranSyntaxError("unterminated block", self.lines[-1].number,
                                         path=self.path)
            toks = self.peek_tokens()
            words = [t.text for t in toks if t.kind == "NAME"][:2]
            key = "".join(words[:2]) if words[:1] in (["END"], ["ELSE"]) else (words[0] if words else "")
            if key in until or (words[:1] == ["ELSE"] and "ELSE" in until) or \
               (key == "ENDIF" and "ENDIF" in until) or (key == "ENDDO" and "ENDDO" in until):
                return out
            if words[:1] == ["END"] and (len(words) == 1 or words[1] in ir.CONTAINER_KINDS):
                raise FortranSyntaxError("unterminated block before END",
                                         toks[0].line, toks[0].col, self.path)
            out.append(self._parse_statement(decls))


def _is_assignment(toks: list[Token]) -> bool:
    if not toks or toks[0].kind != "NAME":
        return False
    if len(toks) > 1 and toks[1].kind == "OP" and toks[1].text == "=":
        return True
    if len(toks) > 1 and toks[1].kind == "LP":
        depth = 0
        for i, t in enumerate(toks[1:], start=1):
            if t.kind == "LP":
                depth += 1
            elif t.kind == "RP":
                depth -= 1
                if depth == 0:
                    j = i + 1
                    return (j < len(toks) and toks[j].kind == "OP"
                            and toks[j].text == "=")
    return False


# ---------------------------------------------------------------------------
# Entry points

def parse_expression(text: str) -> ir.Expression:
    """Parse one expression with no surrounding statement or declarations.

    NAME(...) is read as a call, since no array declarations are in scope.
    """
    cur = _Cursor(_tokenize(_CodeLine(1, text)), 1)
    expr = _parse_expr(cur, {})
    cur.require_end()
    return expr


def parse_source(text: str, path: str | None = None) -> ir.PairProgram:
    """Parse free-form source into a PairProgram.

    Raises FortranSyntaxError (or UnsupportedFeatureError) with a source
    position on malformed input, including use of undeclared identifiers.
    """
    code, _ = _scan(text)
    code = _merge_continuations(code)
    if not code:
        raise FortranSyntaxError("no program units found", 1, 1, path)

    parser = _UnitParser(code, path)
    containers: list[ir.Container] = []
    spans: list[tuple[int, int]] = []
    while not parser.at_end():
        start = code[parser.pos].number
        units = parser.parse_unit()
        end = code[parser.pos - 1].number
        containers.extend(units)
        spans.extend([(start, end)] * len(units))

    blocks = extract_comments(text)
    attached: list[list[ir.CommentBlock]] = [[] for _ in containers]
    for b in blocks:
        for i, (lo, hi) in enumerate(spans):
            if lo <= b.anchor <= hi:
                attached[i].append(b)
                break
        else:
            # Comments outside any unit span attach to the nearest unit after.
            later = [i for i, (lo, _) in enumerate(spans) if lo >= b.anchor]
            target = later[0] if later else len(containers) - 1
            attached[target].append(b)

    containers = [
        ir.Container(c.name, c.kind, c.params, c.locals, c.body,
                     comments=tuple(attached[i]), uses=c.uses, parent=c.parent)
        for i, c in enumerate(containers)
    ]
    program = ir.PairProgram(tuple(containers), path=path)

    for d in ir.validate(program):
        if d.severity == ir.SEV_ERROR:
            raise FortranSyntaxError(d.message, d.line or 1, 1, path)
    return program


SOURCE_SUFFIXES = (".f", ".f90", ".for")


def read_source_file(path: str | Path) -> str:
    """Read a source file as UTF-8, mapping undecodable bytes via Latin-1."""
    data = Path(path).read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def parse_file(path: str | Path) -> ir.PairProgram:
    return parse_source(read_source_file(path), path=str(path))
