"""LaTeX math parsing into expression trees.

Covers the equation corpus: identifiers (multi-letter runs segmented
greedily against a hint vocabulary), decimal numbers, `+ - = ( )`,
`\\cdot` and juxtaposition for multiplication, `\\frac`, `^` with
braced or single-token exponents, `_{..}` subscripts folded into the
identifier name, `e^{..}` as EXP, function commands, and Greek-letter
commands as identifiers. Case is preserved; matching against code
variables happens later, in grounding.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from . import ir
from .errors import LatexParseError, ValidationError

_FUNC_COMMANDS = {"exp", "log", "sin", "cos", "tan", "sqrt", "min", "max"}

_GREEK = ir.GREEK_NAMES

_SPACING = {",", ";", "!", "quad", "qquad", " "}

_DEFAULT_FUNCTIONS = frozenset(n.lower() for n in ir.INTRINSICS)


@dataclass(frozen=True)
class SymbolHints:
    """Vocabulary guiding letter-run segmentation and call detection."""

    known_identifiers: frozenset[str] = frozenset()
    known_functions: frozenset[str] = _DEFAULT_FUNCTIONS

    def __post_init__(self):
        ids = {s.lower() for s in self.known_identifiers}
        funcs = {s.lower() for s in self.known_functions}
        overlap = ids & funcs
        if overlap:
            raise ValidationError(
                f"identifier/function hint sets overlap: {sorted(overlap)}")


@dataclass(frozen=True)
class AmbiguityWarning:
    """A letter run was split by the single-letter fallback."""

    symbol: str
    position: int

    def __str__(self) -> str:
        return (f"segmented {self.symbol!r} at offset {self.position} "
                "without a matching hint")


@dataclass(frozen=True)
class EquationIR:
    lhs: str | None
    rhs: ir.Expression
    source: str
    warnings: tuple[AmbiguityWarning, ...] = field(default=(), compare=False)


# ---------------------------------------------------------------------------
# Raw tokens

@dataclass(frozen=True)
class _Tok:
    kind: str  # NUM NAME FUNC FRAC OP LP RP LB RB COMMA SUB SUP
    value: str
    pos: int


_NUM_RE = re.compile(r"\d+\.\d*|\.\d+|\d+")
_RUN_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*")
_CMD_RE = re.compile(r"\\([A-Za-z]+|.)")
_LABEL_RE = re.compile(r"\\(?:label|tag)\s*\{[^}]*\}")


def _strip_wrappers(src: str) -> str:
    text = src.strip()
    while text.startswith("$"):
        text = text[1:]
    while text.endswith("$"):
        text = text[:-1]
    return _LABEL_RE.sub("", text)


def _raw_tokens(text: str) -> list[_Tok]:
    out: list[_Tok] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUM_RE.match(text, i)
            out.append(_Tok("NUM", m.group(0), i))
            i = m.end()
            continue
        if ch.isalpha():
            m = _RUN_RE.match(text, i)
            out.append(_Tok("RUN", m.group(0), i))
            i = m.end()
            continue
        if ch == "\\":
            m = _CMD_RE.match(text, i)
            name = m.group(1)
            i = m.end()
            if name in _SPACING:
                continue
            if name == "cdot" or name == "times":
                out.append(_Tok("OP", "*", m.start()))
            elif name == "frac":
                out.append(_Tok("FRAC", name, m.start()))
            elif name == "left" or name == "right":
                continue
            elif name == "operatorname":
                mm = re.match(r"\s*\{\s*([A-Za-z]+)\s*\}", text[i:])
                if not mm:
                    raise LatexParseError("\\operatorname needs a braced name", i)
                out.append(_Tok("FUNC", mm.group(1), m.start()))
                i += mm.end()
            elif name in _FUNC_COMMANDS:
                out.append(_Tok("FUNC", name, m.start()))
            elif name in _GREEK:
                # A Greek command is one symbol; it skips segmentation.
                out.append(_Tok("NAME", name, m.start()))
            else:
                raise LatexParseError(f"unsupported command \\{name}", m.start())
            continue
        if ch in "+-*/=":
            out.append(_Tok("OP", ch, i))
        elif ch == "(":
            out.append(_Tok("LP", ch, i))
        elif ch == ")":
            out.append(_Tok("RP", ch, i))
        elif ch == "{":
            out.append(_Tok("LB", ch, i))
        elif ch == "}":
            out.append(_Tok("RB", ch, i))
        elif ch == ",":
            out.append(_Tok("COMMA", ch, i))
        elif ch == "^":
            out.append(_Tok("SUP", ch, i))
        elif ch == "_":
            out.append(_Tok("SUB", ch, i))
        else:
            raise LatexParseError(f"unexpected character {ch!r}", i)
        i += 1
    return out


# ---------------------------------------------------------------------------
# Letter-run segmentation

def _segment(run: str, pos: int, vocab: dict[str, None],
             warnings: list[AmbiguityWarning]) -> list[str]:
    """Split a letter run greedily against the vocabulary (case-insensitive).

    The original spelling is preserved. A position with no vocabulary
    match falls back to a single letter (plus trailing digits) and
    records an AmbiguityWarning.
    """
    lower = run.lower()
    pieces: list[str] = []
    i = 0
    while i < len(run):
        best = 0
        for j in range(len(run), i, -1):
            if lower[i:j] in vocab:
                best = j - i
                break
        if best:
            pieces.append(run[i:i + best])
            i += best
            continue
        j = i + 1
        while j < len(run) and run[j].isdigit():
            j += 1
        pieces.append(run[i:j])
        if len(run) > j - i or i > 0:
            warnings.append(AmbiguityWarning(run[i:j], pos + i))
        i = j
    return pieces


def _shape(tokens: list[_Tok], hints: SymbolHints,
           warnings: list[AmbiguityWarning]) -> list[_Tok]:
    """Resolve RUN tokens into NAME/FUNC tokens and fold subscripts."""
    vocab: dict[str, None] = {}
    for s in hints.known_identifiers:
        vocab[s.lower()] = None
    for s in hints.known_functions:
        vocab[s.lower()] = None
    functions = {s.lower() for s in hints.known_functions}

    out: list[_Tok] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == "RUN":
            for piece in _segment(tok.value, tok.pos, vocab, warnings):
                kind = "FUNC" if piece.lower() in functions else "NAME"
                out.append(_Tok(kind, piece, tok.pos))
            i += 1
            continue
        if tok.kind == "SUB":
            if not out or out[-1].kind != "NAME":
                raise LatexParseError("subscript without an identifier", tok.pos)
            sub, i = _subscript_text(tokens, i + 1)
            prev = out.pop()
            out.append(_Tok("NAME", f"{prev.value}_{sub}", prev.pos))
            continue
        out.append(tok)
        i += 1
    return out


def _subscript_text(tokens: list[_Tok], i: int) -> tuple[str, int]:
    if i >= len(tokens):
        raise LatexParseError("dangling subscript", tokens[-1].pos)
    tok = tokens[i]
    if tok.kind == "LB":
        parts: list[str] = []
        i += 1
        while i < len(tokens) and tokens[i].kind != "RB":
            if tokens[i].kind not in ("RUN", "NUM", "NAME"):
                raise LatexParseError("unsupported subscript content", tokens[i].pos)
            parts.append(tokens[i].value)
            i += 1
        if i >= len(tokens):
            raise LatexParseError("unterminated subscript", tok.pos)
        return "".join(parts), i + 1
    if tok.kind in ("RUN", "NUM", "NAME"):
        return tok.value, i + 1
    raise LatexParseError("unsupported subscript content", tok.pos)


# ---------------------------------------------------------------------------
# Pratt parser

_ATOM_STARTERS = ("NUM", "NAME", "FUNC", "FRAC", "LP", "LB")

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4


class _Parser:
    def __init__(self, tokens: list[_Tok], length: int):
        self.tokens = tokens
        self.pos = 0
        self.length = length

    def peek(self) -> _Tok | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise LatexParseError("unexpected end of input", self.length)
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Tok:
        tok = self.next()
        if tok.kind != kind:
            raise LatexParseError(f"expected {kind}, found {tok.value!r}", tok.pos)
        return tok

    def parse_expr(self, min_prec: int = _PREC_ADD) -> ir.Expression:
        lhs = self.parse_prefix()
        while True:
            tok = self.peek()
            if tok is None:
                return lhs
            if tok.kind == "OP" and tok.value in "+-":
                if _PREC_ADD < min_prec:
                    return lhs
                self.next()
                rhs = self.parse_expr(_PREC_ADD + 1)
                lhs = ir.Binary("ADD" if tok.value == "+" else "SUB", lhs, rhs)
                continue
            if tok.kind == "OP" and tok.value in "*/":
                if _PREC_MUL < min_prec:
                    return lhs
                self.next()
                rhs = self.parse_expr(_PREC_MUL + 1)
                lhs = ir.Binary("MUL" if tok.value == "*" else "DIV", lhs, rhs)
                continue
            if tok.kind == "SUP":
                if _PREC_POW < min_prec:
                    return lhs
                self.next()
                rhs = self.parse_exponent()
                if isinstance(lhs, ir.Var) and lhs.name == "e" and not lhs.indices:
                    lhs = ir.Call("EXP", (rhs,))
                else:
                    lhs = ir.Binary("POW", lhs, rhs)
                continue
            if tok.kind in _ATOM_STARTERS:
                # juxtaposition is multiplication
                if _PREC_MUL < min_prec:
                    return lhs
                rhs = self.parse_expr(_PREC_MUL + 1)
                lhs = ir.Binary("MUL", lhs, rhs)
                continue
            return lhs

    def parse_exponent(self) -> ir.Expression:
        tok = self.peek()
        if tok is not None and tok.kind == "LB":
            self.next()
            inner = self.parse_expr()
            self.expect("RB")
            return inner
        return self.parse_expr(_PREC_POW)

    def parse_prefix(self) -> ir.Expression:
        tok = self.peek()
        if tok is None:
            raise LatexParseError("missing expression", self.length)
        if tok.kind == "OP" and tok.value == "-":
            self.next()
            return ir.Unary("NEG", self.parse_expr(_PREC_NEG))
        if tok.kind == "OP" and tok.value == "+":
            self.next()
            return self.parse_expr(_PREC_NEG)
        return self.parse_atom()

    def parse_atom(self) -> ir.Expression:
        tok = self.next()
        if tok.kind == "NUM":
            return ir.Num(tok.value)
        if tok.kind == "NAME":
            return ir.Var(tok.value)
        if tok.kind == "LP":
            inner = self.parse_expr()
            self.expect("RP")
            return inner
        if tok.kind == "LB":
            inner = self.parse_expr()
            self.expect("RB")
            return inner
        if tok.kind == "FRAC":
            self.expect("LB")
            num = self.parse_expr()
            self.expect("RB")
            self.expect("LB")
            den = self.parse_expr()
            self.expect("RB")
            return ir.Binary("DIV", num, den)
        if tok.kind == "FUNC":
            return self.parse_call(tok)
        raise LatexParseError(f"unexpected {tok.value!r}", tok.pos)

    def parse_call(self, tok: _Tok) -> ir.Expression:
        name = tok.value.upper()
        nxt = self.peek()
        if nxt is not None and nxt.kind == "LP":
            self.next()
            args = [self.parse_expr()]
            while self.peek() is not None and self.peek().kind == "COMMA":
                self.next()
                args.append(self.parse_expr())
            self.expect("RP")
            return ir.Call(name, tuple(args))
        if nxt is not None and nxt.kind == "LB":
            self.next()
            inner = self.parse_expr()
            self.expect("RB")
            return ir.Call(name, (inner,))
        raise LatexParseError(f"function {tok.value} needs an argument", tok.pos)


def parse_latex(src: str, hints: SymbolHints | None = None) -> EquationIR:
    """Parse one LaTeX math string.

    Raises LatexParseError with a character offset on malformed input.
    Single-letter segmentation fallbacks are recorded as warnings on the
    result, not raised.
    """
    hints = hints or SymbolHints()
    text = _strip_wrappers(src)
    warnings: list[AmbiguityWarning] = []
    tokens = _shape(_raw_tokens(text), hints, warnings)

    split = [i for i, t in enumerate(tokens) if t.kind == "OP" and t.value == "="]
    lhs_name: str | None = None
    rhs_tokens = tokens
    if split:
        if len(split) > 1:
            raise LatexParseError("more than one top-level '='",
                                  tokens[split[1]].pos)
        left = tokens[:split[0]]
        if len(left) != 1 or left[0].kind != "NAME":
            where = left[0].pos if left else 0
            raise LatexParseError("left side of '=' must be one identifier", where)
        lhs_name = left[0].value
        rhs_tokens = tokens[split[0] + 1:]

    parser = _Parser(rhs_tokens, len(text))
    rhs = parser.parse_expr()
    trailing = parser.peek()
    if trailing is not None:
        raise LatexParseError(f"unexpected trailing {trailing.value!r}", trailing.pos)
    return EquationIR(lhs_name, rhs, src, tuple(warnings))


def load_equations(path: str | Path, hints: SymbolHints | None = None) -> list[EquationIR]:
    """Read a .tex fixture: one equation per line, `%` starts a comment."""
    out: list[EquationIR] = []
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse_latex(line, hints))
        except LatexParseError as err:
            raise LatexParseError(err.message, err.position,
                                  source=f"{path}:{number}") from None
    return out
