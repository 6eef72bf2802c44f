"""Grounding: link code variables to comments, text mentions, equations.

Comment lines of the form ``NAME = description [units]`` become
GroundingRecords. Equation symbols and text mentions are aligned to
code variables by name similarity and description overlap, and the
records are attached to a Grfn as metadata.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

from . import ir
from .errors import NoAssignNodesError
from .grfn import ASSIGN, Grfn, GroundingRecord, to_sexpr
from .render import to_fortran_expr

COMMENT = "COMMENT"
TEXT = "TEXT"
EQUATION = "EQUATION"

_SUPERSCRIPTS = str.maketrans({
    "⁰": "0", "¹": "1", "²": "2", "³": "3", "⁴": "4",
    "⁵": "5", "⁶": "6", "⁷": "7", "⁸": "8", "⁹": "9",
    "⁻": "-", "⁺": "+",
})


def normalize_units(text: str) -> str:
    """ASCII-fold unicode superscripts: m⁻² becomes m-2."""
    return text.translate(_SUPERSCRIPTS)


_RECORD_RE = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_]*)\s*=\s*(.+?)\s*$")
_UNIT_TOKEN_RE = re.compile(r"^[A-Za-z0-9/^*-]+$")


def _looks_like_unit(token: str) -> bool:
    if not _UNIT_TOKEN_RE.match(token):
        return False
    # A bare word ("number", "factor") is prose, not a unit; require a
    # digit, slash, or caret.
    return any(c.isdigit() or c in "/^" for c in token)


def _split_units(text: str) -> tuple[str, str | None]:
    text = text.strip()
    if text.endswith(")"):
        depth = 0
        for i in range(len(text) - 1, -1, -1):
            if text[i] == ")":
                depth += 1
            elif text[i] == "(":
                depth -= 1
                if depth == 0:
                    return text[:i].strip(), text[i + 1:-1].strip() or None
    parts = text.rsplit(None, 1)
    if len(parts) == 2 and _looks_like_unit(normalize_units(parts[1])):
        return parts[0].strip(), parts[1]
    return text, None


def parse_comment_descriptions(block: ir.CommentBlock, scope: str) -> list[GroundingRecord]:
    """Records from comment lines shaped like ``NAME = description [units]``."""
    records: list[GroundingRecord] = []
    for line in block.lines:
        m = _RECORD_RE.match(line)
        if not m:
            continue
        description, units = _split_units(m.group(2))
        if not description:
            continue
        records.append(GroundingRecord(
            variable=(scope, m.group(1).upper()),
            description=description,
            units=normalize_units(units) if units else None,
            source=COMMENT,
            score=1.0,
        ))
    return records


def container_records(container: ir.Container) -> list[GroundingRecord]:
    """All comment-derived records of one container, in comment order."""
    out: list[GroundingRecord] = []
    for block in container.comments:
        out.extend(parse_comment_descriptions(block, container.name))
    return out


# ---------------------------------------------------------------------------
# Text mentions

@dataclass(frozen=True)
class TextMention:
    symbol: str
    description: str
    units: str | None
    origin: str


def read_mentions(path: str | Path) -> list[TextMention]:
    """Load the 4-column (symbol, description, units, origin) TSV."""
    out: list[TextMention] = []
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise ValueError(f"{path}:{number}: expected 4 tab-separated columns")
        symbol, description, units, origin = (c.strip() for c in cols)
        if not symbol:
            raise ValueError(f"{path}:{number}: empty symbol")
        out.append(TextMention(symbol, description, units or None, origin))
    return out


# ---------------------------------------------------------------------------
# Similarity scoring

def _strip_markers(name: str) -> str:
    return name.lower().replace("_", "").replace("{", "").replace("}", "")


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def name_similarity(a: str, b: str) -> float:
    a, b = _strip_markers(a), _strip_markers(b)
    if not a and not b:
        return 1.0
    longest = max(len(a), len(b))
    return 1.0 - levenshtein(a, b) / longest


_WORD_RE = re.compile(r"[a-z0-9]+")


def token_jaccard(a: str, b: str) -> float:
    ta = set(_WORD_RE.findall(a.lower()))
    tb = set(_WORD_RE.findall(b.lower()))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def pair_score(symbol: str, name: str, symbol_desc: str = "",
               variable_desc: str = "") -> float:
    """Symbol-to-variable affinity in [0, 1]; 1.0 means exact name."""
    if _strip_markers(symbol) == _strip_markers(name):
        return 1.0
    score = name_similarity(symbol, name)
    if symbol_desc and variable_desc:
        score = max(score, token_jaccard(symbol_desc, variable_desc))
    return score


def align_symbols(symbols, variables, descriptions=None, threshold: float = 0.5):
    """Best code variable for each symbol.

    `variables` holds (scope, name) pairs; `descriptions` may map both
    symbols and (scope, name) pairs to free-text descriptions. Returns
    (matches, unmatched) where matches are (symbol, variable, score)
    triples and ties prefer the lexicographically smaller variable name.
    """
    descriptions = descriptions or {}
    matches = []
    unmatched = []
    vars_sorted = sorted(variables, key=lambda v: (v[1], v[0]))
    for symbol in sorted(symbols):
        sym_desc = descriptions.get(symbol, "")
        best: tuple[float, tuple[str, str]] | None = None
        for variable in vars_sorted:
            score = pair_score(symbol, variable[1], sym_desc,
                               descriptions.get(variable, ""))
            if best is None or score > best[0]:
                best = (score, variable)
        if best is not None and best[0] >= threshold:
            matches.append((symbol, best[1], best[0]))
        else:
            unmatched.append(symbol)
    return matches, unmatched


# ---------------------------------------------------------------------------
# Attaching records to a Grfn

@dataclass(frozen=True)
class GroundReport:
    attached: int
    unresolved: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {"attached": self.attached, "unresolved": list(self.unresolved)}


def _grfn_names(grfn: Grfn) -> list[str]:
    synthetic = {f.output.split("::")[1] for f in grfn.functions
                 if f.kind == "CONDITION"}
    names = sorted({v.name for v in grfn.variables} - synthetic)
    return names


def _comment_descriptions(grfn: Grfn, extra=()) -> dict:
    out: dict = {}
    for record in tuple(grfn.groundings) + tuple(extra):
        if record.source == COMMENT:
            out.setdefault((grfn.scope, record.variable[1]), record.description)
    return out


def ground(grfn: Grfn, records, mentions=(),
           threshold: float = 0.5) -> tuple[Grfn, GroundReport]:
    """Attach resolvable records and mentions; report what did not bind.

    The input grfn is unchanged; a new one is returned. `threshold` is
    the minimum alignment score for binding a text mention.
    """
    names = set(_grfn_names(grfn))
    attached: list[GroundingRecord] = []
    unresolved: list[str] = []

    for record in records:
        name = record.variable[1]
        if name in names:
            attached.append(GroundingRecord(
                (grfn.scope, name), record.description, record.units,
                record.source, record.score))
        else:
            unresolved.append(name)

    if mentions:
        descriptions = _comment_descriptions(grfn, attached)
        for m in mentions:
            descriptions.setdefault(m.symbol, m.description)
        matches, missed = align_symbols(
            [m.symbol for m in mentions],
            [(grfn.scope, n) for n in sorted(names)],
            descriptions,
            threshold=threshold,
        )
        by_symbol = {sym: (var, score) for sym, var, score in matches}
        for m in mentions:
            hit = by_symbol.get(m.symbol)
            if hit is None:
                unresolved.append(m.symbol)
                continue
            (scope, name), score = hit
            attached.append(GroundingRecord(
                (scope, name), m.description,
                normalize_units(m.units) if m.units else None, TEXT, score))

    return grfn.with_groundings(attached), GroundReport(len(attached),
                                                        tuple(unresolved))


# ---------------------------------------------------------------------------
# Expression canonicalization (flatten and sort AC operator chains)

def _flatten(expr: ir.Expression, op: str) -> list[ir.Expression]:
    if isinstance(expr, ir.Binary) and expr.op == op:
        return _flatten(expr.left, op) + _flatten(expr.right, op)
    return [expr]


def _canonical_num(text: str) -> str:
    try:
        return str(Decimal(text.replace("D", "E").replace("d", "e")).normalize())
    except ArithmeticError:
        return text


def canonicalize(expr: ir.Expression) -> ir.Expression:
    """Normal form under commutativity/associativity of ADD and MUL.

    Subtraction becomes addition of a negation, chains are flattened and
    operands sorted by a structural key, numerals are normalized. No
    distributivity or other algebraic rewrites.
    """
    if isinstance(expr, ir.Num):
        return ir.Num(_canonical_num(expr.text))
    if isinstance(expr, ir.Var):
        return ir.Var(expr.name, tuple(canonicalize(i) for i in expr.indices))
    if isinstance(expr, ir.Unary):
        return ir.Unary(expr.op, canonicalize(expr.child))
    if isinstance(expr, ir.Call):
        return ir.Call(expr.name, tuple(canonicalize(a) for a in expr.args))
    if isinstance(expr, ir.Binary):
        if expr.op == "SUB":
            return canonicalize(ir.Binary(
                "ADD", expr.left, ir.Unary("NEG", expr.right)))
        if expr.op in ("ADD", "MUL"):
            # Canonicalizing a chain member can surface a nested chain of
            # the same operator (SUB turns into ADD), so flatten again.
            operands = []
            for child in _flatten(expr, expr.op):
                folded = canonicalize(child)
                operands.extend(_flatten(folded, expr.op))
            operands.sort(key=to_sexpr)
            result = operands[0]
            for e in operands[1:]:
                result = ir.Binary(expr.op, result, e)
            return result
        return ir.Binary(expr.op, canonicalize(expr.left), canonicalize(expr.right))
    raise TypeError(f"not an expression: {expr!r}")


def rename_symbols(expr: ir.Expression, mapping: dict[str, str]) -> ir.Expression:
    if isinstance(expr, ir.Num):
        return expr
    if isinstance(expr, ir.Var):
        return ir.Var(mapping.get(expr.name, expr.name),
                      tuple(rename_symbols(i, mapping) for i in expr.indices))
    if isinstance(expr, ir.Unary):
        return ir.Unary(expr.op, rename_symbols(expr.child, mapping))
    if isinstance(expr, ir.Binary):
        return ir.Binary(expr.op, rename_symbols(expr.left, mapping),
                         rename_symbols(expr.right, mapping))
    if isinstance(expr, ir.Call):
        return ir.Call(expr.name, tuple(rename_symbols(a, mapping) for a in expr.args))
    raise TypeError(f"not an expression: {expr!r}")


# ---------------------------------------------------------------------------
# Equation-to-code matching

EXACT = "EXACT"
SUBSET = "SUBSET"
SUPERSET = "SUPERSET"
MISMATCH = "MISMATCH"


@dataclass(frozen=True)
class EquationMatchReport:
    node_id: str
    verdict: str
    score: float
    only_in_equation: tuple[str, ...]
    only_in_code: tuple[str, ...]
    symbol_map: tuple[tuple[str, str], ...]

    def to_json_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "verdict": self.verdict,
            "score": self.score,
            "only_in_equation": list(self.only_in_equation),
            "only_in_code": list(self.only_in_code),
            "symbol_map": [list(p) for p in self.symbol_map],
        }


def _operand_multiset(expr: ir.Expression) -> tuple[str, list[str]]:
    """Top-level decomposition: MUL factors, ADD terms, or the whole tree."""
    if isinstance(expr, ir.Binary) and expr.op in ("ADD", "MUL"):
        return expr.op, sorted(to_fortran_expr(e) for e in _flatten(expr, expr.op))
    return "ATOM", [to_fortran_expr(expr)]


def _multiset_split(a: list[str], b: list[str]) -> tuple[list[str], list[str], int]:
    """(only in a, only in b, shared count) with multiplicity."""
    from collections import Counter
    ca, cb = Counter(a), Counter(b)
    only_a = sorted((ca - cb).elements())
    only_b = sorted((cb - ca).elements())
    shared = sum((ca & cb).values())
    return only_a, only_b, shared


def match_equation(eq, grfn: Grfn, hints=None) -> EquationMatchReport:
    """Find the ASSIGN node whose expression is closest to eq.rhs."""
    assigns = [f for f in grfn.functions if f.kind == ASSIGN]
    if not assigns:
        raise NoAssignNodesError(f"{grfn.scope} has no ASSIGN nodes to match")

    names = _grfn_names(grfn)
    descriptions = _comment_descriptions(grfn)
    symbols = sorted(ir.free_vars(eq.rhs) | ({eq.lhs} if eq.lhs else set()))
    matches, _ = align_symbols(symbols, [(grfn.scope, n) for n in names],
                               descriptions)
    mapping = {sym: var[1] for sym, var, _ in matches}

    eq_canonical = canonicalize(rename_symbols(eq.rhs, mapping))
    eq_kind, eq_ops = _operand_multiset(eq_canonical)

    best = None
    for node in assigns:
        code_canonical = canonicalize(node.expression)
        code_kind, code_ops = _operand_multiset(code_canonical)
        if code_kind != eq_kind and "ATOM" not in (code_kind, eq_kind):
            only_eq, only_code, shared = eq_ops, code_ops, 0
        else:
            only_eq, only_code, shared = _multiset_split(eq_ops, code_ops)
        union = shared + len(only_eq) + len(only_code)
        score = shared / union if union else 0.0
        if not only_eq and not only_code:
            verdict = EXACT
        elif not only_eq:
            verdict = SUBSET
        elif not only_code:
            verdict = SUPERSET
        else:
            verdict = MISMATCH
        key = (-score, node.id)
        entry = (key, node, verdict, score, tuple(only_eq), tuple(only_code))
        if best is None or key < best[0]:
            best = entry

    _, node, verdict, score, only_eq, only_code = best
    return EquationMatchReport(
        node_id=node.id, verdict=verdict, score=score,
        only_in_equation=only_eq, only_in_code=only_code,
        symbol_map=tuple(sorted(mapping.items())),
    )
