"""Render IR back to Fortran text and expressions to LaTeX math.

The Fortran printer and the parser are inverses up to formatting:
``parse_source(to_fortran(p))`` is structurally equal to ``p``. The LaTeX
renderer inserts parentheses only where precedence demands them, so its
output re-parses to the same tree.
"""

from __future__ import annotations

from . import ir

# Binding powers used for both printing and parsing Fortran expressions.
# Unary minus sits between */ and ** so that -A*B is (-A)*B but -A**2
# is -(A**2).
FORTRAN_PREC = {
    "OR": 1,
    "AND": 2,
    "NOT": 3,
    "GT": 4, "GE": 4, "LT": 4, "LE": 4, "EQ": 4, "NE": 4,
    "ADD": 5, "SUB": 5,
    "MUL": 6, "DIV": 6,
    "NEG": 7,
    "POW": 8,
}

_FORTRAN_OP = {
    "ADD": " + ", "SUB": " - ", "MUL": "*", "DIV": "/", "POW": "**",
    "GT": " > ", "GE": " >= ", "LT": " < ", "LE": " <= ",
    "EQ": " == ", "NE": " /= ",
    "AND": " .AND. ", "OR": " .OR. ",
}

_RIGHT_ASSOC = frozenset({"POW"})


def to_fortran_expr(expr: ir.Expression) -> str:
    return _fexpr(expr, 0)


def _fexpr(expr: ir.Expression, min_prec: int) -> str:
    if isinstance(expr, ir.Num):
        return expr.text
    if isinstance(expr, ir.Var):
        if expr.indices:
            return f"{expr.name}({', '.join(_fexpr(i, 0) for i in expr.indices)})"
        return expr.name
    if isinstance(expr, ir.Call):
        return f"{expr.name}({', '.join(_fexpr(a, 0) for a in expr.args)})"
    if isinstance(expr, ir.Unary):
        prec = FORTRAN_PREC[expr.op]
        sym = "-" if expr.op == "NEG" else ".NOT. "
        text = sym + _fexpr(expr.child, prec)
        return f"({text})" if prec < min_prec else text
    if isinstance(expr, ir.Binary):
        prec = FORTRAN_PREC[expr.op]
        lreq, rreq = (prec + 1, prec) if expr.op in _RIGHT_ASSOC else (prec, prec + 1)
        text = _fexpr(expr.left, lreq) + _FORTRAN_OP[expr.op] + _fexpr(expr.right, rreq)
        return f"({text})" if prec < min_prec else text
    raise TypeError(f"not an expression: {expr!r}")


# ---------------------------------------------------------------------------
# Program printer

def to_fortran(program: ir.PairProgram) -> str:
    """Pretty-print a whole program as free-form source."""
    children: dict[str, list[ir.Container]] = {}
    for c in program.containers:
        if c.parent is not None:
            children.setdefault(c.parent, []).append(c)

    out: list[str] = []
    for c in program.containers:
        if c.parent is not None:
            continue
        _print_container(c, children.get(c.name, []), out)
        out.append("")
    return "\n".join(out)


def _print_container(c: ir.Container, contained: list[ir.Container], out: list[str]) -> None:
    if c.kind in (ir.SUBROUTINE, ir.FUNCTION):
        out.append(f"{c.kind} {c.name}({', '.join(c.params)})")
    else:
        out.append(f"{c.kind} {c.name}")
    for m in c.uses:
        out.append(f"  USE {m}")
    for d in c.locals:
        if d.dims:
            dims = ", ".join(to_fortran_expr(e) for e in d.dims)
            out.append(f"  {d.base_type} {d.name}({dims})")
        else:
            out.append(f"  {d.base_type} {d.name}")
    _print_body(c.body, out, indent=1)
    if contained:
        out.append("CONTAINS")
        for sub in contained:
            _print_container(sub, [], out)
    out.append(f"END {c.kind} {c.name}")


def _print_body(stmts, out: list[str], indent: int) -> None:
    pad = "  " * indent
    for s in stmts:
        if isinstance(s, ir.Assign):
            out.append(f"{pad}{to_fortran_expr(s.target)} = {to_fortran_expr(s.rhs)}")
        elif isinstance(s, ir.If):
            _print_if(s, out, indent, lead="IF")
        elif isinstance(s, ir.Do):
            head = f"{pad}DO {s.var} = {to_fortran_expr(s.lo)}, {to_fortran_expr(s.hi)}"
            if s.stride is not None:
                head += f", {to_fortran_expr(s.stride)}"
            out.append(head)
            _print_body(s.body, out, indent + 1)
            out.append(f"{pad}END DO")
        elif isinstance(s, ir.CallStmt):
            args = ", ".join(to_fortran_expr(a) for a in s.args)
            out.append(f"{pad}CALL {s.callee}({args})")
        elif isinstance(s, ir.Return):
            out.append(f"{pad}RETURN")
        elif isinstance(s, ir.OpaqueIO):
            out.append(f"{pad}{s.text}")
        else:
            raise TypeError(f"not a statement: {s!r}")


def _print_if(s: ir.If, out: list[str], indent: int, lead: str) -> None:
    pad = "  " * indent
    out.append(f"{pad}{lead} ({to_fortran_expr(s.cond)}) THEN")
    _print_body(s.then, out, indent + 1)
    orelse = s.orelse
    # Flatten a single nested If back into ELSE IF for readability.
    while len(orelse) == 1 and isinstance(orelse[0], ir.If):
        inner = orelse[0]
        out.append(f"{pad}ELSE IF ({to_fortran_expr(inner.cond)}) THEN")
        _print_body(inner.then, out, indent + 1)
        orelse = inner.orelse
    if orelse:
        out.append(f"{pad}ELSE")
        _print_body(orelse, out, indent + 1)
    out.append(f"{pad}END IF")


# ---------------------------------------------------------------------------
# LaTeX renderer

# ^ binds tightest, then unary minus, then multiplication/division,
# then +/-, with relational and logical operators below those.
LATEX_PREC = {
    "OR": 0,
    "AND": 1,
    "NOT": 2,
    "GT": 3, "GE": 3, "LT": 3, "LE": 3, "EQ": 3, "NE": 3,
    "ADD": 4, "SUB": 4,
    "MUL": 5, "DIV": 5,
    "NEG": 6,
    "POW": 7,
}

_LATEX_OP = {
    "ADD": "+", "SUB": "-", "MUL": r" \cdot ",
    "GT": " > ", "GE": r" \geq ", "LT": " < ", "LE": r" \leq ",
    "EQ": " = ", "NE": r" \neq ",
    "AND": r" \land ", "OR": r" \lor ",
}

_LATEX_FUNC = {
    "LOG": r"\log", "SIN": r"\sin", "COS": r"\cos", "TAN": r"\tan",
    "MIN": r"\min", "MAX": r"\max",
    "ABS": r"\operatorname{abs}", "MOD": r"\operatorname{mod}",
}


def to_latex(expr: ir.Expression) -> str:
    """Render an expression as a LaTeX math-mode string."""
    return _lexpr(expr, 0)


def _latex_name(name: str) -> str:
    # Greek spellings go back to commands and multi-letter subscripts get
    # braces, so the printed form re-tokenizes to the same name.
    head, sep, sub = name.partition("_")
    out = f"\\{head}" if head in ir.GREEK_NAMES else head
    if sep:
        out += f"_{{{sub}}}" if len(sub) > 1 else f"_{sub}"
    return out


def _lexpr(expr: ir.Expression, min_prec: int) -> str:
    if isinstance(expr, ir.Num):
        return expr.text
    if isinstance(expr, ir.Var):
        if expr.indices:
            return f"{expr.name}_{{{','.join(_lexpr(i, 0) for i in expr.indices)}}}"
        return _latex_name(expr.name)
    if isinstance(expr, ir.Call):
        if expr.name == "EXP":
            return f"e^{{{_lexpr(expr.args[0], 0)}}}"
        if expr.name == "SQRT":
            return rf"\sqrt{{{_lexpr(expr.args[0], 0)}}}"
        head = _LATEX_FUNC.get(expr.name, rf"\operatorname{{{expr.name.lower()}}}")
        return f"{head}({', '.join(_lexpr(a, 0) for a in expr.args)})"
    if isinstance(expr, ir.Unary):
        prec = LATEX_PREC[expr.op]
        sym = "-" if expr.op == "NEG" else r"\lnot "
        text = sym + _lexpr(expr.child, prec)
        return f"({text})" if prec < min_prec else text
    if isinstance(expr, ir.Binary):
        if expr.op == "DIV":
            return rf"\frac{{{_lexpr(expr.left, 0)}}}{{{_lexpr(expr.right, 0)}}}"
        if expr.op == "POW":
            base = _lexpr(expr.left, 0)
            if not isinstance(expr.left, (ir.Var, ir.Num)):
                base = f"({base})"
            return f"{base}^{{{_lexpr(expr.right, 0)}}}"
        prec = LATEX_PREC[expr.op]
        text = _lexpr(expr.left, prec) + _LATEX_OP[expr.op] + _lexpr(expr.right, prec + 1)
        return f"({text})" if prec < min_prec else text
    raise TypeError(f"not an expression: {expr!r}")
