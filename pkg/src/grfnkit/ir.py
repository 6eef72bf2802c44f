"""Language-independent program IR: containers, statements, expression trees.

Parsed source is held as immutable trees so that analyses can share a
program across threads without copying. Structural equality ignores
comments and source positions; see the ``compare=False`` fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

# Container kinds
PROGRAM = "PROGRAM"
SUBROUTINE = "SUBROUTINE"
FUNCTION = "FUNCTION"
MODULE = "MODULE"
CONTAINER_KINDS = frozenset({PROGRAM, SUBROUTINE, FUNCTION, MODULE})

# Declared base types
REAL = "REAL"
INTEGER = "INTEGER"
LOGICAL = "LOGICAL"
BASE_TYPES = frozenset({REAL, INTEGER, LOGICAL})

# Binary operator tags
ARITH_OPS = ("ADD", "SUB", "MUL", "DIV", "POW")
REL_OPS = ("GT", "GE", "LT", "LE", "EQ", "NE")
LOGIC_OPS = ("AND", "OR")
BINARY_OPS = frozenset(ARITH_OPS + REL_OPS + LOGIC_OPS)
UNARY_OPS = frozenset({"NEG", "NOT"})

INTRINSICS = frozenset(
    {"EXP", "LOG", "SIN", "COS", "TAN", "SQRT", "ABS", "MIN", "MAX", "MOD"}
)

# Greek letter spellings, both cases. The LaTeX tokenizer maps \rho to the
# name "rho" and the renderer maps it back, so variable names built from
# these spellings survive a print/parse cycle.
_GREEK_LOWER = {
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "iota", "kappa", "lambda", "mu", "nu", "xi", "pi", "rho", "sigma",
    "tau", "upsilon", "phi", "chi", "psi", "omega",
}
GREEK_NAMES = frozenset(_GREEK_LOWER | {g.capitalize() for g in _GREEK_LOWER})

# Comment placements
HEADER = "HEADER"
INLINE = "INLINE"
TRAILING = "TRAILING"


# ---------------------------------------------------------------------------
# Expressions

@dataclass(frozen=True)
class Num:
    """Numeric literal kept as its exact decimal spelling."""

    text: str

    @property
    def value(self) -> float:
        # Fortran double-precision exponents use D where Python wants E.
        return float(self.text.replace("D", "E").replace("d", "e"))


@dataclass(frozen=True)
class Var:
    """Variable reference, optionally indexed (array element)."""

    name: str
    indices: tuple["Expression", ...] = ()


@dataclass(frozen=True)
class Unary:
    op: str  # NEG | NOT
    child: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str  # member of BINARY_OPS
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    """Intrinsic or user function reference in expression position."""

    name: str
    args: tuple["Expression", ...]


Expression = Num | Var | Unary | Binary | Call


# ---------------------------------------------------------------------------
# Statements

@dataclass(frozen=True)
class Assign:
    target: Var
    rhs: Expression
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    cond: Expression
    then: tuple["Statement", ...]
    orelse: tuple["Statement", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Do:
    var: str
    lo: Expression
    hi: Expression
    stride: Expression | None
    body: tuple["Statement", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CallStmt:
    callee: str
    args: tuple[Expression, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Return:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class OpaqueIO:
    """I/O statement retained verbatim; contributes no dataflow."""

    text: str
    line: int = field(default=0, compare=False)


Statement = Assign | If | Do | CallStmt | Return | OpaqueIO


# ---------------------------------------------------------------------------
# Containers and programs

@dataclass(frozen=True)
class CommentBlock:
    """Contiguous comment lines anchored to a source line.

    ``anchor`` is the 1-based line number of the code line the block
    precedes (HEADER), sits on (INLINE), or trails (TRAILING).
    """

    lines: tuple[str, ...]
    anchor: int
    placement: str  # HEADER | INLINE | TRAILING


@dataclass(frozen=True)
class Declaration:
    name: str
    base_type: str  # REAL | INTEGER | LOGICAL
    dims: tuple[Expression, ...] = ()  # empty for scalars

    @property
    def is_array(self) -> bool:
        return bool(self.dims)


@dataclass(frozen=True)
class Container:
    name: str
    kind: str  # member of CONTAINER_KINDS
    params: tuple[str, ...]
    locals: tuple[Declaration, ...]
    body: tuple[Statement, ...]
    comments: tuple[CommentBlock, ...] = field(default=(), compare=False)
    uses: tuple[str, ...] = ()
    parent: str | None = None  # enclosing module, for units under CONTAINS

    def declared_names(self) -> frozenset[str]:
        return frozenset(d.name for d in self.locals)


@dataclass(frozen=True)
class PairProgram:
    containers: tuple[Container, ...]
    path: str | None = field(default=None, compare=False)

    def container(self, name: str) -> Container:
        wanted = name.upper()
        for c in self.containers:
            if c.name == wanted:
                return c
        raise KeyError(name)

    @property
    def source_map(self) -> dict[str, tuple[str | None, int]]:
        """Statement id -> (file, line) for every statement, depth first."""
        out: dict[str, tuple[str | None, int]] = {}
        for c in self.containers:
            _walk_lines(c.body, f"{c.name}", self.path, out)
        return out


def _walk_lines(stmts, prefix, path, out) -> None:
    for i, s in enumerate(stmts):
        sid = f"{prefix}[{i}]"
        out[sid] = (path, s.line)
        if isinstance(s, If):
            _walk_lines(s.then, sid + ".then", path, out)
            _walk_lines(s.orelse, sid + ".else", path, out)
        elif isinstance(s, Do):
            _walk_lines(s.body, sid + ".body", path, out)


# ---------------------------------------------------------------------------
# Expression helpers

def free_vars(expr: Expression) -> frozenset[str]:
    """Names of all variables referenced anywhere in the expression."""
    out: set[str] = set()
    _collect_vars(expr, out)
    return frozenset(out)


def _collect_vars(expr: Expression, out: set[str]) -> None:
    if isinstance(expr, Num):
        return
    if isinstance(expr, Var):
        out.add(expr.name)
        for ix in expr.indices:
            _collect_vars(ix, out)
    elif isinstance(expr, Unary):
        _collect_vars(expr.child, out)
    elif isinstance(expr, Binary):
        _collect_vars(expr.left, out)
        _collect_vars(expr.right, out)
    elif isinstance(expr, Call):
        for a in expr.args:
            _collect_vars(a, out)
    else:  # pragma: no cover - guarded by type unions
        raise TypeError(f"not an expression: {expr!r}")


def called_names(expr: Expression) -> frozenset[str]:
    """Names used in call position (intrinsics included)."""
    out: set[str] = set()

    def walk(e: Expression) -> None:
        if isinstance(e, Call):
            out.add(e.name)
            for a in e.args:
                walk(a)
        elif isinstance(e, Var):
            for ix in e.indices:
                walk(ix)
        elif isinstance(e, Unary):
            walk(e.child)
        elif isinstance(e, Binary):
            walk(e.left)
            walk(e.right)

    walk(expr)
    return frozenset(out)


def walk_statements(stmts: tuple[Statement, ...]):
    """Yield every statement, depth first, including nested bodies."""
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from walk_statements(s.then)
            yield from walk_statements(s.orelse)
        elif isinstance(s, Do):
            yield from walk_statements(s.body)


def statement_expressions(stmt: Statement):
    """Expressions evaluated directly by a statement (not nested bodies)."""
    if isinstance(stmt, Assign):
        yield from stmt.target.indices
        yield stmt.rhs
    elif isinstance(stmt, If):
        yield stmt.cond
    elif isinstance(stmt, Do):
        yield stmt.lo
        yield stmt.hi
        if stmt.stride is not None:
            yield stmt.stride
    elif isinstance(stmt, CallStmt):
        yield from stmt.args


# ---------------------------------------------------------------------------
# Validation

SEV_ERROR = "ERROR"
SEV_WARNING = "WARNING"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    container: str | None = None
    line: int = 0

    def __str__(self) -> str:
        where = f"{self.container or '<program>'}:{self.line}"
        return f"{self.severity} {where}: {self.message}"


def validate(program: PairProgram) -> list[Diagnostic]:
    """Check container invariants; an empty result means the program is clean.

    Diagnostics are emitted in a deterministic order: container order,
    then statement order within a container.
    """
    diags: list[Diagnostic] = []

    seen: dict[str, int] = {}
    for c in program.containers:
        if c.name in seen:
            diags.append(Diagnostic(SEV_ERROR, f"duplicate container name {c.name}", c.name))
        seen[c.name] = seen.get(c.name, 0) + 1

    unit_names = frozenset(c.name for c in program.containers)
    module_decls: dict[str, frozenset[str]] = {
        c.name: c.declared_names() for c in program.containers if c.kind == MODULE
    }

    for c in program.containers:
        declared = set(c.declared_names())
        declared.add(c.name)  # FUNCTION result variable
        missing_modules = False
        for m in c.uses:
            if m in module_decls:
                declared |= module_decls[m]
            else:
                missing_modules = True
                diags.append(
                    Diagnostic(SEV_WARNING, f"used module {m} is not part of the program", c.name)
                )

        for p in c.params:
            if p not in c.declared_names():
                diags.append(Diagnostic(SEV_ERROR, f"parameter {p} has no declaration", c.name))

        known = declared | unit_names | INTRINSICS
        sev = SEV_WARNING if missing_modules else SEV_ERROR
        for stmt in walk_statements(c.body):
            names: set[str] = set()
            if isinstance(stmt, Assign):
                names.add(stmt.target.name)
            if isinstance(stmt, Do):
                names.add(stmt.var)
            for e in statement_expressions(stmt):
                names |= free_vars(e)
                names |= called_names(e)
            for n in sorted(names - known):
                diags.append(
                    Diagnostic(sev, f"undeclared identifier {n}", c.name, stmt.line)
                )

    return diags


# ---------------------------------------------------------------------------
# Debug serialization (snake_case JSON mirror of the dataclasses)

def to_debug_dict(obj) -> object:
    """Recursively convert IR dataclasses to plain dicts with a node tag."""
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    if isinstance(obj, (list, tuple)):
        return [to_debug_dict(x) for x in obj]
    if hasattr(obj, "__dataclass_fields__"):
        d: dict[str, object] = {"node": type(obj).__name__.lower()}
        for f in fields(obj):
            d[f.name] = to_debug_dict(getattr(obj, f.name))
        return d
    raise TypeError(f"cannot serialize {type(obj).__name__}")
