"""Grounded Function Networks: lowering from PairProgram containers.

A Grfn is a bipartite DAG of variable nodes (name, version, scope) and
function nodes (ASSIGN, CONDITION, DECISION, LOOPBODY). Versioning is
SSA-like: reading a name before any write materializes version 0 (an
unbound input); each write allocates the next version. Branches merge
through DECISION nodes; DO loops become LOOPBODY nodes wrapping a
nested Grfn that the interpreter runs iteratively.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import ir
from .errors import LoweringError, ValidationError
from .render import to_latex

ASSIGN = "ASSIGN"
CONDITION = "CONDITION"
DECISION = "DECISION"
LOOPBODY = "LOOPBODY"

_COND_PREFIX = "cond_"  # lowercase: cannot collide with Fortran identifiers


@dataclass(frozen=True)
class VariableNode:
    name: str
    version: int
    scope: str

    @property
    def id(self) -> str:
        return f"{self.scope}::{self.name}::{self.version}"


@dataclass(frozen=True)
class DecisionSpec:
    """Selector: output takes `then` when `condition` is true, else `orelse`."""
    condition: str
    then: str
    orelse: str


@dataclass(frozen=True)
class LoopSpec:
    loop_id: int
    var: str
    lo: ir.Expression
    hi: ir.Expression
    stride: ir.Expression | None
    body: "Grfn"
    carried: tuple[str, ...]


@dataclass(frozen=True)
class FunctionNode:
    id: str
    kind: str
    inputs: tuple[str, ...]
    output: str
    expression: ir.Expression | None = None
    latex: str | None = None
    decision: DecisionSpec | None = None
    loop: LoopSpec | None = None


@dataclass(frozen=True)
class GroundingRecord:
    variable: tuple[str, str]  # (scope, name)
    description: str
    units: str | None
    source: str  # COMMENT | TEXT | EQUATION
    score: float

    def to_json_dict(self) -> dict:
        return {
            "variable": list(self.variable),
            "description": self.description,
            "units": self.units,
            "source": self.source,
            "score": self.score,
        }


@dataclass(frozen=True)
class Grfn:
    scope: str
    variables: tuple[VariableNode, ...]
    functions: tuple[FunctionNode, ...]
    edges: tuple[tuple[str, str], ...]
    inputs: tuple[str, ...]              # names bound by the caller
    outputs: tuple[tuple[str, int], ...]  # (name, final version)
    groundings: tuple[GroundingRecord, ...] = ()

    def var_id(self, name: str, version: int) -> str:
        return f"{self.scope}::{name}::{version}"

    @property
    def variable_ids(self) -> frozenset[str]:
        return frozenset(v.id for v in self.variables)

    def producer_of(self, var_id: str) -> FunctionNode | None:
        for f in self.functions:
            if f.output == var_id:
                return f
        return None

    def final_version(self, name: str) -> int | None:
        for n, v in self.outputs:
            if n == name:
                return v
        return None

    def with_groundings(self, records) -> "Grfn":
        return replace(self, groundings=self.groundings + tuple(records))

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "scope": self.scope,
            "variables": [
                {"id": v.id, "name": v.name, "version": v.version, "scope": v.scope}
                for v in self.variables
            ],
            "functions": [_function_to_json(f) for f in self.functions],
            "edges": [list(e) for e in self.edges],
            "inputs": list(self.inputs),
            "outputs": [[n, v] for n, v in self.outputs],
            "groundings": [g.to_json_dict() for g in self.groundings],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "Grfn":
        variables = tuple(
            VariableNode(v["name"], v["version"], v["scope"])
            for v in data["variables"]
        )
        specs: dict[int, LoopSpec] = {}
        functions = tuple(_function_from_json(f, specs) for f in data["functions"])
        groundings = tuple(
            GroundingRecord(tuple(g["variable"]), g["description"], g["units"],
                            g["source"], g["score"])
            for g in data.get("groundings", ())
        )
        return Grfn(
            scope=data["scope"],
            variables=variables,
            functions=functions,
            edges=tuple((e[0], e[1]) for e in data["edges"]),
            inputs=tuple(data["inputs"]),
            outputs=tuple((n, v) for n, v in data["outputs"]),
            groundings=groundings,
        )

    def validate(self) -> None:
        """Check the structural invariants; raises ValidationError."""
        ids = [v.id for v in self.variables]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate variable nodes")
        by_name: dict[str, list[int]] = {}
        for v in self.variables:
            by_name.setdefault(v.name, []).append(v.version)
        for name, versions in by_name.items():
            versions.sort()
            if versions != list(range(versions[0], versions[0] + len(versions))) \
                    or versions[0] not in (0, 1):
                raise ValidationError(f"versions of {name} are not consecutive: {versions}")
        produced: set[str] = set()
        for f in self.functions:
            if f.output in produced:
                raise ValidationError(f"{f.output} has two producers")
            produced.add(f.output)
        known = set(ids) | {f.id for f in self.functions}
        for a, b in self.edges:
            for endpoint in (a, b):
                if endpoint not in known:
                    raise ValidationError(f"edge endpoint {endpoint} unknown")
        self._check_dag()

    def _check_dag(self) -> None:
        adj: dict[str, list[str]] = {}
        for a, b in self.edges:
            adj.setdefault(a, []).append(b)
        seen: dict[str, int] = {}

        def visit(node: str, stack: list[str]) -> None:
            seen[node] = 1
            stack.append(node)
            for nxt in adj.get(node, ()):
                if seen.get(nxt) == 1:
                    raise ValidationError(f"cycle through {nxt}")
                if nxt not in seen:
                    visit(nxt, stack)
            stack.pop()
            seen[node] = 2

        for node in list(adj):
            if node not in seen:
                visit(node, [])


# ---------------------------------------------------------------------------
# Prefix s-expressions (the JSON form of expressions)

_SEXPR_OPS = {
    "ADD": "+", "SUB": "-", "MUL": "*", "DIV": "/", "POW": "**",
    "GT": ">", "GE": ">=", "LT": "<", "LE": "<=", "EQ": "==", "NE": "/=",
    "AND": "and", "OR": "or",
}
_SEXPR_HEADS = {v: k for k, v in _SEXPR_OPS.items()}


def to_sexpr(expr: ir.Expression) -> str:
    if isinstance(expr, ir.Num):
        return expr.text
    if isinstance(expr, ir.Var):
        if expr.indices:
            parts = " ".join(to_sexpr(i) for i in expr.indices)
            return f"(index {expr.name} {parts})"
        return expr.name
    if isinstance(expr, ir.Unary):
        head = "neg" if expr.op == "NEG" else "not"
        return f"({head} {to_sexpr(expr.child)})"
    if isinstance(expr, ir.Binary):
        return f"({_SEXPR_OPS[expr.op]} {to_sexpr(expr.left)} {to_sexpr(expr.right)})"
    if isinstance(expr, ir.Call):
        if not expr.args:
            return f"({expr.name})"
        parts = " ".join(to_sexpr(a) for a in expr.args)
        return f"({expr.name} {parts})"
    raise TypeError(f"not an expression: {expr!r}")


def _sexpr_tokens(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


_NUM_ATOM = None  # compiled lazily to keep import light


def parse_sexpr(text: str) -> ir.Expression:
    global _NUM_ATOM
    if _NUM_ATOM is None:
        import re
        _NUM_ATOM = re.compile(r"(?:\d+\.\d*|\.\d+|\d+)(?:[EDed][+-]?\d+)?$")

    tokens = _sexpr_tokens(text)
    pos = 0

    def parse() -> ir.Expression:
        nonlocal pos
        if pos >= len(tokens):
            raise ValidationError(f"truncated s-expression: {text!r}")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            head = tokens[pos]
            pos += 1
            args: list[ir.Expression] = []
            while tokens[pos] != ")":
                args.append(parse())
            pos += 1
            if head in _SEXPR_HEADS:
                if len(args) != 2:
                    raise ValidationError(f"operator {head} needs 2 operands")
                return ir.Binary(_SEXPR_HEADS[head], args[0], args[1])
            if head == "neg":
                return ir.Unary("NEG", args[0])
            if head == "not":
                return ir.Unary("NOT", args[0])
            if head == "index":
                base = args[0]
                if not isinstance(base, ir.Var):
                    raise ValidationError("index target must be a name")
                return ir.Var(base.name, tuple(args[1:]))
            return ir.Call(head, tuple(args))
        if tok == ")":
            raise ValidationError(f"unbalanced s-expression: {text!r}")
        if _NUM_ATOM.match(tok):
            return ir.Num(tok)
        return ir.Var(tok)

    expr = parse()
    if pos != len(tokens):
        raise ValidationError(f"trailing tokens in s-expression: {text!r}")
    return expr


def _function_to_json(f: FunctionNode) -> dict:
    entry = {
        "id": f.id,
        "kind": f.kind,
        "latex": f.latex,
        "inputs": list(f.inputs),
        "output": f.output,
        "expression": None,
    }
    if f.kind in (ASSIGN, CONDITION):
        entry["expression"] = to_sexpr(f.expression)
    elif f.kind == DECISION:
        d = f.decision
        entry["expression"] = f"(select {d.condition} {d.then} {d.orelse})"
    elif f.kind == LOOPBODY:
        s = f.loop
        entry["loop"] = {
            "loop_id": s.loop_id,
            "var": s.var,
            "lo": to_sexpr(s.lo),
            "hi": to_sexpr(s.hi),
            "stride": to_sexpr(s.stride) if s.stride is not None else None,
            "carried": list(s.carried),
            "body": s.body.to_json_dict(),
        }
    return entry


def _function_from_json(data: dict, specs: dict[int, LoopSpec]) -> FunctionNode:
    kind = data["kind"]
    expression = None
    decision = None
    loop = None
    if kind in (ASSIGN, CONDITION):
        expression = parse_sexpr(data["expression"])
    elif kind == DECISION:
        parts = data["expression"].strip("()").split()
        if len(parts) != 4 or parts[0] != "select":
            raise ValidationError(f"bad decision selector: {data['expression']!r}")
        decision = DecisionSpec(parts[1], parts[2], parts[3])
    elif kind == LOOPBODY:
        raw = data["loop"]
        loop = specs.get(raw["loop_id"])
        if loop is None:
            loop = LoopSpec(
                loop_id=raw["loop_id"],
                var=raw["var"],
                lo=parse_sexpr(raw["lo"]),
                hi=parse_sexpr(raw["hi"]),
                stride=parse_sexpr(raw["stride"]) if raw["stride"] else None,
                body=Grfn.from_json_dict(raw["body"]),
                carried=tuple(raw["carried"]),
            )
            specs[raw["loop_id"]] = loop
    else:
        raise ValidationError(f"unknown function kind {kind!r}")
    return FunctionNode(
        id=data["id"], kind=kind, inputs=tuple(data["inputs"]),
        output=data["output"], expression=expression, latex=data.get("latex"),
        decision=decision, loop=loop,
    )


# ---------------------------------------------------------------------------
# Lowering

class _Lowerer:
    def __init__(self, scope: str):
        self.scope = scope
        self.env: dict[str, int] = {}       # name -> latest readable version
        self.counters: dict[str, int] = {}  # name -> highest allocated version
        self.variables: list[VariableNode] = []
        self.var_ids: set[str] = set()
        self.functions: list[FunctionNode] = []
        self.written: set[str] = set()
        self.write_log: list[str] = []
        self.synthetic: set[str] = set()
        self.cond_count = 0
        self.loop_count = 0

    # -- variable bookkeeping ------------------------------------------------

    def _add_var(self, name: str, version: int) -> str:
        node = VariableNode(name, version, self.scope)
        if node.id not in self.var_ids:
            self.var_ids.add(node.id)
            self.variables.append(node)
        return node.id

    def read(self, name: str) -> str:
        if name not in self.env:
            self.env[name] = 0
            self.counters.setdefault(name, 0)
            return self._add_var(name, 0)
        return self._add_var(name, self.env[name])

    def pre_version(self, name: str, snapshot: dict[str, int]) -> str:
        """Version visible before a construct; materializes version 0."""
        if name in snapshot:
            return self._add_var(name, snapshot[name])
        self.counters.setdefault(name, 0)
        return self._add_var(name, 0)

    def write(self, name: str) -> str:
        version = self.counters.get(name, 0) + 1
        self.counters[name] = version
        self.env[name] = version
        self.written.add(name)
        self.write_log.append(name)
        return self._add_var(name, version)

    def _next_function_id(self, kind: str) -> str:
        return f"{self.scope}::{kind}::{len(self.functions)}"

    def _emit(self, kind: str, inputs, output, **kw) -> FunctionNode:
        node = FunctionNode(self._next_function_id(kind), kind,
                            tuple(inputs), output, **kw)
        self.functions.append(node)
        return node

    # -- statements ----------------------------------------------------------

    def lower_statements(self, stmts: tuple[ir.Statement, ...], top: bool) -> None:
        for i, stmt in enumerate(stmts):
            if isinstance(stmt, ir.Return):
                if top and i == len(stmts) - 1:
                    continue  # trailing RETURN is a no-op in dataflow terms
                raise LoweringError(f"early RETURN at line {stmt.line} has no "
                                    "dataflow encoding")
            self.lower_statement(stmt)

    def lower_statement(self, stmt: ir.Statement) -> None:
        if isinstance(stmt, ir.Assign):
            self.lower_assign(stmt)
        elif isinstance(stmt, ir.If):
            self.lower_if(stmt)
        elif isinstance(stmt, ir.Do):
            self.lower_do(stmt)
        elif isinstance(stmt, ir.OpaqueIO):
            pass  # I/O carries no dataflow; nothing can read from it
        elif isinstance(stmt, ir.CallStmt):
            raise LoweringError(f"CALL {stmt.callee} at line {stmt.line}: "
                                "subroutine calls cannot be lowered to a "
                                "single-container network")
        else:
            raise LoweringError(f"cannot lower {type(stmt).__name__}")

    def _expr_inputs(self, expr: ir.Expression) -> tuple[str, ...]:
        user_calls = ir.called_names(expr) - ir.INTRINSICS
        if user_calls:
            raise LoweringError(
                f"call to {sorted(user_calls)[0]} inside an expression cannot "
                "be lowered")
        for v in _vars_in(expr):
            if v.indices:
                raise LoweringError(f"array reference {v.name}(...) has no "
                                    "scalar dataflow encoding")
        return tuple(self.read(name) for name in sorted(ir.free_vars(expr)))

    def lower_assign(self, stmt: ir.Assign) -> None:
        if stmt.target.indices:
            raise LoweringError(f"array assignment to {stmt.target.name} at "
                                f"line {stmt.line} is not supported")
        inputs = self._expr_inputs(stmt.rhs)
        out = self.write(stmt.target.name)
        latex = f"{to_latex(ir.Var(stmt.target.name))} = {to_latex(stmt.rhs)}"
        self._emit(ASSIGN, inputs, out, expression=stmt.rhs, latex=latex)

    def lower_if(self, stmt: ir.If) -> None:
        inputs = self._expr_inputs(stmt.cond)
        cond_name = f"{_COND_PREFIX}{self.cond_count}"
        self.cond_count += 1
        self.synthetic.add(cond_name)
        cond_id = self.write(cond_name)
        self._emit(CONDITION, inputs, cond_id, expression=stmt.cond,
                   latex=to_latex(stmt.cond))

        before = dict(self.env)
        mark = len(self.write_log)
        self.lower_statements(stmt.then, top=False)
        env_then = dict(self.env)

        self.env = dict(before)
        self.lower_statements(stmt.orelse, top=False)
        env_else = dict(self.env)

        changed = sorted(set(self.write_log[mark:]) - self.synthetic)
        self.env = dict(before)
        for name in changed:
            then_id = (self._add_var(name, env_then[name]) if name in env_then
                       else self.pre_version(name, before))
            else_id = (self._add_var(name, env_else[name]) if name in env_else
                       else self.pre_version(name, before))
            out = self.write(name)
            self._emit(DECISION, (cond_id, then_id, else_id), out,
                       decision=DecisionSpec(cond_id, then_id, else_id))

    def lower_do(self, stmt: ir.Do) -> None:
        loop_id = self.loop_count
        self.loop_count += 1

        assigned = _assigned_names(stmt.body)
        if stmt.var in assigned:
            raise LoweringError(f"loop body reassigns the DO variable {stmt.var}")

        inner = _Lowerer(f"{self.scope}.loop_{loop_id}")
        inner.lower_statements(stmt.body, top=False)
        body = inner.finish()

        carried = tuple(sorted(assigned))
        bound_names: set[str] = set()
        for e in (stmt.lo, stmt.hi, stmt.stride):
            if e is not None:
                bound_names |= ir.free_vars(e)
        outer_reads = sorted(
            (bound_names | (set(body.inputs) - {stmt.var}) | set(carried)))
        before = dict(self.env)
        input_ids = tuple(
            self.read(n) if n in self.env or n not in carried
            else self.pre_version(n, before)
            for n in outer_reads
        )

        spec = LoopSpec(loop_id, stmt.var, stmt.lo, stmt.hi, stmt.stride,
                        body, carried)
        for name in carried + (stmt.var,):
            out = self.write(name)
            self._emit(LOOPBODY, input_ids, out, loop=spec)

    def finish(self) -> Grfn:
        produced = {f.output for f in self.functions}
        edges: list[tuple[str, str]] = []
        for f in self.functions:
            for vid in f.inputs:
                edges.append((vid, f.id))
            edges.append((f.id, f.output))
        inputs = tuple(sorted(
            v.name for v in self.variables
            if v.version == 0 and v.id not in produced
        ))
        outputs = tuple(
            (name, self.env[name])
            for name in sorted(self.written)
            if name not in self.synthetic
        )
        return Grfn(
            scope=self.scope,
            variables=tuple(self.variables),
            functions=tuple(self.functions),
            edges=tuple(edges),
            inputs=inputs,
            outputs=outputs,
        )


def _vars_in(expr: ir.Expression):
    if isinstance(expr, ir.Var):
        yield expr
        for i in expr.indices:
            yield from _vars_in(i)
    elif isinstance(expr, ir.Unary):
        yield from _vars_in(expr.child)
    elif isinstance(expr, ir.Binary):
        yield from _vars_in(expr.left)
        yield from _vars_in(expr.right)
    elif isinstance(expr, ir.Call):
        for a in expr.args:
            yield from _vars_in(a)


def _assigned_names(stmts: tuple[ir.Statement, ...]) -> set[str]:
    out: set[str] = set()
    for s in ir.walk_statements(stmts):
        if isinstance(s, ir.Assign):
            out.add(s.target.name)
        elif isinstance(s, ir.Do):
            out.add(s.var)
    return out


def lower(container: ir.Container) -> Grfn:
    """Lower one SUBROUTINE/FUNCTION/PROGRAM container to a Grfn."""
    if container.kind == ir.MODULE:
        raise LoweringError(f"MODULE {container.name} has no executable body; "
                            "lower its contained subprograms instead")
    lowerer = _Lowerer(container.name)
    lowerer.lower_statements(container.body, top=True)
    grfn = lowerer.finish()
    grfn.validate()
    return grfn


# ---------------------------------------------------------------------------
# DOT rendering

def to_dot(grfn: Grfn, classes: dict[str, str] | None = None) -> str:
    """Graphviz text: variables as ellipses, functions as boxes.

    `classes` optionally maps node ids to fill colors (the comparison
    module uses this to paint overlap classes).
    """
    palette = classes or {}
    lines = ["digraph grfn {", "  rankdir=LR;"]
    for v in grfn.variables:
        extra = ""
        if v.id in palette:
            extra = f', style=filled, fillcolor="{palette[v.id]}"'
        lines.append(f'  "{v.id}" [shape=ellipse, label="{v.name}:{v.version}"{extra}];')
    for f in grfn.functions:
        label = f.kind if not f.latex else f"{f.kind}\\n{_dot_escape(f.latex)}"
        extra = ""
        if f.id in palette:
            extra = f', style=filled, fillcolor="{palette[f.id]}"'
        lines.append(f'  "{f.id}" [shape=box, label="{label}"{extra}];')
    for a, b in grfn.edges:
        lines.append(f'  "{a}" -> "{b}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')
