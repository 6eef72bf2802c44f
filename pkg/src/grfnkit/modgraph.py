"""Module dependency graph and wavefront schedule.

Nodes are top-level program units; a subprogram contained in a module
counts as part of that module. Edges point from dependent to
dependency. References to units that are not part of the program become
EXTERNAL nodes with an attached warning, so partial corpora still
produce a usable graph.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ir
from .errors import CycleError


@dataclass(frozen=True)
class ModuleDepGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    external: frozenset[str]
    warnings: tuple[ir.Diagnostic, ...]

    def dependencies(self, name: str) -> tuple[str, ...]:
        return tuple(v for u, v in self.edges if u == name)

    def to_json_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [list(e) for e in self.edges],
            "external": sorted(self.external),
            "warnings": [str(w) for w in self.warnings],
        }


@dataclass(frozen=True)
class Schedule:
    levels: tuple[tuple[str, ...], ...]

    @property
    def depth(self) -> int:
        return len(self.levels)

    def to_json_dict(self) -> dict:
        return {"levels": [list(level) for level in self.levels],
                "depth": self.depth}


def merge_programs(programs) -> ir.PairProgram:
    """Concatenate containers from several parsed files into one program."""
    containers: list[ir.Container] = []
    paths: list[str] = []
    for p in programs:
        containers.extend(p.containers)
        if p.path:
            paths.append(p.path)
    return ir.PairProgram(tuple(containers), path=";".join(paths) or None)


def _unit_references(program: ir.PairProgram) -> dict[str, tuple[set[str], set[str]]]:
    """Per top-level unit: (names USEd, names called), children folded in."""
    refs: dict[str, tuple[set[str], set[str]]] = {}
    for c in program.containers:
        owner = c.parent or c.name
        uses, calls = refs.setdefault(owner, (set(), set()))
        uses.update(c.uses)
        for stmt in ir.walk_statements(c.body):
            if isinstance(stmt, ir.CallStmt):
                calls.add(stmt.callee)
            for expr in ir.statement_expressions(stmt):
                calls.update(ir.called_names(expr))
    return refs


def build_dependency_graph(program: ir.PairProgram) -> ModuleDepGraph:
    """Derive the define-use graph between top-level units.

    Raises CycleError (listing one offending node sequence) when the
    dependencies are circular.
    """
    defined_in: dict[str, str] = {}
    for c in program.containers:
        defined_in[c.name] = c.parent or c.name

    units = [c.name for c in program.containers if c.parent is None]
    edges: set[tuple[str, str]] = set()
    external: set[str] = set()
    warnings: list[ir.Diagnostic] = []

    for unit, (uses, calls) in sorted(_unit_references(program).items()):
        for name in sorted(uses | (calls - ir.INTRINSICS)):
            target = defined_in.get(name)
            if target is None:
                external.add(name)
                warnings.append(ir.Diagnostic(
                    ir.SEV_WARNING,
                    f"reference to external unit {name}", unit, 0))
                target = name
            if target != unit:
                edges.add((unit, target))

    nodes = tuple(sorted(set(units) | external))
    graph = ModuleDepGraph(nodes, tuple(sorted(edges)),
                           frozenset(external), tuple(warnings))
    _check_acyclic(graph)
    return graph


def _check_acyclic(graph: ModuleDepGraph) -> None:
    adj: dict[str, list[str]] = {n: [] for n in graph.nodes}
    for u, v in graph.edges:
        adj[u].append(v)

    WHITE, GRAY, BLACK = 0, 1, 2
    color = dict.fromkeys(graph.nodes, WHITE)
    stack: list[str] = []

    def visit(node: str) -> None:
        color[node] = GRAY
        stack.append(node)
        for nxt in adj[node]:
            if color[nxt] == GRAY:
                cycle = stack[stack.index(nxt):]
                raise CycleError(tuple(cycle))
            if color[nxt] == WHITE:
                visit(nxt)
        stack.pop()
        color[node] = BLACK

    for n in graph.nodes:
        if color[n] == WHITE:
            visit(n)


def schedule(graph: ModuleDepGraph) -> Schedule:
    """Partition nodes into wavefronts.

    Level k holds the nodes whose longest path to a sink has k edges, so
    dependencies always land in earlier levels and the number of levels
    equals the longest-path node count.
    """
    adj: dict[str, list[str]] = {n: [] for n in graph.nodes}
    for u, v in graph.edges:
        adj[u].append(v)

    height: dict[str, int] = {}

    def h(node: str) -> int:
        if node not in height:
            height[node] = 1 + max((h(d) for d in adj[node]), default=-1)
        return height[node]

    by_level: dict[int, list[str]] = {}
    for n in graph.nodes:
        by_level.setdefault(h(n), []).append(n)

    levels = tuple(tuple(sorted(by_level[k])) for k in sorted(by_level))
    return Schedule(levels)


def to_dot(graph: ModuleDepGraph) -> str:
    lines = ["digraph modules {"]
    for n in graph.nodes:
        attrs = ' [style=dashed, kind="EXTERNAL"]' if n in graph.external else ""
        lines.append(f'  "{n}"{attrs};')
    for u, v in graph.edges:
        lines.append(f'  "{u}" -> "{v}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
