"""Structural comparison of two models.

Variables are matched by name and grounding description, then every
node of each graph is placed in one of four classes relative to the
matched set: SHARED (the matched variables themselves), PATH (on a
directed path between two shared nodes), CONTROL (feeding directly into
the shared/path region), or ISOLATED.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import ValidationError
from .grfn import Grfn, _dot_escape
from .grounding import COMMENT, pair_score

SHARED = "SHARED"
PATH = "PATH"
CONTROL = "CONTROL"
ISOLATED = "ISOLATED"
CLASSES = (SHARED, PATH, CONTROL, ISOLATED)

CLASS_COLORS = {
    SHARED: "blue",
    PATH: "black",
    CONTROL: "green",
    ISOLATED: "orange",
}


@dataclass(frozen=True)
class ComparisonReport:
    shared: tuple[tuple[str, str, float], ...]
    classes_a: dict[str, str]
    classes_b: dict[str, str]
    scope_a: str
    scope_b: str

    def summary(self, classes: dict[str, str]) -> dict[str, int]:
        counts = {c: 0 for c in CLASSES}
        for c in classes.values():
            counts[c] += 1
        return counts

    def to_json_dict(self) -> dict:
        return {
            "shared": [[a, b, s] for a, b, s in self.shared],
            "a": {
                "scope": self.scope_a,
                "classes": dict(sorted(self.classes_a.items())),
                "summary": self.summary(self.classes_a),
            },
            "b": {
                "scope": self.scope_b,
                "classes": dict(sorted(self.classes_b.items())),
                "summary": self.summary(self.classes_b),
            },
        }


def _names(grfn: Grfn) -> list[str]:
    synthetic = {f.output.split("::")[1] for f in grfn.functions
                 if f.kind == "CONDITION"}
    return sorted({v.name for v in grfn.variables} - synthetic)


def _descriptions(grfn: Grfn) -> dict[str, str]:
    out: dict[str, str] = {}
    for record in grfn.groundings:
        if record.source == COMMENT:
            out.setdefault(record.variable[1], record.description)
    for record in grfn.groundings:
        out.setdefault(record.variable[1], record.description)
    return out


def shared_variables(a: Grfn, b: Grfn, threshold: float = 0.5):
    """Injective name matching between two models.

    Candidate pairs are scored like align_symbols and taken greedily
    from the best score down, so each name lands in at most one pair.
    Returns (name_in_a, name_in_b, score) triples sorted by a-name.
    """
    desc_a, desc_b = _descriptions(a), _descriptions(b)
    candidates = []
    for na in _names(a):
        for nb in _names(b):
            score = pair_score(na, nb, desc_a.get(na, ""), desc_b.get(nb, ""))
            if score >= threshold:
                candidates.append((-score, na, nb))
    candidates.sort()
    used_a: set[str] = set()
    used_b: set[str] = set()
    pairs = []
    for neg_score, na, nb in candidates:
        if na in used_a or nb in used_b:
            continue
        used_a.add(na)
        used_b.add(nb)
        pairs.append((na, nb, -neg_score))
    return tuple(sorted(pairs))


def _reachable(start, adjacency) -> set[str]:
    seen = set()
    queue = deque(start)
    while queue:
        node = queue.popleft()
        for nxt in adjacency.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def classify_nodes(grfn: Grfn, shared) -> dict[str, str]:
    """Place every node id of grfn into one of the four classes.

    `shared` holds variable node ids. PATH nodes sit on a directed path
    from one shared node to another; CONTROL nodes feed directly into
    SHARED or PATH nodes (the producer of a CONTROL variable is pulled
    in with it); the rest are ISOLATED. Loop nodes are classified as
    single opaque nodes, their bodies are not traversed.
    """
    shared = set(shared)
    unknown = shared - grfn.variable_ids
    if unknown:
        raise ValidationError(f"shared ids not in graph: {sorted(unknown)}")

    nodes = set(grfn.variable_ids) | {f.id for f in grfn.functions}
    succ: dict[str, list[str]] = {}
    pred: dict[str, list[str]] = {}
    for src, dst in grfn.edges:
        succ.setdefault(src, []).append(dst)
        pred.setdefault(dst, []).append(src)

    descendants = _reachable(shared, succ)
    ancestors = _reachable(shared, pred)
    path = (descendants & ancestors) - shared
    region = shared | path

    control = {n for n in nodes - region
               if any(v in region for v in succ.get(n, ()))}
    for var_id in sorted(control & grfn.variable_ids):
        producer = grfn.producer_of(var_id)
        if producer is not None and producer.id not in region:
            control.add(producer.id)

    classes = {}
    for n in nodes:
        if n in shared:
            classes[n] = SHARED
        elif n in path:
            classes[n] = PATH
        elif n in control:
            classes[n] = CONTROL
        else:
            classes[n] = ISOLATED
    return classes


def _all_versions(grfn: Grfn, names) -> set[str]:
    wanted = set(names)
    return {v.id for v in grfn.variables if v.name in wanted}


def structural_compare(a: Grfn, b: Grfn, threshold: float = 0.5) -> ComparisonReport:
    """Match variables, then classify both node sets around the overlap.

    Every version of a matched name counts as SHARED on its side.
    """
    pairs = shared_variables(a, b, threshold)
    shared_a = _all_versions(a, (na for na, _, _ in pairs))
    shared_b = _all_versions(b, (nb for _, nb, _ in pairs))
    return ComparisonReport(
        shared=pairs,
        classes_a=classify_nodes(a, shared_a),
        classes_b=classify_nodes(b, shared_b),
        scope_a=a.scope,
        scope_b=b.scope,
    )


def _render_side(grfn: Grfn, classes: dict[str, str], tag: str) -> list[str]:
    lines = [f'  subgraph cluster_{tag} {{', f'    label="{grfn.scope}";']
    for v in grfn.variables:
        color = CLASS_COLORS[classes[v.id]]
        lines.append(f'    "{tag}|{v.id}" [shape=ellipse, label="{v.name}:{v.version}", '
                     f'color={color}, class="{classes[v.id]}"];')
    for f in grfn.functions:
        label = f.kind if not f.latex else f"{f.kind}\\n{_dot_escape(f.latex)}"
        color = CLASS_COLORS[classes[f.id]]
        lines.append(f'    "{tag}|{f.id}" [shape=box, label="{label}", '
                     f'color={color}, class="{classes[f.id]}"];')
    for src, dst in grfn.edges:
        lines.append(f'    "{tag}|{src}" -> "{tag}|{dst}";')
    lines.append("  }")
    return lines


def comparison_dot(a: Grfn, b: Grfn, report: ComparisonReport) -> str:
    """Both graphs in one DOT file, nodes outlined by class color."""
    lines = ["digraph comparison {", "  rankdir=LR;"]
    lines += _render_side(a, report.classes_a, "a")
    lines += _render_side(b, report.classes_b, "b")
    lines.append("}")
    return "\n".join(lines) + "\n"
