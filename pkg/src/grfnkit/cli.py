"""Command line interface.

One subcommand per pipeline stage; every artifact is written through a
temp-file rename so an error exit never leaves a partial file. Exit
codes: 0 success, 1 runtime failure (domain errors, unbound inputs),
2 malformed input (parse or validation errors, reported with a source
position where one exists).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import (compare, equations, fileio, fortran, grfn, grounding,
               modgraph, sensitivity)
from . import ir
from .errors import ExecutionError, GrfnkitError, ValidationError


def _load_json(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ValidationError(f"cannot read {path}: {err.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ValidationError(f"{path}:{err.lineno}: {err.msg}") from None


def _load_grfn(path: str) -> grfn.Grfn:
    return grfn.Grfn.from_json_dict(_load_json(path))


def _write_json(path: str, obj: dict) -> None:
    fileio.atomic_write_text(path, fileio.dump_json(obj))


def _parse_fortran(path: str) -> ir.PairProgram:
    return fortran.parse_source(fortran.read_source_file(path), path=str(path))


def _pick_unit(program: ir.PairProgram, wanted: str | None) -> ir.Container:
    if wanted is not None:
        name = wanted.upper()
        for c in program.containers:
            if c.name == name:
                return c
        raise ValidationError(f"no unit named {wanted} in {program.path}")
    candidates = [c for c in program.containers
                  if c.kind != ir.MODULE and c.parent is None]
    if len(candidates) == 1:
        return candidates[0]
    names = ", ".join(c.name for c in candidates) or "none"
    raise ValidationError(
        f"{program.path}: expected one top-level unit, found {names}; use --unit")


def _grfn_names(network: grfn.Grfn) -> tuple[str, ...]:
    synthetic = {f.output.split("::")[1] for f in network.functions
                 if f.kind == grfn.CONDITION}
    return tuple(sorted({v.name for v in network.variables} - synthetic))


# ---------------------------------------------------------------------------
# Subcommands

def _cmd_translate(args) -> str:
    program = _parse_fortran(args.source)
    unit = _pick_unit(program, args.unit)
    network = grfn.lower(unit)
    _write_json(args.out, network.to_json_dict())
    if args.dot:
        fileio.atomic_write_text(args.dot, grfn.to_dot(network))
    return (f"translate: {network.scope}: {len(network.variables)} variables, "
            f"{len(network.functions)} functions -> {args.out}")


def _cmd_schedule(args) -> str:
    programs = [_parse_fortran(p) for p in args.sources]
    merged = modgraph.merge_programs(programs)
    graph = modgraph.build_dependency_graph(merged)
    plan = modgraph.schedule(graph)
    for warning in graph.warnings:
        print(warning, file=sys.stderr)
    payload = graph.to_json_dict()
    payload.update(plan.to_json_dict())
    _write_json(args.out, payload)
    if args.dot:
        fileio.atomic_write_text(args.dot, modgraph.to_dot(graph))
    return (f"schedule: {len(graph.nodes)} units in {plan.depth} levels "
            f"-> {args.out}")


def _cmd_ground(args) -> str:
    network = _load_grfn(args.grfn)
    program = _parse_fortran(args.comments)
    records = [r for c in program.containers
               for r in grounding.container_records(c)]
    mentions = grounding.read_mentions(args.mentions) if args.mentions else ()
    grounded, report = grounding.ground(network, records, mentions,
                                        threshold=args.threshold)
    _write_json(args.out, grounded.to_json_dict())
    return (f"ground: attached {report.attached} records, "
            f"{len(report.unresolved)} unresolved -> {args.out}")


def _cmd_equation(args) -> str:
    network = _load_grfn(args.grfn)
    hints = equations.SymbolHints(known_identifiers=_grfn_names(network))
    parsed = equations.load_equations(args.equations, hints)
    matches = []
    for eq in parsed:
        report = grounding.match_equation(eq, network)
        entry = {"source": eq.source, "lhs": eq.lhs}
        entry.update(report.to_json_dict())
        entry["warnings"] = [str(w) for w in eq.warnings]
        matches.append(entry)
    _write_json(args.out, {"scope": network.scope, "matches": matches})
    verdicts = ", ".join(f"{m['lhs']}: {m['verdict']}" for m in matches)
    return f"equation: {len(matches)} equations ({verdicts}) -> {args.out}"


def _cmd_compare(args) -> str:
    left = _load_grfn(args.a)
    right = _load_grfn(args.b)
    report = compare.structural_compare(left, right)
    _write_json(args.out, report.to_json_dict())
    if args.dot:
        fileio.atomic_write_text(args.dot,
                                 compare.comparison_dot(left, right, report))
    return (f"compare: {left.scope} vs {right.scope}, "
            f"{len(report.shared)} shared variables -> {args.out}")


def _cmd_sensitivity(args) -> str:
    network = _load_grfn(args.grfn)
    bounds = sensitivity.Bounds.from_json_dict(_load_json(args.bounds))
    report = sensitivity.sobol_indices(network, args.output, bounds,
                                       n=args.n, seed=args.seed)
    _write_json(args.out, report.to_json_dict())
    if args.surface:
        surface = sensitivity.top_pair_surface(network, args.output, bounds,
                                               report, grid=args.grid)
        fileio.atomic_write_text(args.surface, surface.to_csv())
    pair = ", ".join(report.top_pair)
    return (f"sensitivity: {args.output} over {len(report.columns)} inputs, "
            f"top pair ({pair}) -> {args.out}")


# ---------------------------------------------------------------------------
# Wiring

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grfnkit",
        description="Lift Fortran models into function networks and analyze them.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("translate", help="lower one source unit to a network")
    p.add_argument("source", help="Fortran source file")
    p.add_argument("--out", required=True, help="output network JSON")
    p.add_argument("--dot", help="also write a Graphviz rendering")
    p.add_argument("--unit", help="unit name when the file has several")
    p.set_defaults(func=_cmd_translate)

    p = sub.add_parser("schedule", help="module dependency graph and wavefronts")
    p.add_argument("sources", nargs="+", help="Fortran source files")
    p.add_argument("--out", required=True, help="output schedule JSON")
    p.add_argument("--dot", help="also write a Graphviz rendering")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("ground", help="attach comment and text groundings")
    p.add_argument("grfn", help="network JSON from translate")
    p.add_argument("--comments", required=True, help="source file with comments")
    p.add_argument("--mentions", help="TSV of text mentions")
    p.add_argument("--out", required=True, help="output grounded network JSON")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="minimum alignment score (default 0.5)")
    p.set_defaults(func=_cmd_ground)

    p = sub.add_parser("equation", help="match equations against a network")
    p.add_argument("equations", help="file of LaTeX equations, one per line")
    p.add_argument("--grfn", required=True, help="network JSON")
    p.add_argument("--out", required=True, help="output match report JSON")
    p.set_defaults(func=_cmd_equation)

    p = sub.add_parser("compare", help="structural comparison of two networks")
    p.add_argument("a", help="first network JSON")
    p.add_argument("b", help="second network JSON")
    p.add_argument("--out", required=True, help="output comparison JSON")
    p.add_argument("--dot", help="also write a class-colored rendering")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sensitivity", help="variance-based sensitivity analysis")
    p.add_argument("grfn", help="network JSON")
    p.add_argument("--output", required=True, help="output variable name")
    p.add_argument("--bounds", required=True, help="JSON map name -> [lo, hi]")
    p.add_argument("--n", type=int, default=1024,
                   help="sample count, a power of two (default 1024)")
    p.add_argument("--seed", type=int, default=42, help="RNG seed (default 42)")
    p.add_argument("--grid", type=int, default=21,
                   help="surface grid resolution (default 21)")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--surface", help="also write a surface CSV over the top pair")
    p.set_defaults(func=_cmd_sensitivity)

    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = args.func(args)
    except ExecutionError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (GrfnkitError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(summary)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
