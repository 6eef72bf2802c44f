import random

import pytest

from grfnkit import fortran, modgraph
from grfnkit.errors import CycleError
from oracles import longest_chain_nodes, random_module_dag


@pytest.fixture(scope="module")
def modules_graph(fixtures_dir):
    text = (fixtures_dir / "modules.f").read_text(encoding="utf-8")
    prog = fortran.parse_source(text, path="modules.f")
    return modgraph.build_dependency_graph(prog)


def test_modules_fixture_graph(modules_graph):
    g = modules_graph
    assert g.nodes == ("CONSTANTS", "DRIVER", "PHYSICS", "REPORT")
    assert g.edges == (("DRIVER", "PHYSICS"), ("DRIVER", "REPORT"),
                       ("PHYSICS", "CONSTANTS"))
    assert g.external == frozenset({"REPORT"})
    assert any("external unit REPORT" in str(w) for w in g.warnings)


def test_modules_fixture_schedule(modules_graph):
    plan = modgraph.schedule(modules_graph)
    assert plan.levels == (("CONSTANTS", "REPORT"), ("PHYSICS",), ("DRIVER",))
    assert plan.depth == 3


def test_dot_marks_external_units(modules_graph):
    dot = modgraph.to_dot(modules_graph)
    assert '"REPORT" [style=dashed, kind="EXTERNAL"]' in dot
    assert '"DRIVER" -> "PHYSICS";' in dot


def test_contained_call_does_not_self_edge():
    src = """MODULE M
CONTAINS
SUBROUTINE A(X)
REAL X
CALL B(X)
END SUBROUTINE A
SUBROUTINE B(X)
REAL X
X = X + 1
END SUBROUTINE B
END MODULE M
"""
    g = modgraph.build_dependency_graph(fortran.parse_source(src))
    assert g.nodes == ("M",)
    assert g.edges == ()
    assert not g.external


def test_cycle_detection():
    src = """MODULE A
USE B
END MODULE A
MODULE B
USE A
END MODULE B
"""
    with pytest.raises(CycleError) as info:
        modgraph.build_dependency_graph(fortran.parse_source(src))
    assert "A" in str(info.value) and "B" in str(info.value)


def test_merge_programs_combines_files(fixtures_dir):
    p1 = fortran.parse_source(
        (fixtures_dir / "modules.f").read_text(encoding="utf-8"), path="modules.f")
    p2 = fortran.parse_source(
        (fixtures_dir / "lais.f").read_text(encoding="utf-8"), path="lais.f")
    merged = modgraph.merge_programs([p1, p2])
    names = [c.name for c in merged.containers]
    assert "DRIVER" in names and "LAIS" in names


def test_schedule_levels_sorted_and_json():
    graph = modgraph.ModuleDepGraph(
        nodes=("B", "A", "C"), edges=(("C", "A"), ("C", "B")),
        external=frozenset(), warnings=())
    plan = modgraph.schedule(graph)
    assert plan.levels == (("A", "B"), ("C",))
    assert plan.to_json_dict() == {"levels": [["A", "B"], ["C"]], "depth": 2}


def test_schedule_matches_longest_chain_oracle():
    rng = random.Random(20240817)
    for _ in range(30):
        names, edges = random_module_dag(rng, max_nodes=50)
        graph = modgraph.ModuleDepGraph(
            nodes=tuple(sorted(names)), edges=tuple(sorted(edges)),
            external=frozenset(), warnings=())
        plan = modgraph.schedule(graph)
        assert plan.depth == longest_chain_nodes(names, edges)
        level_of = {n: i for i, level in enumerate(plan.levels) for n in level}
        assert sorted(level_of) == sorted(names)
        for dependent, dependency in edges:
            assert level_of[dependent] > level_of[dependency]
        for level in plan.levels:
            assert list(level) == sorted(level)
