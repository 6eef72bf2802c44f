import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grfnkit import ir
from grfnkit.equations import (AmbiguityWarning, SymbolHints, load_equations,
                               parse_latex)
from grfnkit.errors import LatexParseError, ValidationError
from grfnkit.render import to_latex

LAIS_HINTS = SymbolHints(frozenset({"SWFAC", "PT", "PD", "EMP1", "EMP2",
                                    "N", "nb", "DN", "DLAI", "a"}))

CORPUS_HINTS = SymbolHints(frozenset({
    "dt", "decay", "ratio", "mag", "vx", "vy", "theta", "flux",
    "rem", "gain", "area", "rate", "Ea", "LAI",
}))


# ---------------------------------------------------------------------------
# Parsing

def test_exponential_equation():
    eq = parse_latex(r"a = e^{EMP2 \cdot (N-nb)}", LAIS_HINTS)
    assert eq.lhs == "a"
    assert eq.rhs == ir.Call("EXP", (ir.Binary(
        "MUL", ir.Var("EMP2"), ir.Binary("SUB", ir.Var("N"), ir.Var("nb"))),))
    assert not eq.warnings


def test_product_chain_with_fraction():
    eq = parse_latex(
        r"dLAI = SWFAC \cdot PT \cdot PD \cdot EMP1 \cdot \frac{a}{1+a}",
        LAIS_HINTS)
    assert eq.lhs == "dLAI"
    expect = ir.Binary(
        "MUL",
        ir.Binary("MUL",
                  ir.Binary("MUL",
                            ir.Binary("MUL", ir.Var("SWFAC"), ir.Var("PT")),
                            ir.Var("PD")),
                  ir.Var("EMP1")),
        ir.Binary("DIV", ir.Var("a"),
                  ir.Binary("ADD", ir.Num("1"), ir.Var("a"))))
    assert eq.rhs == expect


def test_precedence_and_juxtaposition():
    eq = parse_latex(r"a+b \cdot c^{2}")
    assert eq.rhs == ir.Binary(
        "ADD", ir.Var("a"),
        ir.Binary("MUL", ir.Var("b"), ir.Binary("POW", ir.Var("c"), ir.Num("2"))))
    assert not eq.warnings  # single letters segment silently
    juxta = parse_latex(r"a = e^{EMP2 (N - nb)}", LAIS_HINTS)
    explicit = parse_latex(r"a = e^{EMP2 \cdot (N - nb)}", LAIS_HINTS)
    assert juxta.rhs == explicit.rhs


def test_expression_without_equals_has_no_lhs():
    eq = parse_latex(r"\frac{1}{2}")
    assert eq.lhs is None
    assert eq.rhs == ir.Binary("DIV", ir.Num("1"), ir.Num("2"))


def test_segmentation_against_hints():
    eq = parse_latex("PDq", SymbolHints(frozenset({"PD"})))
    assert eq.rhs == ir.Binary("MUL", ir.Var("PD"), ir.Var("q"))
    assert len(eq.warnings) == 1
    assert eq.warnings[0] == AmbiguityWarning("q", 2)


def test_unhinted_run_warns_per_letter():
    eq = parse_latex("ab")
    assert eq.rhs == ir.Binary("MUL", ir.Var("a"), ir.Var("b"))
    assert len(eq.warnings) == 2


def test_subscripts_fold_into_names():
    eq = parse_latex("T_{max} + T_a")
    assert eq.rhs == ir.Binary("ADD", ir.Var("T_max"), ir.Var("T_a"))


def test_greek_commands_are_single_symbols():
    eq = parse_latex(r"\theta_{0} \cdot 2")
    assert eq.rhs == ir.Binary("MUL", ir.Var("theta_0"), ir.Num("2"))
    assert not eq.warnings


def test_function_commands():
    eq = parse_latex(r"\sqrt{x} + \log(y) + \min(a, b)")
    assert eq.rhs == ir.Binary(
        "ADD",
        ir.Binary("ADD", ir.Call("SQRT", (ir.Var("x"),)),
                  ir.Call("LOG", (ir.Var("y"),))),
        ir.Call("MIN", (ir.Var("a"), ir.Var("b"))))


def test_wrappers_and_labels_stripped():
    eq = parse_latex(r"$$ y = x + 1 \label{eq:one} $$")
    assert eq.lhs == "y"
    assert eq.rhs == ir.Binary("ADD", ir.Var("x"), ir.Num("1"))


def test_hint_overlap_rejected():
    with pytest.raises(ValidationError):
        SymbolHints(frozenset({"exp"}))


# ---------------------------------------------------------------------------
# Errors carry character offsets

@pytest.mark.parametrize("src,offset,fragment", [
    (r"\unknowncmd{x}", 0, "unsupported command"),
    ("a + ", 3, "missing expression"),
    ("a = b = c", 6, "more than one top-level '='"),
    ("(a", 2, "unexpected end of input"),
    ("", 0, "missing expression"),
])
def test_parse_errors(src, offset, fragment):
    with pytest.raises(LatexParseError) as info:
        parse_latex(src)
    assert info.value.position == offset
    assert fragment in info.value.message


def test_load_equations_reports_file_and_line(tmp_path):
    path = tmp_path / "eqs.tex"
    path.write_text("x = 1\ny = (\n", encoding="utf-8")
    with pytest.raises(LatexParseError) as info:
        load_equations(path)
    assert f"{path}:2" in str(info.value)


# ---------------------------------------------------------------------------
# Fixture corpus round trips

@pytest.fixture(scope="module")
def corpus(fixtures_dir):
    return load_equations(fixtures_dir / "equations20.tex", CORPUS_HINTS)


def test_corpus_loads_cleanly(corpus):
    assert len(corpus) == 20
    assert all(eq.lhs for eq in corpus)
    assert all(not eq.warnings for eq in corpus)


def test_corpus_round_trips(corpus):
    for eq in corpus:
        rendered = f"{eq.lhs} = {to_latex(eq.rhs)}"
        back = parse_latex(rendered, CORPUS_HINTS)
        assert back.lhs == eq.lhs, eq.source
        assert back.rhs == eq.rhs, eq.source
        assert not back.warnings, eq.source


def test_parse_is_deterministic(corpus, fixtures_dir):
    again = load_equations(fixtures_dir / "equations20.tex", CORPUS_HINTS)
    assert again == corpus


# ---------------------------------------------------------------------------
# Property: print/parse stability on random trees

_NAMES = ("a", "b", "x", "y", "z_0", "T_max", "alpha", "LAI", "dt")
_PROPERTY_HINTS = SymbolHints(frozenset({"LAI", "dt"}))

_leaf = st.one_of(
    st.sampled_from(_NAMES).map(ir.Var),
    st.sampled_from(["0", "1", "2", "3", "7", "0.5", "1.25", "10"]).map(ir.Num),
)


def _branch(kids):
    return st.one_of(
        st.tuples(st.sampled_from(["ADD", "SUB", "MUL", "DIV", "POW"]),
                  kids, kids).map(lambda t: ir.Binary(*t)),
        kids.map(lambda c: ir.Unary("NEG", c)),
        st.tuples(st.sampled_from(["EXP", "LOG", "SIN", "COS", "SQRT", "ABS"]),
                  kids).map(lambda t: ir.Call(t[0], (t[1],))),
        st.tuples(st.sampled_from(["MIN", "MAX", "MOD"]), kids, kids)
        .map(lambda t: ir.Call(t[0], (t[1], t[2]))),
    )


_exprs = st.recursive(_leaf, _branch, max_leaves=20)


@given(_exprs)
@settings(max_examples=150, deadline=None)
def test_latex_round_trip_property(expr):
    back = parse_latex(to_latex(expr), _PROPERTY_HINTS)
    assert back.lhs is None
    assert back.rhs == expr
