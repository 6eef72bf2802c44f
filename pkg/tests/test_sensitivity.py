import json
import math

import numpy as np
import pytest

from grfnkit import fortran, interp, sensitivity
from grfnkit.errors import ValidationError
from grfnkit.grfn import lower
from grfnkit.sensitivity import Bounds, mc_tolerance, sobol_indices, top_pair_surface


def build(src):
    return lower(fortran.parse_source(src).containers[0])


UNIT_SQUARE = Bounds((("X1", 0.0, 1.0), ("X2", 0.0, 1.0)))

PASSTHROUGH = """
      SUBROUTINE M1(X1, X2, Y)
      REAL X1, X2, Y
      Y = X1 + 0.0 * X2
      END SUBROUTINE M1
"""

ADDITIVE = """
      SUBROUTINE M2(X1, X2, Y)
      REAL X1, X2, Y
      Y = X1 + X2
      END SUBROUTINE M2
"""


# ---------------------------------------------------------------------------
# Bounds

def test_bounds_validation():
    with pytest.raises(ValidationError):
        Bounds((("X", 1.0, 1.0),))
    with pytest.raises(ValidationError):
        Bounds((("X", 0.0, 1.0), ("X", 0.0, 2.0)))
    b = Bounds((("X", 0.0, 1.0),))
    assert b.get("X") == (0.0, 1.0)
    with pytest.raises(ValidationError):
        b.require_cover(("X", "Y"))


def test_bounds_json_round_trip(fixtures_dir):
    data = json.loads((fixtures_dir / "lais_bounds.json").read_text())
    bounds = Bounds.from_json_dict(data)
    assert bounds.get("PD") == (1.0, 10.0)
    assert Bounds.from_json_dict(bounds.to_json_dict()) == bounds
    with pytest.raises(ValidationError):
        Bounds.from_json_dict({"X": [0.0]})


def test_mc_tolerance():
    assert mc_tolerance(1024) == pytest.approx(3.0 / 32.0)


# ---------------------------------------------------------------------------
# Index estimates on analytically known models

def test_passthrough_model():
    model = build(PASSTHROUGH)
    report = sobol_indices(model, "Y", UNIT_SQUARE, n=1024, seed=42,
                           backend="numpy")
    eps = mc_tolerance(1024)
    assert report.first_order["X1"] == pytest.approx(1.0, abs=eps)
    assert report.first_order["X2"] == pytest.approx(0.0, abs=eps)
    assert report.total_order["X1"] == pytest.approx(1.0, abs=eps)
    assert report.total_order["X2"] == pytest.approx(0.0, abs=eps)
    assert report.top_pair == ("X1", "X2")
    assert not report.degenerate


def test_additive_model_splits_variance_evenly():
    model = build(ADDITIVE)
    report = sobol_indices(model, "Y", UNIT_SQUARE, n=1024, seed=7,
                           backend="numpy")
    eps = mc_tolerance(1024)
    assert report.first_order["X1"] == pytest.approx(0.5, abs=eps)
    assert report.first_order["X2"] == pytest.approx(0.5, abs=eps)
    assert sum(report.s1) == pytest.approx(1.0, abs=eps)


def test_ishigami_against_closed_form():
    # Variance decomposition of sin(x1) + a sin^2(x2) + b x3^4 sin(x1)
    # over [-pi, pi]^3, derived by direct integration.
    a, b = 7.0, 0.1
    pi = math.pi
    v1 = 0.5 * (1.0 + b * pi ** 4 / 5.0) ** 2
    v2 = a ** 2 / 8.0
    v13 = 8.0 * b ** 2 * pi ** 8 / 225.0
    total = v1 + v2 + v13
    s1_true = (v1 / total, v2 / total, 0.0)
    st1_true = (v1 + v13) / total

    model = build("""
      SUBROUTINE ISHI(X1, X2, X3, Y)
      REAL X1, X2, X3, Y
      Y = SIN(X1) + 7.0 * SIN(X2)**2 + 0.1 * X3**4 * SIN(X1)
      END SUBROUTINE ISHI
""")
    bounds = Bounds((("X1", -pi, pi), ("X2", -pi, pi), ("X3", -pi, pi)))
    report = sobol_indices(model, "Y", bounds, n=4096, seed=42, backend="numpy")

    for estimate, true in zip(report.s1, s1_true):
        assert estimate == pytest.approx(true, abs=0.05)
    assert report.total_order["X1"] == pytest.approx(st1_true, abs=0.05)
    assert report.total_order["X1"] > report.first_order["X1"]
    assert report.top_pair == ("X1", "X2")
    eps = mc_tolerance(4096)
    for name in report.columns:
        assert report.total_order[name] >= report.first_order[name] - eps
    assert sum(report.s1) <= 1.05


def test_constant_model_marked_degenerate():
    model = build("""
      SUBROUTINE M3(X1, Y)
      REAL X1, Y
      Y = 4.0 + 0.0 * X1
      END SUBROUTINE M3
""")
    report = sobol_indices(model, "Y", Bounds((("X1", 0.0, 1.0),)), n=64,
                           seed=1, backend="numpy")
    assert report.degenerate
    assert report.s1 == (0.0,)
    assert report.st == (0.0,)


def test_reports_are_reproducible():
    model = build(ADDITIVE)
    first = sobol_indices(model, "Y", UNIT_SQUARE, n=256, seed=9,
                          backend="numpy")
    second = sobol_indices(model, "Y", UNIT_SQUARE, n=256, seed=9,
                           backend="numpy")
    assert first == second
    different = sobol_indices(model, "Y", UNIT_SQUARE, n=256, seed=10,
                              backend="numpy")
    assert different.s1 != first.s1


@pytest.mark.parametrize("n", [0, 63, 100, 1000])
def test_sample_count_must_be_power_of_two(n):
    model = build(PASSTHROUGH)
    with pytest.raises(ValidationError):
        sobol_indices(model, "Y", UNIT_SQUARE, n=n)


def test_bounds_must_cover_inputs():
    model = build(ADDITIVE)
    with pytest.raises(ValidationError):
        sobol_indices(model, "Y", Bounds((("X1", 0.0, 1.0),)), n=64)


def test_report_json_shape():
    model = build(ADDITIVE)
    report = sobol_indices(model, "Y", UNIT_SQUARE, n=128, seed=3,
                           backend="numpy")
    blob = report.to_json_dict()
    json.dumps(blob)
    assert blob["output"] == "Y"
    assert blob["n_samples"] == 128
    assert blob["seed"] == 3
    assert set(blob["inputs"]) == {"X1", "X2"}
    assert set(blob["inputs"]["X1"]) == {"S1", "ST"}
    assert blob["top_pair"] == list(report.top_pair)


def test_lais_sensitivity_ranks_plausibly(lais_grfn, fixtures_dir):
    bounds = Bounds.from_json_dict(
        json.loads((fixtures_dir / "lais_bounds.json").read_text()))
    report = sobol_indices(lais_grfn, "DLAI", bounds, n=512, seed=42,
                           backend="numpy")
    assert set(report.columns) == set(lais_grfn.inputs)
    assert len(report.top_pair) == 2
    assert not report.degenerate


# ---------------------------------------------------------------------------
# Response surfaces

def test_surface_constant_along_inert_axis():
    model = build(PASSTHROUGH)
    report = sobol_indices(model, "Y", UNIT_SQUARE, n=64, seed=3,
                           backend="numpy")
    surface = top_pair_surface(model, "Y", UNIT_SQUARE, report, grid=5,
                               backend="numpy")
    assert surface.x_name == "X1" and surface.y_name == "X2"
    for row in surface.values:
        assert all(v == row[0] for v in row)
    assert surface.values[0][0] == 0.0
    assert surface.values[4][0] == 1.0


def test_surface_corners_additive():
    model = build(ADDITIVE)
    report = sobol_indices(model, "Y", UNIT_SQUARE, n=64, seed=3,
                           backend="numpy")
    surface = top_pair_surface(model, "Y", UNIT_SQUARE, report, grid=2,
                               backend="numpy")
    assert [f for _, _, f in surface.rows()] == [0.0, 1.0, 1.0, 2.0]


def test_surface_csv_format():
    model = build(ADDITIVE)
    report = sobol_indices(model, "Y", UNIT_SQUARE, n=64, seed=3,
                           backend="numpy")
    surface = top_pair_surface(model, "Y", UNIT_SQUARE, report, grid=3,
                               backend="numpy")
    lines = surface.to_csv().splitlines()
    assert lines[0] == "x,y,f"
    assert len(lines) == 10
    x, y, f = lines[1].split(",")
    assert float(x) == 0.0 and float(y) == 0.0 and float(f) == 0.0


def test_surface_matches_pointwise_oracle(lais_grfn, fixtures_dir):
    bounds = Bounds.from_json_dict(
        json.loads((fixtures_dir / "lais_bounds.json").read_text()))
    report = sobol_indices(lais_grfn, "DLAI", bounds, n=256, seed=42,
                           backend="numpy")
    surface = top_pair_surface(lais_grfn, "DLAI", bounds, report, grid=5,
                               backend="numpy")
    mids = {c: sum(bounds.get(c)) / 2.0 for c in report.columns}
    for x, y, f in surface.rows():
        binds = dict(mids)
        binds[surface.x_name] = x
        binds[surface.y_name] = y
        want = interp.execute(lais_grfn, binds)["DLAI"]
        assert math.isclose(f, want, rel_tol=1e-12)


def test_surface_row_order_is_row_major():
    model = build(ADDITIVE)
    report = sobol_indices(model, "Y", UNIT_SQUARE, n=64, seed=3,
                           backend="numpy")
    surface = top_pair_surface(model, "Y", UNIT_SQUARE, report, grid=3,
                               backend="numpy")
    rows = list(surface.rows())
    xs = [r[0] for r in rows]
    assert xs == sorted(xs)  # x varies slowest
    assert [r[1] for r in rows[:3]] == sorted(set(r[1] for r in rows))
