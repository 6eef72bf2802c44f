import pathlib

import pytest

from grfnkit import fortran, grfn

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# The reference operating point for the leaf growth fixture; with EMP2=0
# the expolinear factor is exactly 1/2 and dLAI is exactly 0.052.
LAIS_POINT = {"SWFAC": 1.0, "PD": 1.0, "EMP1": 0.104, "EMP2": 0.0,
              "N": 2.0, "NB": 1.0, "PT": 1.0, "DN": 1.0}


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture(scope="session")
def lais_program():
    text = (FIXTURES / "lais.f").read_text(encoding="utf-8")
    return fortran.parse_source(text, path="lais.f")


@pytest.fixture(scope="session")
def lais_unit(lais_program):
    return lais_program.container("LAIS")


@pytest.fixture(scope="session")
def lais_grfn(lais_unit):
    return grfn.lower(lais_unit)


@pytest.fixture
def lais_point():
    return dict(LAIS_POINT)


def pytest_runtest_logreport(report):
    # One visible line per acceptance check, pass or fail.
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\nacceptance {status}: {name}", flush=True)
