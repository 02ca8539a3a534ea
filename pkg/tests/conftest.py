import pytest

from foldfold import (
    build_general_system,
    build_synthetic,
    compute_coefficients,
    find_foldfold,
    planted_point,
    preset,
    synthetic_spec,
)

# reference coordinates of the upper glacial fold-fold point (w, eta, xi, T_plus)
UPPER_POINT = (5.08105, 0.948796, 0.918074, -10.0202)
LOWER_POINT = (-17.2964, 0.244733, -0.208427, -10.2974)

_acceptance: list[tuple[str, bool, str]] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    _acceptance.append((criterion, bool(ok), detail))
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _acceptance:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def glacial_params():
    return preset("cycle")


@pytest.fixture(scope="session")
def glacial_sys(glacial_params):
    return build_general_system(glacial_params, "T_plus")


@pytest.fixture(scope="session")
def glacial_point(glacial_sys):
    pts = find_foldfold(glacial_sys, [UPPER_POINT])
    assert len(pts) == 1
    return pts[0]


@pytest.fixture(scope="session")
def glacial_coeffs(glacial_sys, glacial_point):
    return compute_coefficients(glacial_sys, glacial_point)


@pytest.fixture(scope="session")
def synth_spec():
    return synthetic_spec("nominal")


@pytest.fixture(scope="session")
def synth_sys(synth_spec):
    return build_synthetic(synth_spec)


@pytest.fixture(scope="session")
def synth_point(synth_sys, synth_spec):
    return find_foldfold(synth_sys, [planted_point(synth_spec)])[0]


@pytest.fixture(scope="session")
def synth_coeffs(synth_sys, synth_point):
    return compute_coefficients(synth_sys, synth_point)
