import numpy as np
import pytest

from landaulab.eigenbasis import build_basis, ground_state
from landaulab.magfield import FieldMatrix, normal_form


@pytest.fixture(scope="session")
def nf2():
    return normal_form(FieldMatrix.from_blocks([1.0]))


@pytest.fixture(scope="session")
def basis2(nf2):
    return build_basis(nf2, 4.0, 6)


@pytest.fixture(scope="session")
def psi0(nf2):
    return ground_state(nf2)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one acceptance sub-check: ``record(criterion, ok, detail)``."""

    def record(criterion: int, ok: bool, detail: str) -> None:
        ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
