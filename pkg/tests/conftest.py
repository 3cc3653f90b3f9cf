import numpy as np
import pytest

from deformed_anosov.config import preset
from deformed_anosov.construction import construct, index_adjust
from deformed_anosov.maps import linear_anosov, product_with_identity

BV_MATRIX = [[1, 1, 1], [1, 2, 2], [1, 2, 3]]
CAT = [[2, 1], [1, 1]]


@pytest.fixture(scope="session")
def bv_base():
    return linear_anosov(BV_MATRIX)


@pytest.fixture(scope="session")
def bv_t3(bv_base):
    return construct(bv_base, np.zeros(3), preset("bv-t3").deformation)


@pytest.fixture(scope="session")
def catxid_base():
    return product_with_identity(CAT)


@pytest.fixture(scope="session")
def catxid_adjusted(catxid_base):
    cfg = preset("catxid")
    return index_adjust(catxid_base, np.zeros(3), cfg.adjust.sigma, cfg.adjust.radii)


@pytest.fixture(scope="session")
def catxid(catxid_adjusted):
    return construct(catxid_adjusted, np.zeros(3), preset("catxid").deformation)


def fd_jacobian(f, X, h=1e-6):
    cols = []
    for e in np.eye(3):
        d = f(np.mod(X + h * e, 1.0)) - f(np.mod(X - h * e, 1.0))
        cols.append((d - np.floor(d + 0.5)) / (2 * h))
    return np.stack(cols, axis=-1)


# acceptance results, filled by tests/test_acceptance.py and summarized at the end of the session
ACCEPTANCE: dict = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
