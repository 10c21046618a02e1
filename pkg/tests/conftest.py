from dataclasses import dataclass

import numpy as np
import pytest

from kgm import BoundaryData, CouplingField, GridFunction, PhysicsParams, RadialDomain, solve_chi
from kgm.functional import compute_constants, domain_constants

ACCEPTANCE_LINES: list[str] = []


@dataclass(frozen=True)
class Setup:
    dom: RadialDomain
    p: PhysicsParams
    chi: GridFunction
    dc: object


def make_setup(N=2001, R=1.0, m=1.0, omega=0.5, alpha=0.05, q=None, q0=1.0) -> Setup:
    dom = RadialDomain(R, N)
    qv = np.ones(dom.N) if q is None else (q(dom.nodes) if callable(q) else np.asarray(q, dtype=float))
    bd = BoundaryData.on(alpha, dom)
    p = PhysicsParams(dom, m, omega, CouplingField(GridFunction.neumann(qv), q0=q0), bd)
    chi, _ = solve_chi(bd, dom)
    dc = compute_constants(p, domain_constants(dom), chi)
    return Setup(dom, p, chi, dc)


def decay_q(scale=2.0, R=1.0):
    half = 0.5 * R
    return lambda r: scale * np.maximum(0.0, r - half) ** 2 / half**2


@pytest.fixture(scope="session")
def ref():
    """Reference configuration: R = 1, m = 1, omega = 0.5, q = 1 (q0 = 1), alpha = 0.05, N = 2001."""
    return make_setup()


@pytest.fixture(scope="session")
def small():
    """Same physics on a coarse grid for fast property tests."""
    return make_setup(N=401)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
