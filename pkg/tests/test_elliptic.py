import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from kgm.elliptic import (
    BoundaryData,
    NearSingular,
    apply_L,
    bounded_by_envelope,
    build_screened,
    default_singular_tol,
    solve_chi,
)
from kgm.grid import GridFunction, RadialDomain, lp_norm, stiffness_apply

r = sp.symbols("r", nonnegative=True)
NS = (251, 501, 1001, 2001)


def _mms_errors(phi_expr, b_expr, R=1.0):
    rho_expr = -(sp.diff(phi_expr, r, 2) + 2 / r * sp.diff(phi_expr, r)) + b_expr**2 * phi_expr
    rho_expr = sp.simplify(rho_expr)
    phi_fn = sp.lambdify(r, phi_expr, "numpy")
    b_fn = sp.lambdify(r, b_expr, "numpy")
    rho_fn = sp.lambdify(r, rho_expr, "numpy")
    rho0 = float(sp.limit(rho_expr, r, 0))
    errs = []
    for n in NS:
        dom = RadialDomain(R, n)
        x = dom.nodes
        rho = np.empty(n)
        rho[0] = rho0
        rho[1:] = rho_fn(x[1:])
        op = build_screened(b_fn(x) * np.ones(n), dom)
        errs.append(np.abs(apply_L(op, rho).values - phi_fn(x)).max())
    return errs


@pytest.mark.parametrize(
    "phi, b",
    [
        (sp.cos(sp.pi * r), 1 + r**2),
        (sp.exp(r**2 * (1 - r) ** 2), sp.Integer(2)),
    ],
)
def test_screened_solver_converges_second_order(phi, b):
    errs = _mms_errors(phi, b)
    rates = [e0 / e1 for e0, e1 in zip(errs, errs[1:])]
    assert min(rates) >= 3.5, (errs, rates)


@pytest.mark.parametrize("alpha, R", [(0.05, 1.0), (-0.3, 2.0), (1.0, 0.5)])
def test_chi_is_the_quadratic_lift(alpha, R):
    # Laplace(chi) = 3 alpha / R, chi'(R) = alpha  =>  chi = alpha r^2 / (2R) + c
    dom = RadialDomain(R, 401)
    bd = BoundaryData.on(alpha, dom)
    chi, chi_inf = solve_chi(bd, dom)
    exact = alpha * dom.nodes**2 / (2 * R)
    exact -= dom.weights @ exact / dom.volume
    assert np.abs(chi.values - exact).max() <= 1e-12 * max(1.0, np.abs(exact).max())
    assert abs(dom.weights @ chi.values) <= 1e-13 * dom.volume * chi_inf
    assert chi_inf == pytest.approx(np.abs(chi.values).max())


def test_zero_flux_gives_zero_lift():
    dom = RadialDomain(1.0, 101)
    chi, chi_inf = solve_chi(BoundaryData.on(0.0, dom), dom)
    assert chi_inf == 0.0 and not np.any(chi.values)


def test_boundary_data():
    bd = BoundaryData(0.05, 1.0)
    assert bd.A == pytest.approx(0.05 * 4 * np.pi)
    assert bd.alpha_surrogate_norm == pytest.approx(0.05 * np.sqrt(4 * np.pi))
    with pytest.raises(ValueError):
        solve_chi(BoundaryData(0.05, 2.0), RadialDomain(1.0, 101))


def test_near_singular_screening():
    dom = RadialDomain(1.0, 201)
    with pytest.raises(NearSingular) as info:
        build_screened(np.zeros(dom.N), dom)
    assert info.value.b_l3 == 0.0
    tol = default_singular_tol(dom)
    tiny = np.full(dom.N, 0.5 * tol / dom.volume ** (1 / 3))
    with pytest.raises(NearSingular):
        build_screened(tiny, dom)
    assert build_screened(4 * tiny, dom).b_l3 > tol


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), support=st.floats(0.05, 1.0))
def test_maximum_principle_envelope(seed, support):
    dom = RadialDomain(1.0, 301)
    rng = np.random.default_rng(seed)
    b = rng.uniform(0.0, 3.0, dom.N) * (dom.nodes <= support)
    b[0] += 0.1
    op = build_screened(b, dom)
    assert op.is_m_matrix()
    h = rng.standard_normal(dom.N)
    lo, hi = bounded_by_envelope(op, h)
    assert lo >= -1e-12 and hi >= -1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), tau=st.floats(-10, 10))
def test_shift_identity(seed, tau):
    # L(b^2 (h + tau)) = L(b^2 h) + tau
    dom = RadialDomain(1.0, 201)
    rng = np.random.default_rng(seed)
    b = rng.uniform(0.1, 2.0, dom.N)
    op = build_screened(b, dom)
    h = rng.standard_normal(dom.N)
    lhs = apply_L(op, b**2 * (h + tau)).values
    rhs = apply_L(op, b**2 * h).values + tau
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + abs(tau)))


def test_screened_solution_satisfies_the_discrete_system():
    dom = RadialDomain(1.0, 301)
    rng = np.random.default_rng(5)
    b = rng.uniform(0.2, 1.0, dom.N)
    op = build_screened(GridFunction.neumann(b), dom)
    rho = rng.standard_normal(dom.N)
    phi = apply_L(op, rho).values
    res = stiffness_apply(phi, dom) + dom.weights * (b**2 * phi - rho)
    assert np.abs(res).max() <= 1e-11 * max(1.0, np.abs(phi).max())
    assert op.b_l3 == pytest.approx(lp_norm(b, 3, dom))
    both = op.solve(np.column_stack((rho, 2 * rho)))
    assert np.allclose(both[:, 1], 2 * phi)
