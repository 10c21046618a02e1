import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from kgm.grid import (
    BC,
    GridFunction,
    RadialDomain,
    apply_laplacian,
    average,
    grad_sq,
    h1_norm,
    integrate,
    lp_norm,
    stiffness_apply,
    weak_laplacian,
)

r = sp.symbols("r", nonnegative=True)
NS = (251, 501, 1001, 2001)


def _ball_integral(expr, R=1):
    return float(sp.integrate(4 * sp.pi * r**2 * expr, (r, 0, R)))


def _rates(errors):
    return [e0 / e1 for e0, e1 in zip(errors, errors[1:])]


@pytest.mark.parametrize("R", [0.5, 1.0, 3.0])
def test_weights_sum_to_ball_volume(R):
    dom = RadialDomain(R, 301)
    assert dom.weights.sum() == pytest.approx(4 * np.pi * R**3 / 3, rel=1e-14)
    assert dom.volume == pytest.approx(4 * np.pi * R**3 / 3)
    assert dom.surface == pytest.approx(4 * np.pi * R**2)
    assert dom.nodes[0] == 0.0 and dom.nodes[-1] == R
    assert dom.h == pytest.approx(R / 300)


def test_domain_arrays_are_read_only():
    dom = RadialDomain(1.0, 50)
    with pytest.raises(ValueError):
        dom.weights[0] = 1.0


@pytest.mark.parametrize("R, N", [(0.0, 100), (-1.0, 100), (1.0, 15), (1.0, 20.5)])
def test_domain_validation(R, N):
    with pytest.raises(ValueError):
        RadialDomain(R, N)


def test_quadrature_second_order():
    f = sp.cos(3 * r) * sp.exp(-r)
    exact = _ball_integral(f)
    fn = sp.lambdify(r, f, "numpy")
    errs = [abs(integrate(fn(d.nodes), d) - exact) for d in map(lambda n: RadialDomain(1.0, n), NS)]
    assert min(_rates(errs)) >= 3.5


def test_stiffness_form_second_order():
    f = sp.sin(2 * r) + r**3
    exact = _ball_integral(sp.diff(f, r) ** 2)
    fn = sp.lambdify(r, f, "numpy")
    errs = [abs(grad_sq(fn(d.nodes), d) - exact) for d in map(lambda n: RadialDomain(1.0, n), NS)]
    assert min(_rates(errs)) >= 3.5


def test_r_squared_has_laplacian_six_everywhere():
    dom = RadialDomain(1.0, 201)
    f = GridFunction.neumann(dom.nodes**2)
    lap = apply_laplacian(f, dom, flux=2.0).values
    assert np.allclose(lap, 6.0, rtol=0, atol=1e-9)
    assert np.allclose(weak_laplacian(f.values, dom)[:-1], 6.0, rtol=0, atol=1e-8)


def test_pointwise_laplacian_second_order():
    f = sp.cos(sp.pi * r)
    lap = sp.diff(f, r, 2) + 2 / r * sp.diff(f, r)
    fn = sp.lambdify(r, f, "numpy")
    ln = sp.lambdify(r, sp.simplify(lap), "numpy")
    errs = []
    for n in NS:
        d = RadialDomain(1.0, n)
        approx = apply_laplacian(GridFunction.neumann(fn(d.nodes)), d).values
        exact = ln(d.nodes[1:])
        exact0 = float(sp.limit(lap, r, 0))
        errs.append(max(np.abs(approx[1:] - exact).max(), abs(approx[0] - exact0)))
    assert min(_rates(errs)) >= 3.5


def test_dirichlet_boundary_stencil_second_order():
    f = sp.sin(sp.pi * r) / r  # vanishes at r = 1
    lap_at_R = float((sp.diff(f, r, 2) + 2 / r * sp.diff(f, r)).subs(r, 1))
    fn = sp.lambdify(r, f, "numpy")
    errs = []
    for n in NS:
        d = RadialDomain(1.0, n)
        v = np.empty(d.N)
        v[0] = np.pi
        v[1:] = fn(d.nodes[1:])
        errs.append(abs(apply_laplacian(GridFunction.dirichlet(v), d).values[-1] - lap_at_R))
    assert min(_rates(errs)) >= 3.5


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_stiffness_is_symmetric_and_matches_the_form(seed):
    dom = RadialDomain(1.0, 64)
    rng = np.random.default_rng(seed)
    v, w = rng.standard_normal((2, dom.N))
    assert v @ stiffness_apply(w, dom) == pytest.approx(w @ stiffness_apply(v, dom), rel=1e-12, abs=1e-10)
    assert v @ stiffness_apply(v, dom) == pytest.approx(grad_sq(v, dom), rel=1e-12)
    assert np.abs(stiffness_apply(np.ones(dom.N), dom)).max() == 0.0


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3), p=st.sampled_from([1.0, 2.0, 2.4, 3.0, 6.0]))
def test_lp_norm_of_constant(c, p):
    dom = RadialDomain(2.0, 101)
    f = np.full(dom.N, c)
    assert lp_norm(f, p, dom) == pytest.approx(abs(c) * dom.volume ** (1 / p), rel=1e-12)
    assert lp_norm(f, np.inf, dom) == pytest.approx(abs(c))
    assert average(f, dom) == pytest.approx(c)
    assert h1_norm(f, dom) == pytest.approx(abs(c))


def test_lp_norm_large_exponent_does_not_overflow():
    dom = RadialDomain(1.0, 101)
    f = np.full(dom.N, 1e10)
    assert np.isfinite(lp_norm(f, 60, dom))
    with pytest.raises(ValueError):
        lp_norm(f, 0.5, dom)
    assert lp_norm(np.zeros(dom.N), 3, dom) == 0.0


def test_dirichlet_solve_inverts_restricted_stiffness():
    dom = RadialDomain(1.0, 101)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(dom.N)
    x[-1] = 0.0
    rhs = stiffness_apply(x, dom)
    assert np.allclose(dom.dirichlet_solve(rhs), x, atol=1e-10)


def test_neumann_solve_and_compatibility():
    dom = RadialDomain(1.0, 101)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(dom.N)
    x -= (dom.weights @ x) / dom.volume
    rhs = stiffness_apply(x, dom)
    assert np.allclose(dom.neumann_solve(rhs), x, atol=1e-10)
    assert dom.weights @ dom.neumann_solve(rhs, mean=2.0) / dom.volume == pytest.approx(2.0)
    with pytest.raises(ValueError):
        dom.neumann_solve(rhs + 1.0)


def test_grid_function_tags_and_arithmetic():
    v = np.array([1.0, -2.0, 3.0, 0.5])
    with pytest.raises(ValueError):
        GridFunction(v, BC.DIRICHLET_AT_R)
    u = GridFunction.dirichlet(v)
    assert u.values[-1] == 0.0 and u.bc is BC.DIRICHLET_AT_R
    assert v[-1] == 0.5  # the caller's array is untouched
    assert np.array_equal((-u).values, -u.values)
    assert np.array_equal(abs(u).values, np.abs(u.values))
    assert np.array_equal((2 * u).values, 2 * u.values) and (u * 2).bc is BC.DIRICHLET_AT_R
    n = GridFunction.neumann(v)
    assert (u + n).bc is BC.NEUMANN_BOTH and (u - u).bc is BC.DIRICHLET_AT_R
    with pytest.raises(ValueError):
        u.values[0] = 5.0
    with pytest.raises(ValueError):
        GridFunction(np.zeros((2, 2)))
    assert len(u) == 4
