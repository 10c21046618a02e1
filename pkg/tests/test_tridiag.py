import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgm import tridiag


def _system(rng, n, s_scale=1.0):
    a = rng.uniform(0.1, 10.0, n - 1)
    s = s_scale * rng.uniform(0.0, 1.0, n)
    return a, s


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 60), seed=st.integers(0, 2**31 - 1))
def test_solve_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    a, s = _system(rng, n)
    s[rng.integers(n)] += 0.5  # keep it nonsingular
    rhs = rng.standard_normal(n)
    x = tridiag.factor(a, s).solve(rhs)
    dense = np.linalg.solve(tridiag.assemble(a, s), rhs)
    assert np.allclose(x, dense, rtol=1e-10, atol=1e-12 * np.abs(dense).max())


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 60), seed=st.integers(0, 2**31 - 1))
def test_row_sums_are_the_excesses(n, seed):
    rng = np.random.default_rng(seed)
    a, s = _system(rng, n)
    assert np.allclose(tridiag.assemble(a, s) @ np.ones(n), s, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 80), seed=st.integers(0, 2**31 - 1))
def test_nonnegative_data_gives_nonnegative_solution(n, seed):
    rng = np.random.default_rng(seed)
    a, s = _system(rng, n)
    s[-1] += 1e-3
    rhs = rng.uniform(0.0, 1.0, n) * (rng.uniform(size=n) < 0.3)
    x = tridiag.factor(a, s).solve(rhs)
    assert x.min() >= 0.0


@pytest.mark.parametrize("eps", [1e-4, 1e-8, 1e-12])
def test_constant_mode_accurate_when_nearly_singular(eps):
    # T 1 = s exactly, so rhs = s must return the ones vector even as s -> 0
    n = 500
    a = np.linspace(1.0, 5.0, n - 1)
    s = np.zeros(n)
    s[n // 2] = eps
    x = tridiag.factor(a, s).solve(s)
    assert np.abs(x - 1.0).max() <= 1e-12


def test_matrix_rhs_solves_columnwise():
    rng = np.random.default_rng(3)
    a, s = _system(rng, 30)
    s += 0.1
    f = tridiag.factor(a, s)
    rhs = rng.standard_normal((30, 4))
    x = f.solve(rhs)
    for k in range(4):
        assert np.array_equal(x[:, k], f.solve(rhs[:, k]))


def test_last_excess_is_the_row_sum_of_the_schur_complement():
    a = np.array([1.0, 1.0])
    s = np.array([0.0, 0.0, 2.0])
    assert tridiag.factor(a, s).last_excess == pytest.approx(2.0)
    assert tridiag.factor(a, np.zeros(3)).last_excess == 0.0


@pytest.mark.parametrize(
    "a, s",
    [
        (np.array([1.0, -1.0]), np.zeros(3)),
        (np.array([1.0, 0.0]), np.zeros(3)),
        (np.array([1.0, 1.0]), np.array([0.0, -1.0, 0.0])),
        (np.array([1.0]), np.zeros(3)),
    ],
)
def test_rejects_invalid_coefficients(a, s):
    with pytest.raises(ValueError):
        tridiag.factor(a, s)
