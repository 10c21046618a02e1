"""Linear elliptic solves: the zero-mean Neumann lift and the screened operator.

``solve_chi`` lifts the constant flux data to a zero-average potential;
``build_screened`` / ``apply_L`` realize rho -> phi for

    -Laplace(phi) + b^2 phi = rho   in the ball,   d phi / d nu = 0 on the sphere.

The assembled matrix K + diag(w b^2) is a symmetric M-matrix whose row sums
are exactly w b^2, so the discrete maximum principle and the shift identity
L(b^2 (h + tau)) = L(b^2 h) + tau hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tridiag
from .grid import BC, GridFunction, RadialDomain, lp_norm

__all__ = [
    "NearSingular",
    "BoundaryData",
    "ScreenedOperator",
    "default_singular_tol",
    "solve_chi",
    "build_screened",
    "apply_L",
    "bounded_by_envelope",
]


class NearSingular(ArithmeticError):
    """Raised when the screening coefficient is too weak to fix the constant
    mode of the Neumann problem (u at or near the boundary of Lambda_q)."""

    def __init__(self, b_l3: float, tol: float):
        super().__init__(f"||b||_3 = {b_l3:.3e} <= singular_tol = {tol:.3e}")
        self.b_l3 = b_l3
        self.tol = tol


def default_singular_tol(dom: RadialDomain) -> float:
    return 1e-8 * dom.volume ** (1.0 / 3.0)


@dataclass(frozen=True)
class BoundaryData:
    """Constant Neumann flux density ``alpha`` on the sphere of radius R.

    ``alpha_surrogate_norm`` is the L^2(sphere) norm of the constant trace and
    stands in for the H^{1/2} trace norm, which has no grid counterpart.
    """

    alpha: float
    R: float

    @classmethod
    def on(cls, alpha: float, dom: RadialDomain) -> "BoundaryData":
        return cls(float(alpha), dom.R)

    @property
    def A(self) -> float:
        return self.alpha * 4.0 * np.pi * self.R**2

    @property
    def alpha_surrogate_norm(self) -> float:
        return abs(self.alpha) * np.sqrt(4.0 * np.pi * self.R**2)


def solve_chi(bd: BoundaryData, dom: RadialDomain) -> tuple[GridFunction, float]:
    """Zero-mean solution of Laplace(chi) = A/|ball| with chi'(R) = alpha.

    Returns the lift and its sup norm.  The flux through each dual face is
    known in closed form (it balances the source inside the face), so the
    profile is a cumulative sum; the mean is removed afterwards.
    """
    if not np.isclose(bd.R, dom.R, rtol=1e-14, atol=0.0):
        raise ValueError("boundary data and domain have different radii")
    src = bd.A / dom.volume
    # K chi = -src * w + A e_{N-1}; the last row is implied by the others
    rhs = -src * dom.weights
    rhs[-1] += bd.A
    chi = dom.neumann_solve(rhs)
    return GridFunction(chi, BC.NEUMANN_BOTH), lp_norm(chi, np.inf, dom)


@dataclass(frozen=True, eq=False)
class ScreenedOperator:
    """Factorized -Laplace + b^2 with homogeneous Neumann closure."""

    dom: RadialDomain
    b_squared: GridFunction
    b_l3: float
    factorization: tridiag.RowSumFactor

    def solve(self, rho: np.ndarray) -> np.ndarray:
        """Raw-array solve; ``rho`` may be (N,) or (N, k)."""
        rho = np.asarray(rho, dtype=float)
        w = self.dom.weights if rho.ndim == 1 else self.dom.weights[:, None]
        return self.factorization.solve(w * rho)

    def is_m_matrix(self) -> bool:
        a = self.dom.face_coeff
        s = self.dom.weights * self.b_squared.values
        return bool(np.all(a > 0) and np.all(s >= 0) and s.sum() > 0)


def build_screened(b, dom: RadialDomain, singular_tol: float | None = None) -> ScreenedOperator:
    """Factor -Laplace + b^2.  Raises NearSingular when ||b||_3 <= singular_tol."""
    if singular_tol is None:
        singular_tol = default_singular_tol(dom)
    bv = b.values if isinstance(b, GridFunction) else np.asarray(b, dtype=float)
    b_l3 = lp_norm(bv, 3, dom)
    if not b_l3 > singular_tol:
        raise NearSingular(b_l3, singular_tol)
    b2 = bv * bv
    fac = tridiag.factor(dom.face_coeff, dom.weights * b2)
    if not fac.last_excess > 0:
        raise NearSingular(b_l3, singular_tol)
    return ScreenedOperator(dom, GridFunction(b2, BC.NEUMANN_BOTH), b_l3, fac)


def apply_L(op: ScreenedOperator, rho) -> GridFunction:
    """Solution of -Laplace(phi) + b^2 phi = rho with zero normal derivative."""
    rv = rho.values if isinstance(rho, GridFunction) else rho
    return GridFunction(op.solve(rv), BC.NEUMANN_BOTH)


def bounded_by_envelope(op: ScreenedOperator, h) -> tuple[float, float]:
    """Slacks (min phi - inf h, sup h - max phi) for phi = L(b^2 h).

    Both are nonnegative up to rounding by the maximum principle.
    """
    hv = h.values if isinstance(h, GridFunction) else np.asarray(h, dtype=float)
    phi = op.solve(op.b_squared.values * hv)
    return float(phi.min() - hv.min()), float(hv.max() - phi.max())
