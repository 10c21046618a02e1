"""The reduction map u -> Phi(u) and its three-field decomposition.

For u with q u != 0 the electric potential (shifted by the lift chi) solves

    -Laplace(phi) + (q u)^2 phi = rho_u,   rho_u = A/|ball| - (q u)^2 chi - omega q u^2,

and splits as phi_u = xi_u + eta_u + omega theta_u, where the three pieces
answer the three sources separately.  All four problems share one
factorization, so the splitting holds to solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import BoundaryData, ScreenedOperator, build_screened
from .grid import BC, GridFunction, RadialDomain, average, grad_sq, integrate, lp_norm

__all__ = [
    "InvariantViolation",
    "CouplingField",
    "PhysicsParams",
    "ReducedState",
    "lambda_q_distance",
    "compute_rho",
    "reduce",
    "mixed_identities",
    "eta_energy_residual",
]


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True, eq=False)
class CouplingField:
    """Coupling coefficient q on the grid.

    ``satisfies_Q`` is decided pointwise: with a gap ``q0`` given, every node
    must carry q = 0 or |q| >= q0.  Without ``q0`` the field is treated as
    not satisfying the gap condition.
    """

    values: GridFunction
    q0: float | None = None

    def __post_init__(self):
        v = self.values
        if not isinstance(v, GridFunction):
            v = GridFunction(v, BC.NEUMANN_BOTH)
            object.__setattr__(self, "values", v)
        if not np.all(np.isfinite(v.values)):
            raise ValueError("coupling field must be finite")
        if not np.any(v.values != 0.0):
            raise ValueError("coupling field must not vanish identically")
        if self.q0 is not None and not self.q0 > 0:
            raise ValueError(f"gap parameter q0 must be positive, got {self.q0}")

    @property
    def satisfies_Q(self) -> bool:
        if self.q0 is None:
            return False
        aq = np.abs(self.values.values)
        return bool(np.all((aq == 0.0) | (aq >= self.q0)))

    @property
    def zero_mask(self) -> np.ndarray:
        return self.values.values == 0.0

    def l6(self, dom: RadialDomain) -> float:
        return lp_norm(self.values, 6, dom)


@dataclass(frozen=True, eq=False)
class PhysicsParams:
    dom: RadialDomain
    m: float
    omega: float
    q: CouplingField
    bd: BoundaryData

    def __post_init__(self):
        if len(self.q.values) != self.dom.N:
            raise ValueError("coupling field does not match the grid")
        if not np.isclose(self.bd.R, self.dom.R, rtol=1e-14, atol=0.0):
            raise ValueError("boundary data and domain have different radii")

    @property
    def A(self) -> float:
        return self.bd.A

    @property
    def case1(self) -> bool:
        """|omega| <= |m| with the gap condition on q."""
        return abs(self.omega) <= abs(self.m) and self.q.satisfies_Q

    @property
    def case2(self) -> bool:
        """|omega| <= |m| / sqrt(2), no condition on q."""
        return abs(self.omega) <= abs(self.m) / np.sqrt(2.0)

    @property
    def regime(self) -> str:
        tags = [name for name, ok in (("case1", self.case1), ("case2", self.case2)) if ok]
        return "+".join(tags) if tags else "none"


@dataclass(frozen=True, eq=False)
class ReducedState:
    """u together with Phi(u) and its decomposition."""

    u: GridFunction
    phi_u: GridFunction
    xi_u: GridFunction
    eta_u: GridFunction
    theta_u: GridFunction
    omega: float
    A: float
    eta_bar: float
    theta_bar: float
    xi_bar: float
    phi_bar: float
    qu_l3: float
    chi_inf: float

    def decomposition_residual(self) -> float:
        """||phi_u - (xi_u + eta_u + omega theta_u)||_inf."""
        rest = self.xi_u.values + self.eta_u.values + self.omega * self.theta_u.values
        return float(np.abs(self.phi_u.values - rest).max())

    def check_invariants(self, q: CouplingField | None = None, rtol: float = 1e-9, tol: float = 1e-8):
        phi_inf = np.abs(self.phi_u.values).max()
        dec = self.decomposition_residual()
        if dec > rtol * max(phi_inf, 1e-300):
            raise InvariantViolation(f"decomposition residual {dec:.3e} vs ||phi||_inf {phi_inf:.3e}")
        a_eta = self.A * self.eta_u.values
        if a_eta.min() < -tol * max(1.0, np.abs(a_eta).max()):
            raise InvariantViolation(f"A eta_u has negative entry {a_eta.min():.3e}")
        xi_inf = np.abs(self.xi_u.values).max()
        if xi_inf > self.chi_inf + tol * max(1.0, self.chi_inf):
            raise InvariantViolation(f"||xi_u||_inf = {xi_inf:.6e} exceeds ||chi||_inf = {self.chi_inf:.6e}")
        if q is not None and q.satisfies_Q:
            th_inf = np.abs(self.theta_u.values).max()
            if th_inf > 1.0 / q.q0 + tol * max(1.0, 1.0 / q.q0):
                raise InvariantViolation(f"||theta_u||_inf = {th_inf:.6e} exceeds 1/q0 = {1.0 / q.q0:.6e}")


def _u_values(u) -> np.ndarray:
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def lambda_q_distance(u, q: CouplingField, dom: RadialDomain) -> float:
    """||q u||_3; its vanishing signals the approach to the boundary of Lambda_q."""
    return lp_norm(q.values.values * _u_values(u), 3, dom)


def compute_rho(u, p: PhysicsParams, chi) -> GridFunction:
    """Nodewise rho_u = A/|ball| - (q u)^2 chi - omega q u^2."""
    uv = _u_values(u)
    qv = p.q.values.values
    cv = _u_values(chi)
    qu = qv * uv
    rho = p.A / p.dom.volume - qu * qu * cv - p.omega * qv * uv * uv
    return GridFunction(rho, BC.NEUMANN_BOTH)


def screened_for(u, p: PhysicsParams, singular_tol: float | None = None) -> ScreenedOperator:
    return build_screened(p.q.values.values * _u_values(u), p.dom, singular_tol)


def reduce(u, p: PhysicsParams, chi, singular_tol: float | None = None, check: bool = True) -> ReducedState:
    """Solve the four screened problems for u and package the result.

    Raises NearSingular when ||q u||_3 is below ``singular_tol``.  With
    ``check`` the decomposition, sign and maximum-principle invariants are
    asserted before returning.
    """
    if not isinstance(u, GridFunction):
        u = GridFunction.dirichlet(u)
    dom = p.dom
    op = screened_for(u, p, singular_tol)
    uv = u.values
    qv = p.q.values.values
    cv = _u_values(chi)
    qu2 = (qv * uv) ** 2
    src = p.A / dom.volume
    rhs = np.column_stack(
        [
            compute_rho(uv, p, cv).values,
            -qu2 * cv,
            np.full(dom.N, src),
            -qv * uv * uv,
        ]
    )
    sol = op.solve(rhs)
    phi, xi, eta, theta = (GridFunction(sol[:, k], BC.NEUMANN_BOTH) for k in range(4))
    state = ReducedState(
        u=u,
        phi_u=phi,
        xi_u=xi,
        eta_u=eta,
        theta_u=theta,
        omega=p.omega,
        A=p.A,
        eta_bar=average(eta, dom),
        theta_bar=average(theta, dom),
        xi_bar=average(xi, dom),
        phi_bar=average(phi, dom),
        qu_l3=op.b_l3,
        chi_inf=float(np.abs(cv).max()),
    )
    if check:
        state.check_invariants(p.q)
    return state


def mixed_identities(s: ReducedState, p: PhysicsParams, chi) -> tuple[float, float, float]:
    """Relative residuals of the three cross identities between xi, eta, theta:

    * int (q u)^2 chi theta_u  =  int q u^2 xi_u
    * A mean(xi_u)             = -int (q u)^2 chi eta_u
    * A mean(theta_u)          = -int q u^2 eta_u

    Each residual is |lhs - rhs| divided by the absolute-value integral of
    the larger side (zero when both sides vanish identically).
    """
    dom = p.dom
    w = dom.weights
    uv = s.u.values
    qv = p.q.values.values
    cv = _u_values(chi)
    qu2 = (qv * uv) ** 2
    qu_sq = qv * uv * uv
    xi, eta, th = s.xi_u.values, s.eta_u.values, s.theta_u.values
    A = p.A
    pairs = [
        (qu2 * cv * th, qu_sq * xi),
        (A * xi / dom.volume, -qu2 * cv * eta),
        (A * th / dom.volume, -qu_sq * eta),
    ]
    out = []
    for lhs, rhs in pairs:
        scale = max(w @ np.abs(lhs), w @ np.abs(rhs))
        diff = abs(w @ lhs - w @ rhs)
        out.append(0.0 if scale == 0.0 else float(diff / scale))
    return tuple(out)


def eta_energy_residual(s: ReducedState, p: PhysicsParams) -> float:
    """Relative residual of ||grad eta||^2 + int (q u)^2 eta^2 = A mean(eta)."""
    dom = p.dom
    qu2 = (p.q.values.values * s.u.values) ** 2
    lhs = grad_sq(s.eta_u, dom) + integrate(qu2 * s.eta_u.values**2, dom)
    rhs = p.A * s.eta_bar
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
