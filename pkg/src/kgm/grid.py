"""Radial discretization of the ball B(0, R) in R^3.

Nodes are uniform, r_i = i h with h = R / (N - 1).  Every node owns the
spherical shell between its neighbouring half-nodes, so the quadrature
weights integrate ``4 pi r^2`` exactly over each dual cell and sum to the
ball volume.  The same dual cells give the finite-volume stiffness form

    ||grad f||_2^2  ~  sum_i  4 pi r_{i+1/2}^2 (f_{i+1} - f_i)^2 / h,

which is what the elliptic solvers and the energy functional use.  Sharing
one quadrature between the integrals and the operators keeps the discrete
integration-by-parts identities exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import tridiag

__all__ = [
    "BC",
    "RadialDomain",
    "GridFunction",
    "integrate",
    "average",
    "lp_norm",
    "grad_sq",
    "h1_norm",
    "apply_laplacian",
    "stiffness_apply",
    "weak_laplacian",
]


class BC(enum.Enum):
    """Boundary-condition tag carried by a grid function."""

    DIRICHLET_AT_R = "dirichlet"
    NEUMANN_BOTH = "neumann"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class RadialDomain:
    """Uniform radial grid on [0, R] with dual-cell quadrature weights.

    Parameters
    ----------
    R : float
        Ball radius, > 0.
    N : int
        Number of nodes, >= 16.  Node 0 sits at the centre, node N-1 on the
        sphere.
    """

    R: float = 1.0
    N: int = 2001
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    face_coeff: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"radius must be positive, got {self.R}")
        if int(self.N) != self.N or self.N < 16:
            raise ValueError(f"need an integer node count >= 16, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        n = self.N
        h = self.R / (n - 1)
        r = np.arange(n) * h
        r[-1] = self.R
        half = np.empty(n + 1)
        half[0] = 0.0
        half[1:-1] = (np.arange(n - 1) + 0.5) * h
        half[-1] = self.R
        w = 4.0 * np.pi * np.diff(half**3) / 3.0
        a = 4.0 * np.pi * half[1:-1] ** 2 / h
        object.__setattr__(self, "nodes", _frozen(r))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "face_coeff", _frozen(a))

    @property
    def h(self) -> float:
        return self.R / (self.N - 1)

    @property
    def volume(self) -> float:
        return 4.0 * np.pi * self.R**3 / 3.0

    @property
    def surface(self) -> float:
        return 4.0 * np.pi * self.R**2

    @cached_property
    def dirichlet_factor(self) -> tridiag.RowSumFactor:
        """Factorization of the stiffness matrix restricted to the unknowns of
        an H^1_0 function (all nodes but the last)."""
        a = self.face_coeff
        s = np.zeros(self.N - 1)
        s[-1] = a[-1]
        return tridiag.factor(a[:-1], s)

    def dirichlet_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve K_D x = rhs for x with x[N-1] = 0; ``rhs`` has length N and its
        last entry is ignored."""
        x = np.zeros(self.N)
        x[:-1] = self.dirichlet_factor.solve(np.asarray(rhs, dtype=float)[:-1])
        return x

    def neumann_solve(self, rhs: np.ndarray, mean: float = 0.0, scale: float | None = None) -> np.ndarray:
        """Solve K x = rhs (homogeneous Neumann at R, symmetry at 0).

        ``rhs`` must sum to zero up to rounding relative to ``scale`` (default:
        the l1 norm of ``rhs``); the kernel is fixed by prescribing the
        weighted mean of ``x``.
        """
        rhs = np.asarray(rhs, dtype=float)
        total = rhs.sum()
        if scale is None:
            scale = np.abs(rhs).sum()
        if abs(total) > 1e-10 * max(scale, 1e-300):
            raise ValueError("incompatible Neumann data: right-hand side does not sum to zero")
        flux = -np.cumsum(rhs[:-1])
        x = np.concatenate(([0.0], np.cumsum(flux / self.face_coeff)))
        return x - (self.weights @ x) / self.volume + mean


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values of a radial function plus its boundary tag."""

    values: np.ndarray
    bc: BC = BC.NEUMANN_BOTH

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1:
            raise ValueError("grid functions are one-dimensional")
        if self.bc is BC.DIRICHLET_AT_R and v[-1] != 0.0:
            raise ValueError(f"Dirichlet function must vanish at r = R, got {v[-1]!r}")
        object.__setattr__(self, "values", v)

    @classmethod
    def dirichlet(cls, values) -> "GridFunction":
        """Build a Dirichlet-tagged function, clamping the boundary node to 0."""
        v = np.array(values, dtype=float)
        v[-1] = 0.0
        return cls(v, BC.DIRICHLET_AT_R)

    @classmethod
    def neumann(cls, values) -> "GridFunction":
        return cls(values, BC.NEUMANN_BOTH)

    def __len__(self):
        return len(self.values)

    def __neg__(self):
        return GridFunction(-self.values, self.bc)

    def __abs__(self):
        return GridFunction(np.abs(self.values), self.bc)

    def __mul__(self, t):
        return GridFunction(float(t) * self.values, self.bc)

    __rmul__ = __mul__

    def __add__(self, other):
        return GridFunction(self.values + _vals(other), self._join(other))

    def __sub__(self, other):
        return GridFunction(self.values - _vals(other), self._join(other))

    def _join(self, other):
        if isinstance(other, GridFunction) and other.bc is not self.bc:
            return BC.NEUMANN_BOTH
        return self.bc


def _vals(f) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


def integrate(f, dom: RadialDomain) -> float:
    """Quadrature approximation of the volume integral of ``f`` over the ball."""
    return float(dom.weights @ _vals(f))


def average(f, dom: RadialDomain) -> float:
    return integrate(f, dom) / dom.volume


def lp_norm(f, p: float, dom: RadialDomain) -> float:
    """Discrete L^p(ball) norm; ``p = inf`` gives the nodal max of |f|."""
    if not p >= 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    v = np.abs(_vals(f))
    if np.isinf(p):
        return float(v.max())
    if p == 2:
        return float(np.sqrt(dom.weights @ (v * v)))
    top = v.max()
    if top == 0.0:
        return 0.0
    # rescale so large p does not overflow
    return float(top * (dom.weights @ (v / top) ** p) ** (1.0 / p))


def grad_sq(f, dom: RadialDomain) -> float:
    """Finite-volume value of ||grad f||_2^2."""
    d = np.diff(_vals(f))
    return float(dom.face_coeff @ (d * d))


def h1_norm(f, dom: RadialDomain) -> float:
    """(||grad f||_2^2 + mean(f)^2)^(1/2)."""
    return float(np.sqrt(grad_sq(f, dom) + average(f, dom) ** 2))


def stiffness_apply(v: np.ndarray, dom: RadialDomain) -> np.ndarray:
    """Apply the finite-volume stiffness matrix K with natural (zero-flux)
    closure at both ends, so that ``v @ K v == grad_sq(v)``."""
    flux = dom.face_coeff * np.diff(v)
    out = np.zeros_like(flux, shape=len(v))
    out[:-1] -= flux
    out[1:] += flux
    return out


def weak_laplacian(v: np.ndarray, dom: RadialDomain) -> np.ndarray:
    """Nodal Laplacian consistent with the stiffness form: -(K v) / w."""
    return -stiffness_apply(v, dom) / dom.weights


def apply_laplacian(f: GridFunction, dom: RadialDomain, flux: float = 0.0) -> GridFunction:
    """Pointwise second-order stencil for f'' + (2/r) f'.

    At r = 0 the symmetric ghost f_{-1} = f_1 turns the stencil into the
    limit 3 f''(0).  Neumann-tagged functions use the reflected ghost
    f_N = f_{N-2} + 2 h flux.  For Dirichlet-tagged functions the boundary
    node is not an unknown; its entry uses one-sided second-order
    differences.
    """
    v = f.values
    h = dom.h
    r = dom.nodes
    out = np.empty_like(v)
    out[0] = 6.0 * (v[1] - v[0]) / h**2
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2 + (v[2:] - v[:-2]) / (h * r[1:-1])
    if f.bc is BC.NEUMANN_BOTH:
        ghost = v[-2] + 2.0 * h * flux
        out[-1] = (ghost - 2.0 * v[-1] + v[-2]) / h**2 + 2.0 * flux / dom.R
    else:
        d2 = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
        d1 = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
        out[-1] = d2 + 2.0 * d1 / dom.R
    return GridFunction(out, BC.NEUMANN_BOTH)
