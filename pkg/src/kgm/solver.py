"""Ground states by preconditioned descent, excited states by deflation.

``minimize`` runs gradient descent on J with Armijo backtracking, measured in
the H^1_0 metric (the search direction is the inverse Dirichlet Laplacian
applied to the L^2 gradient) and Barzilai-Borwein trial steps.  Two exits
besides convergence matter: the iterates may slide towards the boundary of
Lambda_q (q u -> 0) while J keeps decreasing, which is how the absence of a
nontrivial minimizer shows up, or the iteration budget runs out.

``deflate_and_resolve`` searches for further critical points.  States with a
sign change are saddle points of J, so descent cannot reach them; instead
Newton-Krylov is applied to the gradient residual multiplied by the
deflation factor prod_k (1 + 1/||u - u_k||^2)(1 + 1/||u + u_k||^2).
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import NoConvergence, minimize_scalar, newton_krylov
from scipy.sparse.linalg import LinearOperator

from .elliptic import NearSingular, default_singular_tol
from .functional import DomainConstants, energy_and_gradient, evaluate_J
from .grid import GridFunction, grad_sq, lp_norm, weak_laplacian
from .reduction import PhysicsParams, ReducedState, reduce

__all__ = [
    "Status",
    "NoNewSolution",
    "SolveOptions",
    "SolveResult",
    "initial_guess",
    "minimize",
    "deflate_and_resolve",
    "pde_residual",
]

log = logging.getLogger(__name__)


class Status(enum.Enum):
    CONVERGED = "Converged"
    BOUNDARY_APPROACH = "BoundaryApproach"
    MAX_ITERATIONS = "MaxIterations"


class NoNewSolution(RuntimeError):
    """Deflated search found nothing distinct from the known solutions."""


@dataclass(frozen=True)
class SolveOptions:
    """Solver tolerances.

    ``grad_tol`` is relative: convergence needs ||g||_2 <= grad_tol max(1, |J|).
    ``singular_tol`` and ``boundary_tol`` are absolute thresholds on
    ||q u||_3; ``None`` picks 1e-8 |ball|^(1/3) and 1e3 times that.
    """

    grad_tol: float = 1e-8
    pde_tol: float = 1e-6
    singular_tol: float | None = None
    boundary_tol: float | None = None
    max_iter: int = 5000
    window: int = 20
    precondition: bool = True
    armijo_c: float = 1e-4
    step0: float = 0.5
    polish_iter: int = 500
    distinct_rtol: float = 1e-3
    newton_maxiter: int = 80

    def resolved(self, p: PhysicsParams) -> "SolveOptions":
        st = self.singular_tol if self.singular_tol is not None else default_singular_tol(p.dom)
        bt = self.boundary_tol if self.boundary_tol is not None else 1e3 * st
        return replace(self, singular_tol=st, boundary_tol=bt)


@dataclass(frozen=True, eq=False)
class SolveResult:
    u_star: GridFunction
    state: ReducedState | None
    J_star: float
    grad_norm: float
    pde_residuals: tuple[float, float]
    status: Status
    iterations: int
    qu_l3: float
    history: tuple = field(default=(), repr=False)
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def _wnorm(v: np.ndarray, w: np.ndarray) -> float:
    return float(np.sqrt(w @ (v * v)))


def initial_guess(p: PhysicsParams, target_l3: float | None = None) -> GridFunction:
    """Positive Dirichlet-compatible start c (1 - r/R) exp(-(r/R)^2), scaled so
    that ||q u||_3 equals ``target_l3`` (default |ball|^(1/3) / 4)."""
    dom = p.dom
    x = dom.nodes / dom.R
    u = (1.0 - x) * np.exp(-(x**2))
    if target_l3 is None:
        target_l3 = 0.25 * dom.volume ** (1.0 / 3.0)
    qu = lp_norm(p.q.values.values * u, 3, dom)
    if qu == 0.0:
        raise ValueError("coupling vanishes on the support of the default start")
    return GridFunction.dirichlet(u * target_l3 / qu)


def _first_eq_residual(uv, phi, p: PhysicsParams, chi) -> float:
    dom = p.dom
    w = dom.weights[:-1]
    lap = weak_laplacian(uv, dom)[:-1]
    qv = p.q.values.values
    mass = (p.m**2 * uv)[:-1]
    field_ = ((p.omega + qv * (phi + _arr(chi))) ** 2 * uv)[:-1]
    scale = _wnorm(lap, w) + _wnorm(mass, w) + _wnorm(field_, w)
    return 0.0 if scale == 0.0 else _wnorm(lap - mass + field_, w) / scale


def _arr(f) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


def pde_residual(s: ReducedState, p: PhysicsParams, chi) -> tuple[float, float]:
    """Relative discrete residuals of

        Laplace(u)   = m^2 u - (omega + q (phi + chi))^2 u,
        Laplace(phi) = q (omega + q (phi + chi)) u^2 - A/|ball|

    with phi = phi_u, in the weighted L^2 norm (interior nodes for the
    u-equation).  Each residual is divided by the sum of the norms of the
    individual terms of its equation; for the second, which is zero up to
    rounding by construction of Phi, the terms include |K| |phi| / w, the
    magnitude the discrete Laplacian forms before cancellation (phi can be
    large and nearly constant, so this is the scale of its rounding).
    """
    dom = p.dom
    uv, fv = s.u.values, s.phi_u.values
    cv = _arr(chi)
    r1 = _first_eq_residual(uv, fv, p, chi)
    qv = p.q.values.values
    w = dom.weights
    lap = weak_laplacian(fv, dom)
    terms = (qv * qv * uv * uv * fv, qv * qv * uv * uv * cv, p.omega * qv * uv * uv, np.full(dom.N, p.A / dom.volume))
    rhs = terms[0] + terms[1] + terms[2] - terms[3]
    # the operator's own magnitude |K| |phi| / w bounds the rounding in lap
    a = dom.face_coeff
    af = np.abs(fv)
    op_mag = np.zeros(dom.N)
    op_mag[:-1] += a * (af[:-1] + af[1:])
    op_mag[1:] += a * (af[:-1] + af[1:])
    scale = _wnorm(op_mag / w, w) + sum(_wnorm(t, w) for t in terms)
    r2 = 0.0 if scale == 0.0 else _wnorm(lap - rhs, w) / scale
    return r1, r2


@dataclass
class _Run:
    u: np.ndarray
    J: float
    g: np.ndarray
    phi: np.ndarray
    qu_l3: float
    mag: float
    history: list
    iterations: int = 0
    status: Status = Status.MAX_ITERATIONS
    message: str = ""


def _descend(run: _Run, p: PhysicsParams, chi, opts: SolveOptions, max_iter: int, callback=None) -> _Run:
    dom = p.dom
    w = dom.weights
    s = opts.step0
    for _ in range(max_iter):
        gnorm = _wnorm(run.g, w)
        if gnorm <= opts.grad_tol * max(1.0, abs(run.J)) and _first_eq_residual(run.u, run.phi, p, chi) <= opts.pde_tol:
            run.status = Status.CONVERGED
            return run
        tail = run.history[-(opts.window + 1):]
        if run.qu_l3 <= opts.boundary_tol and all(b <= a for a, b in zip(tail, tail[1:])):
            run.status = Status.BOUNDARY_APPROACH
            run.message = f"||q u||_3 = {run.qu_l3:.3e} with J still decreasing"
            return run

        d = -dom.dirichlet_solve(w * run.g) if opts.precondition else -run.g
        d[-1] = 0.0
        slope = float(w @ (run.g * d))
        noise = 1e-14 * run.mag
        accepted = None
        near_boundary = False
        while s > 1e-14:
            trial = run.u + s * d
            try:
                J, g, phi, qul3, mag = energy_and_gradient(trial, p, chi, opts.singular_tol)
            except NearSingular:
                near_boundary = True
                s *= 0.5
                continue
            if J <= run.J + opts.armijo_c * s * slope + noise:
                accepted = (trial, J, g, phi, qul3, mag)
                break
            s *= 0.5
        if accepted is None:
            if near_boundary or run.qu_l3 <= opts.boundary_tol:
                run.status = Status.BOUNDARY_APPROACH
                run.message = "line search pushed into the boundary of Lambda_q"
            else:
                run.status = Status.MAX_ITERATIONS
                run.message = "line search failed to find a decrease"
            return run

        trial, J, g, phi, qul3, mag = accepted
        du = trial - run.u
        dg = g - run.g
        den = float(w @ (du * dg))
        if den > 0:
            num = grad_sq(du, dom) if opts.precondition else float(w @ (du * du))
            s = min(max(num / den, 1e-8), 1e8)
        else:
            s = min(2.0 * s, 1e8)
        run.u, run.J, run.g, run.phi, run.qu_l3, run.mag = trial, J, g, phi, qul3, mag
        run.history.append(J)
        run.iterations += 1
        if callback is not None:
            callback(trial, J)
    run.status = Status.MAX_ITERATIONS
    run.message = f"no convergence within {max_iter} iterations"
    return run


def _start_run(uv: np.ndarray, p: PhysicsParams, chi, opts: SolveOptions) -> _Run:
    J, g, phi, qul3, mag = energy_and_gradient(uv, p, chi, opts.singular_tol)
    return _Run(u=uv.copy(), J=J, g=g, phi=phi, qu_l3=qul3, mag=mag, history=[J])


def _package(uv: np.ndarray, p: PhysicsParams, chi, opts: SolveOptions, status, iterations, history, message) -> SolveResult:
    u = GridFunction.dirichlet(uv)
    try:
        state = reduce(u, p, chi, opts.singular_tol, check=False)
    except NearSingular as exc:
        return SolveResult(
            u_star=u,
            state=None,
            J_star=float("inf"),
            grad_norm=float("nan"),
            pde_residuals=(float("nan"), float("nan")),
            status=Status.BOUNDARY_APPROACH,
            iterations=iterations,
            qu_l3=exc.b_l3,
            history=tuple(history),
            message=message or str(exc),
        )
    rep = evaluate_J(u, p, chi, state=state)
    _, g, _, _, _ = energy_and_gradient(uv, p, chi, opts.singular_tol)
    gnorm = _wnorm(g, p.dom.weights)
    res = pde_residual(state, p, chi)
    if status is Status.CONVERGED and not (gnorm <= opts.grad_tol * max(1.0, abs(rep.J)) and res[0] <= opts.pde_tol and res[1] <= opts.pde_tol):
        status = Status.MAX_ITERATIONS
        message = "final state misses the convergence tolerances"
    return SolveResult(
        u_star=u,
        state=state,
        J_star=rep.J,
        grad_norm=gnorm,
        pde_residuals=res,
        status=status,
        iterations=iterations,
        qu_l3=state.qu_l3,
        history=tuple(history),
        message=message,
    )


def minimize(u0, p: PhysicsParams, chi, dc: DomainConstants | None = None, opts: SolveOptions | None = None, callback=None) -> SolveResult:
    """Minimize J from ``u0``.

    On convergence the iterate is replaced by its absolute value (J is even
    in u) and polished again, so the returned ground state is nonnegative.
    ``callback(u_values, J)`` is invoked after every accepted step.
    """
    opts = (opts or SolveOptions()).resolved(p)
    if dc is not None and dc.C1 is not None and not dc.C1 > 0:
        warnings.warn(f"C1 = {dc.C1:.4g} <= 0: data are outside the small-data regime", RuntimeWarning, stacklevel=2)
    uv = u0.values if isinstance(u0, GridFunction) else np.asarray(u0, dtype=float)
    uv = uv.copy()
    uv[-1] = 0.0
    try:
        run = _start_run(uv, p, chi, opts)
    except NearSingular as exc:
        raise ValueError(f"initial guess is not in Lambda_q: {exc}") from exc

    run = _descend(run, p, chi, opts, opts.max_iter, callback)
    log.info("descent: %s after %d iterations, J = %.12g", run.status.value, run.iterations, run.J)
    if run.status is Status.CONVERGED:
        first = run.iterations
        polished = _start_run(np.abs(run.u), p, chi, opts)
        polished.history = list(run.history)
        polished.iterations = first
        run = _descend(polished, p, chi, opts, opts.polish_iter, callback)
        run.u = np.abs(run.u)
    return _package(run.u, p, chi, opts, run.status, run.iterations, run.history, run.message)


# ---------------------------------------------------------------- deflation


def _deflation_factor(uv, knowns, w) -> float:
    m = 1.0
    for uk in knowns:
        for d2 in (w @ ((uv - uk) ** 2), w @ ((uv + uk) ** 2)):
            if d2 == 0.0:
                return np.inf
            m *= 1.0 + 1.0 / d2
    return m


def _oscillatory_starts(p: PhysicsParams, chi, opts: SolveOptions) -> list[np.ndarray]:
    """sinc(k r/R) profiles with k - 1 sign changes, each scaled to the
    minimizer of J along its ray, plus a larger and a smaller copy."""
    x = p.dom.nodes / p.dom.R
    starts = []
    for k in (2, 3):
        base = np.sinc(k * x)
        base[-1] = 0.0

        def along_ray(t, base=base):
            try:
                return energy_and_gradient(np.exp(t) * base, p, chi, opts.singular_tol)[0]
            except NearSingular:
                return np.inf

        t = np.exp(minimize_scalar(along_ray, bracket=(-3.0, 0.0)).x)
        starts.extend(scale * t * base for scale in (1.0, 1.3, 0.7))
    return starts


def _newton(F, x0, M, tol_norm, f_tol, maxiter) -> np.ndarray:
    """Newton-Krylov that hands back its last iterate when it stalls at the
    rounding floor; the caller judges the result by the undeflated gradient."""
    try:
        return newton_krylov(F, x0, inner_M=M, f_tol=f_tol, tol_norm=tol_norm, maxiter=maxiter, method="lgmres")
    except NoConvergence as exc:
        x = np.asarray(exc.args[0], dtype=float)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("Newton-Krylov diverged") from exc
        return x


def deflate_and_resolve(found, p: PhysicsParams, chi, dc: DomainConstants | None = None, opts: SolveOptions | None = None, starts=None) -> SolveResult:
    """Look for a critical point of J distinct from ``found`` and their negatives.

    Raises NoNewSolution when every start fails or lands on a known state.
    """
    opts = (opts or SolveOptions()).resolved(p)
    known = [r.u_star.values for r in found if r.status is Status.CONVERGED]
    if not known:
        raise ValueError("deflation needs at least one converged solution")
    dom = p.dom
    w = dom.weights
    wi = w[:-1]
    distinct_tol = opts.distinct_rtol * _wnorm(known[0], w)
    if starts is None:
        starts = _oscillatory_starts(p, chi, opts)

    def full(x):
        u = np.zeros(dom.N)
        u[:-1] = x
        return u

    def residual(x):
        try:
            _, g, _, _, _ = energy_and_gradient(full(x), p, chi, opts.singular_tol)
        except NearSingular:
            return np.full_like(x, 1e6)
        return 0.5 * g[:-1]

    def deflated(x):
        m = _deflation_factor(full(x), known, w)
        return np.full_like(x, 1e6) if np.isinf(m) else m * residual(x)

    def precond(y):
        return dom.dirichlet_solve(np.concatenate((w[:-1] * y, [0.0])))[:-1]

    M = LinearOperator((dom.N - 1, dom.N - 1), matvec=precond)

    def tol_norm(v):
        return _wnorm(v, wi)

    reasons = []
    for k, start in enumerate(starts):
        x0 = np.asarray(start.values if isinstance(start, GridFunction) else start, dtype=float)[:-1]
        try:
            x = _newton(deflated, x0, M, tol_norm, 1e-6, opts.newton_maxiter)
            # the deflated stage only has to reach the basin; polish undeflated
            x = _newton(residual, x, M, tol_norm, 0.25 * opts.grad_tol, 20)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            reasons.append(f"start {k}: {type(exc).__name__}")
            continue
        uv = full(x)
        dist = min(min(_wnorm(uv - uk, w), _wnorm(uv + uk, w)) for uk in known)
        if dist < distinct_tol:
            reasons.append(f"start {k}: collapsed onto a known state (distance {dist:.2e})")
            continue
        res = _package(uv, p, chi, opts, Status.CONVERGED, 0, (), "deflated Newton-Krylov")
        if res.status is Status.CONVERGED:
            return res
        reasons.append(f"start {k}: {res.message}")
    raise NoNewSolution("; ".join(reasons) or "no starts")
