"""Verification suites over random members of Lambda_q and the named experiments.

Every check draws its own samples from ``default_rng([seed, index])`` so the
reports do not depend on the order (or concurrency) in which checks run.
Identity checks store ``-max residual`` as their worst slack, which makes
``passed == (worst_slack >= -tolerance)`` hold for every kind of check.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .elliptic import NearSingular, bounded_by_envelope, default_singular_tol, solve_chi
from .functional import (
    DomainConstants,
    compute_constants,
    domain_constants,
    energy_and_gradient,
    evaluate_J,
    verify_bound_lemma,
)
from .grid import GridFunction, grad_sq, h1_norm, integrate
from .reduction import PhysicsParams, eta_energy_residual, lambda_q_distance, mixed_identities, reduce, screened_for
from .solver import SolveOptions, Status, minimize, pde_residual

__all__ = [
    "CheckReport",
    "sample_u",
    "run_lemma_suite",
    "experiment_blowup",
    "experiment_noQ",
    "experiment_nonexistence",
    "CHECK_NAMES",
    "sign_change_gap",
]

INEQUALITY = "inequality"
IDENTITY = "identity"
INFO = "informational"


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check over a batch of samples.

    ``anchor`` states the property being certified.  Informational checks
    put their measured value in ``observed`` and always pass.  Skipped checks (their
    hypothesis does not hold for the given data) report ``passed = True``
    with ``skipped = True`` and the reason.
    """

    name: str
    anchor: str
    samples: int
    worst_slack: float
    passed: bool
    kind: str = INEQUALITY
    tolerance: float = 0.0
    skipped: bool = False
    reason: str = ""
    observed: float | None = None
    details: tuple = field(default=(), repr=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["details"] = list(self.details)
        return d


def _report(name, anchor, kind, tol, slacks, details, reason="") -> CheckReport:
    worst = float(min(slacks)) if slacks else math.inf
    passed = kind == INFO or (bool(slacks) and worst >= -tol)
    return CheckReport(
        name=name,
        anchor=anchor,
        samples=len(slacks),
        worst_slack=worst,
        passed=passed,
        kind=kind,
        tolerance=tol,
        reason=reason,
        details=tuple(details),
    )


def _skipped(name, anchor, kind, tol, reason) -> CheckReport:
    return CheckReport(name, anchor, 0, math.inf, True, kind, tol, True, reason)


def sample_u(p: PhysicsParams, rng: np.random.Generator, boundary_tol: float | None = None, n_modes: int = 5) -> GridFunction:
    """Random smooth Dirichlet field: scale * sum_k a_k sinc(k r/R), a_k ~ N(0, 1)/k.

    Draws are rejected until ||q u||_3 exceeds ``boundary_tol``.
    """
    dom = p.dom
    if boundary_tol is None:
        boundary_tol = 1e3 * default_singular_tol(dom)
    x = dom.nodes / dom.R
    k = np.arange(1, n_modes + 1)
    modes = np.sinc(np.outer(k, x))
    for _ in range(1000):
        a = rng.standard_normal(n_modes) / k
        scale = rng.uniform(0.3, 1.5)
        u = GridFunction.dirichlet(scale * (a @ modes))
        if lambda_q_distance(u, p.q, dom) > boundary_tol:
            return u
    raise RuntimeError("could not sample a member of Lambda_q; is q supported away from the sampler's modes?")


@dataclass(frozen=True, eq=False)
class _Ctx:
    p: PhysicsParams
    chi: GridFunction
    dc: DomainConstants
    boundary_tol: float


def _rel(num: float, den: float) -> float:
    return num / max(den, 1e-300)


# Each check maps (ctx, u, rng) to (slack_or_residual, detail_dict).


def _eta_sign(c: _Ctx, u, rng):
    s = reduce(u, c.p, c.chi, check=False)
    v = float((c.p.A * s.eta_u.values).min())
    return v, {"min_A_eta": v}


def _xi_bound(c: _Ctx, u, rng):
    s = reduce(u, c.p, c.chi, check=False)
    xi = float(np.abs(s.xi_u.values).max())
    return s.chi_inf - xi, {"xi_inf": xi, "chi_inf": s.chi_inf}


def _theta_bound(c: _Ctx, u, rng):
    s = reduce(u, c.p, c.chi, check=False)
    th = float(np.abs(s.theta_u.values).max())
    return 1.0 / c.p.q.q0 - th, {"theta_inf": th}


def _theta_lemma(c: _Ctx, u, rng):
    p = c.p
    s = reduce(u, p, c.chi, check=False)
    lhs = abs(2.0 * p.omega * p.A * s.theta_bar)
    rhs = integrate(p.omega**2 * u.values**2, p.dom) + p.A * s.eta_bar
    return _rel(rhs - lhs, lhs + abs(rhs)), {"lhs": lhs, "rhs": rhs}


def _mixed(c: _Ctx, u, rng):
    s = reduce(u, c.p, c.chi, check=False)
    res = mixed_identities(s, c.p, c.chi)
    return -max(res), {"residuals": list(res)}


def _decomposition(c: _Ctx, u, rng):
    s = reduce(u, c.p, c.chi, check=False)
    r = _rel(s.decomposition_residual(), float(np.abs(s.phi_u.values).max()))
    return -r, {"relative_residual": r}


def _two_route(c: _Ctx, u, rng):
    rep = evaluate_J(u, c.p, c.chi)
    return -rep.route_gap, {"J_direct": rep.J_direct, "J_decomposed": rep.J_decomposed}


def _eta_energy(c: _Ctx, u, rng):
    s = reduce(u, c.p, c.chi, check=False)
    r = eta_energy_residual(s, c.p)
    return -r, {"relative_residual": r}


def _phi_equation(c: _Ctx, u, rng):
    s = reduce(u, c.p, c.chi, check=False)
    r = pde_residual(s, c.p, c.chi)[1]
    return -r, {"relative_residual": r}


def _bound_scale(c: _Ctx, u):
    s = reduce(u, c.p, c.chi, check=False)
    rep = evaluate_J(u, c.p, c.chi, state=s)
    return s, rep.scale + 2.0 * abs(c.p.A) * c.dc.chi_inf


def _bound_lower(c: _Ctx, u, rng):
    s, scale = _bound_scale(c, u)
    b = verify_bound_lemma(u, c.p, c.chi, c.dc, state=s)
    return _rel(b.lower, scale), {"slack": b.lower}


def _bound_upper(c: _Ctx, u, rng):
    s, scale = _bound_scale(c, u)
    b = verify_bound_lemma(u, c.p, c.chi, c.dc, state=s)
    return _rel(b.upper, scale), {"slack": b.upper}


def _holder(c: _Ctx, u, rng):
    s, scale = _bound_scale(c, u)
    b = verify_bound_lemma(u, c.p, c.chi, c.dc, state=s)
    worst = min(b.holder_cross, b.holder_chi_sq)
    return _rel(worst, scale), {"cross": b.holder_cross, "chi_sq": b.holder_chi_sq}


def _coercive(c: _Ctx, u, rng):
    """J(u) >= C1 ||grad u||^2 + int (m^2 - w^2) u^2 - 2|A| ||chi||_inf - E,
    with E = 2|A w|/q0 under the gap condition, or int w^2 u^2 when
    |w| <= |m|/sqrt 2.  Every applicable form is checked."""
    p, dc = c.p, c.dc
    rep = evaluate_J(u, p, c.chi)
    gu = grad_sq(u, p.dom)
    u2 = integrate(u.values**2, p.dom)
    base = dc.C1 * gu + (p.m**2 - p.omega**2) * u2 - 2.0 * abs(p.A) * dc.chi_inf
    bounds = []
    if p.case1:
        bounds.append(base - 2.0 * abs(p.A * p.omega) / p.q.q0)
    if p.case2:
        bounds.append(base - p.omega**2 * u2)
    slack = min(rep.J - b for b in bounds)
    return _rel(slack, rep.scale), {"J": rep.J, "bounds": bounds}


def _gradient_fd(c: _Ctx, u, rng, n_dirs: int = 2):
    """Central differences of J along smooth random directions, best over a
    step sweep, against the L^2 pairing with the analytic gradient."""
    p = c.p
    w = p.dom.weights
    _, g, *_ = energy_and_gradient(u.values, p, c.chi)
    worst = 0.0
    errs = []
    for _ in range(n_dirs):
        v = sample_u(p, rng, 0.0).values
        v = v / np.sqrt(w @ v**2)
        exact = float(w @ (g * v))
        best = math.inf
        for h in 10.0 ** -np.arange(3, 7):
            jp = energy_and_gradient(u.values + h * v, p, c.chi)[0]
            jm = energy_and_gradient(u.values - h * v, p, c.chi)[0]
            fd = (jp - jm) / (2.0 * h)
            best = min(best, abs(fd - exact) / max(abs(exact), abs(fd), 1e-300))
        errs.append(best)
        worst = max(worst, best)
    return -worst, {"relative_errors": errs}


def sign_change_gap(u, dom) -> float:
    """J(u) - J(|u|) on the grid: 4 sum a_{i+1/2} |u_i u_(i+1)| over the cells
    where u changes sign.  Only the stiffness term sees the difference, since
    Phi depends on u through u^2."""
    v = _vals_of(u)
    prod = v[:-1] * v[1:]
    cross = prod < 0
    return float(4.0 * dom.face_coeff[cross] @ np.abs(prod[cross]))


def _vals_of(u) -> np.ndarray:
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def _evenness(c: _Ctx, u, rng):
    p = c.p
    j = evaluate_J(u, p, c.chi)
    jn = evaluate_J(-u, p, c.chi).J
    ja = evaluate_J(abs(u), p, c.chi).J
    gap = sign_change_gap(u, p.dom)
    scale = max(abs(j.J), j.scale)
    r = _rel(max(abs(j.J - jn), abs(j.J - ja - gap)), scale)
    return -r, {"J": j.J, "J_neg": jn, "J_abs": ja, "sign_change_gap": gap, "abs_gap_relative": _rel(j.J - ja, scale)}


def _envelope(c: _Ctx, u, rng):
    op = screened_for(u, c.p)
    h = sample_u(c.p, rng, 0.0).values + rng.normal()
    lo, hi = bounded_by_envelope(op, h)
    return _rel(min(lo, hi), float(np.abs(h).max())), {"low": lo, "high": hi}


def _eta_ratio(c: _Ctx, u, rng):
    s = reduce(u, c.p, c.chi, check=False)
    ratio = math.sqrt(grad_sq(s.eta_u, c.p.dom)) / (s.qu_l3**2 * abs(s.eta_bar))
    return ratio, {"ratio": ratio}


@dataclass(frozen=True)
class _Check:
    name: str
    anchor: str
    kind: str
    tol: float
    fn: Callable
    gate: Callable | None = None  # returns a skip reason or None


def _needs_A(p):
    return None if p.A != 0 else "A = 0: the charge-driven field eta vanishes identically"


def _needs_Q(p):
    return None if p.q.satisfies_Q else "q does not satisfy the gap condition, so no uniform bound on theta is claimed"


def _needs_regime(p):
    if p.A == 0:
        return "A = 0"
    if not (p.case1 or p.case2):
        return "neither |w| <= |m| with the gap condition nor |w| <= |m|/sqrt(2) holds"
    return None


CHECKS = (
    _Check("eta_sign", "A eta_u >= 0 in the ball", INEQUALITY, 1e-8, _eta_sign),
    _Check("xi_max_principle", "||xi_u||_inf <= ||chi||_inf", INEQUALITY, 1e-8, _xi_bound),
    _Check("theta_bounded", "||theta_u||_inf <= 1/q0 under the gap condition", INEQUALITY, 1e-8, _theta_bound, _needs_Q),
    _Check("theta_lemma", "|2 w A mean(theta_u)| <= int w^2 u^2 + A mean(eta_u)", INEQUALITY, 1e-8, _theta_lemma),
    _Check("mixed_identities", "cross identities linking xi_u, eta_u, theta_u", IDENTITY, 1e-8, _mixed),
    _Check("decomposition", "Phi(u) = xi_u + eta_u + w theta_u", IDENTITY, 1e-9, _decomposition),
    _Check("two_route_J", "J = J~ + A mean(eta_u) + 2 w A mean(theta_u)", IDENTITY, 1e-8, _two_route),
    _Check("eta_energy_identity", "||grad eta||^2 + int (q u)^2 eta^2 = A mean(eta)", IDENTITY, 1e-8, _eta_energy),
    _Check("phi_equation", "Phi(u) solves the field equation (F'_phi = 0)", IDENTITY, 1e-9, _phi_equation),
    _Check("bound_lemma_lower", "J~ >= C1 ||grad u||^2 + int (m^2 - w^2) u^2 - 2|A| ||chi||_inf", INEQUALITY, 1e-8, _bound_lower),
    _Check("bound_lemma_upper", "J~ <= (C2 + C3 ||theta_u||) ||grad u||^2 + 2|A| ||chi||_inf", INEQUALITY, 1e-8, _bound_upper),
    _Check("holder_steps", "Hoelder/Sobolev steps behind the J~ bounds", INEQUALITY, 1e-8, _holder),
    _Check("coercive_lower_bound", "J bounded below by the coercive estimate", INEQUALITY, 1e-8, _coercive, _needs_regime),
    _Check("gradient_fd", "analytic J' matches central differences", IDENTITY, 1e-5, _gradient_fd),
    _Check("evenness", "J(u) = J(-u); J(u) - J(|u|) equals the sign-change gap", IDENTITY, 1e-8, _evenness),
    _Check("screened_envelope", "inf h <= L(b^2 h) <= sup h", INEQUALITY, 1e-10, _envelope),
    _Check("eta_gradient_ratio", "||grad eta|| / (||q u||_3^2 |mean eta|), observed supremum", INFO, 0.0, _eta_ratio, _needs_A),
)

CHECK_NAMES = tuple(c.name for c in CHECKS)


def _context(p: PhysicsParams, chi=None, dc: DomainConstants | None = None, boundary_tol: float | None = None) -> _Ctx:
    if chi is None:
        chi, _ = solve_chi(p.bd, p.dom)
    if dc is None:
        dc = domain_constants(p.dom)
    if dc.C1 is None:
        dc = compute_constants(p, dc, chi)
    if boundary_tol is None:
        boundary_tol = 1e3 * default_singular_tol(p.dom)
    return _Ctx(p, chi, dc, boundary_tol)


def run_lemma_suite(
    p: PhysicsParams,
    seed: int = 0,
    n_samples: int = 100,
    chi=None,
    dc: DomainConstants | None = None,
    boundary_tol: float | None = None,
    only: tuple | None = None,
) -> list[CheckReport]:
    """Run every check (or those named in ``only``) on ``n_samples`` draws each."""
    ctx = _context(p, chi, dc, boundary_tol)
    reports = []
    for idx, chk in enumerate(CHECKS):
        if only is not None and chk.name not in only:
            continue
        reason = chk.gate(p) if chk.gate else None
        if reason:
            reports.append(_skipped(chk.name, chk.anchor, chk.kind, chk.tol, reason))
            continue
        rng = np.random.default_rng([seed, idx])
        slacks, details = [], []
        for _ in range(n_samples):
            u = sample_u(p, rng, ctx.boundary_tol)
            try:
                val, det = chk.fn(ctx, u, rng)
            except NearSingular as exc:
                val, det = -math.inf, {"error": str(exc)}
            slacks.append(val)
            details.append(det)
        if chk.kind == INFO:
            rep = _report(chk.name, chk.anchor, chk.kind, chk.tol, [], details)
            reports.append(replace(rep, samples=len(slacks), observed=float(max(slacks))))
        else:
            reports.append(_report(chk.name, chk.anchor, chk.kind, chk.tol, slacks, details))
    return reports


# ---------------------------------------------------------------- experiments


def experiment_blowup(u_ref: GridFunction, p: PhysicsParams, n_steps: int = 20, chi=None) -> CheckReport:
    """J along u_t = 2^-k u_ref, k = 0..n_steps, stopping at the screening floor.

    Passes when the second half of the J values increases strictly, the last
    value is at least ten times |J(u_ref)|, and A mean(eta) + 2 w A mean(theta)
    also increases along that tail.
    """
    if p.A == 0:
        raise ValueError("blow-up at the boundary of Lambda_q needs A != 0")
    if chi is None:
        chi, _ = solve_chi(p.bd, p.dom)
    js, charge, ts, l3 = [], [], [], []
    stopped = ""
    for k in range(n_steps + 1):
        t = 2.0**-k
        try:
            rep = evaluate_J(t * u_ref, p, chi)
        except NearSingular as exc:
            stopped = f"stopped at k = {k}: {exc}"
            break
        js.append(rep.J)
        charge.append(rep.A_eta_bar + rep.two_omega_A_theta_bar)
        ts.append(t)
        l3.append(rep.qu_l3)
    tail = slice(len(js) // 2, None)
    j_tail, c_tail = np.array(js[tail]), np.array(charge[tail])
    j_inc = len(j_tail) >= 2 and bool(np.all(np.diff(j_tail) > 0))
    c_inc = len(c_tail) >= 2 and bool(np.all(np.diff(c_tail) > 0))
    growth = js[-1] - 10.0 * abs(js[0]) if js else -math.inf
    slack = min(
        float(np.diff(j_tail).min()) if len(j_tail) >= 2 else -math.inf,
        float(np.diff(c_tail).min()) if len(c_tail) >= 2 else -math.inf,
        growth,
    )
    details = [{"t": t, "J": j, "A_eta_bar_plus_2wA_theta_bar": c, "qu_l3": q} for t, j, c, q in zip(ts, js, charge, l3)]
    return CheckReport(
        name="blowup",
        anchor="J -> infinity as ||q u||_3 -> 0 with A != 0",
        samples=len(js),
        worst_slack=slack,
        passed=j_inc and c_inc and growth >= 0,
        tolerance=0.0,
        reason=stopped,
        details=tuple(details),
    )


def _shell_bump(q: np.ndarray, lo: float, hi: float) -> np.ndarray | None:
    """sin^2 bump on the longest run of nodes with lo < 1/q < hi."""
    with np.errstate(divide="ignore"):
        inv = np.where(q > 0, 1.0 / np.where(q > 0, q, 1.0), np.inf)
    inside = (inv > lo) & (inv < hi)
    idx = np.flatnonzero(inside)
    if len(idx) < 3:
        return None
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    run = max(runs, key=len)
    if len(run) < 3:
        return None
    u = np.zeros_like(q)
    s = np.linspace(0.0, np.pi, len(run) + 2)[1:-1]
    u[run] = np.sin(s) ** 2
    return u


def experiment_noQ(p_noQ: PhysicsParams, n_terms: int = 4, chi=None, tol: float = 1e-6) -> CheckReport:
    """Bumps u_n on the shells {2^n < 1/q < 2^(n+1)} push mean(theta_{u_n})
    below -2^n, so the term 2 w A mean(theta) is unbounded below."""
    q = p_noQ.q
    if q.satisfies_Q:
        raise ValueError("q satisfies the gap condition: the shells {s_n < 1/q < s_n+1} are empty for large n")
    if chi is None:
        chi, _ = solve_chi(p_noQ.bd, p_noQ.dom)
    qv = q.values.values
    bars, slacks, details = [], [], []
    missing = []
    for n in range(n_terms):
        s_n = 2.0**n
        u = _shell_bump(qv, s_n, 2.0 * s_n)
        if u is None:
            missing.append(n)
            slacks.append(-math.inf)
            continue
        st = reduce(GridFunction.dirichlet(u), p_noQ, chi, check=False)
        bars.append(st.theta_bar)
        slacks.append(-s_n + tol - st.theta_bar)
        details.append(
            {
                "n": n,
                "s_n": s_n,
                "theta_bar": st.theta_bar,
                "theta_max": float(st.theta_u.values.max()),
                "two_w_A_theta_bar": 2.0 * p_noQ.omega * p_noQ.A * st.theta_bar,
            }
        )
    decreasing = len(bars) == n_terms and bool(np.all(np.diff(bars) < 0))
    worst = float(min(slacks)) if slacks else -math.inf
    return CheckReport(
        name="noQ",
        anchor="without the gap condition mean(theta_{u_n}) <= -s_n -> -infinity",
        samples=n_terms,
        worst_slack=worst,
        passed=decreasing and worst >= 0,
        tolerance=tol,
        reason=f"no grid nodes in shells {missing}" if missing else "",
        details=tuple(details),
    )


def experiment_nonexistence(
    p_zeroflux: PhysicsParams,
    n_starts: int = 5,
    seed: int = 0,
    dc: DomainConstants | None = None,
    opts: SolveOptions | None = None,
    trivial_tol: float = 1e-6,
) -> CheckReport:
    """Minimize from random starts with zero flux; every run must drift to the
    boundary of Lambda_q (or collapse below ``trivial_tol`` in H^1_0).

    Along each iterate trail the energy identity behind nonexistence is
    checked:  <J'(u), u>/2 >= C1 ||grad u||^2.
    """
    p = p_zeroflux
    if p.A != 0:
        raise ValueError("the nonexistence experiment needs zero total flux (alpha = 0)")
    if abs(p.omega) > abs(p.m):
        raise ValueError("needs |omega| <= |m|")
    chi, _ = solve_chi(p.bd, p.dom)
    ctx = _context(p, chi, dc)
    if not ctx.dc.C1 > 0:
        raise ValueError(f"needs C1 > 0, got {ctx.dc.C1:.4g}")
    opts = opts or SolveOptions()
    rng = np.random.default_rng([seed, len(CHECKS)])
    w = p.dom.weights
    details, slacks = [], []
    all_ok = True
    for k in range(n_starts):
        u0 = sample_u(p, rng, ctx.boundary_tol)
        trail = [u0.values]
        res = minimize(u0, p, chi, ctx.dc, opts, callback=lambda uv, J: trail.append(uv))
        trivial = h1_norm(res.u_star, p.dom) <= trivial_tol
        ok = res.status is Status.BOUNDARY_APPROACH or (res.status is Status.CONVERGED and trivial)
        all_ok &= ok
        worst = math.inf
        for uv in trail:
            try:
                _, g, *_ = energy_and_gradient(uv, p, chi, opts.singular_tol)
            except NearSingular:
                continue
            gu = grad_sq(uv, p.dom)
            pairing = 0.5 * float(w @ (g * uv))
            worst = min(worst, _rel(pairing - ctx.dc.C1 * gu, abs(pairing) + gu))
        slacks.append(worst)
        details.append(
            {
                "start": k,
                "status": res.status.value,
                "iterations": res.iterations,
                "J_final": res.J_star,
                "qu_l3_final": res.qu_l3,
                "trail_length": len(trail),
                "trail_worst_slack": worst,
            }
        )
    worst = float(min(slacks)) if slacks else -math.inf
    passed = all_ok and worst >= -1e-10
    reason = (
        "no nontrivial solution found, consistent with the zero-flux nonexistence theorem"
        if passed
        else "a start converged to a nontrivial state or the energy chain failed"
    )
    return CheckReport(
        name="nonexistence",
        anchor="zero flux and small data admit no nontrivial solution",
        samples=n_starts,
        worst_slack=worst,
        passed=passed,
        tolerance=1e-10,
        reason=reason,
        details=tuple(details),
    )
