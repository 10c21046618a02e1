"""Command-line entry point.

    kgm solve <config>
    kgm verify <config>
    kgm experiment {blowup,noQ,nonexistence} <config>
    kgm sweep <config> --param omega --values 0,0.25,0.5

Exit status: 0 when every check passes (or the solve converges), 1 on a
failed check or solver failure, 2 on a configuration error.  Outputs go to
``output_dir`` (overridden by ``KGM_OUTPUT_DIR``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import ParseError, RunConfig, ValidationError, build_problem, load_config
from .functional import compute_constants, domain_constants
from .harness import experiment_blowup, experiment_noQ, experiment_nonexistence, run_lemma_suite
from .solver import NoNewSolution, deflate_and_resolve, initial_guess, minimize

__all__ = ["main", "cmd_solve", "cmd_verify", "cmd_experiment", "cmd_sweep"]

EXPERIMENTS = ("blowup", "noQ", "nonexistence")


def _clean(obj):
    """JSON-safe copy: non-finite floats become None, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(os.environ.get("KGM_OUTPUT_DIR") or cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, data: dict):
    path.write_text(json.dumps(_clean(data), indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _write_profile(path: Path, r: np.ndarray, values: np.ndarray):
    np.savetxt(path, np.column_stack((r, values)), fmt="%.17g", delimiter=",", header="r,value", comments="")


def _constants(prob):
    return compute_constants(prob.p, domain_constants(prob.dom), prob.chi)


def _result_summary(res) -> dict:
    return {
        "status": res.status.value,
        "J_star": res.J_star,
        "grad_norm": res.grad_norm,
        "pde_residuals": list(res.pde_residuals),
        "iterations": res.iterations,
        "qu_l3": res.qu_l3,
        "u_min": float(res.u_star.values.min()),
        "u_max": float(res.u_star.values.max()),
        "message": res.message,
    }


def cmd_solve(cfg: RunConfig) -> int:
    prob = build_problem(cfg)
    dc = _constants(prob)
    res = minimize(initial_guess(prob.p), prob.p, prob.chi, dc, prob.opts)
    out = _out_dir(cfg)
    summary = {
        "config": cfg.as_dict(),
        "ground_state": _result_summary(res),
        "u0_nonnegative": bool(res.u_star.values.min() >= -1e-12),
        "regime": prob.p.regime,
        "A": prob.p.A,
        "constants": dc.as_dict(),
        "surrogates": {
            "chi_inf": prob.chi_inf,
            "alpha_surrogate_norm": prob.p.bd.alpha_surrogate_norm,
            "kappa_num": dc.kappa_num,
        },
        "excited_states": [],
    }
    if res.state is not None:
        s = res.state
        r = prob.dom.nodes
        for name, f in (("u", s.u), ("phi", s.phi_u), ("xi", s.xi_u), ("eta", s.eta_u), ("theta", s.theta_u), ("chi", prob.chi)):
            _write_profile(out / f"{name}.csv", r, f.values)
    if res.converged:
        found = [res]
        for k in range(cfg.deflation_rounds):
            try:
                new = deflate_and_resolve(found, prob.p, prob.chi, dc, prob.opts)
            except NoNewSolution as exc:
                summary["excited_states"].append({"round": k + 1, "status": "NoNewSolution", "message": str(exc)})
                break
            found.append(new)
            summary["excited_states"].append({"round": k + 1, **_result_summary(new)})
            _write_profile(out / f"u_excited_{k + 1}.csv", prob.dom.nodes, new.u_star.values)
    _write_json(out / "summary.json", summary)
    print(f"solve: {res.status.value}  J* = {res.J_star:.12g}  residuals = {res.pde_residuals[0]:.2e}, {res.pde_residuals[1]:.2e}")
    print(f"C1 = {dc.C1:.6g}  C2 = {dc.C2:.6g}  C3 = {dc.C3:.6g}  regime = {prob.p.regime}")
    for ex in summary["excited_states"]:
        print(f"deflation round {ex['round']}: {ex['status']}")
    return 0 if res.converged else 1


def cmd_verify(cfg: RunConfig) -> int:
    prob = build_problem(cfg)
    dc = _constants(prob)
    reports = run_lemma_suite(prob.p, cfg.seed, cfg.n_samples, prob.chi, dc, prob.opts.boundary_tol)
    _write_json(
        _out_dir(cfg) / "verify.json",
        {"config": cfg.as_dict(), "constants": dc.as_dict(), "reports": [r.as_dict() for r in reports]},
    )
    for r in reports:
        tag = "SKIP" if r.skipped else ("PASS" if r.passed else "FAIL")
        extra = r.reason if r.skipped else (f"observed {r.observed:.4g}" if r.observed is not None else f"worst slack {r.worst_slack:.3e}")
        print(f"{tag} {r.name}: {extra}")
        if not r.passed:
            print(f"     violated: {r.anchor}")
    return 0 if all(r.passed for r in reports) else 1


def cmd_experiment(cfg: RunConfig, name: str) -> int:
    if name not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    prob = build_problem(cfg)
    try:
        if name == "blowup":
            rep = experiment_blowup(initial_guess(prob.p), prob.p, cfg.n_steps, prob.chi)
        elif name == "noQ":
            rep = experiment_noQ(prob.p, cfg.n_terms, prob.chi)
        else:
            rep = experiment_nonexistence(prob.p, cfg.n_starts, cfg.seed, _constants(prob), prob.opts)
    except ValueError as exc:
        raise ValidationError(f"experiment {name}: {exc}") from exc
    _write_json(_out_dir(cfg) / f"experiment_{name}.json", {"config": cfg.as_dict(), "report": rep.as_dict()})
    print(f"{'PASS' if rep.passed else 'FAIL'} {rep.name}: {rep.anchor}")
    if rep.reason:
        print(rep.reason)
    return 0 if rep.passed else 1


def cmd_sweep(cfg: RunConfig, param: str, values: list[str]) -> int:
    if param not in RunConfig.__dataclass_fields__:
        raise ValidationError(f"unknown sweep parameter {param!r}")
    out = _out_dir(cfg)
    rows = []
    for idx, raw in enumerate(values):
        try:
            point = cfg.with_value(param, raw)
        except ValueError as exc:
            raise ValidationError(f"bad sweep value {raw!r} for {param}: {exc}") from exc
        prob = build_problem(point)
        res = minimize(initial_guess(prob.p), prob.p, prob.chi, None, prob.opts)
        row = {"index": idx, "value": raw.strip(), **_result_summary(res)}
        rows.append(row)
        _write_json(out / f"sweep_{idx:03d}.json", {"config": point.as_dict(), "result": row})
        print(f"{param} = {raw.strip():>10s}  {res.status.value:17s} J* = {res.J_star:.10g}")
    lines = ["index,value,status,J_star,grad_norm,pde_residual,iterations"]
    for row in rows:
        lines.append(
            f"{row['index']},{row['value']},{row['status']},{row['J_star']:.17g},"
            f"{row['grad_norm']:.17g},{row['pde_residuals'][0]:.17g},{row['iterations']}"
        )
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgm", description="Radial Klein-Gordon-Maxwell standing waves on a ball.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "compute the ground state (and deflated states)"), ("verify", "run the lemma suite")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config")
    ex = sub.add_parser("experiment", help="run a named experiment")
    ex.add_argument("name", choices=EXPERIMENTS)
    ex.add_argument("config")
    sw = sub.add_parser("sweep", help="solve over a list of values of one parameter")
    sw.add_argument("config")
    sw.add_argument("--param", required=True)
    sw.add_argument("--values", required=True, help="comma-separated values")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "experiment":
            return cmd_experiment(cfg, args.name)
        return cmd_sweep(cfg, args.param, [v for v in args.values.split(",") if v.strip()])
    except (ParseError, ValidationError, OSError) as exc:
        print(f"kgm: configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
