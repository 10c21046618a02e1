"""Flat ``key = value`` run configuration and the problem it describes.

Lines are ``key = value`` with ``#`` starting a comment.  Unknown keys,
duplicates and malformed values raise ParseError (with the line number);
values that parse but break an invariant raise ValidationError.

The coupling is given by ``q_spec``:

* ``constant(c)``
* ``annulus(inner, outer, value)``: ``value`` on inner <= r <= outer,
  ``q_background`` elsewhere
* ``step(q0, r_step)``: zero inside r_step, then rising linearly from q0 to 2 q0
* ``table(r:q, r:q, ...)``: piecewise-linear through the given points
* ``decay(scale)``: scale * max(0, r - R/2)^2 / (R/2)^2, which has no gap

The gap parameter q0 is taken from the structure of the first three forms
(or from an explicit ``q0`` key); tables and decays carry no gap unless one
is declared.  Tolerances ``singular_tol`` and ``boundary_tol`` are
coefficients multiplying |ball|^(1/3).
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .elliptic import BoundaryData, solve_chi
from .grid import GridFunction, RadialDomain
from .reduction import CouplingField, PhysicsParams
from .solver import SolveOptions

__all__ = [
    "ParseError",
    "ValidationError",
    "RunConfig",
    "load_config",
    "parse_config",
    "build_coupling",
    "build_problem",
    "Problem",
]


class ParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    R: float = 1.0
    N: int = 2001
    m: float = 1.0
    omega: float = 0.5
    alpha: float = 0.05
    q_spec: str = "constant(1)"
    q0: float | None = None
    q_background: float = 1.0
    grad_tol: float = 1e-8
    pde_tol: float = 1e-6
    singular_tol: float = 1e-8
    boundary_tol: float = 1e-5
    seed: int = 0
    max_iter: int = 5000
    n_samples: int = 100
    output_dir: str = "kgm_output"
    deflation_rounds: int = 0
    n_starts: int = 5
    n_steps: int = 20
    n_terms: int = 4

    def __post_init__(self):
        if not self.R > 0:
            raise ValidationError(f"R must be positive, got {self.R}")
        if self.N < 16:
            raise ValidationError(f"N must be at least 16, got {self.N}")
        for name in ("grad_tol", "pde_tol", "singular_tol", "boundary_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"tolerance {name} must be positive, got {getattr(self, name)}")
        if self.boundary_tol <= self.singular_tol:
            raise ValidationError("boundary_tol must exceed singular_tol")
        for name in ("max_iter", "n_samples", "n_starts", "n_terms"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be at least 1")
        if self.n_steps < 0 or self.deflation_rounds < 0:
            raise ValidationError("n_steps and deflation_rounds must be nonnegative")
        if self.q0 is not None and not self.q0 > 0:
            raise ValidationError(f"q0 must be positive, got {self.q0}")
        for name in ("m", "omega", "alpha", "q_background"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        _parse_q_spec(self.q_spec)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_value(self, key: str, raw) -> "RunConfig":
        return dataclasses.replace(self, **{key: _convert(key, raw)})


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_INT_KEYS = {"N", "seed", "max_iter", "n_samples", "deflation_rounds", "n_starts", "n_steps", "n_terms"}
_STR_KEYS = {"q_spec", "output_dir"}


def _convert(key: str, raw):
    if key not in _FIELDS:
        raise KeyError(key)
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw
    if key == "q0" and raw.lower() in ("none", ""):
        return None
    if key in _INT_KEYS:
        value = float(raw)
        if value != int(value):
            raise ValueError(f"{key} must be an integer, got {raw}")
        return int(value)
    return float(raw)


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(lineno, f"expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _FIELDS:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in values:
            raise ParseError(lineno, f"duplicate key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ParseError(lineno, f"bad value for {key}: {exc}") from exc
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


_Q_FORMS = {"constant": 1, "annulus": 3, "step": 2, "decay": 1}


def _parse_q_spec(spec: str) -> tuple[str, list]:
    mt = re.fullmatch(r"\s*(\w+)\s*\((.*)\)\s*", spec)
    if not mt:
        raise ValidationError(f"q_spec must look like name(args), got {spec!r}")
    name, body = mt.group(1), mt.group(2)
    parts = [s.strip() for s in body.split(",") if s.strip()]
    try:
        if name == "table":
            pts = [tuple(float(x) for x in s.split(":")) for s in parts]
            if len(pts) < 2 or any(len(pt) != 2 for pt in pts):
                raise ValueError("table needs at least two r:q pairs")
            rs = [pt[0] for pt in pts]
            if any(b <= a for a, b in zip(rs, rs[1:])):
                raise ValueError("table radii must increase")
            return name, pts
        if name not in _Q_FORMS:
            raise ValueError(f"unknown q_spec form {name!r}")
        args = [float(s) for s in parts]
        if len(args) != _Q_FORMS[name]:
            raise ValueError(f"{name} takes {_Q_FORMS[name]} arguments, got {len(args)}")
    except ValueError as exc:
        raise ValidationError(f"q_spec {spec!r}: {exc}") from exc
    if name == "annulus" and not 0 <= args[0] < args[1]:
        raise ValidationError("annulus needs 0 <= inner < outer")
    if name == "step" and not args[0] > 0:
        raise ValidationError("step needs q0 > 0")
    return name, args


def build_coupling(cfg: RunConfig, dom: RadialDomain) -> CouplingField:
    name, args = _parse_q_spec(cfg.q_spec)
    r = dom.nodes
    gap = None
    if name == "constant":
        q = np.full(dom.N, args[0])
        gap = abs(args[0]) or None
    elif name == "annulus":
        inner, outer, value = args
        q = np.where((r >= inner) & (r <= outer), value, cfg.q_background)
        nonzero = [abs(v) for v in (value, cfg.q_background) if v != 0]
        gap = min(nonzero) if nonzero else None
    elif name == "step":
        q0, r_step = args
        if not 0 <= r_step < dom.R:
            raise ValidationError("step needs 0 <= r_step < R")
        q = np.where(r >= r_step, q0 * (1.0 + (r - r_step) / (dom.R - r_step)), 0.0)
        gap = q0
    elif name == "table":
        rs, qs = zip(*args)
        q = np.interp(r, rs, qs)
    else:
        half = 0.5 * dom.R
        q = args[0] * np.maximum(0.0, r - half) ** 2 / half**2
    if cfg.q0 is not None:
        gap = cfg.q0
    if not np.any(q != 0.0):
        raise ValidationError(f"q_spec {cfg.q_spec!r} yields q identically zero")
    return CouplingField(GridFunction.neumann(q), q0=gap)


@dataclass(frozen=True, eq=False)
class Problem:
    cfg: RunConfig
    dom: RadialDomain
    p: PhysicsParams
    chi: GridFunction
    chi_inf: float
    opts: SolveOptions


def build_problem(cfg: RunConfig) -> Problem:
    dom = RadialDomain(cfg.R, cfg.N)
    q = build_coupling(cfg, dom)
    bd = BoundaryData.on(cfg.alpha, dom)
    p = PhysicsParams(dom, cfg.m, cfg.omega, q, bd)
    chi, chi_inf = solve_chi(bd, dom)
    unit = dom.volume ** (1.0 / 3.0)
    opts = SolveOptions(
        grad_tol=cfg.grad_tol,
        pde_tol=cfg.pde_tol,
        singular_tol=cfg.singular_tol * unit,
        boundary_tol=cfg.boundary_tol * unit,
        max_iter=cfg.max_iter,
    )
    return Problem(cfg, dom, p, chi, chi_inf, opts)
