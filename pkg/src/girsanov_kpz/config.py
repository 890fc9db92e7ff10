"""YAML experiment configuration.

Either name a built-in scenario::

    scenario: linear
    params: {c: [0.7, -0.4], sigma: [[1, 0.3], [0, 0.9]]}
    T: 1.0
    dt: 0.001
    n_paths: 100
    seed: 42

or give explicit fields as expressions in ``t, x1 .. xd``::

    dimension: 2
    fields:
      sigma: [["1", "0"], ["0", "1"]]
      drift: ["-x2", "x1"]          # omit to use sigma sigma^T grad v
      potential: "0"
      gradient: ["0", "0"]          # optional analytic derivatives
      hessian: [["0", "0"], ["0", "0"]]
      time_derivative: "0"

See ``configs/`` for one annotated file per command.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields
from typing import Any, Optional

import numpy as np
import yaml

from . import expr
from .burgers1d import Monomial
from .errors import ConfigError
from .fields import FieldBundle, Potential, Scenario, build_scenario, drift_from_potential
from .sde import TimeGrid
from .verify import Thresholds


@dataclass
class KPZSettings:
    x_min: Any = -5.0
    x_max: Any = 5.0
    n_points: Any = 201
    steps: Optional[int] = None
    n_out: int = 1
    margin: Optional[float] = None


@dataclass
class BurgersSettings:
    phi: Any = None
    r_ref: float = 0.0
    x_min: float = -2.0
    x_max: float = 2.0
    n_points: int = 41
    t: float = 0.0
    h: float = 1e-3
    tol: float = 1e-4
    source: str = "coefficients"


@dataclass
class GradientCheckSettings:
    region: Optional[list] = None
    n_samples: int = 64
    t: float = 0.0
    tol: Optional[float] = None


@dataclass
class Config:
    T: float
    n_paths: int
    seed: int
    dimension: int
    x0: np.ndarray
    fields: FieldBundle
    potential: Potential
    scenario: Optional[str] = None
    dt: Optional[float] = None
    dt_list: Optional[list] = None
    phi: Any = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    kpz: KPZSettings = field(default_factory=KPZSettings)
    burgers: BurgersSettings = field(default_factory=BurgersSettings)
    gradient_check: GradientCheckSettings = field(default_factory=GradientCheckSettings)
    source: str = ""

    @property
    def grid(self) -> TimeGrid:
        dt = self.dt if self.dt is not None else self.dt_list[-1]
        return TimeGrid.from_dt(self.T, dt)

    @property
    def refinement_dts(self):
        if self.dt_list is not None:
            return list(self.dt_list)
        return [self.dt, self.dt / 2, self.dt / 4]

    @property
    def region(self):
        if self.gradient_check.region is not None:
            return self.gradient_check.region
        return [(float(c) - 2.0, float(c) + 2.0) for c in self.x0]


# ---------------------------------------------------------------------------


def _marks(node, path="", out=None):
    """Map dotted key paths to (line, column) of the YAML scalar/collection."""
    out = {} if out is None else out
    out[path] = (node.start_mark.line + 1, node.start_mark.column + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{path}.{k.value}" if path else str(k.value)
            _marks(v, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _marks(v, f"{path}[{i}]", out)
    return out


class _Ctx:
    def __init__(self, marks):
        self.marks = marks

    def error(self, path, message):
        line, col = self.marks.get(path, (None, None))
        return ConfigError(message, field=path, line=line, column=col)

    def parse(self, path, text, dim, extra=()):
        if isinstance(text, bool) or not isinstance(text, (str, int, float)):
            raise self.error(path, f"expected an expression string, got {text!r}")
        try:
            return expr.parse(str(text), dim=dim, extra_names=extra)
        except expr.ExprError as exc:
            raise self.error(path, f"{type(exc).__name__}: {exc}") from None


def _number(ctx, data, key, kind=float, default=None, required=False):
    if key not in data:
        if required:
            raise ctx.error(key, "missing required key")
        return default
    val = data[key]
    if val is None:
        return default
    try:
        if kind is int and (isinstance(val, bool) or float(val) != int(val)):
            raise ValueError
        return kind(val)
    except (TypeError, ValueError):
        raise ctx.error(key, f"expected {kind.__name__}, got {val!r}") from None


def _section(ctx, data, key, cls):
    raw = data.get(key) or {}
    if not isinstance(raw, dict):
        raise ctx.error(key, "expected a mapping")
    names = {f.name for f in dc_fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ctx.error(f"{key}.{sorted(unknown)[0]}", f"unknown key (allowed: {sorted(names)})")
    return cls(**raw)


def _vector_field(asts):
    fs = [expr.compile_field(a) for a in asts]

    def f(t, x):
        return np.stack([g(t, x) for g in fs], axis=-1)

    return f


def _matrix_field(asts):
    rows = [[expr.compile_field(a) for a in row] for row in asts]

    def f(t, x):
        return np.stack([np.stack([g(t, x) for g in row], axis=-1) for row in rows], axis=-2)

    return f


def _matrix(ctx, path, raw, d):
    if not isinstance(raw, list) or len(raw) != d or any(
        not isinstance(r, list) or len(r) != d for r in raw
    ):
        raise ctx.error(path, f"expected a {d}x{d} list of expressions")
    return [[ctx.parse(f"{path}[{i}][{j}]", raw[i][j], d) for j in range(d)] for i in range(d)]


def _vector(ctx, path, raw, d):
    if not isinstance(raw, list) or len(raw) != d:
        raise ctx.error(path, f"expected a list of {d} expressions")
    return [ctx.parse(f"{path}[{i}]", raw[i], d) for i in range(d)]


def _potential(ctx, path, raw, d):
    if not isinstance(raw, dict):
        raw = {"potential": raw}
    if "potential" not in raw:
        raise ctx.error(path, "missing 'potential' expression")
    value = expr.compile_field(ctx.parse(f"{path}.potential", raw["potential"], d))
    grad = hess = dt = None
    if raw.get("gradient") is not None:
        grad = _vector_field(_vector(ctx, f"{path}.gradient", raw["gradient"], d))
    if raw.get("hessian") is not None:
        hess = _matrix_field(_matrix(ctx, f"{path}.hessian", raw["hessian"], d))
    if raw.get("time_derivative") is not None:
        dt = expr.compile_field(ctx.parse(f"{path}.time_derivative", raw["time_derivative"], d))
    return Potential(value, grad, hess, dt, name="expression")


def _phi(ctx, raw):
    if raw is None:
        return None
    if isinstance(raw, dict):
        try:
            return Monomial(float(raw["coef"]), int(raw["power"]))
        except (KeyError, TypeError, ValueError):
            raise ctx.error("burgers.phi", "monomial phi needs numeric 'coef' and integer 'power'") from None
    ast = ctx.parse("burgers.phi", raw, 0, extra=("r",))
    return lambda r: np.asarray(expr.evaluate(ast, {"r": np.asarray(r, dtype=float), "t": 0.0}),
                                dtype=float) * np.ones_like(np.asarray(r, dtype=float))


def _explicit_fields(ctx, raw, d):
    if not isinstance(raw, dict):
        raise ctx.error("fields", "expected a mapping")
    allowed = {"drift", "sigma", "potential", "gradient", "hessian", "time_derivative"}
    unknown = set(raw) - allowed
    if unknown:
        raise ctx.error(f"fields.{sorted(unknown)[0]}", f"unknown key (allowed: {sorted(allowed)})")
    if "sigma" not in raw:
        raise ctx.error("fields.sigma", "missing required key")
    sigma_asts = _matrix(ctx, "fields.sigma", raw["sigma"], d)
    sigma = _matrix_field(sigma_asts)
    constant = None
    if all(not expr.variables(a) for row in sigma_asts for a in row):
        constant = np.asarray(sigma(0.0, np.zeros(d)), dtype=float)
    potential = None
    if "potential" in raw:
        potential = _potential(ctx, "fields", {k: raw.get(k) for k in
                                               ("potential", "gradient", "hessian", "time_derivative")}, d)
    if raw.get("drift") is not None:
        drift = _vector_field(_vector(ctx, "fields.drift", raw["drift"], d))
        exact = True
    elif potential is not None:
        drift = drift_from_potential(potential, sigma)
        exact = potential.is_analytic
    else:
        raise ctx.error("fields.drift", "give a drift or a potential to build it from")
    if potential is None:
        potential = _potential(ctx, "fields", {"potential": "0"}, d)
    return FieldBundle(d, drift, sigma, "expression", exact, constant), potential


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=str(path))


def parse_config(text: str, source="<string>") -> Config:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None,
                          column=mark.column + 1 if mark else None) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    ctx = _Ctx(_marks(node))
    allowed = {"scenario", "params", "fields", "dimension", "T", "dt", "dt_list", "n_paths",
               "seed", "x0", "candidate", "thresholds", "kpz", "burgers", "gradient_check"}
    unknown = set(data) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ctx.error(key, f"unknown key (allowed: {sorted(allowed)})")

    has_scenario = data.get("scenario") is not None
    has_fields = data.get("fields") is not None
    if has_scenario == has_fields:
        raise ctx.error("scenario", "give exactly one of 'scenario' or 'fields'")

    T = _number(ctx, data, "T", required=True)
    if not T > 0:
        raise ctx.error("T", "T must be positive")
    dt = _number(ctx, data, "dt")
    dt_list = data.get("dt_list")
    if dt is None and dt_list is None:
        raise ctx.error("dt", "give 'dt' or 'dt_list'")
    if dt is not None:
        try:
            TimeGrid.from_dt(T, dt)
        except ConfigError as exc:
            raise ctx.error("dt", exc.reason) from None
    if dt_list is not None:
        if not isinstance(dt_list, list) or not dt_list:
            raise ctx.error("dt_list", "expected a non-empty list of step sizes")
        from .verify import check_dt_list
        try:
            dt_list = [float(v) for v in dt_list]
            check_dt_list(dt_list, T)
        except (ConfigError, ValueError, TypeError) as exc:
            raise ctx.error("dt_list", getattr(exc, "reason", str(exc))) from None
    n_paths = _number(ctx, data, "n_paths", int, 100)
    if n_paths < 1:
        raise ctx.error("n_paths", "n_paths must be >= 1")
    seed = _number(ctx, data, "seed", int, 0)

    phi = None
    if has_scenario:
        params = data.get("params") or {}
        if not isinstance(params, dict):
            raise ctx.error("params", "expected a mapping")
        try:
            sc: Scenario = build_scenario(str(data["scenario"]), **params)
        except ConfigError as exc:
            raise ctx.error(exc.field or "scenario", exc.reason) from None
        fb, potential, d = sc.fields, sc.potential, sc.fields.dim
        x0 = sc.x0
        phi = sc.phi
        if T >= sc.horizon_limit:
            raise ctx.error("T", f"scenario {sc.name!r} needs T < {sc.horizon_limit}")
        if "dimension" in data and int(data["dimension"]) != d:
            raise ctx.error("dimension", f"scenario {sc.name!r} has dimension {d}")
    else:
        d = _number(ctx, data, "dimension", int, required=True)
        if not 1 <= d <= expr.MAX_DIM:
            raise ctx.error("dimension", f"dimension must be in 1..{expr.MAX_DIM}")
        fb, potential = _explicit_fields(ctx, data["fields"], d)
        x0 = np.zeros(d)
    if data.get("x0") is not None:
        raw = data["x0"]
        if not isinstance(raw, list) or len(raw) != d:
            raise ctx.error("x0", f"expected a list of {d} numbers")
        try:
            x0 = np.array([float(v) for v in raw])
        except (TypeError, ValueError):
            raise ctx.error("x0", "entries must be numbers") from None
    if data.get("candidate") is not None:
        potential = _potential(ctx, "candidate", data["candidate"], d)

    thresholds = _section(ctx, data, "thresholds", Thresholds)
    kpz = _section(ctx, data, "kpz", KPZSettings)
    burgers = _section(ctx, data, "burgers", BurgersSettings)
    if burgers.phi is not None:
        phi = _phi(ctx, burgers.phi)
    gradient_check = _section(ctx, data, "gradient_check", GradientCheckSettings)

    return Config(T=T, n_paths=n_paths, seed=seed, dimension=d, x0=x0, fields=fb,
                  potential=potential, scenario=data.get("scenario"), dt=dt, dt_list=dt_list,
                  phi=phi, thresholds=thresholds, kpz=kpz, burgers=burgers,
                  gradient_check=gradient_check, source=source)
