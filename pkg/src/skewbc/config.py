"""Run configuration: TOML parsing, validation and object construction.

Layout::

    [model]       name = "swe" | "cee" | "iee", plus gamma / alpha, beta, f0, f_beta
    [grid]        order, nx, ny, domain = [x0, x1, y0, y1]
    [time]        dt or cfl, and t_end or steps
    [initial]     preset = "constant" | "gaussian", state (primitive), component,
                  center, width, amplitude, divergence
    [boundaries.<edge>]  kind, formulation, s_tilde, R, data, data_value,
                  data_amplitude, data_frequency
    [outputs]     ledger, report

Unknown keys are rejected and every validation error is collected with its
field path before :class:`ConfigError` is raised.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python < 3.11
    import tomli as _toml

from .boundary import BoundaryCondition, background_data
from .core import StateField
from .equations import MODELS
from .sbp import EDGES, MIN_NODES

MAX_NODES = 201 * 201
BC_KINDS = ("characteristic", "dirichlet-velocity", "none")
DATA_KINDS = ("zero", "background", "constant", "sinusoidal")
PRIMITIVE_DEFAULTS = {
    "iee": [1.0, 0.0, 1.0],  # u, v, p
    "swe": [1.0, 0.0, 0.0],  # phi, u, v
    "cee": [1.0, 0.0, 0.0, 1.0],  # rho, u, v, p
}
MODEL_KEYS = {
    "iee": {"name"},
    "swe": {"name", "alpha", "beta", "f0", "f_beta"},
    "cee": {"name", "gamma"},
}
SECTION_KEYS = {
    "grid": {"order", "nx", "ny", "domain"},
    "time": {"dt", "cfl", "t_end", "steps"},
    "initial": {"preset", "state", "component", "center", "width", "amplitude", "divergence"},
    "outputs": {"ledger", "report"},
}
BOUNDARY_KEYS = {
    "kind", "formulation", "s_tilde", "R", "data", "data_value", "data_amplitude", "data_frequency",
}


class ConfigError(ValueError):
    """All validation errors of a configuration, each prefixed by its field path."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class BoundarySpec:
    kind: str = "characteristic"
    formulation: object = "auto"
    s_tilde: object = 0.5
    R: object = None
    data: str = "zero"
    data_value: float = 0.0
    data_amplitude: float = 0.0
    data_frequency: float = 1.0


@dataclass
class RunConfig:
    model: str
    model_params: dict
    order: int = 2
    nx: int = 17
    ny: int = 17
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    dt: float = None
    cfl: float = 0.5
    t_end: float = None
    steps: int = None
    initial: dict = field(default_factory=dict)
    boundaries: dict = field(default_factory=dict)
    ledger: str = "ledger.csv"
    report: str = "report.txt"

    def build_model(self):
        return MODELS[self.model](**self.model_params)

    def background_primitive(self):
        return list(self.initial.get("state", PRIMITIVE_DEFAULTS[self.model]))

    def primitive_field(self, x, y, perturbed=True):
        """Primitive variables at ``(x, y)``; the background omits the bump."""
        ini = self.initial
        base = self.background_primitive()
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        prim = [b + 0.0 * x for b in base]
        cx, cy = ini.get("center", [0.5 * (self.domain[0] + self.domain[1]),
                                    0.5 * (self.domain[2] + self.domain[3])])
        div = float(ini.get("divergence", 0.0))
        if div:
            # velocity slots: iee (0, 1), swe/cee (1, 2)
            iu = 0 if self.model == "iee" else 1
            prim[iu] = prim[iu] + div * (x - cx)
            prim[iu + 1] = prim[iu + 1] + div * (y - cy)
        if perturbed and ini.get("preset", "constant") == "gaussian":
            w = float(ini.get("width", 0.1))
            a = float(ini.get("amplitude", 0.1))
            k = int(ini.get("component", 0))
            prim[k] = prim[k] + a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / w**2)
        return np.array(prim)

    def state_at(self, model, x, y, perturbed=True):
        prim = self.primitive_field(x, y, perturbed)
        if self.model == "iee":
            return prim
        return model.from_primitive(prim)

    def initial_field(self, model, grid):
        X, Y = grid.coordinates()
        U = self.state_at(model, X, Y)
        return StateField(U.reshape(model.n_vars, grid.ny, grid.nx), 0.0)

    def boundary_condition(self, model, edge):
        spec = self.boundaries[edge]
        if spec.kind == "none":
            return None
        if spec.R is not None:
            R = np.asarray(spec.R, dtype=float)
        elif spec.kind == "dirichlet-velocity":
            R = model.dirichlet_R
        else:
            R = None
        formulation = spec.formulation
        if isinstance(formulation, list):
            formulation = tuple(formulation)
        S_tilde = np.asarray(spec.s_tilde, dtype=float) if isinstance(spec.s_tilde, list) else spec.s_tilde
        if spec.data == "zero":
            G = None
        elif spec.data == "background":
            G = background_data(model, lambda p, t: self.state_at(model, p[0], p[1], perturbed=False),
                                R, S_tilde)
        elif spec.data == "constant":
            value = float(spec.data_value)
            G = lambda p, t, split: value  # noqa: E731
        else:
            amp, freq = float(spec.data_amplitude), float(spec.data_frequency)
            G = lambda p, t, split: amp * np.sin(2.0 * np.pi * freq * t)  # noqa: E731
        return BoundaryCondition(R=R, S_tilde=S_tilde, G=G, formulation=formulation, kind=spec.kind)


def _number(errors, path, value, kind=float, lo=None, hi=None, lo_open=False, hi_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (kind is int and not isinstance(value, int)):
        errors.append(f"{path}: expected {'integer' if kind is int else 'number'}, got {value!r}")
        return None
    if lo is not None and (value <= lo if lo_open else value < lo):
        errors.append(f"{path}: {value} below allowed range ({'>' if lo_open else '>='} {lo})")
        return None
    if hi is not None and (value >= hi if hi_open else value > hi):
        errors.append(f"{path}: {value} above allowed range ({'<' if hi_open else '<='} {hi})")
        return None
    return kind(value)


def _unknown(errors, path, table, allowed):
    for key in table:
        if key not in allowed:
            errors.append(f"{path}.{key}: unknown key")


def _table(errors, raw, key):
    value = raw.get(key, {})
    if not isinstance(value, dict):
        errors.append(f"{key}: expected a table")
        return {}
    return value


def validate(raw):
    """Validate a parsed mapping and return a :class:`RunConfig`."""
    errors = []
    _unknown(errors, "config", raw, {"model", "grid", "time", "initial", "boundaries", "outputs"})

    model_t = _table(errors, raw, "model")
    name = model_t.get("name")
    if name not in MODELS:
        errors.append(f"model.name: expected one of {sorted(MODELS)}, got {name!r}")
        name = None
    params = {}
    if name is not None:
        _unknown(errors, "model", model_t, MODEL_KEYS[name])
        if name == "cee":
            g = _number(errors, "model.gamma", model_t.get("gamma", 1.4), lo=1.0, hi=2.0,
                        lo_open=True, hi_open=True)
            params["gamma"] = 1.4 if g is None else g
        elif name == "swe":
            for key, default in (("alpha", 0.2), ("beta", 0.2), ("f0", 0.0), ("f_beta", 0.0)):
                v = _number(errors, f"model.{key}", model_t.get(key, default))
                params[key] = default if v is None else v

    grid_t = _table(errors, raw, "grid")
    _unknown(errors, "grid", grid_t, SECTION_KEYS["grid"])
    order = grid_t.get("order", 2)
    if order not in MIN_NODES:
        errors.append(f"grid.order: expected 2 or 4, got {order!r}")
        order = 2
    nx = _number(errors, "grid.nx", grid_t.get("nx", 17), int, lo=MIN_NODES[order])
    ny = _number(errors, "grid.ny", grid_t.get("ny", 17), int, lo=MIN_NODES[order])
    if nx is not None and ny is not None and nx * ny > MAX_NODES:
        errors.append(f"grid: nx*ny = {nx * ny} exceeds the cap {MAX_NODES}")
    domain = grid_t.get("domain", [0.0, 1.0, 0.0, 1.0])
    if (not isinstance(domain, list) or len(domain) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in domain)):
        errors.append("grid.domain: expected [x0, x1, y0, y1]")
        domain = [0.0, 1.0, 0.0, 1.0]
    elif not (domain[1] > domain[0] and domain[3] > domain[2]):
        errors.append("grid.domain: extents must be increasing")

    time_t = _table(errors, raw, "time")
    _unknown(errors, "time", time_t, SECTION_KEYS["time"])
    dt = cfl = t_end = steps = None
    if "dt" in time_t:
        dt = _number(errors, "time.dt", time_t["dt"], lo=0.0, lo_open=True)
    cfl = _number(errors, "time.cfl", time_t.get("cfl", 0.5), lo=0.0, lo_open=True)
    if "t_end" in time_t:
        t_end = _number(errors, "time.t_end", time_t["t_end"], lo=0.0)
    if "steps" in time_t:
        steps = _number(errors, "time.steps", time_t["steps"], int, lo=0)
    if "t_end" in time_t and "steps" in time_t:
        errors.append("time: give either t_end or steps, not both")
    if "t_end" not in time_t and "steps" not in time_t:
        steps = 100

    ini_t = _table(errors, raw, "initial")
    _unknown(errors, "initial", ini_t, SECTION_KEYS["initial"])
    if ini_t.get("preset", "constant") not in ("constant", "gaussian"):
        errors.append(f"initial.preset: expected 'constant' or 'gaussian', got {ini_t.get('preset')!r}")
    if name is not None and "state" in ini_t:
        st = ini_t["state"]
        n_prim = len(PRIMITIVE_DEFAULTS[name])
        if not isinstance(st, list) or len(st) != n_prim:
            errors.append(f"initial.state: expected {n_prim} primitive values for {name}")
    if "width" in ini_t:
        _number(errors, "initial.width", ini_t["width"], lo=0.0, lo_open=True)
    if "amplitude" in ini_t:
        _number(errors, "initial.amplitude", ini_t["amplitude"])
    if "divergence" in ini_t:
        _number(errors, "initial.divergence", ini_t["divergence"])
    if "component" in ini_t and name is not None:
        _number(errors, "initial.component", ini_t["component"], int, lo=0,
                hi=len(PRIMITIVE_DEFAULTS[name]) - 1)
    if "center" in ini_t:
        c = ini_t["center"]
        if not isinstance(c, list) or len(c) != 2:
            errors.append("initial.center: expected [x, y]")

    bnd_t = _table(errors, raw, "boundaries")
    boundaries = {}
    for edge in bnd_t:
        if edge not in EDGES:
            errors.append(f"boundaries.{edge}: unknown edge")
    for edge in EDGES:
        path = f"boundaries.{edge}"
        if edge not in bnd_t:
            errors.append(f"{path}: missing edge entry")
            continue
        spec_t = bnd_t[edge]
        if not isinstance(spec_t, dict):
            errors.append(f"{path}: expected a table")
            continue
        _unknown(errors, path, spec_t, BOUNDARY_KEYS)
        spec = BoundarySpec(**{k: v for k, v in spec_t.items() if k in BOUNDARY_KEYS})
        if spec.kind not in BC_KINDS:
            errors.append(f"{path}.kind: expected one of {list(BC_KINDS)}, got {spec.kind!r}")
        if spec.data not in DATA_KINDS:
            errors.append(f"{path}.data: expected one of {list(DATA_KINDS)}, got {spec.data!r}")
        f = spec.formulation
        if name is not None:
            allowed = set(MODELS[name].formulations) | {"auto"}
            forms = f if isinstance(f, list) else [f]
            if (isinstance(f, list) and len(f) != 2) or any(x not in allowed for x in forms):
                errors.append(f"{path}.formulation: expected 'auto', one of "
                              f"{sorted(allowed - {'auto'})} or an [inflow, outflow] pair, got {f!r}")
        s = spec.s_tilde
        if isinstance(s, list):
            if not all(isinstance(v, (int, float)) for v in s):
                errors.append(f"{path}.s_tilde: expected numbers")
        else:
            _number(errors, f"{path}.s_tilde", s)
        for key in ("data_value", "data_amplitude", "data_frequency"):
            _number(errors, f"{path}.{key}", getattr(spec, key))
        if spec.R is not None and not isinstance(spec.R, list):
            errors.append(f"{path}.R: expected a (nested) list of numbers")
        boundaries[edge] = spec

    out_t = _table(errors, raw, "outputs")
    _unknown(errors, "outputs", out_t, SECTION_KEYS["outputs"])

    if errors:
        raise ConfigError(errors)
    return RunConfig(
        model=name,
        model_params=params,
        order=order,
        nx=nx,
        ny=ny,
        domain=tuple(float(v) for v in domain),
        dt=dt,
        cfl=cfl,
        t_end=t_end,
        steps=steps,
        initial=dict(ini_t),
        boundaries=boundaries,
        ledger=str(out_t.get("ledger", "ledger.csv")),
        report=str(out_t.get("report", "report.txt")),
    )


def parse_config(path):
    """Read and validate a TOML run configuration."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = _toml.load(fh)
        except _toml.TOMLDecodeError as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
    return validate(raw)
