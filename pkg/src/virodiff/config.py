"""JSON run configuration: schema, defaults, validation and round-trip.

Document layout::

    {
      "grid":    {"dim": 1, "lengths": [1.0], "nodes": [64], "bc": "neumann"},
      "params":  {"k": ..., "N": ..., "mu_T": ..., "mu_I": ..., "mu_V": ...,
                  "D_T": ..., "D_I": ..., "D_V": ...,
                  "lambda": {"family": "constant", "value": 10.0}},
      "init":    {"T": {"kind": "constant", "value": 600.0}, "I": {...}, "V": {...}},
      "stepper": {"scheme": "imex_be", "dt": null, "t_end": 50.0, "snapshot_every": 10},
      "output":  {"dir": "out", "formats": ["csv", "json"]},
      "sweep":   {"axis": "k", "values": [...], "experiment": "classify"},
      "analysis": {...}
    }

Only ``grid`` and ``params`` are required.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .mesh import BOUNDARY_TAGS, Grid, build_grid
from .model import SCALAR_NAMES, Parameters, State, lambda_builder
from .timestep import MONITORS, SCHEMES, StepperConfig


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


LAMBDA_FIELDS = {
    "constant": ({"value"}, set()),
    "gaussian": ({"center", "width", "amplitude"}, {"base"}),
    "bumps": ({"bumps"}, {"base"}),
    "step": ({"levels"}, {"position", "axis"}),
    "tabulated": ({"values"}, set()),
}
INIT_FIELDS = {
    "constant": ({"value"}, set()),
    "bump": ({"base", "amplitude", "center", "width"}, set()),
    "tabulated": ({"values"}, set()),
    "random": ({"low", "high"}, set()),
    "t_infinity": (set(), {"scale", "offset"}),
}

DEFAULT_INIT = {
    "T": {"kind": "t_infinity"},
    "I": {"kind": "constant", "value": 1.0},
    "V": {"kind": "constant", "value": 1.0},
}
DEFAULT_STEPPER = {"scheme": "imex_be", "dt": None, "t_end": 10.0, "snapshot_every": 10,
                   "monitors": sorted(MONITORS), "band": 1e-6}
DEFAULT_OUTPUT = {"dir": "out", "formats": ["csv", "json"]}
DEFAULT_ANALYSIS = {"transient_fraction": 0.2, "margin": 1e-6, "epsilon": None,
                    "t_window": None, "n_starts": 20, "newton_tol": 1e-9, "workers": None}
SWEEP_KEYS = {"axis", "values", "experiment"}
TOP_KEYS = {"grid", "params", "init", "stepper", "output", "sweep", "analysis"}


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object", where)
    for key in obj:
        if key not in allowed:
            path = f"{where}.{key}" if where else key
            raise ConfigError(f"unknown key {path!r}", path)
    for key in required:
        if key not in obj:
            path = f"{where}.{key}" if where else key
            raise ConfigError(f"missing required key {path!r}", path)


def _positive(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value) \
            or value <= 0:
        raise ConfigError(f"{key} must be a positive number, got {value!r}", key)
    return float(value)


@dataclass
class RunConfig:
    grid: dict
    params: dict
    init: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_INIT))
    stepper: dict = field(default_factory=lambda: dict(DEFAULT_STEPPER))
    output: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_OUTPUT))
    sweep: dict | None = None
    analysis: dict = field(default_factory=lambda: dict(DEFAULT_ANALYSIS))

    def to_dict(self) -> dict:
        out = {"grid": self.grid, "params": self.params, "init": self.init,
               "stepper": self.stepper, "output": self.output, "analysis": self.analysis}
        if self.sweep is not None:
            out["sweep"] = self.sweep
        return copy.deepcopy(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    # -- builders -------------------------------------------------------------

    def build_grid(self) -> Grid:
        g = self.grid
        return build_grid(g["dim"], g["lengths"], g["nodes"], g["bc"])

    def build_params(self, grid: Grid | None = None) -> Parameters:
        grid = self.build_grid() if grid is None else grid
        lam = dict(self.params["lambda"])
        family = lam.pop("family")
        return Parameters(lam=lambda_builder(family, grid, **lam),
                          **{name: float(self.params[name]) for name in SCALAR_NAMES})

    def build_stepper(self) -> StepperConfig:
        s = self.stepper
        return StepperConfig(t_end=s["t_end"], dt=s["dt"], scheme=s["scheme"],
                             snapshot_every=s["snapshot_every"],
                             monitors=frozenset(s["monitors"]), band=s["band"])

    def build_init(self, params: Parameters, seed: int | None = None, T_inf=None) -> State:
        grid = params.grid
        rng = np.random.default_rng(seed)
        fields = {}
        for name in ("T", "I", "V"):
            spec = self.init[name]
            kind = spec["kind"]
            if kind == "constant":
                v = np.full(grid.n_nodes, float(spec["value"]))
            elif kind == "bump":
                center = np.atleast_1d(spec["center"])
                r2 = sum((x - c) ** 2 for x, c in zip(grid.coordinates, center))
                v = spec["base"] + spec["amplitude"] * np.exp(-r2 / (2 * spec["width"] ** 2))
            elif kind == "tabulated":
                v = np.asarray(spec["values"], dtype=float)
                if v.size != grid.n_nodes:
                    raise ConfigError(f"init.{name}.values has {v.size} entries, grid has "
                                      f"{grid.n_nodes} nodes", f"init.{name}.values")
            elif kind == "random":
                v = rng.uniform(spec["low"], spec["high"], grid.n_nodes)
            else:  # t_infinity
                if T_inf is None:
                    from .steady import solve_T_infinity
                    T_inf = solve_T_infinity(params)
                v = spec.get("scale", 1.0) * T_inf.values + spec.get("offset", 0.0)
            fields[name] = v
        return State(grid, fields["T"], fields["I"], fields["V"])


def _validate_grid(g):
    _check_keys(g, {"dim", "lengths", "nodes", "bc"}, "grid", ("dim", "lengths", "nodes"))
    g = dict(g)
    g.setdefault("bc", "neumann")
    if g["dim"] not in (1, 2) or isinstance(g["dim"], bool):
        raise ConfigError(f"grid.dim must be 1 or 2, got {g['dim']!r}", "grid.dim")
    for key in ("lengths", "nodes"):
        if not isinstance(g[key], list) or len(g[key]) != g["dim"]:
            raise ConfigError(f"grid.{key} must be a list of {g['dim']} entries", f"grid.{key}")
    g["lengths"] = [_positive(L, "grid.lengths") for L in g["lengths"]]
    for n in g["nodes"]:
        if isinstance(n, bool) or not isinstance(n, int) or n < 3:
            raise ConfigError(f"grid.nodes entries must be integers >= 3, got {n!r}",
                              "grid.nodes")
    if g["bc"] not in BOUNDARY_TAGS:
        raise ConfigError(f"grid.bc must be one of {BOUNDARY_TAGS}, got {g['bc']!r}", "grid.bc")
    return g


def _validate_params(p):
    _check_keys(p, set(SCALAR_NAMES) | {"lambda"}, "params", SCALAR_NAMES + ("lambda",))
    p = dict(p)
    for name in SCALAR_NAMES:
        p[name] = _positive(p[name], name)
    lam = p["lambda"]
    if not isinstance(lam, dict) or "family" not in lam:
        raise ConfigError("params.lambda needs a 'family'", "params.lambda.family")
    family = lam["family"]
    if family not in LAMBDA_FIELDS:
        raise ConfigError(f"unknown lambda family {family!r}", family)
    req, opt = LAMBDA_FIELDS[family]
    _check_keys(lam, req | opt | {"family"}, "params.lambda", tuple(sorted(req)))
    p["lambda"] = dict(lam)
    return p


def _validate_init(init):
    _check_keys(init, {"T", "I", "V"}, "init")
    out = copy.deepcopy(DEFAULT_INIT)
    for name, spec in init.items():
        where = f"init.{name}"
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError(f"{where} needs a 'kind'", f"{where}.kind")
        kind = spec["kind"]
        if kind not in INIT_FIELDS:
            raise ConfigError(f"unknown init kind {kind!r} for {name}", f"{where}.kind")
        req, opt = INIT_FIELDS[kind]
        _check_keys(spec, req | opt | {"kind"}, where, tuple(sorted(req)))
        if kind == "constant" and (not isinstance(spec["value"], (int, float))
                                   or spec["value"] < 0):
            raise ConfigError(f"{where}.value must be nonnegative", f"{where}.value")
        if kind == "random" and not 0 <= spec["low"] < spec["high"]:
            raise ConfigError(f"{where} needs 0 <= low < high", f"{where}.low")
        out[name] = dict(spec)
    return out


def _validate_stepper(s):
    _check_keys(s, set(DEFAULT_STEPPER), "stepper")
    out = dict(DEFAULT_STEPPER)
    out.update(s)
    if out["scheme"] not in SCHEMES:
        raise ConfigError(f"stepper.scheme must be one of {SCHEMES}", "stepper.scheme")
    out["t_end"] = _positive(out["t_end"], "stepper.t_end")
    if out["dt"] is not None:
        out["dt"] = _positive(out["dt"], "stepper.dt")
        if out["dt"] >= out["t_end"]:
            raise ConfigError("stepper.dt must be smaller than stepper.t_end", "stepper.dt")
    se = out["snapshot_every"]
    if isinstance(se, bool) or not isinstance(se, int) or se < 1:
        raise ConfigError("stepper.snapshot_every must be a positive integer",
                          "stepper.snapshot_every")
    bad = set(out["monitors"]) - MONITORS
    if bad:
        raise ConfigError(f"unknown monitors {sorted(bad)}", "stepper.monitors")
    out["monitors"] = sorted(out["monitors"])
    out["band"] = _positive(out["band"], "stepper.band")
    return out


def _validate_output(o):
    _check_keys(o, set(DEFAULT_OUTPUT), "output")
    out = copy.deepcopy(DEFAULT_OUTPUT)
    out.update(o)
    bad = set(out["formats"]) - {"csv", "json"}
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}", "output.formats")
    return out


def _validate_sweep(s):
    _check_keys(s, SWEEP_KEYS, "sweep", ("axis", "values"))
    out = {"experiment": "classify", **s}
    if out["axis"] not in SCALAR_NAMES:
        raise ConfigError(f"sweep.axis must be one of {SCALAR_NAMES}", "sweep.axis")
    if out["experiment"] not in ("classify", "decay", "growth"):
        raise ConfigError(f"unknown sweep experiment {out['experiment']!r}", "sweep.experiment")
    out["values"] = [_positive(v, "sweep.values") for v in out["values"]]
    return out


def _validate_analysis(a):
    _check_keys(a, set(DEFAULT_ANALYSIS), "analysis")
    out = dict(DEFAULT_ANALYSIS)
    out.update(a)
    tf = out["transient_fraction"]
    if not isinstance(tf, (int, float)) or not 0 <= tf < 1:
        raise ConfigError("analysis.transient_fraction must lie in [0, 1)",
                          "analysis.transient_fraction")
    return out


def config_from_dict(doc: dict) -> RunConfig:
    _check_keys(doc, TOP_KEYS, "", ("grid", "params"))
    cfg = RunConfig(
        grid=_validate_grid(doc["grid"]),
        params=_validate_params(doc["params"]),
        init=_validate_init(doc.get("init", {})),
        stepper=_validate_stepper(doc.get("stepper", {})),
        output=_validate_output(doc.get("output", {})),
        sweep=_validate_sweep(doc["sweep"]) if doc.get("sweep") is not None else None,
        analysis=_validate_analysis(doc.get("analysis", {})),
    )
    # the supply field can only be checked against a concrete grid
    try:
        cfg.build_params()
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"params.lambda: {exc}", "params.lambda") from exc
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document.

    Raises
    ------
    ConfigError
        On malformed JSON (message carries line and column), unknown keys
        and out-of-range values; ``key`` names the offending entry.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON syntax error at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc
    return config_from_dict(doc)
