"""Run configuration: JSON schema, initial conditions and the Gaussian-wells preset.

A configuration file is a JSON object with the keys ``model``, ``grid``,
``solver``, ``initial_condition``, ``entropy_pairs`` and ``output_dir``.
Unknown keys are rejected at every level. Example::

    {
      "model": {"beta": -0.25, "relaxation": {"kind": "constant", "tau": 1.0},
                "n_D": 1.0, "theta_D": 1.0, "allow_extended_beta": false},
      "grid": {"x_min": 0.0, "x_max": 1.0, "num_points": 501,
               "bc_left": {"kind": "dirichlet", "n_D": 1.0, "theta_D": 1.0},
               "bc_right": {"kind": "neumann"}},
      "solver": {"newton_tol": 1e-10, "dt_max": 0.002, "t_end": 1.0},
      "initial_condition": {"kind": "expression",
                            "n": [{"until": 0.5, "expr": "exp(-48*x^2)"},
                                  {"expr": "exp(-48*(x-1)^2)"}],
                            "theta": "1 + 0.5*sin(pi*x)"},
      "entropy_pairs": [[-0.75, 5.0]],
      "output_dir": "out"
    }

Omitted entries take the defaults of the corresponding dataclasses.
"""

from __future__ import annotations

import ast
import csv
import dataclasses
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from .discretization import Dirichlet, Grid1D, NeumannZeroFlux, State
from .model import Constant, EntropyPair, ModelParams, TemperatureDependent
from .solver import SolverConfig

__all__ = [
    "ConfigError",
    "Preset",
    "Expression",
    "Tabulated",
    "RunConfig",
    "evaluate_expression",
    "gaussian_wells",
    "initial_state",
    "preset_section4",
    "parse_config",
    "config_to_dict",
    "load_config",
    "save_config",
]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# --- initial conditions -------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    name: str = "gaussian-wells"


@dataclass(frozen=True)
class Expression:
    """Closed-form initial data; each field is an expression string or a
    tuple of ``(until, expr)`` pieces, the last one with ``until=None``."""

    n: Any
    theta: Any


@dataclass(frozen=True)
class Tabulated:
    """CSV file with columns ``x,n,theta`` (linearly interpolated onto the grid)."""

    path: str


InitialCondition = Union[Preset, Expression, Tabulated]

PRESETS = ("gaussian-wells",)

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "abs": np.abs}
_CONSTS = {"pi": math.pi, "e": math.e}


def _compile(expr: str) -> ast.Expression:
    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {expr!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load, ast.operator, ast.unaryop)):
            continue
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            continue
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            continue
        if isinstance(node, ast.Name) and (node.id == "x" or node.id in _CONSTS or node.id in _FUNCS):
            continue
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if len(node.args) == 1 and not node.keywords:
                continue
        raise ValueError(f"unsupported syntax in {expr!r}: {ast.dump(node)[:40]}")
    return tree


def _eval(node, x):
    if isinstance(node, ast.Expression):
        return _eval(node.body, x)
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, x), _eval(node.right, x))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, x))
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return x if node.id == "x" else _CONSTS[node.id]
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](_eval(node.args[0], x))
    raise ValueError("unsupported node")  # unreachable after _compile


def evaluate_expression(spec, x) -> np.ndarray:
    """Evaluate an expression string, or a piecewise list of ``(until, expr)``, at ``x``.

    Supported: numbers, ``x``, ``pi``, ``e``, ``+ - * / ^`` and the functions
    ``exp``, ``sin``, ``cos``, ``abs``. A piece applies for ``x <= until``;
    the first matching piece wins.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(spec, str):
        return np.broadcast_to(np.asarray(_eval(_compile(spec), x), dtype=float), x.shape).copy()
    out = np.full(x.shape, np.nan)
    done = np.zeros(x.shape, dtype=bool)
    for until, expr in spec:
        sel = ~done if until is None else (~done & (x <= until))
        out[sel] = evaluate_expression(expr, x)[sel]
        done |= sel
    if not done.all():
        raise ValueError("piecewise expression does not cover the whole grid")
    return out


def gaussian_wells(x) -> np.ndarray:
    """``exp(-48 x^2)`` on ``[0, 1/2]`` and ``exp(-48 (x-1)^2)`` on ``(1/2, 1]``."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0.5, np.exp(-48.0 * x**2), np.exp(-48.0 * (x - 1.0) ** 2))


def initial_state(ic: InitialCondition, grid: Grid1D, base_dir: Path | None = None) -> State:
    """Evaluate an initial condition on ``grid``; the result must be strictly positive."""
    x = grid.x
    if isinstance(ic, Preset):
        if ic.name != "gaussian-wells":
            raise ConfigError("initial_condition.name", f"unknown preset {ic.name!r}")
        n = gaussian_wells(x)
        theta = n.copy()
    elif isinstance(ic, Expression):
        try:
            n = evaluate_expression(ic.n, x)
            theta = evaluate_expression(ic.theta, x)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError("initial_condition", str(exc)) from None
    elif isinstance(ic, Tabulated):
        path = Path(ic.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            table = np.genfromtxt(path, delimiter=",", names=True)
        except OSError as exc:
            raise ConfigError("initial_condition.path", str(exc)) from None
        missing = {"x", "n", "theta"} - set(table.dtype.names or ())
        if missing:
            raise ConfigError("initial_condition.path", f"missing columns {sorted(missing)}")
        n = np.interp(x, table["x"], table["n"])
        theta = np.interp(x, table["x"], table["theta"])
    else:
        raise ConfigError("initial_condition", f"unknown kind {ic!r}")
    if not (np.all(np.isfinite(n)) and np.all(np.isfinite(theta))):
        raise ConfigError("initial_condition", "initial data is not finite")
    if np.any(n <= 0) or np.any(theta <= 0):
        raise ConfigError("initial_condition", "initial n and theta must be strictly positive at every node")
    return State.from_theta(n, theta)


# --- run configuration ----------------------------------------------------------


@dataclass
class RunConfig:
    model: ModelParams
    grid: Grid1D = field(default_factory=Grid1D)
    solver: SolverConfig = field(default_factory=SolverConfig)
    initial_condition: InitialCondition = field(default_factory=Preset)
    entropy_pairs: tuple = ()
    output_dir: str = "out"

    def __post_init__(self):
        self.entropy_pairs = tuple(self.entropy_pairs) or (EntropyPair.default_for(self.model.beta),)


def preset_section4(beta: float, allow_extended_beta: bool = False, **solver_overrides) -> RunConfig:
    """Gaussian wells on (0, 1) with 501 nodes, Dirichlet ``n = theta = 1`` at both ends.

    ``tau = 1``, ``dt_max = 2e-3``, ``t_end = 1`` and the Newton tolerance
    ``1e-10`` are defaults of this package, not physical data.
    """
    model = ModelParams(beta, Constant(1.0), 1.0, 1.0, allow_extended_beta)
    grid = Grid1D(0.0, 1.0, 501, Dirichlet(1.0, 1.0), Dirichlet(1.0, 1.0))
    solver = SolverConfig(**solver_overrides)
    return RunConfig(model, grid, solver, Preset("gaussian-wells"), (EntropyPair.default_for(beta),), "out")


def _take(data: dict, path: str, allowed: set) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}" if path else sorted(unknown)[0], "unknown key")
    return data


def _build(cls, path: str, kwargs: dict):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_relaxation(data, path):
    data = _take(data, path, {"kind", "tau", "tau0", "tau1"})
    kind = data.get("kind", "constant")
    if kind == "constant":
        if "tau0" in data or "tau1" in data:
            raise ConfigError(path, "constant relaxation takes only 'tau'")
        return _build(Constant, path, {k: data[k] for k in ("tau",) if k in data})
    if kind == "temperature_dependent":
        if "tau" in data:
            raise ConfigError(path, "temperature-dependent relaxation takes 'tau0' and 'tau1'")
        return _build(TemperatureDependent, path, {k: data[k] for k in ("tau0", "tau1") if k in data})
    raise ConfigError(f"{path}.kind", f"unknown relaxation kind {kind!r}")


def _parse_bc(data, path):
    data = _take(data, path, {"kind", "n_D", "theta_D"})
    kind = data.get("kind")
    if kind == "dirichlet":
        return _build(Dirichlet, path, {k: data[k] for k in ("n_D", "theta_D") if k in data})
    if kind == "neumann":
        if len(data) > 1:
            raise ConfigError(path, "neumann boundary takes no values")
        return NeumannZeroFlux()
    raise ConfigError(f"{path}.kind", f"unknown boundary kind {kind!r}")


def _parse_field_expr(value, path):
    if isinstance(value, str):
        _check_expr(value, path)
        return value
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected an expression string or a non-empty list of pieces")
    pieces = []
    for k, piece in enumerate(value):
        p = _take(piece, f"{path}[{k}]", {"until", "expr"})
        if "expr" not in p:
            raise ConfigError(f"{path}[{k}].expr", "missing")
        _check_expr(p["expr"], f"{path}[{k}].expr")
        until = p.get("until")
        if until is None and k != len(value) - 1:
            raise ConfigError(f"{path}[{k}].until", "only the last piece may omit 'until'")
        pieces.append((None if until is None else float(until), p["expr"]))
    return tuple(pieces)


def _check_expr(expr, path):
    if not isinstance(expr, str):
        raise ConfigError(path, "expression must be a string")
    try:
        _compile(expr)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_ic(data, path):
    data = _take(data, path, {"kind", "name", "n", "theta", "path"})
    kind = data.get("kind")
    if kind == "preset":
        _take(data, path, {"kind", "name"})
        name = data.get("name", "gaussian-wells")
        if name not in PRESETS:
            raise ConfigError(f"{path}.name", f"unknown preset {name!r}")
        return Preset(name)
    if kind == "expression":
        _take(data, path, {"kind", "n", "theta"})
        for key in ("n", "theta"):
            if key not in data:
                raise ConfigError(f"{path}.{key}", "missing")
        return Expression(_parse_field_expr(data["n"], f"{path}.n"), _parse_field_expr(data["theta"], f"{path}.theta"))
    if kind == "tabulated":
        _take(data, path, {"kind", "path"})
        if not isinstance(data.get("path"), str):
            raise ConfigError(f"{path}.path", "expected a file path")
        return Tabulated(data["path"])
    raise ConfigError(f"{path}.kind", f"unknown initial condition kind {kind!r}")


_SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverConfig)}


def parse_config(data: dict, allow_extended_beta: bool | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from a decoded JSON object.

    ``allow_extended_beta``, when given, overrides the flag in the file.
    """
    data = _take(data, "", {"model", "grid", "solver", "initial_condition", "entropy_pairs", "output_dir"})
    if "model" not in data:
        raise ConfigError("model", "missing")
    m = _take(data["model"], "model", {"beta", "relaxation", "n_D", "theta_D", "allow_extended_beta"})
    if "beta" not in m:
        raise ConfigError("model.beta", "missing")
    kwargs = {k: m[k] for k in ("beta", "n_D", "theta_D", "allow_extended_beta") if k in m}
    if allow_extended_beta is not None:
        kwargs["allow_extended_beta"] = allow_extended_beta
    if "relaxation" in m:
        kwargs["relaxation"] = _parse_relaxation(m["relaxation"], "model.relaxation")
    model = _build(ModelParams, "model", kwargs)

    g = _take(data.get("grid", {}), "grid", {"x_min", "x_max", "num_points", "bc_left", "bc_right"})
    gk = {k: g[k] for k in ("x_min", "x_max", "num_points") if k in g}
    for side in ("bc_left", "bc_right"):
        if side in g:
            gk[side] = _parse_bc(g[side], f"grid.{side}")
    grid = _build(Grid1D, "grid", gk)

    s = _take(data.get("solver", {}), "solver", _SOLVER_KEYS)
    solver = _build(SolverConfig, "solver", dict(s))

    ic = _parse_ic(data["initial_condition"], "initial_condition") if "initial_condition" in data else Preset()

    pairs = []
    for k, pair in enumerate(data.get("entropy_pairs", [])):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"entropy_pairs[{k}]", "expected [b1, b2]")
        pairs.append(_build(EntropyPair, f"entropy_pairs[{k}]", {"b1": float(pair[0]), "b2": float(pair[1])}))
    out = data.get("output_dir", "out")
    if not isinstance(out, str):
        raise ConfigError("output_dir", "expected a path string")
    return RunConfig(model, grid, solver, ic, tuple(pairs), out)


def _bc_to_dict(bc):
    if isinstance(bc, Dirichlet):
        return {"kind": "dirichlet", "n_D": bc.n_D, "theta_D": bc.theta_D}
    return {"kind": "neumann"}


def _expr_to_json(value):
    if isinstance(value, str):
        return value
    return [({"expr": e} if u is None else {"until": u, "expr": e}) for u, e in value]


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of :func:`parse_config`; every field is written explicitly."""
    relax = cfg.model.relaxation
    if isinstance(relax, Constant):
        rdict = {"kind": "constant", "tau": relax.tau}
    else:
        rdict = {"kind": "temperature_dependent", "tau0": relax.tau0, "tau1": relax.tau1}
    ic = cfg.initial_condition
    if isinstance(ic, Preset):
        icdict = {"kind": "preset", "name": ic.name}
    elif isinstance(ic, Expression):
        icdict = {"kind": "expression", "n": _expr_to_json(ic.n), "theta": _expr_to_json(ic.theta)}
    else:
        icdict = {"kind": "tabulated", "path": ic.path}
    solver = dataclasses.asdict(cfg.solver)
    solver["snapshot_times"] = list(solver["snapshot_times"])
    return {
        "model": {
            "beta": cfg.model.beta,
            "relaxation": rdict,
            "n_D": cfg.model.n_D,
            "theta_D": cfg.model.theta_D,
            "allow_extended_beta": cfg.model.allow_extended_beta,
        },
        "grid": {
            "x_min": cfg.grid.x_min,
            "x_max": cfg.grid.x_max,
            "num_points": cfg.grid.num_points,
            "bc_left": _bc_to_dict(cfg.grid.bc_left),
            "bc_right": _bc_to_dict(cfg.grid.bc_right),
        },
        "solver": solver,
        "initial_condition": icdict,
        "entropy_pairs": [[p.b1, p.b2] for p in cfg.entropy_pairs],
        "output_dir": cfg.output_dir,
    }


def load_config(path, allow_extended_beta: bool | None = None) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc}") from None
    return parse_config(data, allow_extended_beta)


def save_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")
    return path


def write_table(path, header, rows) -> Path:
    """CSV with LF endings and round-trip float formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
