"""TOML run configuration.

Sections and keys (all optional except ``exponents``)::

    [exponents]            N (int, default len(m)), m (float or list)
    [grid]                 L (float or list), n (int or list)
    [solver]               any SolverConfig field except ``barrier``
    [run]                  t0, t_end, initial ("barenblatt" | "bump" | "box"), mass, radius, C
    [profile]              mass, dtau0, dtau_max
    [experiment]           name, ladder (mass ladder), seed
    [experiment.params]    fields of the chosen experiment's config dataclass
    [output]               dir, formats (list of "json", "csv", "svg")

Scalars given for per-axis keys are broadcast to N axes. The experiment
config inherits ``m`` from the exponent block unless ``params`` sets it.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
import sys
import typing
from dataclasses import dataclass, field
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .similarity import ExponentError, MediumExponents, validate_exponents
from .solver import SolverConfig
from .verify import EXPERIMENTS

FORMATS = ("json", "csv", "svg")
INITIAL_DATA = ("barenblatt", "bump", "box")


@dataclass
class GridBlock:
    L: tuple[float, ...] = (10.0,)
    n: tuple[int, ...] = (200,)


@dataclass
class RunBlock:
    t0: float = 1.0
    t_end: float = 2.0
    initial: str = "barenblatt"
    mass: float = 1.0
    radius: float = 1.0
    C: float = 1.0


@dataclass
class ProfileBlock:
    mass: float = 1.0
    dtau0: float = 0.05
    dtau_max: float = 0.5


@dataclass
class OutputBlock:
    dir: str = "out"
    formats: tuple[str, ...] = ("json",)


@dataclass
class RunConfig:
    exponents: MediumExponents
    grid: GridBlock = field(default_factory=GridBlock)
    solver: SolverConfig = field(default_factory=SolverConfig)
    run: RunBlock = field(default_factory=RunBlock)
    profile: ProfileBlock = field(default_factory=ProfileBlock)
    experiment: Optional[str] = None
    experiment_params: Any = None
    seed: int = 0
    output: OutputBlock = field(default_factory=OutputBlock)

    def to_dict(self) -> dict:
        return {
            "exponents": {"N": self.exponents.N, "m": list(self.exponents.m)},
            "grid": {"L": list(self.grid.L), "n": list(self.grid.n)},
            "solver": self.solver.to_dict(),
            "run": dataclasses.asdict(self.run),
            "profile": dataclasses.asdict(self.profile),
            "experiment": {
                "name": self.experiment,
                "seed": self.seed,
                "params": None if self.experiment_params is None else _plain(dataclasses.asdict(self.experiment_params)),
            },
            "output": {"dir": self.output.dir, "formats": list(self.output.formats)},
        }

    def sha256(self) -> str:
        return config_hash(self.to_dict())


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def config_hash(d: dict) -> str:
    """sha256 of canonical JSON (sorted keys, fixed separators, repr floats)."""
    text = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# duplicate detection with paths

_HEADER = re.compile(r"^\s*\[\s*([^\[\]]+?)\s*\]\s*(#.*)?$")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-\.\"']+)\s*=")


def _duplicate_keys(text: str) -> list[str]:
    seen: set[str] = set()
    headers: set[str] = set()
    errs = []
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        h = _HEADER.match(line)
        if h:
            section = h.group(1).replace(" ", "")
            if section in headers:
                errs.append(f"{section}: duplicate table (line {lineno})")
            headers.add(section)
            continue
        k = _KEY.match(line)
        if k:
            path = f"{section}.{k.group(1).strip()}" if section else k.group(1).strip()
            if path in seen:
                errs.append(f"{path}: duplicate key (line {lineno})")
            seen.add(path)
    return errs


# ---------------------------------------------------------------------------
# typed construction of dataclasses from tables


def _coerce(value, tp, path: str, errs: list[str], N: Optional[int] = None):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path, errs, N)
    if origin is tuple:
        elem = args[0]
        if not isinstance(value, list):
            if N is not None and isinstance(value, (int, float)) and not isinstance(value, bool):
                value = [value] * N
            else:
                errs.append(f"{path}: expected a list, got {type(value).__name__}")
                return None
        out = [_coerce(v, elem, f"{path}[{i}]", errs) for i, v in enumerate(value)]
        return tuple(out)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errs.append(f"{path}: expected a number, got {value!r}")
            return None
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            errs.append(f"{path}: expected an integer, got {value!r}")
            return None
        return value
    if tp is bool:
        if not isinstance(value, bool):
            errs.append(f"{path}: expected true/false, got {value!r}")
            return None
        return value
    if tp is str:
        if not isinstance(value, str):
            errs.append(f"{path}: expected a string, got {value!r}")
            return None
        return value
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            errs.append(f"{path}: expected a table")
            return None
        return _build(tp, value, path, errs, N)
    errs.append(f"{path}: unsupported type {tp}")
    return None


def _build(cls, table: dict, path: str, errs: list[str], N: Optional[int] = None, skip: tuple[str, ...] = (), base=None):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.name not in skip}
    kw = {}
    before = len(errs)
    for key, value in table.items():
        p = f"{path}.{key}" if path else key
        if key not in names:
            errs.append(f"{p}: unknown key")
            continue
        kw[key] = _coerce(value, hints[key], p, errs, N)
    if len(errs) > before:
        return None
    try:
        return dataclasses.replace(base, **kw) if base is not None else cls(**kw)
    except ConfigError as e:
        errs.extend(f"{path}: {m}" for m in e.errors)
    except (TypeError, ValueError) as e:
        errs.append(f"{path}: {e}")
    return None


def _table(doc: dict, key: str, errs: list[str]) -> dict:
    v = doc.get(key, {})
    if not isinstance(v, dict):
        errs.append(f"{key}: expected a table")
        return {}
    return v


def parse_config(text: str) -> RunConfig:
    """Parse and validate; every problem is collected into one ConfigError."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        dups = _duplicate_keys(text)
        raise ConfigError(f"syntax error: {e}", dups or [f"syntax error: {e}"]) from None
    errs: list[str] = []
    for key in doc:
        if key not in ("exponents", "grid", "solver", "run", "profile", "experiment", "output"):
            errs.append(f"{key}: unknown key")

    ex = _table(doc, "exponents", errs)
    me = None
    if "m" not in ex:
        errs.append("exponents.m: required")
    for key in ex:
        if key not in ("N", "m"):
            errs.append(f"exponents.{key}: unknown key")
    if "m" in ex:
        m = ex["m"]
        N = ex.get("N", len(m) if isinstance(m, list) else 1)
        if isinstance(N, bool) or not isinstance(N, int):
            errs.append(f"exponents.N: expected an integer, got {N!r}")
        else:
            if not isinstance(m, list):
                m = [m] * N
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in m):
                errs.append("exponents.m: expected numbers")
            else:
                try:
                    me = validate_exponents(N, m)
                except ExponentError as e:
                    errs.extend(f"exponents: {v}" for v in e.violations)
    N = me.N if me else None

    grid_t = _table(doc, "grid", errs)
    grid = _build(GridBlock, grid_t, "grid", errs, N) if grid_t else (GridBlock((10.0,) * N, (200,) * N) if N else GridBlock())
    if grid is not None and N is not None and (len(grid.L) != N or len(grid.n) != N):
        errs.append(f"grid: L and n need {N} entries")
    solver = _build(SolverConfig, _table(doc, "solver", errs), "solver", errs, skip=("barrier",))
    run = _build(RunBlock, _table(doc, "run", errs), "run", errs)
    if run is not None:
        if run.initial not in INITIAL_DATA:
            errs.append(f"run.initial: must be one of {INITIAL_DATA}, got {run.initial!r}")
        if not run.t_end > run.t0:
            errs.append("run.t_end: must exceed run.t0")
        if run.initial == "barenblatt" and not run.t0 > 0:
            errs.append("run.t0: barenblatt data need t0 > 0")
    profile = _build(ProfileBlock, _table(doc, "profile", errs), "profile", errs)
    output = _build(OutputBlock, _table(doc, "output", errs), "output", errs)
    if output is not None:
        for f in output.formats:
            if f not in FORMATS:
                errs.append(f"output.formats: unknown format {f!r}")

    exp_t = dict(_table(doc, "experiment", errs))
    name = exp_t.pop("name", None)
    params_t = exp_t.pop("params", {})
    ladder = exp_t.pop("ladder", None)
    seed = exp_t.pop("seed", 0)
    for key in exp_t:
        errs.append(f"experiment.{key}: unknown key")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        errs.append(f"experiment.seed: expected a nonnegative integer, got {seed!r}")
    params = None
    if name is not None:
        if name not in EXPERIMENTS:
            errs.append(f"experiment.name: unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
        elif isinstance(params_t, dict):
            params = experiment_params(name, params_t, me, ladder, errs, seed)
        else:
            errs.append("experiment.params: expected a table")
    elif params_t or ladder is not None:
        errs.append("experiment.name: required when parameters are given")

    if errs:
        raise ConfigError(f"{len(errs)} configuration error(s)", errs)
    return RunConfig(me, grid, solver, run, profile, name, params, seed, output)


def experiment_params(name: str, table: dict, me: Optional[MediumExponents], ladder, errs: list[str], seed: int = 0):
    cls = EXPERIMENTS[name][0]
    table = dict(table)
    names = {f.name for f in dataclasses.fields(cls)}
    if me is not None and "m" not in table:
        if name == "isotropic_profile":
            if len(set(me.m)) == 1:
                table.setdefault("N", me.N)
                table["m"] = me.m[0]
        elif name == "benchmark":
            if me.N == 1:
                table["m"] = me.m[0]
        else:
            table["m"] = list(me.m)
    if ladder is not None:
        if "ladder" not in names:
            errs.append(f"experiment.ladder: not used by experiment {name!r}")
        else:
            table["ladder"] = ladder
    if "seed" in names and "seed" not in table:
        table["seed"] = seed
    return _build(cls, table, "experiment.params", errs)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text)


def default_experiment_params(name: str, seed: int = 0):
    cls = EXPERIMENTS[name][0]
    cfg = cls()
    if hasattr(cfg, "seed"):
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg
