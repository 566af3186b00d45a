"""Run configuration: TOML ingestion, validation, and the resolved echo.

A config file needs only what differs from the defaults; every table
and key is optional except [grid] and [solver].dt/t_end. Unknown keys
anywhere are hard errors so typos cannot silently fall back to
defaults. ``build_setup`` resolves everything concrete (including the
shift lambda and k_par), so the echoed config reproduces the run
exactly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib as tomli  # python >= 3.11
except ModuleNotFoundError:
    import tomli

from .core import Grid, ModelParams, StateVector
from .forcing import (ConstantIrradiance, ConstantMixing, DiurnalIrradiance,
                      SeasonalMixing, _read_table, load_irradiance_file,
                      load_mixing_file)
from .optics import OpticalParams
from .solver import SolverConfig, resolve_lambda


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


_MODEL_KEYS = {f.name for f in dataclasses.fields(ModelParams)}
_OPTICS_KEYS = {f.name for f in dataclasses.fields(OpticalParams)}
_SOLVER_KEYS = {"dt", "t_end", "mode", "lambda", "truncation_n", "picard_tol",
                "picard_max_iters", "snapshot_every", "blowup_factor",
                "enforce_floor"}
_MIXING_KEYS = {
    "constant": {"kind", "value"},
    "seasonal": {"kind", "d_min", "d_max", "h_min", "h_max", "period_days",
                 "peak_day", "transition_frac"},
    "file": {"kind", "path"},
}
_IRRADIANCE_KEYS = {
    "constant": {"kind", "value"},
    "diurnal": {"kind", "q_ref", "seasonal_amp", "peak_day", "period_days"},
    "file": {"kind", "path"},
}
_INITIAL_KINDS = {
    "constant": {"kind", "value"},
    "exponential": {"kind", "surface", "deep", "scale_m"},
    "file": {"kind", "path"},
    "cells": {"kind", "values"},  # per-cell literal, used by the config echo
}
_TOP_SECTIONS = ("grid", "model", "optics", "solver", "mixing", "irradiance",
                 "initial", "output", "verify", "converge", "sweep")


def _require_table(raw, path: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{path}] must be a table, got {type(raw).__name__}")
    return dict(raw)


def _reject_unknown(table: dict, allowed, path: str) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in [{path}] "
                          f"(allowed: {sorted(allowed)})")


def _number(table: dict, key: str, path: str, default=None):
    if key not in table:
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number, got {value!r}")
    return float(value)


def _integer(table: dict, key: str, path: str, default=None):
    if key not in table:
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{key} must be an integer, got {value!r}")
    return int(value)


def _string(table: dict, key: str, path: str, default=None):
    if key not in table:
        return default
    value = table[key]
    if not isinstance(value, str):
        raise ConfigError(f"{path}.{key} must be a string, got {value!r}")
    return value


def _boolean(table: dict, key: str, path: str, default=False):
    if key not in table:
        return default
    value = table[key]
    if not isinstance(value, bool):
        raise ConfigError(f"{path}.{key} must be a boolean, got {value!r}")
    return value


def load_config(path) -> dict:
    """Parse a TOML config file into a plain dict."""
    with open(path, "rb") as handle:
        return tomli.load(handle)


def _build_grid(raw: dict) -> Grid:
    table = _require_table(raw.get("grid", {}), "grid")
    _reject_unknown(table, {"length", "n_cells", "l_euphotic"}, "grid")
    for key in ("length", "n_cells"):
        if key not in table:
            raise ConfigError(f"grid.{key} is required")
    return Grid(length=_number(table, "length", "grid"),
                n_cells=_integer(table, "n_cells", "grid"),
                l_euphotic=_number(table, "l_euphotic", "grid", default=200.0))


def _build_params(raw: dict, l_euphotic: float) -> ModelParams:
    table = _require_table(raw.get("model", {}), "model")
    _reject_unknown(table, _MODEL_KEYS - {"l_euphotic"}, "model")
    return ModelParams(l_euphotic=l_euphotic, **table)


def _build_mixing(raw: dict, base_dir: Path):
    table = _require_table(raw.get("mixing", {"kind": "seasonal"}), "mixing")
    kind = _string(table, "kind", "mixing", default="seasonal")
    if kind not in _MIXING_KEYS:
        raise ConfigError(f"mixing.kind must be one of {sorted(_MIXING_KEYS)}, got {kind!r}")
    _reject_unknown(table, _MIXING_KEYS[kind], "mixing")
    if kind == "constant":
        return ConstantMixing(_number(table, "value", "mixing", default=10.0))
    if kind == "seasonal":
        kwargs = {k: _number(table, k, "mixing") for k in
                  ("d_min", "d_max", "h_min", "h_max", "period_days",
                   "peak_day", "transition_frac") if k in table}
        return SeasonalMixing(**kwargs)
    path = _string(table, "path", "mixing")
    if path is None:
        raise ConfigError("mixing.path is required for kind = 'file'")
    mixing = load_mixing_file(base_dir / path)
    mixing.source_path = str((base_dir / path).resolve())
    return mixing


def _build_irradiance(raw: dict, base_dir: Path):
    table = _require_table(raw.get("irradiance", {"kind": "diurnal"}), "irradiance")
    kind = _string(table, "kind", "irradiance", default="diurnal")
    if kind not in _IRRADIANCE_KEYS:
        raise ConfigError(f"irradiance.kind must be one of "
                          f"{sorted(_IRRADIANCE_KEYS)}, got {kind!r}")
    _reject_unknown(table, _IRRADIANCE_KEYS[kind], "irradiance")
    if kind == "constant":
        return ConstantIrradiance(_number(table, "value", "irradiance", default=1.0))
    if kind == "diurnal":
        kwargs = {k: _number(table, k, "irradiance") for k in
                  ("q_ref", "seasonal_amp", "peak_day", "period_days") if k in table}
        return DiurnalIrradiance(**kwargs)
    path = _string(table, "path", "irradiance")
    if path is None:
        raise ConfigError("irradiance.path is required for kind = 'file'")
    irradiance = load_irradiance_file(base_dir / path)
    irradiance.source_path = str((base_dir / path).resolve())
    return irradiance


def _build_optics(raw: dict, q_sup: float) -> OpticalParams:
    table = _require_table(raw.get("optics", {}), "optics")
    _reject_unknown(table, _OPTICS_KEYS, "optics")
    if "k_par" not in table:
        # saturation scale tracks the forcing amplitude when not pinned
        table = dict(table)
        table["k_par"] = 0.3 * q_sup if q_sup > 0.0 else 0.3
    return OpticalParams(**table)


def _profile_from_entry(entry, grid: Grid, species: str, base_dir: Path) -> np.ndarray:
    path = f"initial.{species}"
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        entry = {"kind": "constant", "value": entry}
    table = _require_table(entry, path)
    kind = _string(table, "kind", path, default="constant")
    if kind not in _INITIAL_KINDS:
        raise ConfigError(f"{path}.kind must be one of "
                          f"{sorted(_INITIAL_KINDS)}, got {kind!r}")
    _reject_unknown(table, _INITIAL_KINDS[kind], path)
    x = grid.cell_centers
    if kind == "constant":
        value = _number(table, "value", path, default=0.0)
        if value < 0.0:
            raise ConfigError(f"{path}.value must be nonnegative, got {value}")
        return np.full(grid.n_cells, value)
    if kind == "exponential":
        surface = _number(table, "surface", path, default=1.0)
        deep = _number(table, "deep", path, default=0.0)
        scale = _number(table, "scale_m", path, default=50.0)
        if surface < 0.0 or deep < 0.0 or scale <= 0.0:
            raise ConfigError(f"{path}: need surface >= 0, deep >= 0, scale_m > 0")
        return deep + (surface - deep) * np.exp(-x / scale)
    if kind == "cells":
        values = table.get("values")
        if not isinstance(values, (list, tuple)) or len(values) != grid.n_cells:
            raise ConfigError(f"{path}.values must list one value per cell "
                              f"({grid.n_cells})")
        arr = np.asarray(values, dtype=float)
        if np.any(arr < 0.0) or not np.isfinite(arr).all():
            raise ConfigError(f"{path}.values must be finite and nonnegative")
        return arr
    file_path = _string(table, "path", path)
    if file_path is None:
        raise ConfigError(f"{path}.path is required for kind = 'file'")
    rows = _read_table(base_dir / file_path, ("depth_m", "value"))
    depths, values = rows[:, 0], rows[:, 1]
    if np.any(np.diff(depths) <= 0.0):
        raise ConfigError(f"{path}: depths must be strictly increasing")
    if np.any(values < 0.0):
        raise ConfigError(f"{path}: values must be nonnegative")
    return np.interp(x, depths, values)


def _build_initial(raw: dict, grid: Grid, base_dir: Path) -> StateVector:
    table = _require_table(raw.get("initial", {}), "initial")
    _reject_unknown(table, {"N", "P", "Z", "D"}, "initial")
    profiles = {s: _profile_from_entry(table.get(s, 0.0), grid, s, base_dir)
                for s in ("N", "P", "Z", "D")}
    return StateVector(t=0.0, **profiles)


def _build_solver(raw: dict) -> SolverConfig:
    table = _require_table(raw.get("solver", {}), "solver")
    _reject_unknown(table, _SOLVER_KEYS, "solver")
    for key in ("dt", "t_end"):
        if key not in table:
            raise ConfigError(f"solver.{key} is required")
    return SolverConfig(
        dt=_number(table, "dt", "solver"),
        t_end=_number(table, "t_end", "solver"),
        mode=_string(table, "mode", "solver", default="splitting"),
        lam=_number(table, "lambda", "solver"),
        truncation_n=_number(table, "truncation_n", "solver"),
        picard_tol=_number(table, "picard_tol", "solver", default=1e-10),
        picard_max_iters=_integer(table, "picard_max_iters", "solver", default=50),
        snapshot_every=_integer(table, "snapshot_every", "solver", default=100),
        blowup_factor=_number(table, "blowup_factor", "solver", default=1e6),
        enforce_floor=_boolean(table, "enforce_floor", "solver"))


@dataclass
class RunSetup:
    """Everything a run needs, fully resolved."""

    grid: Grid
    params: ModelParams
    optics: OpticalParams
    mixing: object
    irradiance: object
    initial: StateVector
    solver: SolverConfig
    out_dir: Path
    seed: int
    verify_samples: int
    converge_cells: tuple
    converge_dts: tuple


def build_setup(raw: dict, base_dir=".", out_override=None, seed_override=None,
                mode_override=None, truncation_override=None) -> RunSetup:
    """Validate a parsed config and resolve every derived quantity.

    Model/grid/solver invariant violations surface as ConfigError so
    the caller can map them to the config exit code.
    """
    base_dir = Path(base_dir)
    raw = _require_table(raw, "config")
    _reject_unknown(raw, _TOP_SECTIONS, "config root")
    try:
        grid = _build_grid(raw)
        params = _build_params(raw, grid.l_euphotic)
        mixing = _build_mixing(raw, base_dir)
        irradiance = _build_irradiance(raw, base_dir)
        optics = _build_optics(raw, irradiance.sup)
        initial = _build_initial(raw, grid, base_dir)
        solver = _build_solver(raw)
        if mode_override is not None:
            solver = dataclasses.replace(solver, mode=mode_override)
        if truncation_override is not None:
            solver = dataclasses.replace(solver, truncation_n=float(truncation_override))
        solver = dataclasses.replace(
            solver, lam=resolve_lambda(solver, params, mixing))
        if solver.mode == "picard" and solver.truncation_n is None:
            raise ConfigError("solver.mode = 'picard' requires solver.truncation_n")
    except ConfigError:
        raise
    except (ValueError, FileNotFoundError) as exc:
        raise ConfigError(str(exc)) from exc

    output = _require_table(raw.get("output", {}), "output")
    _reject_unknown(output, {"directory"}, "output")
    out_dir = Path(out_override) if out_override is not None else \
        base_dir / _string(output, "directory", "output", default="out")

    verify = _require_table(raw.get("verify", {}), "verify")
    _reject_unknown(verify, {"n_samples", "seed"}, "verify")
    n_samples = _integer(verify, "n_samples", "verify", default=10_000)
    if n_samples < 1:
        raise ConfigError(f"verify.n_samples must be >= 1, got {n_samples}")
    seed = seed_override if seed_override is not None else \
        _integer(verify, "seed", "verify", default=0)

    converge = _require_table(raw.get("converge", {}), "converge")
    _reject_unknown(converge, {"cell_counts", "dts"}, "converge")
    cells = tuple(converge.get("cell_counts", (25, 50, 100)))
    dts = tuple(converge.get("dts", (0.02, 0.01, 0.005, 0.0025)))
    for name, seq, kind in (("cell_counts", cells, int), ("dts", dts, (int, float))):
        if len(seq) < 3:
            raise ConfigError(f"converge.{name} needs at least 3 levels, got {len(seq)}")
        if not all(isinstance(v, kind) and not isinstance(v, bool) for v in seq):
            raise ConfigError(f"converge.{name} must be a list of numbers")
        if len(set(seq)) != len(seq):
            raise ConfigError(f"converge.{name} levels must be distinct")

    return RunSetup(grid=grid, params=params, optics=optics, mixing=mixing,
                    irradiance=irradiance, initial=initial, solver=solver,
                    out_dir=out_dir, seed=int(seed), verify_samples=n_samples,
                    converge_cells=cells, converge_dts=dts)


# ---------------------------------------------------------------------------
# resolved-config echo

def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        return text if any(c in text for c in ".einf") else text + ".0"
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"cannot emit {type(value).__name__} as TOML scalar")


def emit_toml(data: dict, prefix: str = "") -> str:
    """Serialize a nested dict of scalars/lists/tables as TOML text."""
    scalars = []
    tables = []
    for key, value in data.items():
        if isinstance(value, dict):
            tables.append((key, value))
        elif isinstance(value, (list, tuple)):
            items = ", ".join(_toml_scalar(v) for v in value)
            scalars.append(f"{key} = [{items}]")
        else:
            scalars.append(f"{key} = {_toml_scalar(value)}")
    chunks = ["\n".join(scalars)] if scalars else []
    for key, value in tables:
        name = f"{prefix}{key}"
        body = emit_toml(value, prefix=f"{name}.").rstrip("\n")
        chunks.append(f"[{name}]\n{body}" if body else f"[{name}]")
    return "\n\n".join(chunks) + "\n" if chunks else ""


def _dataclass_table(obj, skip=()) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        if f.name in skip:
            continue
        value = getattr(obj, f.name)
        if value is None:
            continue
        if hasattr(value, "value"):  # enums serialize as their string value
            value = value.value
        out[f.name] = value
    return out


def _forcing_table(obj) -> dict:
    mapping = {
        "ConstantMixing": ("constant", ("value",)),
        "SeasonalMixing": ("seasonal", ("d_min", "d_max", "h_min", "h_max",
                                        "period_days", "peak_day",
                                        "transition_frac")),
        "ConstantIrradiance": ("constant", ("value",)),
        "DiurnalIrradiance": ("diurnal", ("q_ref", "seasonal_amp", "peak_day",
                                          "period_days")),
    }
    name = type(obj).__name__
    if name in mapping:
        kind, keys = mapping[name]
        table = {"kind": kind}
        table.update({k: getattr(obj, k) for k in keys})
        return table
    return {"kind": "file", "path": str(getattr(obj, "source_path", ""))}


def resolved_config(setup: RunSetup) -> dict:
    """Fully concrete config dict equivalent to the resolved setup.

    Initial profiles are echoed per cell so the echo reproduces the run
    even when the original entry was a file or formula.
    """
    solver_table = _dataclass_table(setup.solver, skip=("lam",))
    solver_table["lambda"] = setup.solver.lam
    return {
        "grid": {"length": setup.grid.length, "n_cells": setup.grid.n_cells,
                 "l_euphotic": setup.grid.l_euphotic},
        "model": _dataclass_table(setup.params, skip=("l_euphotic",)),
        "optics": _dataclass_table(setup.optics),
        "solver": solver_table,
        "mixing": _forcing_table(setup.mixing),
        "irradiance": _forcing_table(setup.irradiance),
        "initial": {s: {"kind": "cells",
                        "values": [float(v) for v in getattr(setup.initial, s)]}
                    for s in ("N", "P", "Z", "D")},
        "output": {"directory": str(setup.out_dir)},
        "verify": {"n_samples": setup.verify_samples, "seed": setup.seed},
        "converge": {"cell_counts": list(setup.converge_cells),
                     "dts": list(setup.converge_dts)},
    }
