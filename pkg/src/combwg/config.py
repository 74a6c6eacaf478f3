"""Run configuration: YAML text, validated against a fixed schema.

Lengths in the ``geometry`` section follow the top-level ``units`` key:
``nm``, or ``a`` (H, w, h_etched and supercell in units of the period; the
period ``a`` itself, when given, is in nm).  Wavelengths, distances and
powers in the task sections are always nm and mW.
"""

from __future__ import annotations

import copy
import dataclasses
import difflib
import hashlib
import json
from pathlib import Path
from typing import Any

import yaml

from .bloch import SolverSettings
from .geometry import Corrugation, GeometryError, GeometryParams

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "TASKS", "DEPENDENCIES"]

TASKS = ("bands", "dispersion", "trap", "emission", "optimize")
DEPENDENCIES = {"bands": (), "dispersion": ("bands",), "trap": ("bands",), "emission": ("bands",), "optimize": ()}
UNITS = ("nm", "a")
REQUIRED = object()

SCHEMA: dict[str, Any] = {
    "units": REQUIRED,
    "geometry": {
        "kind": Corrugation.RECTANGULAR_ASYMMETRIC.value,
        "a": None,
        "H": REQUIRED,
        "w": REQUIRED,
        "h_etched": REQUIRED,
        "n": 2.85,
        "supercell": None,
    },
    "solver": {
        "cutoffs": [9, 40],
        "sinusoid_slices": 128,
        "rule": "li",
        "edge_span": [0.004, 0.2],
        "edge_points": 24,
        "overlap_threshold": 0.8,
    },
    "tasks": [],
    "bands": {"n_bands": 5, "k_points": 21, "gaps": []},
    "dispersion": {"bands": [1], "window": [0.01, 0.1], "n_g_targets": [10, 20, 30, 50, 75, 100]},
    "trap": {
        "red_wavelength": 837.0,
        "blue_wavelength": 719.4,
        "red_band": 1,
        "blue_band": 2,
        "red_k": [0.3, 0.45],
        "blue_k": [0.43, 0.5],
        "red_powers": [1.0],
        "blue_power": 1.0,
        "reach": 500.0,
        "step": 5.0,
        "nz": 48,
        "exclusion": 20.0,
    },
    "emission": {
        "band": 1,
        "wavelength": 780.0,
        "k": [0.4, 0.5],
        "orientation": [1.0, 0.0],
        "methods": ["vacuum-approx"],
        "d_values": [100.0, 150.0, 200.0, 300.0, 400.0, 500.0],
        "z_values": [],
        "d": 100.0,
        "z": 0.0,
        "n_periods": [8, 12, 16],
        "termination_shifts": [0.0, 0.5],
        "gap_detuning": 0.02,
    },
    "optimize": {
        "budget": 40,
        "bounds": [[0.2, 0.6], [0.1, 0.9]],
        "target_exponent": 4.0,
        "exponent_weight": 1.0,
        "mass_weight": 0.1,
        "band": 1,
        "window": [0.01, 0.1],
        "search_scale": 0.5,
        "verify": True,
    },
    "output": "results",
    "cache": {"enabled": True, "dir": None},
}


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.source = source
        self.line = line
        loc = f"{source}:{line}" if line is not None else source
        super().__init__(f"{loc}: {message}")


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    seen = {}
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            raise ConfigError(
                f"duplicate key {key!r} (first defined on line {seen[key]})", loader.name, key_node.start_mark.line + 1
            )
        seen[key] = key_node.start_mark.line + 1
    return yaml.SafeLoader.construct_mapping(loader, node, deep=deep)


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _line_map(node, prefix=(), out=None) -> dict[tuple, int]:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (k.value,)
            out[path] = k.start_mark.line + 1
            _line_map(v, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out[prefix + (i,)] = v.start_mark.line + 1
            _line_map(v, prefix + (i,), out)
    return out


@dataclasses.dataclass(frozen=True, eq=False)
class RunConfig:
    source: str
    units: str
    geometry: GeometryParams
    settings: SolverSettings
    tasks: tuple[str, ...]
    sections: dict  # task name -> dict with defaults filled in
    output: Path
    cache_enabled: bool
    cache_dir: Path | None
    defaulted: tuple[str, ...]
    warnings: tuple[str, ...]
    data: dict  # complete tree after defaults

    @property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.data, sort_keys=True).encode("utf-8")).hexdigest()

    def ordered_tasks(self) -> list[str]:
        return [t for t in TASKS if t in self.tasks]

    def task_key(self, task: str) -> dict:
        """Inputs that determine the artifacts of ``task``."""
        return {
            "task": task,
            "geometry": self.geometry.as_dict(),
            "solver": self.data["solver"],
            "section": self.sections.get(task, {}),
        }


def _merge(node, schema, path, lines, src, defaulted, warnings):
    if not isinstance(node, dict):
        raise ConfigError(f"section {'.'.join(path) or '<root>'} must be a mapping", src, lines.get(path))
    out = {}
    for key in node:
        if key not in schema:
            hint = difflib.get_close_matches(str(key), list(schema), n=1)
            msg = f"{src}:{lines.get(path + (key,), '?')}: unknown key {'.'.join(path + (str(key),))!r}"
            if hint:
                msg += f"; did you mean {hint[0]!r}?"
            warnings.append(msg)
    for key, default in schema.items():
        p = path + (key,)
        if key in node:
            val = node[key]
            if isinstance(default, dict):
                out[key] = _merge(val if val is not None else {}, default, p, lines, src, defaulted, warnings)
            else:
                out[key] = val
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {'.'.join(p)!r}", src, lines.get(path))
        elif isinstance(default, dict):
            defaulted.append(".".join(p))
            out[key] = _merge({}, default, p, lines, src, [], warnings)
        else:
            defaulted.append(".".join(p))
            out[key] = copy.deepcopy(default)
    return out


def _number(v, where, src, line, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number, got {v!r}", src, line)
    if positive and not v > 0:
        raise ConfigError(f"{where} must be positive", src, line)
    return float(v)


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> RunConfig:
    try:
        loader = _Loader(text)
        loader.name = source
        try:
            node = loader.get_single_node()
            raw = loader.construct_document(node) if node is not None else {}
        finally:
            loader.dispose()
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"parse error: {exc.problem}", source, mark.line + 1 if mark else None) from None
    lines = _line_map(node) if node is not None else {}
    if raw is None:
        raw = {}
    defaulted: list[str] = []
    warnings: list[str] = []
    data = _merge(raw, SCHEMA, (), lines, source, defaulted, warnings)

    units = data["units"]
    if units not in UNITS:
        raise ConfigError(f"units must be one of {UNITS}, got {units!r}", source, lines.get(("units",)))

    tasks = data["tasks"] or []
    if not isinstance(tasks, list):
        raise ConfigError("tasks must be a list", source, lines.get(("tasks",)))
    for i, t in enumerate(tasks):
        if t not in TASKS:
            hint = difflib.get_close_matches(str(t), TASKS, n=1)
            extra = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"unknown task {t!r}{extra}", source, lines.get(("tasks", i)))
    if len(set(tasks)) != len(tasks):
        raise ConfigError("a task is listed twice", source, lines.get(("tasks",)))
    for i, t in enumerate(tasks):
        for dep in DEPENDENCIES[t]:
            if dep not in tasks:
                raise ConfigError(f"task {t!r} requires task {dep!r}", source, lines.get(("tasks", i)))

    g = data["geometry"]
    gl = lambda k: lines.get(("geometry", k), lines.get(("geometry",)))
    for k in ("H", "w", "h_etched", "n"):
        _number(g[k], f"geometry.{k}", source, gl(k))
    if units == "a":
        a = 1.0 if g["a"] is None else _number(g["a"], "geometry.a", source, gl("a"), positive=True)
        scale = a
    else:
        if g["a"] is None:
            raise ConfigError("geometry.a is required when units is nm", source, lines.get(("geometry",)))
        a = _number(g["a"], "geometry.a", source, gl("a"), positive=True)
        scale = 1.0
    if ("trap" in tasks or "emission" in tasks) and units == "a" and g["a"] is None:
        raise ConfigError("trap and emission need the physical period geometry.a (nm)", source, lines.get(("tasks",)))
    S = None if g["supercell"] is None else _number(g["supercell"], "geometry.supercell", source, gl("supercell")) * scale
    try:
        params = GeometryParams(
            a=a, H=g["H"] * scale, w=g["w"] * scale, h_etched=g["h_etched"] * scale, kind=g["kind"], n=g["n"], S=S
        )
    except (GeometryError, ValueError) as exc:
        raise ConfigError(f"invalid geometry: {exc}", source, lines.get(("geometry",))) from None

    s = data["solver"]
    try:
        cut = tuple(int(c) for c in s["cutoffs"])
        if len(cut) != 2 or min(cut) < 1:
            raise ValueError
        settings = SolverSettings(
            cutoffs=cut,
            sinusoid_slices=int(s["sinusoid_slices"]),
            rule=str(s["rule"]),
            edge_span=tuple(float(v) for v in s["edge_span"]),
            edge_points=int(s["edge_points"]),
            overlap_threshold=float(s["overlap_threshold"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver section {exc}".strip(), source, lines.get(("solver",))) from None

    if not isinstance(data["cache"]["enabled"], bool):
        raise ConfigError("cache.enabled must be true or false", source, lines.get(("cache", "enabled")))
    base = base_dir or Path(".")
    out = Path(str(data["output"]))
    cache_dir = data["cache"]["dir"]
    return RunConfig(
        source=source,
        units=units,
        geometry=params,
        settings=settings,
        tasks=tuple(tasks),
        sections={t: data[t] for t in TASKS},
        output=out if out.is_absolute() else base / out,
        cache_enabled=data["cache"]["enabled"],
        cache_dir=None if cache_dir is None else (Path(cache_dir) if Path(cache_dir).is_absolute() else base / cache_dir),
        defaulted=tuple(defaulted),
        warnings=tuple(warnings),
        data=data,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path), base_dir=path.parent)
