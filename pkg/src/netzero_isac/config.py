"""Scenario files: JSON documents with unit-suffixed quantities.

Physical quantities are strings such as ``"-75 dBm"``, ``"0 dBi"``,
``"2.5 m"`` or ``"40 dB"``; a bare number where a unit is required is a
validation error. Dimensionless values (chi, eta, K-factors, sigma, |Gamma|^2)
are plain numbers. Unknown keys are rejected at every level.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .fading import POWER_LAWS, FadingSpec
from .link import Geometry, SystemParams, db_to_linear, dbm_to_watt
from .montecarlo import MonteCarloConfig
from .scenario import FORWARD_LINK_MODES, Scenario

_NUM = r"[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?"
_UNITS = {
    "power": ("dBm", "W", "mW"),
    "gain": ("dBi",),
    "distance": ("m",),
    "ratio": ("dB",),
    "impedance": ("ohm",),
}


def _quantity(kind: str) -> dict:
    units = "|".join(_UNITS[kind])
    return {"type": "string", "pattern": rf"^\s*{_NUM}\s*({units})\s*$",
            "description": f"number followed by one of {', '.join(_UNITS[kind])}"}


_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}


def _obj(props: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


_FADING = _obj({"k_factor": _NONNEG, "sigma": _POS, "omega": _POS})
_GRID = _obj({
    "start": {"type": ["string", "number"]},
    "stop": {"type": ["string", "number"]},
    "num": {"type": "integer", "minimum": 1},
    "values": {"type": "array", "minItems": 1, "items": {"type": ["string", "number"]}},
})

SCHEMA = _obj({
    "name": {"type": "string"},
    "system": _obj({
        "chi": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "p_s": _quantity("power"),
        "g_tag": _quantity("gain"),
        "g_t": _quantity("gain"),
        "g_r": _quantity("gain"),
        "g_r_i": {"oneOf": [_quantity("gain"), {"type": "array", "items": _quantity("gain")}]},
        "eta": _POS,
        "d0": _quantity("distance"),
        "p_th": _quantity("power"),
        "n0": _quantity("power"),
        "ref_loss": _quantity("ratio"),
    }),
    "geometry": _obj({
        "mode": {"enum": ["distances", "coordinates"]},
        "d_f": {"oneOf": [_quantity("distance"), {"type": "array", "items": _quantity("distance")}]},
        "d_b": {"type": "array", "minItems": 1, "items": _quantity("distance")},
        "d_r": _quantity("distance"),
        "tx": {"type": "array", "minItems": 2, "maxItems": 2, "items": _quantity("distance")},
        "tag": {"type": "array", "minItems": 2, "maxItems": 2, "items": _quantity("distance")},
        "receiver": {"type": "array", "minItems": 2, "maxItems": 2, "items": _quantity("distance")},
        "antennas": {"type": "array", "minItems": 1, "items": {
            "type": "array", "minItems": 2, "maxItems": 2, "items": _quantity("distance")}},
    }, ("mode",)),
    "fading": _obj({
        "forward": _FADING,
        "backscatter": {"oneOf": [_FADING, {"type": "array", "minItems": 1, "items": _FADING}]},
        "receiver": _FADING,
        "forward_link": {"enum": list(FORWARD_LINK_MODES)},
        "power_law": {"enum": list(POWER_LAWS)},
    }),
    "modulation": _obj({
        "schemes": {"type": "array", "items": _obj({
            "type": {"enum": ["mpsk", "mqam"]},
            "order": {"type": "integer", "minimum": 2}}, ("type", "order"))},
        "gamma_sq": {"type": "number", "minimum": 0, "maximum": 1},
        "ser_mode": {"enum": ["ideal", "tag"]},
        "antenna_impedance": _quantity("impedance"),
        "required_count": {"type": "integer", "minimum": 1},
    }),
    "experiment": _obj({
        "kind": {"enum": ["figure4", "figure5", "figure6", "figure7", "sweep"]},
        "variable": {"type": "string", "pattern": r"^(p_s|gamma_sq|d_f|d_r|d_b|d_b\[\d+\]|d_f\[\d+\])$"},
        "grid": _GRID,
        "fading_settings": {"type": "array", "items": _obj({
            "label": {"type": "string"}, "k_f": _NONNEG, "k_b": _NONNEG}, ("label", "k_f", "k_b"))},
        "monte_carlo": _obj({
            "enabled": {"type": "boolean"},
            "trials": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
            "shards": {"type": "integer", "minimum": 1},
            "block_size": {"type": "integer", "minimum": 1},
        }),
        "truncation": _obj({
            "max_terms_per_index": {"type": "integer", "minimum": 1},
            "tail_tol": _POS,
        }),
    }),
    "output": _obj({
        "directory": {"type": "string"},
        "formats": {"type": "array", "items": {"enum": ["csv", "gnuplot", "trials"]}},
    }),
})

# reference operating point; ref_loss of 0 dB leaves the bare power law
DEFAULTS: dict[str, Any] = {
    "name": "scenario",
    "system": {
        "chi": 0.5, "p_s": "1 W", "g_tag": "0 dBi", "g_t": "0 dBi", "g_r": "0 dBi",
        "g_r_i": "0 dBi", "eta": 1.8, "d0": "1 m", "p_th": "-75 dBm", "ref_loss": "0 dB",
    },
    "geometry": {"mode": "distances"},
    "fading": {
        "forward": {"k_factor": 0, "sigma": 1, "omega": 1},
        "backscatter": {"k_factor": 0, "sigma": 1, "omega": 1},
        "receiver": {"k_factor": 0, "sigma": 1, "omega": 1},
        "forward_link": "independent",
        "power_law": "gamma2",
    },
    "modulation": {
        "schemes": [{"type": "mpsk", "order": 16}, {"type": "mqam", "order": 16}],
        "gamma_sq": 1.0, "ser_mode": "ideal", "antenna_impedance": "50 ohm", "required_count": 3,
    },
    "experiment": {
        "kind": "sweep", "variable": "p_s",
        "grid": {"start": "0 dBm", "stop": "30 dBm", "num": 7},
        "monte_carlo": {"enabled": True, "trials": 100000, "seed": 1, "shards": 1, "block_size": 65536},
        "truncation": {"max_terms_per_index": 40, "tail_tol": 1e-10},
    },
    "output": {"directory": "results", "formats": ["csv"]},
}

_FIGURE4_SETTINGS = [
    {"label": "rayleigh", "k_f": 0, "k_b": 0},
    {"label": "kf1_kb1", "k_f": 1, "k_b": 1},
    {"label": "kf1_kb0", "k_f": 1, "k_b": 0},
    {"label": "kf0_kb1", "k_f": 0, "k_b": 1},
    {"label": "kf2_kb2", "k_f": 2, "k_b": 2},
]


class ScenarioFileError(ValueError):
    """Validation failure; ``problems`` holds one message per offending key."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid scenario file:\n  " + "\n  ".join(problems))


def parse_quantity(text: str | float, kind: str) -> float:
    """Convert a unit-suffixed string to SI (W, linear gain, m, ohm)."""
    if kind == "none":
        return float(text)
    if not isinstance(text, str):
        raise ValueError(f"{text!r} has no unit; expected one of {_UNITS[kind]}")
    m = re.fullmatch(rf"\s*({_NUM})\s*(\w+)\s*", text)
    if not m or m.group(5) not in _UNITS[kind]:
        raise ValueError(f"{text!r} is not a {kind} with unit in {_UNITS[kind]}")
    value, unit = float(m.group(1)), m.group(5)
    if unit == "dBm":
        return dbm_to_watt(value)
    if unit == "mW":
        return value * 1e-3
    if unit in ("dBi", "dB"):
        return db_to_linear(value)
    return value


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` assignments; values are parsed as JSON when
    possible and kept as strings otherwise (so ``system.p_s=20 dBm`` works)."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ScenarioFileError([f"override {item!r} is not of the form key=value"])
        parts = key.strip().split(".")
        node = doc
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ScenarioFileError([f"override {key!r}: {p!r} is not a section"])
        node[parts[-1]] = _parse_override_value(raw.strip())
    return doc


def _error_path(err: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def validate_document(doc: dict) -> list[str]:
    """Every schema violation, one message per offending key."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    problems = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        path = _error_path(err)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            for k in extra:
                problems.append(f"{path + '.' if path != '<root>' else ''}{k}: unknown key")
        elif ("pattern" in err.schema or "oneOf" in err.schema) and not isinstance(err.instance, (dict, list)) \
                and err.validator in ("pattern", "oneOf", "type"):
            problems.append(f"{path}: {err.instance!r} needs a unit suffix of the right kind")
        else:
            problems.append(f"{path}: {err.message}")
    return problems


@dataclass
class GridSpec:
    variable: str
    values: tuple[float, ...]


@dataclass
class LoadedScenario:
    scenario: Scenario
    document: dict
    grid: GridSpec
    kind: str
    mc: MonteCarloConfig | None
    truncation: tuple[int, float]
    fading_settings: list[dict] = field(default_factory=list)
    ser_mode: str = "ideal"
    antenna_impedance: float = 50.0
    output_dir: str = "results"
    formats: tuple[str, ...] = ("csv",)

    def config_hash(self) -> str:
        """SHA-256 over every resolved value that affects results (SI units,
        defaults filled in), so equivalent spellings hash alike. The output
        directory and the shard count are left out; neither changes a result."""
        mc = None if self.mc is None else (self.mc.trials, self.mc.seed, self.mc.block_size)
        effective = (self.scenario, self.grid, self.kind, mc, self.truncation,
                     self.fading_settings, self.ser_mode, self.antenna_impedance, self.formats)
        return hashlib.sha256(repr(effective).encode()).hexdigest()


def _variable_kind(variable: str) -> str:
    if variable == "p_s":
        return "power"
    if variable == "gamma_sq":
        return "none"
    return "distance"


def _grid(exp: dict) -> GridSpec:
    variable = exp["variable"]
    kind = _variable_kind(variable)
    g = exp["grid"]
    if "values" in g:
        if any(k in g for k in ("start", "stop", "num")):
            raise ScenarioFileError(["experiment.grid: give either values or start/stop/num"])
        return GridSpec(variable, tuple(parse_quantity(v, kind) for v in g["values"]))
    missing = [k for k in ("start", "stop", "num") if k not in g]
    if missing:
        raise ScenarioFileError([f"experiment.grid.{k}: required" for k in missing])
    if kind == "power":
        # evenly spaced in the unit given (dBm steps are geometric in watts)
        lo, hi = (re.fullmatch(rf"\s*({_NUM})\s*(\w+)\s*", str(g[k])) for k in ("start", "stop"))
        if not (lo and hi) or lo.group(5) != hi.group(5):
            raise ScenarioFileError(["experiment.grid: start and stop need the same power unit"])
        raw = np.linspace(float(lo.group(1)), float(hi.group(1)), g["num"])
        values = tuple(parse_quantity(f"{float(v)!r} {lo.group(5)}", kind) for v in raw)
    else:
        a, b = parse_quantity(g["start"], kind), parse_quantity(g["stop"], kind)
        values = tuple(float(v) for v in np.linspace(a, b, g["num"]))
    return GridSpec(variable, values)


def _fading(d: dict) -> FadingSpec:
    return FadingSpec.rician(float(d.get("k_factor", 0)), float(d.get("sigma", 1)), float(d.get("omega", 1)))


def _build(doc: dict) -> LoadedScenario:
    problems = []
    sysd = doc["system"]

    def q(section, key, kind, src):
        try:
            return parse_quantity(src[key], kind)
        except (ValueError, KeyError) as exc:
            problems.append(f"{section}.{key}: {exc}")
            return math.nan

    g_r_i = sysd["g_r_i"]
    if isinstance(g_r_i, list):
        g_r_i = tuple(parse_quantity(v, "gain") for v in g_r_i)
    else:
        g_r_i = parse_quantity(g_r_i, "gain")
    params = dict(
        chi=float(sysd["chi"]), p_s=q("system", "p_s", "power", sysd),
        g_tag=q("system", "g_tag", "gain", sysd), g_t=q("system", "g_t", "gain", sysd),
        g_r=q("system", "g_r", "gain", sysd), g_r_i=g_r_i, eta=float(sysd["eta"]),
        d0=q("system", "d0", "distance", sysd), p_th=q("system", "p_th", "power", sysd),
        n0=q("system", "n0", "power", sysd) if "n0" in sysd else None,
        ref_loss=q("system", "ref_loss", "ratio", sysd))

    geo = doc["geometry"]
    geometry = None
    if geo["mode"] == "distances":
        for k in ("d_f", "d_b"):
            if k not in geo:
                problems.append(f"geometry.{k}: required in distances mode")
        if not problems:
            d_f = geo["d_f"]
            d_f = (tuple(parse_quantity(v, "distance") for v in d_f) if isinstance(d_f, list)
                   else parse_quantity(d_f, "distance"))
            geometry = Geometry(d_f, tuple(parse_quantity(v, "distance") for v in geo["d_b"]),
                                parse_quantity(geo["d_r"], "distance") if "d_r" in geo else None)
    else:
        for k in ("tx", "tag", "antennas"):
            if k not in geo:
                problems.append(f"geometry.{k}: required in coordinates mode")
        if not problems:
            pos = lambda pt: [parse_quantity(v, "distance") for v in pt]  # noqa: E731
            geometry = Geometry.from_coordinates(
                pos(geo["tx"]), [pos(a) for a in geo["antennas"]], pos(geo["tag"]),
                pos(geo["receiver"]) if "receiver" in geo else None)
    if problems:
        raise ScenarioFileError(problems)

    try:
        system = SystemParams(**params)
    except ValueError as exc:
        raise ScenarioFileError([f"system: {exc}"]) from None
    mod = doc["modulation"]
    problems = geometry.validate(system, mod["required_count"])
    if problems:
        raise ScenarioFileError([f"geometry: {p}" for p in problems])

    fad = doc["fading"]
    back = fad["backscatter"]
    back = tuple(_fading(b) for b in back) if isinstance(back, list) else (_fading(back),)
    try:
        scenario = Scenario(
            system, geometry, _fading(fad["forward"]), back, _fading(fad["receiver"]),
            gamma_sq=float(mod["gamma_sq"]),
            schemes=tuple((s["type"], int(s["order"])) for s in mod["schemes"]),
            required_count=int(mod["required_count"]), forward_link=fad["forward_link"],
            power_law=fad["power_law"], name=doc["name"])
    except ValueError as exc:
        raise ScenarioFileError([f"fading/modulation: {exc}"]) from None

    exp = doc["experiment"]
    mcd = exp["monte_carlo"]
    mc = None
    if mcd.get("enabled", True):
        mc = MonteCarloConfig(int(mcd["trials"]), int(mcd["seed"]), int(mcd["shards"]),
                              int(mcd["block_size"]))
    tr = exp["truncation"]
    settings = exp.get("fading_settings") or (_FIGURE4_SETTINGS if exp["kind"] == "figure4" else [])
    out = doc["output"]
    return LoadedScenario(
        scenario, doc, _grid(exp), exp["kind"], mc,
        (int(tr["max_terms_per_index"]), float(tr["tail_tol"])), list(settings),
        mod["ser_mode"], parse_quantity(mod["antenna_impedance"], "impedance"),
        out["directory"], tuple(out["formats"]))


def load_document(source: str | Path | dict, overrides: list[str] = (),
                  seed: int | None = None) -> dict:
    """Read, override, validate and fill defaults. Returns the effective document."""
    if isinstance(source, dict):
        doc = copy.deepcopy(source)
    else:
        text = Path(source).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioFileError([f"<file>: not valid JSON ({exc})"]) from None
    if not isinstance(doc, dict):
        raise ScenarioFileError(["<root>: scenario must be a JSON object"])
    doc = apply_overrides(doc, list(overrides))
    if seed is not None:
        doc.setdefault("experiment", {}).setdefault("monte_carlo", {})["seed"] = int(seed)
    problems = validate_document(doc)
    if problems:
        raise ScenarioFileError(problems)
    merged = _merge(DEFAULTS, doc)
    if "grid" in doc.get("experiment", {}):
        # a grid is given either as values or as start/stop/num, never mixed with the default
        merged["experiment"]["grid"] = copy.deepcopy(doc["experiment"]["grid"])
    return merged


def load_scenario(source: str | Path | dict, overrides: list[str] = (),
                  seed: int | None = None) -> LoadedScenario:
    return _build(load_document(source, overrides, seed))


def bundled_scenarios() -> dict[str, Path]:
    """Scenario files shipped with the package, by stem."""
    root = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.json"))}


def resolve_path(name: str | Path) -> Path:
    """A path on disk, or the stem of a bundled scenario."""
    p = Path(name)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if str(name) in bundled:
        return bundled[str(name)]
    raise FileNotFoundError(f"no scenario file {name!r} (bundled: {', '.join(bundled)})")
