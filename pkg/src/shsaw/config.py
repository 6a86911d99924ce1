"""Run configuration and result files.

A configuration is one JSON document (conventionally ``*.cfg``) describing
the cell, the scan grid, the solver knobs and the outputs.  It is validated
against :data:`SCHEMA` and then against cross-references (material names,
odd ``d``, contour radius range).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from .cell import Circle, Layer, Lattice, Material, Rectangle, UnitCell, flip_cell
from .dispersion import DispersionSample, SolverSettings
from .errors import ConfigError
from .scan import Branch, ScanGrid, ScanOptions

__all__ = [
    "SCHEMA",
    "RunConfig",
    "ResultBundle",
    "load_config",
    "parse_config",
    "format_float",
    "write_csv",
    "SAMPLE_COLUMNS",
]

SEED_ENV = "SHSAW_SEED"

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_pair = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["lattice", "materials", "background"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "notes": {"type": "array", "items": {"type": "string"}},
        "lattice": {
            "type": "object",
            "required": ["a1", "a2"],
            "additionalProperties": False,
            "properties": {"a1": _pos, "a2": _pos},
        },
        "materials": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["mu", "rho"],
                "additionalProperties": False,
                "properties": {"mu": _pos, "rho": _pos, "note": {"type": "string"}},
            },
        },
        "background": {"type": "string"},
        "inclusions": {
            "type": "array",
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "required": ["type", "center", "radius", "material"],
                        "additionalProperties": False,
                        "properties": {
                            "type": {"const": "circle"},
                            "center": _pair,
                            "radius": _pos,
                            "material": {"type": "string"},
                        },
                    },
                    {
                        "type": "object",
                        "required": ["type", "center", "width", "height", "material"],
                        "additionalProperties": False,
                        "properties": {
                            "type": {"const": "rectangle"},
                            "center": _pair,
                            "width": _pos,
                            "height": _pos,
                            "material": {"type": "string"},
                        },
                    },
                    {
                        "type": "object",
                        "required": ["type", "z_lo", "z_hi", "material"],
                        "additionalProperties": False,
                        "properties": {
                            "type": {"const": "layer"},
                            "z_lo": _number,
                            "z_hi": _number,
                            "material": {"type": "string"},
                        },
                    },
                ]
            },
        },
        "flip": {"type": "boolean"},
        "grid": {
            "type": "object",
            "required": ["k1_min", "k1_max", "n_k", "omega_max", "n_omega"],
            "additionalProperties": False,
            "properties": {
                "k1_min": {"type": "number", "minimum": 0},
                "k1_max": {"type": "number", "minimum": 0},
                "n_k": {"type": "integer", "minimum": 2},
                "omega_min": {"type": "number", "minimum": 0},
                "omega_max": {"type": "number", "minimum": 0},
                "n_omega": {"type": "integer", "minimum": 2},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d": {"type": "integer", "minimum": 1},
                "riccati_steps": {"type": "integer", "minimum": 16},
                "riccati_tol": _pos,
                "riccati_max_steps": {"type": "integer", "minimum": 16},
                "contour_nodes": {"type": "integer", "minimum": 8},
                "contour_max_nodes": {"type": "integer", "minimum": 8},
                "contour_radius": _number,
                "idem_tol": _pos,
                "master_seed": {"type": "integer", "minimum": 0},
                "tol_saw": {"type": ["number", "null"]},
                "tol_u": _pos,
                "alpha_retries": {"type": "integer", "minimum": 0},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega_tol": {"type": ["number", "null"]},
                "link_tol": {"type": ["number", "null"]},
                "min_threshold": _pos,
                "refine_dd": {"type": "integer", "minimum": 2},
                "refine_ratio": _pos,
                "extrapolate": {"type": "boolean"},
                "minima": {"type": "boolean"},
                "failure_quota": {"type": "number", "minimum": 0, "maximum": 1},
                "k1_speed_limit": _pos,
            },
        },
        "check": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d": {"type": "integer", "minimum": 1},
                "points": {"type": "array", "items": _pair},
                "n_random": {"type": "integer", "minimum": 0},
                "tolerance": _pos,
                "steps": {"type": "integer", "minimum": 16},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


@dataclass(frozen=True)
class CheckSpec:
    d: int = 5
    points: tuple = ()
    n_random: int = 4
    tolerance: float = 1e-6
    steps: int = 4096


@dataclass(frozen=True)
class RunConfig:
    cell: UnitCell
    grid: ScanGrid | None
    settings: SolverSettings
    options: ScanOptions
    check: CheckSpec
    out_dir: str
    failure_quota: float
    k1_speed_limit: float
    raw: dict = field(repr=False, compare=False)

    @property
    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _field_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def _primitive(item: dict, materials: dict[str, Material], where: str):
    try:
        mat = materials[item["material"]]
    except KeyError:
        raise ConfigError(f"{where}/material: unknown material {item['material']!r}") from None
    kind = item["type"]
    if kind == "circle":
        return Circle(tuple(item["center"]), item["radius"], mat)
    if kind == "rectangle":
        return Rectangle(tuple(item["center"]), item["width"], item["height"], mat)
    if item["z_hi"] <= item["z_lo"]:
        raise ConfigError(f"{where}: layer needs z_hi > z_lo")
    return Layer(item["z_lo"], item["z_hi"], mat)


def parse_config(raw: dict, seed_override: str | None = None) -> RunConfig:
    """Validate a decoded configuration and build the run objects.

    Raises
    ------
    ConfigError
        With a ``field: message`` diagnostic.
    """
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_field_path(e)}: {e.message}")
    materials = {name: Material(name, v["mu"], v["rho"]) for name, v in raw["materials"].items()}
    if raw["background"] not in materials:
        raise ConfigError(f"background: unknown material {raw['background']!r}")
    lat = Lattice(raw["lattice"]["a1"], raw["lattice"]["a2"])
    prims = tuple(
        _primitive(item, materials, f"inclusions/{i}") for i, item in enumerate(raw.get("inclusions", []))
    )
    cell = UnitCell(lat, materials[raw["background"]], prims, name=raw.get("name", ""))
    if raw.get("flip", False):
        cell = flip_cell(cell)

    sv = dict(raw.get("solver", {}))
    d = sv.get("d", 17)
    if d % 2 == 0:
        raise ConfigError(f"solver/d: truncation must be odd, got {d}")
    radius = sv.get("contour_radius", 0.99)
    if not 0.9 < radius < 1:
        raise ConfigError(f"solver/contour_radius: must lie in (0.9, 1), got {radius}")
    seed = sv.pop("master_seed", 0)
    if seed_override not in (None, ""):
        try:
            seed = int(seed_override)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: not an integer: {seed_override!r}") from None
    try:
        settings = SolverSettings(seed=seed, **sv)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None

    grid = None
    if "grid" in raw:
        g = raw["grid"]
        try:
            grid = ScanGrid(g["k1_min"], g["k1_max"], g["n_k"], g["omega_max"], g["n_omega"], g.get("omega_min", 0.0))
            grid.validate(cell)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None

    sc = dict(raw.get("scan", {}))
    quota = sc.pop("failure_quota", 0.05)
    k1_speed_limit = sc.pop("k1_speed_limit", 0.15 * math.pi / lat.a1)
    options = ScanOptions(**sc)
    ck = raw.get("check", {})
    check = CheckSpec(
        d=ck.get("d", 5),
        points=tuple(tuple(p) for p in ck.get("points", [])),
        n_random=ck.get("n_random", 4),
        tolerance=ck.get("tolerance", 1e-6),
        steps=ck.get("steps", 4096),
    )
    if check.d % 2 == 0:
        raise ConfigError(f"check/d: truncation must be odd, got {check.d}")
    out_dir = raw.get("outputs", {}).get("dir", "shsaw_out")
    return RunConfig(cell, grid, settings, options, check, out_dir, quota, k1_speed_limit, raw)


def load_config(path: str | os.PathLike) -> RunConfig:
    """Read, decode and validate a configuration file.

    The ``SHSAW_SEED`` environment variable, when set, replaces the master
    seed.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(raw, os.environ.get(SEED_ENV))


def format_float(x) -> str:
    """17 significant digits in scientific notation; ``nan`` for missing values."""
    if x is None:
        return "nan"
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".16e")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return format_float(v)


def write_csv(path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    Path(path).write_text(buf.getvalue(), newline="")


def _read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


SAMPLE_COLUMNS = [
    "k1", "omega", "n_p", "d_saw", "d_d3", "d_i", "trace_p",
    "indeterminate", "contour_retry_count", "alpha_retry_count", "failed",
]


def sample_row(s: DispersionSample) -> list:
    return [s.k1, s.omega, "" if s.n_p is None else s.n_p, s.d_saw, s.d_d3, s.d_i, s.trace_p,
            s.indeterminate, s.contour_retry_count, s.alpha_retry_count, s.failed]


def flags_text(s: DispersionSample) -> str:
    parts = []
    if s.failed:
        parts.append("failed")
    if s.indeterminate:
        parts.append("indeterminate")
    if s.contour_retry_count:
        parts.append(f"contour_retry={s.contour_retry_count}")
    if s.alpha_retry_count:
        parts.append(f"alpha_retry={s.alpha_retry_count}")
    return ";".join(parts)


def provenance(config: RunConfig | None, wall_time: float, backend: str) -> dict:
    from . import __version__

    return {
        "config_sha256": config.digest if config else None,
        "seed": config.settings.seed if config else None,
        "versions": {
            "shsaw": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "kernel_backend": backend,
        "wall_time_s": wall_time,
    }


@dataclass
class ResultBundle:
    """Everything a scan produces; written as CSV tables plus two JSON files."""

    samples: list[DispersionSample]
    branches: list[Branch]
    transonic: list[Branch]
    speeds: dict
    provenance: dict
    roots: list[dict] = field(default_factory=list)

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "samples.csv", SAMPLE_COLUMNS, (sample_row(s) for s in self.samples))
        write_csv(
            out / "roots.csv",
            ["k1", "omega", "kind", "source", "d_saw", "d_i", "bracket"],
            ([r["k1"], r["omega"], r["kind"], r["source"], r["d_saw"], r["d_i"], r["bracket"]] for r in self.roots),
        )
        rows = []
        for i, b in enumerate(self.transonic + self.branches):
            for (k, w), q in zip(b.points, b.quality or [float("nan")] * len(b)):
                rows.append([i, b.kind, k, w, q])
        write_csv(out / "branches.csv", ["branch", "kind", "k1", "omega", "quality"], rows)
        doc = {
            "branches": [_branch_doc(b) for b in self.branches],
            "transonic": [_branch_doc(b) for b in self.transonic],
        }
        (out / "branches.json").write_text(json.dumps(doc, indent=1, allow_nan=True) + "\n")
        summary = {"effective_speeds": self.speeds, "provenance": self.provenance,
                   "counts": {"samples": len(self.samples), "flagged": sum(s.failed for s in self.samples),
                              "surface_branches": sum(b.kind == "surface" for b in self.branches),
                              "nonphysical_branches": sum(b.kind == "nonphysical" for b in self.branches),
                              "transonic_curves": len(self.transonic)}}
        (out / "summary.json").write_text(json.dumps(summary, indent=1, allow_nan=True) + "\n")
        return out

    @classmethod
    def load(cls, out_dir) -> "ResultBundle":
        out = Path(out_dir)
        samples = []
        for r in _read_csv(out / "samples.csv"):
            samples.append(DispersionSample(
                omega=float(r["omega"]), k1=float(r["k1"]), d_saw=float(r["d_saw"]), d_d3=float(r["d_d3"]),
                n_p=int(r["n_p"]) if r["n_p"] else None, d_i=float(r["d_i"]), trace_p=float(r["trace_p"]),
                indeterminate=bool(int(r["indeterminate"])),
                contour_retry_count=int(r["contour_retry_count"]),
                alpha_retry_count=int(r["alpha_retry_count"]), failed=bool(int(r["failed"])),
            ))
        doc = json.loads((out / "branches.json").read_text())
        summary = json.loads((out / "summary.json").read_text())
        roots = [
            {"k1": float(r["k1"]), "omega": float(r["omega"]), "kind": r["kind"], "source": r["source"],
             "d_saw": float(r["d_saw"]), "d_i": float(r["d_i"]), "bracket": float(r["bracket"])}
            for r in _read_csv(out / "roots.csv")
        ]
        return cls(
            samples=samples,
            branches=[_branch_from(b) for b in doc["branches"]],
            transonic=[_branch_from(b) for b in doc["transonic"]],
            speeds=summary["effective_speeds"],
            provenance=summary["provenance"],
            roots=roots,
        )


def _branch_doc(b: Branch) -> dict:
    return {"kind": b.kind, "points": [list(p) for p in b.points], "quality": list(b.quality)}


def _branch_from(doc: dict) -> Branch:
    return Branch(doc["kind"], [tuple(p) for p in doc["points"]], list(doc["quality"]))


def settings_dict(settings: SolverSettings) -> dict:
    return asdict(settings)
