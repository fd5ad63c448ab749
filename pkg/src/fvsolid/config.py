"""Case configuration: flat ``section.key = value`` text files.

Example::

    material.E = 200e9
    material.nu = 0.3
    material.rho = 7800
    time.steady = true
    mesh.extent = 10 1 1
    mesh.divisions = 20 2 2
    boundaries.minX.kind = symmetry
    boundaries.maxX.kind = traction
    boundaries.maxX.value = 1e6 0 0
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .discretisation import WEIGHTINGS
from .fields import BoundaryCondition, BoundaryConditions
from .linsolve import PRECONDITIONERS
from .material import InvalidMaterialError, LinearElasticMaterial
from .mesh import PATCH_KINDS, PolyMesh
from .solver import SolverControls, TimeControls


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


_SOLVER_KEYS = {
    "outerTolerance": ("outer_tolerance", float),
    "maxOuterIterations": ("max_outer_iterations", int),
    "innerRelTol": ("inner_rel_tol", float),
    "innerMaxIter": ("inner_max_iter", int),
    "relaxationFactor": ("relaxation_factor", float),
    "preconditioner": ("preconditioner", str),
    "gradientWeighting": ("gradient_weighting", str),
}
_MATERIAL_KEYS = {"E", "nu", "mu", "lambda", "rho"}
_TIME_KEYS = {"steady", "dt", "endTime", "writeInterval"}
_MESH_KEYS = {"file", "origin", "extent", "divisions"}


@dataclass
class CaseConfig:
    material: LinearElasticMaterial
    time: TimeControls
    solver: SolverControls
    boundaries: BoundaryConditions
    body_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mesh_file: Path | None = None
    block: dict | None = None


def _parse_lines(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key or not value:
            raise ConfigError("empty key or value", key or None, lineno)
        if key in entries:
            raise ConfigError(f"duplicate key (first set on line {entries[key][1]})", key, lineno)
        entries[key] = (value, lineno)
    return entries


def _number(value, key, line, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"expected {'an integer' if kind is int else 'a number'}, got {value!r}",
                          key, line) from None


def _vector(value, key, line, n=3, kind=float):
    parts = value.split()
    if len(parts) != n:
        raise ConfigError(f"expected {n} values, got {len(parts)}", key, line)
    return np.array([_number(p, key, line, kind) for p in parts])


def _bool(value, key, line):
    v = value.lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected true/false, got {value!r}", key, line)


def parse_config(text: str, base_dir=".") -> CaseConfig:
    """Parse and check a case configuration; raises ConfigError naming key and line."""
    entries = _parse_lines(text)
    material, time_kw, solver_kw, block = {}, {}, {}, {}
    boundary_kw: dict[str, dict] = {}
    body_force = np.zeros(3)
    mesh_file = None

    for key, (value, line) in entries.items():
        parts = key.split(".")
        section = parts[0]
        if section == "material" and len(parts) == 2 and parts[1] in _MATERIAL_KEYS:
            material[parts[1]] = (_number(value, key, line), line)
        elif section == "time" and len(parts) == 2 and parts[1] in _TIME_KEYS:
            name = parts[1]
            if name == "steady":
                time_kw["steady"] = _bool(value, key, line)
            elif name == "writeInterval":
                time_kw["write_interval"] = _number(value, key, line, int)
            else:
                time_kw["dt" if name == "dt" else "end_time"] = _number(value, key, line)
        elif section == "solver" and len(parts) == 2 and parts[1] in _SOLVER_KEYS:
            attr, kind = _SOLVER_KEYS[parts[1]]
            v = value if kind is str else _number(value, key, line, kind)
            choices = {"preconditioner": PRECONDITIONERS, "gradient_weighting": WEIGHTINGS}.get(attr)
            if choices and v not in choices:
                raise ConfigError(f"must be one of {', '.join(choices)}", key, line)
            solver_kw[attr] = v
        elif section == "boundaries" and len(parts) == 3 and parts[2] in ("kind", "value"):
            spec = boundary_kw.setdefault(parts[1], {})
            if parts[2] == "kind":
                if value not in PATCH_KINDS:
                    raise ConfigError(f"must be one of {', '.join(PATCH_KINDS)}", key, line)
                spec["kind"] = (value, line)
            else:
                spec["value"] = (_vector(value, key, line), line)
        elif key == "bodyForce.value":
            body_force = _vector(value, key, line)
        elif section == "mesh" and len(parts) == 2 and parts[1] in _MESH_KEYS:
            if parts[1] == "file":
                mesh_file = Path(base_dir) / value
            elif parts[1] == "divisions":
                block["divisions"] = (_vector(value, key, line, kind=int), line)
            else:
                block[parts[1]] = (_vector(value, key, line), line)
        else:
            raise ConfigError("unknown key", key, line)

    # Material
    has_e = {"E", "nu"} & material.keys()
    has_lame = {"mu", "lambda"} & material.keys()
    rho = material.get("rho", (1.0, None))[0]
    try:
        if has_e and has_lame:
            raise ConfigError("give either E/nu or mu/lambda, not both", "material")
        if has_e == {"E", "nu"}:
            mat = LinearElasticMaterial(material["E"][0], material["nu"][0], rho)
        elif has_lame == {"mu", "lambda"}:
            mat = LinearElasticMaterial.from_lame(material["mu"][0], material["lambda"][0], rho)
        else:
            missing = ({"E", "nu"} - has_e) if has_e else ({"mu", "lambda"} - has_lame) if has_lame else {"E", "nu"}
            raise ConfigError("missing key", "material." + sorted(missing)[0])
    except InvalidMaterialError as exc:
        any_line = min((ln for _, ln in material.values() if ln is not None), default=None)
        raise ConfigError(str(exc), "material", any_line) from None

    try:
        time = TimeControls(**time_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "time") from None
    try:
        solver = SolverControls(**solver_kw)
    except ValueError as exc:
        raise ConfigError(str(exc), "solver") from None

    bcs = BoundaryConditions()
    for name, spec in boundary_kw.items():
        if "kind" not in spec:
            line = spec["value"][1]
            raise ConfigError("boundary value without kind", f"boundaries.{name}.kind", line)
        kind, line = spec["kind"]
        value = spec.get("value", (None, None))[0]
        if kind == "symmetry" and value is not None:
            raise ConfigError("symmetry patches take no value", f"boundaries.{name}.value",
                              spec["value"][1])
        bcs[name] = BoundaryCondition(kind, value)

    if mesh_file is not None and block:
        raise ConfigError("give either mesh.file or block parameters, not both", "mesh")
    block_args = None
    if mesh_file is None:
        if "divisions" not in block or "extent" not in block:
            raise ConfigError("missing key", "mesh.file" if not block else
                              "mesh." + ("divisions" if "divisions" not in block else "extent"))
        block_args = {
            "origin": block.get("origin", (np.zeros(3), None))[0],
            "extent": block["extent"][0],
            "divisions": block["divisions"][0],
        }
        if np.any(block_args["extent"] <= 0):
            raise ConfigError("extent must be positive", "mesh.extent", block["extent"][1])
        if np.any(block_args["divisions"] < 1):
            raise ConfigError("divisions must be >= 1", "mesh.divisions", block["divisions"][1])

    return CaseConfig(mat, time, solver, bcs, body_force, mesh_file, block_args)


def load_config(path) -> CaseConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


def check_against_mesh(config: CaseConfig, mesh: PolyMesh) -> list[str]:
    """Diagnostics for boundary entries that do not match the mesh patches."""
    problems = []
    names = [p.name for p in mesh.patches]
    for name in config.boundaries:
        if name not in names:
            problems.append(f"key 'boundaries.{name}': no such patch in the mesh "
                            f"(patches: {', '.join(names)})")
    for p in mesh.patches:
        if p.name not in config.boundaries:
            problems.append(f"key 'boundaries.{p.name}.kind': missing for patch {p.name}")
        else:
            bc = config.boundaries[p.name]
            if bc.value is not None and bc.value.ndim == 2 and len(bc.value) != p.face_count:
                problems.append(f"key 'boundaries.{p.name}.value': wrong number of face values")
    return problems
