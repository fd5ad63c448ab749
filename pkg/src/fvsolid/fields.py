"""Cell-centred fields, boundary conditions and time levels."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .mesh import FIXED_DISPLACEMENT, PATCH_KINDS, SYMMETRY, TRACTION, PolyMesh


class BoundaryConditionError(ValueError):
    pass


@dataclass
class BoundaryCondition:
    """Condition on one patch.

    ``value`` is the boundary displacement (fixedDisplacement) or traction
    (traction), either a single 3-vector or one row per patch face. Symmetry
    patches carry no value.
    """

    kind: str
    value: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in PATCH_KINDS:
            raise BoundaryConditionError(f"unknown boundary kind {self.kind!r}")
        if self.kind == SYMMETRY:
            if self.value is not None and np.any(np.asarray(self.value) != 0):
                raise BoundaryConditionError("symmetry patches carry no value")
            self.value = None
        else:
            v = np.zeros(3) if self.value is None else np.asarray(self.value, dtype=float)
            if v.shape[-1:] != (3,) or v.ndim > 2:
                raise BoundaryConditionError(f"boundary value must be a 3-vector, got shape {v.shape}")
            self.value = v

    def face_values(self, n_faces: int) -> np.ndarray:
        if self.value is None:
            return np.zeros((n_faces, 3))
        if self.value.ndim == 1:
            return np.broadcast_to(self.value, (n_faces, 3)).copy()
        if len(self.value) != n_faces:
            raise BoundaryConditionError(
                f"{len(self.value)} face values given for a patch of {n_faces} faces")
        return self.value.copy()


class BoundaryConditions(dict):
    """Mapping patch name -> BoundaryCondition."""

    def check(self, mesh: PolyMesh) -> None:
        names = {p.name for p in mesh.patches}
        for name in self:
            if name not in names:
                raise BoundaryConditionError(f"boundary condition for unknown patch {name!r}")
        for p in mesh.patches:
            if p.name not in self:
                raise BoundaryConditionError(f"patch {p.name!r} has no boundary condition")
            if self[p.name].kind != p.kind:
                raise BoundaryConditionError(
                    f"patch {p.name!r} is {p.kind} in the mesh but {self[p.name].kind} in the conditions")
            self[p.name].face_values(p.face_count)

    def apply_kinds(self, mesh: PolyMesh) -> PolyMesh:
        """Mesh with patch kinds taken from these conditions."""
        return mesh.with_patch_kinds({k: bc.kind for k, bc in self.items()})

    def per_face(self, mesh: PolyMesh):
        """Boundary-face arrays ``(kind_code, value)``; codes index PATCH_KINDS."""
        nb = mesh.n_boundary_faces
        code = np.full(nb, -1, dtype=np.int64)
        value = np.zeros((nb, 3))
        for p in mesh.patches:
            bc = self[p.name]
            s = mesh.boundary_slice(p)
            code[s] = PATCH_KINDS.index(bc.kind)
            value[s] = bc.face_values(p.face_count)
        return code, value


@dataclass
class VectorField:
    cell_values: np.ndarray
    patch_values: np.ndarray
    old_time: np.ndarray
    old_old_time: np.ndarray

    def copy(self) -> "VectorField":
        return VectorField(self.cell_values.copy(), self.patch_values.copy(),
                           self.old_time.copy(), self.old_old_time.copy())


@dataclass
class TensorField:
    cell_values: np.ndarray
    internal_face_values: np.ndarray
    boundary_face_values: np.ndarray


@dataclass(frozen=True)
class TimeState:
    dt: float = 1.0
    step_index: int = 0
    current_time: float = 0.0
    steady: bool = True

    def __post_init__(self):
        if not self.steady and not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.step_index < 0:
            raise ValueError("step index must be non-negative")


def initialise_field(mesh: PolyMesh, initial=(0.0, 0.0, 0.0),
                     bcs: BoundaryConditions | None = None) -> VectorField:
    """Uniform field at all time levels; fixed-displacement faces take u_b.

    ``initial`` may also be an ``(n_cells, 3)`` array.
    """
    values = np.broadcast_to(np.asarray(initial, dtype=float), (mesh.n_cells, 3)).copy()
    patch = values[mesh.owner[mesh.n_internal_faces:]].copy()
    if bcs is not None:
        for p in mesh.patches:
            bc = bcs.get(p.name)
            if bc is not None and bc.kind == FIXED_DISPLACEMENT:
                patch[mesh.boundary_slice(p)] = bc.face_values(p.face_count)
    return VectorField(values, patch, values.copy(), values.copy())


def advance_time(u: VectorField, state: TimeState) -> tuple[VectorField, TimeState]:
    """Shift time levels: (current, old, oldOld) -> (current, current, old)."""
    shifted = VectorField(u.cell_values.copy(), u.patch_values.copy(),
                          u.cell_values.copy(), u.old_time.copy())
    new_state = dataclasses.replace(state, step_index=state.step_index + 1,
                                    current_time=state.current_time + state.dt)
    return shifted, new_state


__all__ = [
    "BoundaryCondition", "BoundaryConditions", "BoundaryConditionError",
    "VectorField", "TensorField", "TimeState", "initialise_field", "advance_time",
    "FIXED_DISPLACEMENT", "TRACTION", "SYMMETRY",
]
