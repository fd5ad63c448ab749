"""Legacy ASCII VTK writer for polyhedral cell data."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import PolyMesh

VTK_POLYHEDRON = 42


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def cell_face_streams(mesh: PolyMesh) -> list[list[int]]:
    """Per-cell polyhedron face stream ``[nFaces, n0, ids..., n1, ids..., ...]``.

    Faces are wound outward from each cell (reversed for the neighbour).
    """
    faces_of = [[] for _ in range(mesh.n_cells)]
    for f, face in enumerate(mesh.faces):
        faces_of[int(mesh.owner[f])].append(face)
    for f in range(mesh.n_internal_faces):
        faces_of[int(mesh.neighbour[f])].append(mesh.faces[f][::-1])
    streams = []
    for faces in faces_of:
        s = [len(faces)]
        for face in faces:
            s.append(len(face))
            s.extend(face)
        streams.append(s)
    return streams


def write_vtk(path, mesh: PolyMesh, cell_vectors: dict | None = None,
              cell_tensors: dict | None = None, cell_scalars: dict | None = None,
              title: str = "fvsolid") -> None:
    """Write an UNSTRUCTURED_GRID of polyhedra with CELL_DATA arrays."""
    out = ["# vtk DataFile Version 4.2", title.replace("\n", " "), "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_points} double"]
    out += [" ".join(_fmt(v) for v in p) for p in mesh.points]
    streams = cell_face_streams(mesh)
    size = sum(len(s) + 1 for s in streams)
    out.append(f"CELLS {mesh.n_cells} {size}")
    out += [" ".join(map(str, [len(s)] + s)) for s in streams]
    out.append(f"CELL_TYPES {mesh.n_cells}")
    out += [str(VTK_POLYHEDRON)] * mesh.n_cells
    out.append(f"CELL_DATA {mesh.n_cells}")
    for name, values in (cell_vectors or {}).items():
        out.append(f"VECTORS {name} double")
        out += [" ".join(_fmt(v) for v in row) for row in np.asarray(values).reshape(-1, 3)]
    for name, values in (cell_tensors or {}).items():
        out.append(f"TENSORS {name} double")
        for t in np.asarray(values).reshape(-1, 3, 3):
            out += [" ".join(_fmt(v) for v in row) for row in t]
    for name, values in (cell_scalars or {}).items():
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [_fmt(v) for v in np.asarray(values).ravel()]
    Path(path).write_text("\n".join(out) + "\n", encoding="ascii")
