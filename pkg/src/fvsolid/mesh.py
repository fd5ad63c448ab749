"""Face-addressed polyhedral mesh, geometric metrics and validation.

Faces are stored OpenFOAM-style: internal faces first, each with an owner and
a neighbour cell (owner < neighbour), followed by boundary faces grouped into
contiguous patches. Face windings are such that the right-hand normal points
out of the owner cell.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FIXED_DISPLACEMENT = "fixedDisplacement"
TRACTION = "traction"
SYMMETRY = "symmetry"
PATCH_KINDS = (FIXED_DISPLACEMENT, TRACTION, SYMMETRY)

BLOCK_PATCH_NAMES = ("minX", "maxX", "minY", "maxY", "minZ", "maxZ")


class MeshError(ValueError):
    """Base class for mesh construction and parsing errors."""


class DegenerateCellError(MeshError):
    def __init__(self, cell, volume):
        super().__init__(f"cell {cell} has non-positive volume {volume:.6g}")
        self.cell = cell


class InvertedFaceError(MeshError):
    def __init__(self, face, value):
        super().__init__(
            f"face {face} is inverted: d_f . Gamma_f = {value:.6g} <= 0"
        )
        self.face = face


class MeshFormatError(MeshError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class BoundaryPatch:
    name: str
    kind: str
    start_face: int
    face_count: int

    @property
    def faces(self) -> range:
        return range(self.start_face, self.start_face + self.face_count)


@dataclass(eq=False)
class PolyMesh:
    points: np.ndarray
    faces: list[tuple[int, ...]]
    owner: np.ndarray
    neighbour: np.ndarray
    patches: list[BoundaryPatch]
    n_cells: int = -1

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float).reshape(-1, 3)
        self.faces = [tuple(int(i) for i in f) for f in self.faces]
        self.owner = np.asarray(self.owner, dtype=np.int64)
        self.neighbour = np.asarray(self.neighbour, dtype=np.int64)
        self.patches = list(self.patches)
        if self.n_cells < 0:
            top = [-1]
            if self.owner.size:
                top.append(int(self.owner.max()))
            if self.neighbour.size:
                top.append(int(self.neighbour.max()))
            self.n_cells = max(top) + 1

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_internal_faces(self) -> int:
        return len(self.neighbour)

    @property
    def n_boundary_faces(self) -> int:
        return self.n_faces - self.n_internal_faces

    def patch(self, name: str) -> BoundaryPatch:
        for p in self.patches:
            if p.name == name:
                return p
        raise KeyError(f"no patch named {name!r}")

    def boundary_slice(self, patch: BoundaryPatch) -> slice:
        """Slice of ``patch`` into arrays indexed by boundary face."""
        start = patch.start_face - self.n_internal_faces
        return slice(start, start + patch.face_count)

    def with_patch_kinds(self, kinds: dict[str, str]) -> "PolyMesh":
        """Copy of the mesh with patches re-typed according to ``kinds``."""
        patches = [
            BoundaryPatch(p.name, kinds.get(p.name, p.kind), p.start_face, p.face_count)
            for p in self.patches
        ]
        return PolyMesh(self.points, self.faces, self.owner, self.neighbour,
                        patches, self.n_cells)

    def flat_faces(self) -> tuple[np.ndarray, np.ndarray]:
        """Faces as CSR-style ``(offsets, point_ids)``."""
        sizes = np.fromiter((len(f) for f in self.faces), dtype=np.int64,
                            count=len(self.faces))
        offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        ids = np.fromiter((i for f in self.faces for i in f), dtype=np.int64,
                          count=int(offsets[-1]))
        return offsets, ids

    def cell_face_counts(self) -> np.ndarray:
        return (np.bincount(self.owner, minlength=self.n_cells)
                + np.bincount(self.neighbour, minlength=self.n_cells))

    def __eq__(self, other):
        if not isinstance(other, PolyMesh):
            return NotImplemented
        return (
            self.n_cells == other.n_cells
            and self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and self.faces == other.faces
            and np.array_equal(self.owner, other.owner)
            and np.array_equal(self.neighbour, other.neighbour)
            and self.patches == other.patches
        )


@dataclass(eq=False)
class MeshGeometry:
    """Per-face and per-cell metrics used by the discretisation.

    ``delta``, ``ortho_component`` and ``non_ortho_component`` are indexed by
    face (internal faces first); ``gamma`` only covers internal faces.
    """

    face_area: np.ndarray
    face_centroid: np.ndarray
    cell_centroid: np.ndarray
    cell_volume: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    ortho_component: np.ndarray
    non_ortho_component: np.ndarray
    n_internal_faces: int
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def face_area_magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.face_area, axis=1)

    @property
    def face_normal(self) -> np.ndarray:
        return self.face_area / self.face_area_magnitude[:, None]

    @property
    def delta_magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.delta, axis=1)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def build_structured_hex_mesh(grid_points: np.ndarray,
                              patch_names=BLOCK_PATCH_NAMES,
                              patch_kind: str = FIXED_DISPLACEMENT) -> PolyMesh:
    """Hexahedral mesh from a logically structured ``(ni+1, nj+1, nk+1, 3)`` grid.

    The mapping (i, j, k) -> position must be right-handed. Boundary patches
    are the six logical sides in order i-min, i-max, j-min, j-max, k-min,
    k-max.
    """
    grid_points = np.asarray(grid_points, dtype=float)
    ni, nj, nk = (s - 1 for s in grid_points.shape[:3])
    if min(ni, nj, nk) < 1:
        raise ValueError("structured grid needs at least one cell per direction")

    def pid(i, j, k):
        return i + (ni + 1) * (j + (nj + 1) * k)

    def cid(i, j, k):
        return i + ni * (j + nj * k)

    points = grid_points.transpose(2, 1, 0, 3).reshape(-1, 3)

    # Face quads for the +i, +j, +k side of logical cell (i, j, k); normals
    # point in the increasing index direction.
    def quad_i(i, j, k):
        return np.stack([pid(i, j, k), pid(i, j + 1, k),
                         pid(i, j + 1, k + 1), pid(i, j, k + 1)], axis=-1)

    def quad_j(i, j, k):
        return np.stack([pid(i, j, k), pid(i, j, k + 1),
                         pid(i + 1, j, k + 1), pid(i + 1, j, k)], axis=-1)

    def quad_k(i, j, k):
        return np.stack([pid(i, j, k), pid(i + 1, j, k),
                         pid(i + 1, j + 1, k), pid(i, j + 1, k)], axis=-1)

    own, nei, quads = [], [], []
    I, J, K = np.meshgrid(np.arange(ni), np.arange(nj), np.arange(nk), indexing="ij")
    for axis, quad in enumerate((quad_i, quad_j, quad_k)):
        sel = (I, J, K)[axis] < (ni, nj, nk)[axis] - 1
        i, j, k = I[sel], J[sel], K[sel]
        step = [(1, 0, 0), (0, 1, 0), (0, 0, 1)][axis]
        own.append(cid(i, j, k))
        nei.append(cid(i + step[0], j + step[1], k + step[2]))
        quads.append(quad(i + step[0], j + step[1], k + step[2]))
    own = np.concatenate(own)
    nei = np.concatenate(nei)
    quads = np.concatenate(quads)
    order = np.lexsort((nei, own))
    faces = [tuple(q) for q in quads[order].tolist()]
    owner = [own[order]]
    neighbour = nei[order]

    patches = []
    start = len(faces)
    sides = [
        (0, 0, False), (0, ni, True),
        (1, 0, False), (1, nj, True),
        (2, 0, False), (2, nk, True),
    ]
    for name, (axis, plane, is_max) in zip(patch_names, sides):
        ranges = [np.arange(ni), np.arange(nj), np.arange(nk)]
        ranges[axis] = np.array([plane])
        i, j, k = (a.ravel() for a in np.meshgrid(*ranges, indexing="ij"))
        q = (quad_i, quad_j, quad_k)[axis](i, j, k)
        cell_idx = [i, j, k]
        if is_max:
            cell_idx[axis] = cell_idx[axis] - 1
        else:
            q = q[:, ::-1]
        cells = cid(*cell_idx)
        order = np.argsort(cells, kind="stable")
        faces.extend(tuple(f) for f in q[order].tolist())
        owner.append(cells[order])
        patches.append(BoundaryPatch(name, patch_kind, start, len(cells)))
        start += len(cells)

    return PolyMesh(points, faces, np.concatenate(owner), neighbour, patches,
                    ni * nj * nk)


def build_block_mesh(origin, extent, divisions) -> PolyMesh:
    """Axis-aligned box split into ``divisions`` hexahedra per direction.

    Patches are named minX/maxX/minY/maxY/minZ/maxZ and default to
    fixedDisplacement.
    """
    origin = np.asarray(origin, dtype=float).reshape(3)
    extent = np.asarray(extent, dtype=float).reshape(3)
    divisions = [int(d) for d in divisions]
    if len(divisions) != 3:
        raise ValueError("divisions must have three entries")
    if np.any(~np.isfinite(extent)) or np.any(extent <= 0):
        raise ValueError(f"extent must be positive, got {extent.tolist()}")
    if any(d < 1 for d in divisions):
        raise ValueError(f"divisions must be >= 1, got {divisions}")
    axes = [origin[a] + extent[a] * np.linspace(0.0, 1.0, divisions[a] + 1)
            for a in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return build_structured_hex_mesh(grid)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def _face_metrics(points, offsets, ids):
    """Two-pass triangle-fan centroid and area vector of every face."""
    n_faces = len(offsets) - 1
    sizes = np.diff(offsets)
    face_of = np.repeat(np.arange(n_faces), sizes)
    # Next vertex around each face, wrapping at the end.
    nxt = np.arange(len(ids)) + 1
    nxt[offsets[1:] - 1] = offsets[:-1]
    a = points[ids]
    b = points[ids[nxt]]

    def fan(centre):
        c = centre[face_of]
        tri_area = 0.5 * np.cross(a - c, b - c)
        tri_centroid = (a + b + c) / 3.0
        area = np.zeros((n_faces, 3))
        np.add.at(area, face_of, tri_area)
        return tri_area, tri_centroid, area

    vertex_mean = np.zeros((n_faces, 3))
    np.add.at(vertex_mean, face_of, a)
    vertex_mean /= np.maximum(sizes, 1)[:, None]

    tri_area, tri_centroid, area = fan(vertex_mean)
    mag = np.linalg.norm(area, axis=1)
    unit = np.divide(area, mag[:, None], out=np.zeros_like(area), where=mag[:, None] > 0)
    weight = np.einsum("ij,ij->i", tri_area, unit[face_of])
    # Faces with no usable normal fall back to triangle magnitudes.
    bad = (mag == 0)[face_of]
    weight[bad] = np.linalg.norm(tri_area[bad], axis=1)
    wsum = np.bincount(face_of, weights=weight, minlength=n_faces)
    centroid = np.zeros((n_faces, 3))
    np.add.at(centroid, face_of, weight[:, None] * tri_centroid)
    ok = np.abs(wsum) > 0
    centroid[ok] /= wsum[ok, None]
    centroid[~ok] = vertex_mean[~ok]

    tri_area, tri_centroid, area = fan(centroid)
    return centroid, area, face_of, tri_area, tri_centroid


def non_orthogonal_split(delta, face_area):
    """Split area vectors as Gamma = Delta + k with Delta = d |Gamma|^2 / (d . Gamma).

    Returns ``(Delta, k)``; rows with d . Gamma = 0 give non-finite values.
    """
    delta = np.asarray(delta, dtype=float)
    face_area = np.asarray(face_area, dtype=float)
    d_dot_s = np.einsum("ij,ij->i", delta, face_area)
    s2 = np.einsum("ij,ij->i", face_area, face_area)
    with np.errstate(divide="ignore", invalid="ignore"):
        ortho = delta * (s2 / d_dot_s)[:, None]
    return ortho, face_area - ortho


def _raw_geometry(mesh: PolyMesh):
    offsets, ids = mesh.flat_faces()
    face_centroid, face_area, face_of, tri_area, tri_centroid = _face_metrics(
        mesh.points, offsets, ids)
    nc = mesh.n_cells
    ni = mesh.n_internal_faces
    owner, neighbour = mesh.owner, mesh.neighbour

    counts = np.maximum(mesh.cell_face_counts(), 1)
    approx = np.zeros((nc, 3))
    np.add.at(approx, owner, face_centroid)
    np.add.at(approx, neighbour, face_centroid[:ni])
    approx /= counts[:, None]

    # Tetrahedra (approximate centre, fan triangle); each triangle is seen
    # outward from the owner and inward from the neighbour.
    tri_owner = owner[face_of]
    internal_tri = face_of < ni
    cells = np.concatenate([tri_owner, neighbour[face_of[internal_tri]]])
    signs = np.concatenate([np.ones(len(face_of)), -np.ones(int(internal_tri.sum()))])
    areas = np.concatenate([tri_area, tri_area[internal_tri]]) * signs[:, None]
    cents = np.concatenate([tri_centroid, tri_centroid[internal_tri]])
    c = approx[cells]
    tet_vol = np.einsum("ij,ij->i", areas, cents - c) / 3.0
    tet_cent = 0.75 * cents + 0.25 * c

    volume = np.bincount(cells, weights=tet_vol, minlength=nc)
    centroid = np.zeros((nc, 3))
    np.add.at(centroid, cells, tet_vol[:, None] * tet_cent)
    ok = np.abs(volume) > 0
    centroid[ok] /= volume[ok, None]
    centroid[~ok] = approx[~ok]

    delta = face_centroid - centroid[owner]
    delta[:ni] = centroid[neighbour] - centroid[owner[:ni]]

    to_face = np.linalg.norm(face_centroid[:ni] - centroid[owner[:ni]], axis=1)
    from_face = np.linalg.norm(centroid[neighbour] - face_centroid[:ni], axis=1)
    total = to_face + from_face
    gamma = np.divide(from_face, total, out=np.full(ni, np.nan), where=total > 0)

    d_dot_s = np.einsum("ij,ij->i", delta, face_area)
    ortho, non_ortho = non_orthogonal_split(delta, face_area)

    geom = MeshGeometry(
        face_area=face_area,
        face_centroid=face_centroid,
        cell_centroid=centroid,
        cell_volume=volume,
        delta=delta,
        gamma=gamma,
        ortho_component=ortho,
        non_ortho_component=non_ortho,
        n_internal_faces=ni,
    )
    return geom, d_dot_s


def compute_geometry(mesh: PolyMesh) -> MeshGeometry:
    """Compute all face and cell metrics of ``mesh``.

    Raises DegenerateCellError for a non-positive cell volume and
    InvertedFaceError when d_f . Gamma_f <= 0 on any face.
    """
    geom, d_dot_s = _raw_geometry(mesh)
    bad = np.flatnonzero(~(geom.cell_volume > 0))
    if bad.size:
        raise DegenerateCellError(int(bad[0]), float(geom.cell_volume[bad[0]]))
    bad = np.flatnonzero(~(d_dot_s > 0))
    if bad.size:
        raise InvertedFaceError(int(bad[0]), float(d_dot_s[bad[0]]))
    return geom


def translate(mesh: PolyMesh, offset) -> PolyMesh:
    return PolyMesh(mesh.points + np.asarray(offset, dtype=float), mesh.faces,
                    mesh.owner, mesh.neighbour, mesh.patches, mesh.n_cells)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    message: str
    index: int | None = None

    def __str__(self):
        return f"{self.kind}: {self.message}"


class ValidationReport(list):
    """List of ValidationIssue; empty means the mesh is accepted."""

    @property
    def ok(self) -> bool:
        return len(self) == 0

    def kinds(self) -> set[str]:
        return {issue.kind for issue in self}

    def for_index(self, kind: str) -> list[int]:
        return [i.index for i in self if i.kind == kind]

    def __str__(self):
        if not self:
            return "mesh OK"
        return "\n".join(str(i) for i in self)


def _check_topology(mesh: PolyMesh, report: ValidationReport) -> bool:
    n_faces, ni = mesh.n_faces, mesh.n_internal_faces
    fatal = False
    for f, face in enumerate(mesh.faces):
        if any(i < 0 or i >= mesh.n_points for i in face):
            report.append(ValidationIssue(
                "point-index", f"face {f} references a point outside 0..{mesh.n_points - 1}", f))
            fatal = True
        elif len(set(face)) < 3:
            report.append(ValidationIssue(
                "degenerate-face", f"face {f} has fewer than 3 distinct points", f))
    if len(mesh.owner) != n_faces:
        report.append(ValidationIssue(
            "owner-length", f"owner has {len(mesh.owner)} entries for {n_faces} faces"))
        return False
    n_patch_faces = sum(p.face_count for p in mesh.patches)
    if ni + n_patch_faces != n_faces:
        report.append(ValidationIssue(
            "neighbour-length",
            f"neighbour has {ni} entries but {n_faces - n_patch_faces} faces are not in a patch"))
        fatal = True
    cells = np.concatenate([mesh.owner, mesh.neighbour])
    if cells.size and (cells.min() < 0 or cells.max() >= mesh.n_cells):
        report.append(ValidationIssue("cell-index", "owner/neighbour index out of range"))
        return False
    for f in np.flatnonzero(mesh.owner[:ni] >= mesh.neighbour):
        report.append(ValidationIssue(
            "face-order", f"internal face {f} has owner >= neighbour", int(f)))
    expected = ni
    for p in mesh.patches:
        if p.kind not in PATCH_KINDS:
            report.append(ValidationIssue("patch", f"patch {p.name} has unknown kind {p.kind!r}"))
        if p.face_count < 1:
            report.append(ValidationIssue("patch", f"patch {p.name} has no faces"))
        if p.start_face < ni:
            report.append(ValidationIssue(
                "patch", f"patch {p.name} starts at {p.start_face} inside the internal faces"))
        if p.start_face != expected:
            report.append(ValidationIssue(
                "patch", f"patch {p.name} starts at {p.start_face}, expected {expected}"))
        expected = p.start_face + p.face_count
    if mesh.patches and expected != n_faces:
        report.append(ValidationIssue("patch", "patches do not cover all boundary faces"))
    names = [p.name for p in mesh.patches]
    if len(set(names)) != len(names):
        report.append(ValidationIssue("patch", "duplicate patch names"))
    for c in np.flatnonzero(mesh.cell_face_counts() < 4):
        report.append(ValidationIssue("cell-faces", f"cell {c} has fewer than 4 faces", int(c)))
    return not fatal


def validate_mesh(mesh: PolyMesh, geometry: MeshGeometry | None = None) -> ValidationReport:
    """Check every topological and geometric mesh invariant.

    Never raises; problems are returned as report entries.
    """
    report = ValidationReport()
    if not _check_topology(mesh, report):
        return report
    geom, d_dot_s = _raw_geometry(mesh)
    if geometry is not None:
        geom = geometry
        d_dot_s = np.einsum("ij,ij->i", geom.delta, geom.face_area)

    scale = float(np.ptp(mesh.points, axis=0).max()) if mesh.n_points else 1.0
    mag = np.linalg.norm(geom.face_area, axis=1)
    for f in np.flatnonzero(mag <= 1e-14 * max(scale, 1e-300) ** 2):
        report.append(ValidationIssue("zero-area", f"face {f} has zero area ({mag[f]:.3g})", int(f)))

    ni = mesh.n_internal_faces
    net = np.zeros((mesh.n_cells, 3))
    np.add.at(net, mesh.owner, geom.face_area)
    np.subtract.at(net, mesh.neighbour, geom.face_area[:ni])
    total = np.bincount(mesh.owner, weights=mag, minlength=mesh.n_cells)
    total += np.bincount(mesh.neighbour, weights=mag[:ni], minlength=mesh.n_cells)
    open_cells = np.linalg.norm(net, axis=1) > 1e-10 * total
    for c in np.flatnonzero(open_cells):
        report.append(ValidationIssue(
            "open-cell", f"cell {c} is not closed (|sum Gamma_f| = {np.linalg.norm(net[c]):.3g})", int(c)))

    for c in np.flatnonzero(~(geom.cell_volume > 0)):
        report.append(ValidationIssue(
            "degenerate-cell", f"cell {c} has non-positive volume {geom.cell_volume[c]:.3g}", int(c)))
    for f in np.flatnonzero(~(d_dot_s > 0)):
        report.append(ValidationIssue(
            "inverted-face", f"face {f} has d_f . Gamma_f = {d_dot_s[f]:.3g} <= 0", int(f)))
    g = geom.gamma
    for f in np.flatnonzero(~((g > 0) & (g < 1))):
        report.append(ValidationIssue("gamma", f"face {f} has weight {g[f]:.3g} outside (0, 1)", int(f)))
    return report


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

_SECTIONS = ("points", "faces", "owner", "neighbour", "patches")


def write_mesh(mesh: PolyMesh, path) -> None:
    path = Path(path)
    lines = ["# fvsolid polyhedral mesh", "points", str(mesh.n_points)]
    lines += [" ".join(repr(float(v)) for v in p) for p in mesh.points]
    lines += ["faces", str(mesh.n_faces)]
    lines += [" ".join(map(str, (len(f),) + f)) for f in mesh.faces]
    lines += ["owner", str(len(mesh.owner))]
    lines += [str(int(o)) for o in mesh.owner]
    lines += ["neighbour", str(len(mesh.neighbour))]
    lines += [str(int(n)) for n in mesh.neighbour]
    lines += ["patches", str(len(mesh.patches))]
    lines += [f"{p.name} {p.kind} {p.start_face} {p.face_count}" for p in mesh.patches]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _tokenised_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].split()
        if body:
            yield lineno, body


def _as_int(tok, lineno, what):
    if not re.fullmatch(r"[+-]?\d+", tok):
        raise MeshFormatError(f"{what}: expected an integer, got {tok!r}", lineno)
    return int(tok)


def _as_float(tok, lineno, what):
    try:
        return float(tok)
    except ValueError:
        raise MeshFormatError(f"{what}: expected a number, got {tok!r}", lineno) from None


def read_mesh(path) -> PolyMesh:
    """Parse a mesh file written by :func:`write_mesh` (or by hand)."""
    lines = list(_tokenised_lines(Path(path).read_text(encoding="utf-8")))
    pos = 0

    def take(section):
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(f"missing section {section!r}")
        lineno, toks = lines[pos]
        if toks != [section]:
            raise MeshFormatError(f"expected section {section!r}, got {' '.join(toks)!r}", lineno)
        pos += 1
        if pos >= len(lines):
            raise MeshFormatError(f"{section}: missing count", lineno)
        lineno, toks = lines[pos]
        if len(toks) != 1:
            raise MeshFormatError(f"{section}: expected a single count", lineno)
        count = _as_int(toks[0], lineno, section)
        if count < 0:
            raise MeshFormatError(f"{section}: negative count", lineno)
        pos += 1
        rows = lines[pos:pos + count]
        if len(rows) < count:
            raise MeshFormatError(f"{section}: expected {count} entries, found {len(rows)}", lineno)
        pos += count
        return rows

    points = []
    for lineno, toks in take("points"):
        if len(toks) != 3:
            raise MeshFormatError("points: expected 'x y z'", lineno)
        points.append([_as_float(t, lineno, "points") for t in toks])
    faces = []
    for lineno, toks in take("faces"):
        k = _as_int(toks[0], lineno, "faces")
        if k < 3 or len(toks) != k + 1:
            raise MeshFormatError(f"faces: expected {max(k, 3)} point indices after the count", lineno)
        face = tuple(_as_int(t, lineno, "faces") for t in toks[1:])
        for i in face:
            if i < 0 or i >= len(points):
                raise MeshFormatError(f"faces: point index {i} out of range 0..{len(points) - 1}", lineno)
        faces.append(face)

    def index_rows(section):
        out = []
        for lineno, toks in take(section):
            if len(toks) != 1:
                raise MeshFormatError(f"{section}: expected one index per line", lineno)
            v = _as_int(toks[0], lineno, section)
            if v < 0:
                raise MeshFormatError(f"{section}: negative cell index {v}", lineno)
            out.append(v)
        return out

    owner = index_rows("owner")
    neighbour = index_rows("neighbour")
    patches = []
    for lineno, toks in take("patches"):
        if len(toks) != 4:
            raise MeshFormatError("patches: expected 'name kind startFace faceCount'", lineno)
        name, kind = toks[0], toks[1]
        if kind not in PATCH_KINDS:
            raise MeshFormatError(f"patches: unknown kind {kind!r} (expected one of {', '.join(PATCH_KINDS)})", lineno)
        patches.append(BoundaryPatch(name, kind, _as_int(toks[2], lineno, "patches"),
                                     _as_int(toks[3], lineno, "patches")))
    if pos != len(lines):
        raise MeshFormatError("unexpected trailing content", lines[pos][0])

    if len(owner) != len(faces):
        raise MeshFormatError(f"owner: {len(owner)} entries for {len(faces)} faces")
    n_boundary = sum(p.face_count for p in patches)
    n_internal = len(faces) - n_boundary
    if len(neighbour) != n_internal:
        raise MeshFormatError(
            f"neighbour: {len(neighbour)} entries but {n_internal} internal faces "
            f"({len(faces)} faces, {n_boundary} in patches)")
    return PolyMesh(np.array(points, dtype=float).reshape(-1, 3), faces, owner, neighbour, patches)
