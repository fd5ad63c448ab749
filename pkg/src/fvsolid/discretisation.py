"""Cell-centred finite volume operators for small-strain linear elasticity.

Gradient convention throughout: ``G[..., i, j] = d u_j / d x_i`` so that the
change of ``u`` along a vector ``d`` is ``d . G`` and the traction on a
surface with area vector ``S`` is ``S . sigma(G)``.

Per-face quantities on internal faces are computed once and added to the
owner row and subtracted from the neighbour row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fields import BoundaryConditions, TimeState, VectorField
from .linsolve import SparseSymmetricMatrix
from .material import LinearElasticMaterial, stress_from_gradient
from .mesh import FIXED_DISPLACEMENT, PATCH_KINDS, SYMMETRY, TRACTION, MeshGeometry, PolyMesh

UNITY = "unity"
INVERSE_DISTANCE = "inverseDistance"
WEIGHTINGS = (UNITY, INVERSE_DISTANCE)

_FIXED = PATCH_KINDS.index(FIXED_DISPLACEMENT)
_TRACTION = PATCH_KINDS.index(TRACTION)
_SYMMETRY = PATCH_KINDS.index(SYMMETRY)


class DegenerateStencilError(ArithmeticError):
    def __init__(self, cell):
        super().__init__(f"least-squares stencil of cell {cell} is degenerate (coplanar directions)")
        self.cell = cell


class SingularSystemError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Face <-> cell addressing helpers
# ---------------------------------------------------------------------------


class _Addressing:
    def __init__(self, mesh: PolyMesh):
        nc, nf, ni = mesh.n_cells, mesh.n_faces, mesh.n_internal_faces
        ones = np.ones(nf)
        self.owner_sum = sp.csr_matrix((ones, (mesh.owner, np.arange(nf))), shape=(nc, nf))
        self.neighbour_sum = sp.csr_matrix((ones[:ni], (mesh.neighbour, np.arange(ni))),
                                           shape=(nc, ni))
        self.internal_owner_sum = self.owner_sum[:, :ni].tocsr()
        self.boundary_owner_sum = self.owner_sum[:, ni:].tocsr()
        self.owner = mesh.owner
        self.neighbour = mesh.neighbour
        self.boundary_owner = mesh.owner[ni:]
        self.n_cells = nc
        self.n_internal = ni

    def antisymmetric(self, internal, boundary=None):
        """Cell sums of per-face values added to owners and subtracted from neighbours."""
        shape = internal.shape[1:]
        width = int(np.prod(shape))
        flat = internal.reshape(len(internal), width)
        out = self.internal_owner_sum @ flat - self.neighbour_sum @ flat
        if boundary is not None:
            out = out + self.boundary_owner_sum @ boundary.reshape(len(boundary), width)
        return out.reshape((self.n_cells,) + shape)

    def symmetric(self, internal, boundary=None):
        """Cell sums of per-face values added to both adjacent cells."""
        shape = internal.shape[1:]
        width = int(np.prod(shape))
        flat = internal.reshape(len(internal), width)
        out = self.internal_owner_sum @ flat + self.neighbour_sum @ flat
        if boundary is not None:
            out = out + self.boundary_owner_sum @ boundary.reshape(len(boundary), width)
        return out.reshape((self.n_cells,) + shape)


def addressing(mesh: PolyMesh, geometry: MeshGeometry) -> _Addressing:
    addr = geometry.cache.get("addressing")
    if addr is None:
        addr = geometry.cache["addressing"] = _Addressing(mesh)
    return addr


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------


def _face_weights(geometry: MeshGeometry, weighting: str) -> np.ndarray:
    if weighting == UNITY:
        return np.ones(len(geometry.delta))
    if weighting == INVERSE_DISTANCE:
        return 1.0 / geometry.delta_magnitude ** 2
    raise ValueError(f"unknown gradient weighting {weighting!r}; choose from {WEIGHTINGS}")


def _least_squares_inverse(mesh, geometry, weighting):
    key = ("ls-inverse", weighting)
    inv = geometry.cache.get(key)
    if inv is None:
        addr = addressing(mesh, geometry)
        ni = geometry.n_internal_faces
        w2 = _face_weights(geometry, weighting)
        dd = w2[:, None, None] * np.einsum("fi,fj->fij", geometry.delta, geometry.delta)
        normal = addr.symmetric(dd[:ni], dd[ni:])
        # Relative conditioning check; coplanar stencils give a singular matrix.
        cond = np.linalg.cond(normal)
        bad = np.flatnonzero(~(cond < 1e12))
        if bad.size:
            raise DegenerateStencilError(int(bad[0]))
        inv = geometry.cache[key] = np.linalg.inv(normal)
    return inv


def least_squares_gradient(u: VectorField, mesh: PolyMesh, geometry: MeshGeometry,
                           weighting: str = INVERSE_DISTANCE) -> np.ndarray:
    """Weighted least-squares displacement gradient in every cell.

    The stencil covers all neighbours and all boundary faces (using the
    current ``u.patch_values``). Returns an ``(n_cells, 3, 3)`` array.
    """
    inv = _least_squares_inverse(mesh, geometry, weighting)
    addr = addressing(mesh, geometry)
    ni = geometry.n_internal_faces
    w2 = _face_weights(geometry, weighting)
    uc = u.cell_values
    du_int = uc[mesh.neighbour] - uc[mesh.owner[:ni]]
    du_bnd = u.patch_values - uc[addr.boundary_owner]
    wd = w2[:, None] * geometry.delta
    rhs = addr.symmetric(np.einsum("fi,fj->fij", wd[:ni], du_int),
                         np.einsum("fi,fj->fij", wd[ni:], du_bnd))
    return np.einsum("cik,ckj->cij", inv, rhs)


def interpolate_face_gradient(cell_grads: np.ndarray, mesh: PolyMesh,
                              geometry: MeshGeometry) -> np.ndarray:
    """Inverse-distance weighted mean of the two adjacent cell gradients."""
    ni = geometry.n_internal_faces
    g = geometry.gamma[:, None, None]
    return g * cell_grads[mesh.owner[:ni]] + (1.0 - g) * cell_grads[mesh.neighbour]


def normal_corrected_gradient(cell_grad, u_cell, u_face, delta) -> np.ndarray:
    """Replace the component of G along d with the one-sided difference (u_f - u_P)/|d|."""
    dmag = np.linalg.norm(delta, axis=-1)
    dhat = delta / dmag[..., None]
    along = (u_face - u_cell) / dmag[..., None] - np.einsum("...i,...ij->...j", dhat, cell_grad)
    return cell_grad + np.einsum("...i,...j->...ij", dhat, along)


def update_boundary_values(u: VectorField, cell_grads: np.ndarray, mesh: PolyMesh,
                           geometry: MeshGeometry, bcs: BoundaryConditions) -> None:
    """Refresh ``u.patch_values`` from the boundary conditions (in place).

    Traction faces are extrapolated from the owner cell, symmetry faces are
    extrapolated and then stripped of their normal component.
    """
    ni = geometry.n_internal_faces
    code, value = bcs.per_face(mesh)
    bo = mesh.owner[ni:]
    extrap = u.cell_values[bo] + np.einsum("fi,fij->fj", geometry.delta[ni:], cell_grads[bo])
    n = geometry.face_normal[ni:]
    projected = extrap - n * np.einsum("fi,fi->f", n, extrap)[:, None]
    out = np.where((code == _FIXED)[:, None], value, extrap)
    out = np.where((code == _SYMMETRY)[:, None], projected, out)
    u.patch_values = out


def boundary_face_gradient(cell_grads, u: VectorField, mesh: PolyMesh,
                           geometry: MeshGeometry, bcs: BoundaryConditions) -> np.ndarray:
    """Boundary-face gradients: normal-corrected on fixed and symmetry faces,
    the owner-cell gradient on traction faces."""
    ni = geometry.n_internal_faces
    code, _ = bcs.per_face(mesh)
    bo = mesh.owner[ni:]
    corrected = normal_corrected_gradient(cell_grads[bo], u.cell_values[bo],
                                          u.patch_values, geometry.delta[ni:])
    return np.where((code == _TRACTION)[:, None, None], cell_grads[bo], corrected)


# ---------------------------------------------------------------------------
# Force terms
# ---------------------------------------------------------------------------


def face_traction_force(face_area, face_grads, material) -> np.ndarray:
    """Surface force S . sigma(G) carried by faces with area vectors S."""
    return np.einsum("fi,fij->fj", face_area, stress_from_gradient(face_grads, material))


def explicit_surface_force(internal_face_grads, material: LinearElasticMaterial,
                           mesh: PolyMesh, geometry: MeshGeometry,
                           boundary_face_grads=None, boundary_force=None) -> np.ndarray:
    """Net surface force on every cell from the face stresses.

    Boundary faces contribute ``boundary_force`` when given (traction and
    symmetry replacements), otherwise ``Gamma_b . sigma(boundary_face_grads)``.
    """
    ni = geometry.n_internal_faces
    addr = addressing(mesh, geometry)
    internal = face_traction_force(geometry.face_area[:ni], internal_face_grads, material)
    if boundary_force is None and boundary_face_grads is not None:
        boundary_force = face_traction_force(geometry.face_area[ni:], boundary_face_grads, material)
    return addr.antisymmetric(internal, boundary_force)


def implicit_face_coefficients(geometry: MeshGeometry, material: LinearElasticMaterial) -> np.ndarray:
    """(2 mu + lambda) |Delta_f| / |d_f| for every face, boundary faces included."""
    K = material.implicit_stiffness
    return K * np.linalg.norm(geometry.ortho_component, axis=1) / geometry.delta_magnitude


def stabilization_face_force(u: VectorField, internal_face_grads, material, mesh, geometry):
    """Per internal face: K[|Delta|(u_N - u_P)/|d| + k . G_f] - K Gamma . G_f."""
    ni = geometry.n_internal_faces
    K = material.implicit_stiffness
    a_n = implicit_face_coefficients(geometry, material)[:ni]
    uc = u.cell_values
    implicit = a_n[:, None] * (uc[mesh.neighbour] - uc[mesh.owner[:ni]])
    correction = K * np.einsum("fi,fij->fj",
                               geometry.non_ortho_component[:ni] - geometry.face_area[:ni],
                               internal_face_grads)
    return implicit + correction


def stabilization_term(u: VectorField, internal_face_grads, material: LinearElasticMaterial,
                       mesh: PolyMesh, geometry: MeshGeometry) -> np.ndarray:
    """Net third-order smoothing force on every cell (zero on boundary faces)."""
    face = stabilization_face_force(u, internal_face_grads, material, mesh, geometry)
    return addressing(mesh, geometry).antisymmetric(face)


# ---------------------------------------------------------------------------
# Algebraic system
# ---------------------------------------------------------------------------


@dataclass
class MomentumSystem:
    """``a_P u_P - sum_N a_N u_N = b_P`` for each displacement component.

    ``diag`` is ``(n_cells, 3)`` because symmetry planes add their implicit
    coefficient only to the normal component. ``off_diag`` holds one positive
    ``a_N`` per internal face, shared by owner and neighbour rows.
    """

    diag: np.ndarray
    off_diag: np.ndarray
    rhs: np.ndarray
    owner: np.ndarray
    neighbour: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.diag)

    def matrix(self, component: int) -> SparseSymmetricMatrix:
        return SparseSymmetricMatrix(self.diag[:, component], self.owner, self.neighbour,
                                     -self.off_diag)

    def neighbour_sum(self, values) -> np.ndarray:
        """sum_N a_N x_N for every row, per component."""
        n = self.n_cells
        out = np.empty((n, values.shape[1]))
        for c in range(values.shape[1]):
            out[:, c] = (np.bincount(self.owner, self.off_diag * values[self.neighbour, c], n)
                         + np.bincount(self.neighbour, self.off_diag * values[self.owner, c], n))
        return out

    def residual(self, values) -> np.ndarray:
        return self.rhs - (self.diag * values - self.neighbour_sum(values))

    def normalised_residual(self, values) -> np.ndarray:
        """Per-component sum|b - A u| over a scale shared by all components.

        The scale is sum over cells and components of |a_P||u_P| + |b_P|
        (floored at 1e-300); sharing it keeps a component that is identically
        zero up to round-off from never converging.
        """
        num = np.abs(self.residual(values)).sum(axis=0)
        den = (np.abs(self.diag) * np.abs(values) + np.abs(self.rhs)).sum()
        return num / max(den, 1e-300)


@dataclass
class BoundaryContribution:
    face_grads: np.ndarray
    force: np.ndarray
    implicit_coeffs: np.ndarray


def apply_boundary_conditions(system: MomentumSystem, u: VectorField, cell_grads,
                              material: LinearElasticMaterial, mesh: PolyMesh,
                              geometry: MeshGeometry, bcs: BoundaryConditions,
                              steady: bool = True) -> BoundaryContribution:
    """Add boundary-face terms to ``system`` in place.

    fixedDisplacement: implicit a_b on all components, a_b u_b plus the face
    stress from the normal-corrected gradient and the deferred smoothing
    correction K (k_b - Gamma_b) . G_b in the source.
    traction: T_b |Gamma_b| in the source only.
    symmetry: implicit a_b n_i^2 on component i; the rest of
    a_b (u_b - u_P) explicit; only the normal part of the face stress.

    ``u.patch_values`` must be current (see :func:`update_boundary_values`).
    """
    ni = geometry.n_internal_faces
    nb = mesh.n_boundary_faces
    code, value = bcs.per_face(mesh)
    bo = mesh.owner[ni:]
    S = geometry.face_area[ni:]
    smag = np.linalg.norm(S, axis=1)
    n = S / smag[:, None]
    K = material.implicit_stiffness
    a_b = implicit_face_coefficients(geometry, material)[ni:]

    grads = boundary_face_gradient(cell_grads, u, mesh, geometry, bcs)
    stress_force = face_traction_force(S, grads, material)
    fixed = code == _FIXED
    trac = code == _TRACTION
    sym = code == _SYMMETRY

    force = np.zeros((nb, 3))
    force[fixed] = stress_force[fixed]
    force[trac] = value[trac] * smag[trac, None]
    force[sym] = n[sym] * np.einsum("fi,fi->f", n[sym], stress_force[sym])[:, None]

    coeffs = np.zeros((nb, 3))
    coeffs[fixed] = a_b[fixed, None]
    coeffs[sym] = a_b[sym, None] * n[sym] ** 2

    source = force.copy()
    correction = K * np.einsum("fi,fij->fj", geometry.non_ortho_component[ni:] - S, grads)
    source[fixed] += a_b[fixed, None] * u.patch_values[fixed] + correction[fixed]
    u_p = u.cell_values[bo]
    source[sym] += (a_b[sym, None] * (u.patch_values[sym] - u_p[sym])
                    + coeffs[sym] * u_p[sym] + correction[sym])

    addr = addressing(mesh, geometry)
    system.diag += addr.boundary_owner_sum @ coeffs
    system.rhs += addr.boundary_owner_sum @ source

    if steady:
        held = coeffs.sum(axis=0)
        for c in range(3):
            if not held[c] > 0:
                raise SingularSystemError(
                    f"steady problem has no fixedDisplacement or symmetry constraint on "
                    f"component {'xyz'[c]}; the system is singular")
    return BoundaryContribution(grads, force, coeffs)


def neighbour_coefficient_sum(a_n, mesh: PolyMesh) -> np.ndarray:
    """Row sums of the neighbour coefficients, owner side then neighbour side."""
    ni = mesh.n_internal_faces
    out = (np.bincount(mesh.owner[:ni], a_n, mesh.n_cells)
           + np.bincount(mesh.neighbour, a_n, mesh.n_cells))
    return out.astype(float, copy=False)  # bincount of nothing is integer


def assemble_coefficients(material: LinearElasticMaterial, mesh: PolyMesh,
                          geometry: MeshGeometry, time_state: TimeState) -> MomentumSystem:
    """Matrix part without boundary terms: a_N on faces, inertia plus sum a_N on the diagonal."""
    ni = geometry.n_internal_faces
    a_n = implicit_face_coefficients(geometry, material)[:ni]
    diag = neighbour_coefficient_sum(a_n, mesh)
    if not time_state.steady:
        diag = diag + material.density * geometry.cell_volume / time_state.dt ** 2
    diag = np.repeat(diag[:, None], 3, axis=1)
    return MomentumSystem(diag, a_n, np.zeros((mesh.n_cells, 3)),
                          mesh.owner[:ni].copy(), mesh.neighbour.copy())


def assemble_momentum(u: VectorField, material: LinearElasticMaterial, mesh: PolyMesh,
                      geometry: MeshGeometry, bcs: BoundaryConditions, body_force=None,
                      time_state: TimeState | None = None, cell_grads=None,
                      weighting: str = INVERSE_DISTANCE):
    """Assemble the segregated momentum system at the current iterate ``u``.

    ``body_force`` is an acceleration, uniform 3-vector or ``(n_cells, 3)``.
    Returns ``(system, boundary_contribution, cell_grads, internal_face_grads)``.
    """
    time_state = time_state or TimeState()
    if cell_grads is None:
        cell_grads = least_squares_gradient(u, mesh, geometry, weighting)
    system = assemble_coefficients(material, mesh, geometry, time_state)
    face_grads = interpolate_face_gradient(cell_grads, mesh, geometry)
    ni = geometry.n_internal_faces
    addr = addressing(mesh, geometry)

    K = material.implicit_stiffness
    internal = face_traction_force(geometry.face_area[:ni], face_grads, material)
    internal += K * np.einsum("fi,fij->fj",
                              geometry.non_ortho_component[:ni] - geometry.face_area[:ni],
                              face_grads)
    system.rhs += addr.antisymmetric(internal)

    rho, vol = material.density, geometry.cell_volume
    if not time_state.steady:
        history = 2.0 * u.old_time - u.old_old_time
        system.rhs += (rho * vol / time_state.dt ** 2)[:, None] * history
    if body_force is not None:
        fb = np.broadcast_to(np.asarray(body_force, dtype=float), (mesh.n_cells, 3))
        system.rhs += rho * vol[:, None] * fb

    boundary = apply_boundary_conditions(system, u, cell_grads, material, mesh, geometry,
                                         bcs, steady=time_state.steady)
    return system, boundary, cell_grads, face_grads
