"""Verification harness: manufactured solutions, error norms, benchmark oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import BoundaryCondition, BoundaryConditions, initialise_field
from .material import LinearElasticMaterial, stress_from_gradient
from .mesh import (
    FIXED_DISPLACEMENT,
    SYMMETRY,
    TRACTION,
    MeshGeometry,
    PolyMesh,
    build_block_mesh,
    build_structured_hex_mesh,
    compute_geometry,
)


# ---------------------------------------------------------------------------
# Manufactured solutions
# ---------------------------------------------------------------------------


class ManufacturedSolution:
    """Closed-form displacement with its gradient and Hessians.

    Subclasses provide ``value(x)``, ``gradient(x)`` (``G[..., i, j] =
    d u_j / d x_i``) and ``hessian(x)`` (``H[..., j, i, k] = d2 u_j / dx_i dx_k``).
    """

    name = "base"

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def stress(self, x, material):
        return stress_from_gradient(self.gradient(x), material)

    def divergence_of_stress(self, x, material: LinearElasticMaterial):
        """div sigma = mu lap(u) + (mu + lambda) grad(div u), from the Hessians."""
        H = self.hessian(x)
        lap = np.einsum("...jii->...j", H)
        grad_div = np.einsum("...iij->...j", H)
        return material.mu * lap + (material.mu + material.lam) * grad_div

    def body_force(self, x, material: LinearElasticMaterial):
        """Acceleration f_b = -(1/rho) div sigma(u*) that makes u* an equilibrium state."""
        return -self.divergence_of_stress(x, material) / material.density


@dataclass
class AffineSolution(ManufacturedSolution):
    matrix: np.ndarray = field(default_factory=lambda: np.array(
        [[0.010, -0.004, 0.002], [0.003, 0.008, -0.005], [-0.006, 0.001, 0.012]]))
    offset: np.ndarray = field(default_factory=lambda: np.array([0.01, -0.02, 0.015]))
    name: str = "affine"

    def value(self, x):
        return np.asarray(x) @ self.matrix + self.offset

    def gradient(self, x):
        x = np.asarray(x)
        return np.broadcast_to(self.matrix, x.shape[:-1] + (3, 3)).copy()

    def hessian(self, x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (3, 3, 3))


def _default_hessians():
    return np.array([
        [[2.0, 0.5, 0.0], [0.5, -1.0, 0.3], [0.0, 0.3, 1.0]],
        [[-1.0, 0.2, 0.4], [0.2, 1.5, 0.0], [0.4, 0.0, -0.5]],
        [[0.5, 0.0, -0.3], [0.0, 1.0, 0.6], [-0.3, 0.6, 2.0]],
    ]) * 0.01


@dataclass
class QuadraticSolution(ManufacturedSolution):
    """u_j = 0.5 x.H_j.x + b_j.x + c_j with constant symmetric H_j."""

    hessians: np.ndarray = field(default_factory=_default_hessians)
    linear: np.ndarray = field(default_factory=lambda: np.array(
        [[0.004, 0.0, 0.001], [0.0, -0.003, 0.0], [0.002, 0.0, 0.005]]))
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    name: str = "quadratic"

    def value(self, x):
        x = np.asarray(x)
        quad = 0.5 * np.einsum("...i,jik,...k->...j", x, self.hessians, x)
        return quad + x @ self.linear + self.offset

    def gradient(self, x):
        x = np.asarray(x)
        # d u_j / d x_i = H_j[i, k] x_k + linear[i, j]
        return np.einsum("jik,...k->...ij", self.hessians, x) + self.linear

    def hessian(self, x):
        x = np.asarray(x)
        return np.broadcast_to(self.hessians, x.shape[:-1] + (3, 3, 3)).copy()


@dataclass
class SineSolution(ManufacturedSolution):
    """u_j = A_j sin(k x_a) sin(k x_b) with axis pair (a_j, b_j) per component."""

    amplitudes: tuple = (0.01, 0.005, 0.0)
    axes: tuple = ((0, 1), (1, 2), (2, 0))
    wavenumber: float = math.pi
    name: str = "sines"

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        k = self.wavenumber
        return x, k, np.sin(k * x), np.cos(k * x)

    def value(self, x):
        x, k, s, c = self._parts(x)
        out = np.zeros(x.shape)
        for j, (a, b) in enumerate(self.axes):
            out[..., j] = self.amplitudes[j] * s[..., a] * s[..., b]
        return out

    def gradient(self, x):
        x, k, s, c = self._parts(x)
        G = np.zeros(x.shape[:-1] + (3, 3))
        for j, (a, b) in enumerate(self.axes):
            A = self.amplitudes[j]
            G[..., a, j] = A * k * c[..., a] * s[..., b]
            G[..., b, j] = A * k * s[..., a] * c[..., b]
        return G

    def hessian(self, x):
        x, k, s, c = self._parts(x)
        H = np.zeros(x.shape[:-1] + (3, 3, 3))
        for j, (a, b) in enumerate(self.axes):
            A = self.amplitudes[j]
            H[..., j, a, a] = -A * k * k * s[..., a] * s[..., b]
            H[..., j, b, b] = -A * k * k * s[..., a] * s[..., b]
            H[..., j, a, b] = H[..., j, b, a] = A * k * k * c[..., a] * c[..., b]
        return H


CATALOGUE = {
    "affine": AffineSolution,
    "quadratic": QuadraticSolution,
    "sines": SineSolution,
}


def manufactured_solution(name: str) -> ManufacturedSolution:
    try:
        return CATALOGUE[name]()
    except KeyError:
        raise KeyError(f"unknown manufactured solution {name!r}; "
                       f"available: {', '.join(sorted(CATALOGUE))}") from None


def mms_body_force(solution: ManufacturedSolution, material: LinearElasticMaterial,
                   mesh: PolyMesh, geometry: MeshGeometry):
    """Body force at cell centroids and u* on every patch (as face arrays).

    Returns ``(body_force, boundary_conditions)`` with all patches fixed.
    """
    fb = solution.body_force(geometry.cell_centroid, material)
    bcs = BoundaryConditions()
    for p in mesh.patches:
        xf = geometry.face_centroid[p.faces]
        bcs[p.name] = BoundaryCondition(FIXED_DISPLACEMENT, solution.value(xf))
    return fb, bcs


# ---------------------------------------------------------------------------
# Error norms
# ---------------------------------------------------------------------------


@dataclass
class ErrorReport:
    l2: float
    linf: float
    h: float
    order: float | None = None


def error_norms(u_cells, exact_cells, geometry: MeshGeometry) -> ErrorReport:
    """Volume-weighted L2 and max-norm of the pointwise error magnitude."""
    err = np.linalg.norm(np.asarray(u_cells) - np.asarray(exact_cells), axis=-1)
    vol = geometry.cell_volume
    l2 = math.sqrt(float(np.sum(vol * err ** 2) / np.sum(vol)))
    h = float((np.sum(vol) / len(vol)) ** (1.0 / 3.0))
    return ErrorReport(l2=l2, linf=float(err.max(initial=0.0)), h=h)


def solution_error(u_cells, solution: ManufacturedSolution, geometry: MeshGeometry) -> ErrorReport:
    return error_norms(u_cells, solution.value(geometry.cell_centroid), geometry)


def observed_order(reports, norm: str = "l2") -> list[float]:
    """Pairwise orders ln(e_c/e_f)/ln(h_c/h_f) between consecutive reports."""
    if len(reports) < 2:
        raise ValueError("need at least two error reports")
    orders = []
    for coarse, fine in zip(reports, reports[1:]):
        if not fine.h < coarse.h:
            raise ValueError("mesh spacing must decrease strictly")
        ec, ef = getattr(coarse, norm), getattr(fine, norm)
        if ef == 0.0:
            orders.append(math.inf)
        elif ec == 0.0:
            orders.append(-math.inf)
        else:
            orders.append(math.log(ec / ef) / math.log(coarse.h / fine.h))
    return orders


def format_convergence_table(reports, exact_tol: float | None = None) -> str:
    """``h  L2  Linf  order`` table; orders annotate the finer mesh of each pair."""
    lines = ["# h  L2  Linf  order"]
    orders = [None] + observed_order(reports) if len(reports) > 1 else [None]
    for rep, p in zip(reports, orders):
        if exact_tol is not None and rep.l2 <= exact_tol and rep.linf <= exact_tol:
            tag = "exact"
        elif p is None:
            tag = "-"
        else:
            tag = f"{p:.4f}"
        lines.append(f"{rep.h:.5e}  {rep.l2:.5e}  {rep.linf:.5e}  {tag}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Lame thick-walled cylinder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LameProfiles:
    r: np.ndarray
    sigma_rr: np.ndarray
    sigma_tt: np.ndarray
    u_r: np.ndarray


def lame_thick_cylinder(inner_radius, outer_radius, pressure, material: LinearElasticMaterial,
                        r=None) -> LameProfiles | callable:
    """Closed-form plane-strain response of a pressurised thick cylinder.

    With ``r`` given returns profiles at those radii; otherwise returns a
    function of ``r``.
    """
    a, b, p = float(inner_radius), float(outer_radius), float(pressure)
    if not 0 < a < b:
        raise ValueError("need 0 < inner radius < outer radius")
    C = p * a * a / (b * b - a * a)
    D = C * b * b
    mu, lam = material.mu, material.lam

    def profiles(radius):
        radius = np.asarray(radius, dtype=float)
        srr = C - D / radius ** 2
        stt = C + D / radius ** 2
        # u = alpha r + beta / r with sigma_rr = 2(lam+mu) alpha - 2 mu beta / r^2
        ur = C / (2.0 * (lam + mu)) * radius + D / (2.0 * mu) / radius
        return LameProfiles(radius, srr, stt, ur)

    return profiles if r is None else profiles(r)


def quarter_annulus_mesh(inner_radius=1.0, outer_radius=2.0, n_radial=40,
                         n_circumferential=40, thickness=None,
                         midpoints_on_arc=True) -> PolyMesh:
    """One-cell-thick quarter annulus in the first quadrant.

    Patches: inner, outer, y0 (theta = 0 cut, normal -y), x0 (theta = 90 deg
    cut, normal -x), back, front. Faces between nodes are straight chords.
    With ``midpoints_on_arc`` the node rings sit at r / cos(dtheta / 2) so
    that chord midpoints, and hence boundary face centroids, lie on the
    nominal circles; otherwise the nodes themselves lie on the circles.
    """
    if thickness is None:
        thickness = (outer_radius - inner_radius) / n_radial
    r = np.linspace(inner_radius, outer_radius, n_radial + 1)
    if midpoints_on_arc:
        r = r / math.cos(0.25 * math.pi / n_circumferential)
    th = np.linspace(0.0, 0.5 * math.pi, n_circumferential + 1)
    z = np.array([0.0, thickness])
    R, TH, Z = np.meshgrid(r, th, z, indexing="ij")
    grid = np.stack([R * np.cos(TH), R * np.sin(TH), Z], axis=-1)
    return build_structured_hex_mesh(
        grid, patch_names=("inner", "outer", "y0", "x0", "back", "front"))


# ---------------------------------------------------------------------------
# Ready-made cases used by the CLI and the acceptance suite
# ---------------------------------------------------------------------------


def patch_test_case(divisions=(4, 4, 4), perturbation=0.2, seed=0,
                    solution: ManufacturedSolution | None = None):
    """Randomly distorted unit-cube hex mesh with u* Dirichlet data on every patch.

    Interior points move by at most ``perturbation`` times the local spacing in
    each direction. Returns ``(mesh, geometry, bcs, solution)``.
    """
    solution = solution or AffineSolution()
    mesh = build_block_mesh((0, 0, 0), (1, 1, 1), divisions)
    spacing = 1.0 / np.asarray(divisions, dtype=float)
    pts = mesh.points.copy()
    interior = np.all((pts > 1e-12) & (pts < 1 - 1e-12), axis=1)
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-perturbation, perturbation, size=(int(interior.sum()), 3)) * spacing
    pts[interior] += shift
    mesh = PolyMesh(pts, mesh.faces, mesh.owner, mesh.neighbour, mesh.patches, mesh.n_cells)
    geometry = compute_geometry(mesh)
    _, bcs = mms_body_force(solution, LinearElasticMaterial(1.0, 0.3), mesh, geometry)
    return mesh, geometry, bcs, solution


def uniaxial_bar_case(length=10.0, divisions=(20, 2, 2), traction=1.0):
    """Bar on [0, L] x [0, 1] x [0, 1] pulled by a normal traction on +x.

    The three min-planes are symmetry planes, which removes rigid-body modes
    without restraining the Poisson contraction; the remaining faces are
    traction-free.
    """
    mesh = build_block_mesh((0, 0, 0), (length, 1.0, 1.0), divisions)
    bcs = BoundaryConditions(
        minX=BoundaryCondition(SYMMETRY),
        minY=BoundaryCondition(SYMMETRY),
        minZ=BoundaryCondition(SYMMETRY),
        maxX=BoundaryCondition(TRACTION, (traction, 0.0, 0.0)),
        maxY=BoundaryCondition(TRACTION),
        maxZ=BoundaryCondition(TRACTION),
    )
    mesh = bcs.apply_kinds(mesh)
    return mesh, compute_geometry(mesh), bcs


def thick_cylinder_case(inner_radius=1.0, outer_radius=2.0, pressure=1.0,
                        n_radial=40, n_circumferential=40):
    """Quarter annulus with internal pressure; cut planes and z-faces are symmetry planes."""
    mesh = quarter_annulus_mesh(inner_radius, outer_radius, n_radial, n_circumferential)
    geometry = compute_geometry(mesh)
    # Pressure acts against the outward normal of the inner surface.
    pressure_traction = -pressure * geometry.face_normal[mesh.patch("inner").faces]
    bcs = BoundaryConditions(
        inner=BoundaryCondition(TRACTION, pressure_traction),
        outer=BoundaryCondition(TRACTION),
        y0=BoundaryCondition(SYMMETRY),
        x0=BoundaryCondition(SYMMETRY),
        back=BoundaryCondition(SYMMETRY),
        front=BoundaryCondition(SYMMETRY),
    )
    mesh = bcs.apply_kinds(mesh)
    return mesh, compute_geometry(mesh), bcs


def run_mms_study(name: str, sizes, material: LinearElasticMaterial | None = None,
                  controls=None) -> list[ErrorReport]:
    """Solve the named manufactured problem on unit-cube meshes of ``n^3`` cells.

    The default outer tolerance is tight (1e-10) so that iteration error
    stays well below discretisation error on the finest mesh.
    """
    from .solver import SolverControls, run_case

    solution = manufactured_solution(name)
    material = material or LinearElasticMaterial(1.0, 0.3)
    controls = controls or SolverControls(outer_tolerance=1e-10)
    reports = []
    for n in sizes:
        mesh = build_block_mesh((0, 0, 0), (1, 1, 1), (n, n, n))
        geometry = compute_geometry(mesh)
        body_force, bcs = mms_body_force(solution, material, mesh, geometry)
        result = run_case(mesh, geometry, material, bcs, controls, body_force=body_force)
        reports.append(solution_error(result.u.cell_values, solution, geometry))
    orders = observed_order(reports) if len(reports) > 1 else []
    for rep, p in zip(reports[1:], orders):
        rep.order = p
    return reports


def polar_stresses(points, sigma):
    """Radial and hoop components of ``sigma`` about the z axis at ``points``."""
    theta = np.arctan2(points[:, 1], points[:, 0])
    c, s = np.cos(theta), np.sin(theta)
    zero = np.zeros_like(c)
    e_r = np.stack([c, s, zero], axis=1)
    e_t = np.stack([-s, c, zero], axis=1)
    srr = np.einsum("ci,cij,cj->c", e_r, sigma, e_r)
    stt = np.einsum("ci,cij,cj->c", e_t, sigma, e_t)
    return srr, stt


def patch_face_values(mesh: PolyMesh, geometry: MeshGeometry, name: str, values):
    """Face centroids of patch ``name`` and the matching rows of a boundary-face array."""
    patch = mesh.patch(name)
    return geometry.face_centroid[patch.faces], np.asarray(values)[mesh.boundary_slice(patch)]


def manufactured_bar_case(length=10.0, divisions=(10, 1, 1), strain_rate=1e-3,
                          material: LinearElasticMaterial | None = None):
    """Bar of the uniaxial case driven by u* = (c x^2, 0, 0).

    Symmetry planes at the min faces are satisfied exactly by u*; the max
    faces carry the tractions of u* and the body force balances div sigma.
    Returns ``(mesh, geometry, bcs, body_force, solution)``.
    """
    material = material or LinearElasticMaterial(1.0, 0.3)
    hess = np.zeros((3, 3, 3))
    hess[0, 0, 0] = 2.0 * strain_rate
    solution = QuadraticSolution(hessians=hess, linear=np.zeros((3, 3)), name="bar")
    mesh, geometry, _ = uniaxial_bar_case(length, divisions)
    bcs = BoundaryConditions(minX=BoundaryCondition(SYMMETRY), minY=BoundaryCondition(SYMMETRY),
                             minZ=BoundaryCondition(SYMMETRY))
    for name in ("maxX", "maxY", "maxZ"):
        faces = mesh.patch(name).faces
        x, S = geometry.face_centroid[faces], geometry.face_normal[faces]
        traction = np.einsum("fi,fij->fj", S, solution.stress(x, material))
        bcs[name] = BoundaryCondition(TRACTION, traction)
    body_force = solution.body_force(geometry.cell_centroid, material)
    return mesh, geometry, bcs, body_force, solution


def wave_bar_case(n_cells=100, length=1.0, wave_speed=1.0, density=1.0, poisson_ratio=0.3):
    """Bar fixed at both ends with symmetry side faces (laterally confined).

    Lame parameters are chosen so that sqrt((2 mu + lambda) / rho) equals
    ``wave_speed``. Returns ``(mesh, geometry, bcs, material)``.
    """
    h = length / n_cells
    longitudinal = density * wave_speed ** 2
    nu = poisson_ratio
    E = longitudinal * (1 + nu) * (1 - 2 * nu) / (1 - nu)
    material = LinearElasticMaterial(E, nu, density)
    mesh = build_block_mesh((0, 0, 0), (length, h, h), (n_cells, 1, 1))
    bcs = BoundaryConditions(
        minX=BoundaryCondition(FIXED_DISPLACEMENT), maxX=BoundaryCondition(FIXED_DISPLACEMENT),
        minY=BoundaryCondition(SYMMETRY), maxY=BoundaryCondition(SYMMETRY),
        minZ=BoundaryCondition(SYMMETRY), maxZ=BoundaryCondition(SYMMETRY),
    )
    mesh = bcs.apply_kinds(mesh)
    return mesh, compute_geometry(mesh), bcs, material


@dataclass
class WaveMeasurement:
    speed: float
    expected_speed: float
    arrival_times: tuple[float, float]
    probes: tuple[float, float]
    steps: int
    dt: float

    @property
    def relative_error(self) -> float:
        return abs(self.speed / self.expected_speed - 1.0)


def measure_wave_speed(n_cells=100, steps_per_cell=5, centre=0.3, width=0.05,
                       probes=(0.5, 0.8), amplitude=1e-3, controls=None) -> WaveMeasurement:
    """Release a Gaussian displacement pulse at rest and time its right-going front.

    The front reaches a probe when the probe cell's displacement first climbs
    to half the largest value it attains; the speed is the probe spacing over
    the difference of the two arrival times.
    """
    from .solver import SolverControls, TimeControls, run_case

    mesh, geometry, bcs, material = wave_bar_case(n_cells)
    c = material.wave_speed
    h = 1.0 / n_cells
    dt = h / (steps_per_cell * c)
    x = geometry.cell_centroid[:, 0]
    u0 = np.zeros((mesh.n_cells, 3))
    u0[:, 0] = amplitude * np.exp(-0.5 * ((x - centre) / width) ** 2)
    initial = initialise_field(mesh, u0, bcs)
    # Stop before the reflected left-going pulse returns to the first probe.
    end_time = (probes[1] - centre) / c + 4 * width / c
    history = []

    def record(step, time, u, grads):
        history.append((time, u.cell_values[:, 0].copy()))

    run_case(mesh, geometry, material, bcs, controls or SolverControls(outer_tolerance=1e-8),
             TimeControls(steady=False, dt=dt, end_time=end_time, write_interval=1),
             initial_field=initial, writer=record)
    times = np.array([t for t, _ in history])
    values = np.array([v for _, v in history])

    def arrival(xp):
        k = int(np.argmin(np.abs(x - xp)))
        s = values[:, k]
        half = 0.5 * s.max()
        i = int(np.argmax(s >= half))
        if i == 0:
            return float(times[0])
        t0, t1, s0, s1 = times[i - 1], times[i], s[i - 1], s[i]
        return float(t0 + (half - s0) / (s1 - s0) * (t1 - t0)), float(x[k])

    (t1, x1), (t2, x2) = arrival(probes[0]), arrival(probes[1])
    return WaveMeasurement((x2 - x1) / (t2 - t1), c, (t1, t2), (x1, x2), len(history), dt)
