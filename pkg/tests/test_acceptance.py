"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into the terminal summary.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fvsolid.cli import main
from fvsolid.discretisation import (
    addressing, face_traction_force, interpolate_face_gradient, neighbour_coefficient_sum,
    stabilization_face_force,
)
from fvsolid.linsolve import INCOMPLETE_CHOLESKY, JACOBI, SparseSymmetricMatrix, cg_solve
from fvsolid.material import LinearElasticMaterial, stress_from_gradient
from fvsolid.mesh import build_block_mesh, compute_geometry
from fvsolid.solver import SolverControls, run_case
from fvsolid.verify import (
    lame_thick_cylinder, manufactured_solution, measure_wave_speed, mms_body_force,
    observed_order, patch_face_values, patch_test_case, polar_stresses, solution_error,
    thick_cylinder_case, uniaxial_bar_case,
)

MATERIAL = LinearElasticMaterial(1.0, 0.3)


def report(number, title, ok, detail):
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print("\n" + line)
    assert ok, line


class Case:
    """Converged steady case with what the property criteria need."""

    def __init__(self, name, mesh, geometry, bcs, controls, body_force=None, material=MATERIAL):
        self.name, self.mesh, self.geometry, self.material = name, mesh, geometry, material
        self.body_force = body_force
        start = time.perf_counter()
        self.result = run_case(mesh, geometry, material, bcs, controls, body_force=body_force)
        self.seconds = time.perf_counter() - start

    @property
    def system(self):
        return self.result.last_step.system


@pytest.fixture(scope="module")
def patch_case():
    start = time.perf_counter()
    mesh, geom, bcs, sol = patch_test_case((4, 4, 4), perturbation=0.2, seed=0)
    case = Case("patch", mesh, geom, bcs, SolverControls(outer_tolerance=1e-12))
    case.seconds = time.perf_counter() - start
    case.solution = sol
    return case


@pytest.fixture(scope="module")
def mms_cases():
    start = time.perf_counter()
    sol = manufactured_solution("quadratic")
    cases = []
    for n in (8, 16, 32):
        mesh = build_block_mesh((0, 0, 0), (1, 1, 1), (n, n, n))
        geom = compute_geometry(mesh)
        fb, bcs = mms_body_force(sol, MATERIAL, mesh, geom)
        case = Case(f"mms{n}", mesh, geom, bcs, SolverControls(outer_tolerance=1e-10), fb)
        case.error = solution_error(case.result.u.cell_values, sol, geom)
        cases.append(case)
    cases[0].total_seconds = time.perf_counter() - start
    return cases


@pytest.fixture(scope="module")
def bar_case():
    start = time.perf_counter()
    mesh, geom, bcs = uniaxial_bar_case(10.0, (20, 2, 2), traction=1.0)
    case = Case("bar", mesh, geom, bcs, SolverControls(outer_tolerance=1e-10))
    case.seconds = time.perf_counter() - start
    return case


@pytest.fixture(scope="module")
def cylinder_case():
    start = time.perf_counter()
    mesh, geom, bcs = thick_cylinder_case(1.0, 2.0, 1.0, 40, 40)
    case = Case("cylinder", mesh, geom, bcs, SolverControls(outer_tolerance=1e-10))
    case.seconds = time.perf_counter() - start
    return case


@pytest.fixture(scope="module")
def steady_cases(patch_case, mms_cases, bar_case, cylinder_case):
    return [patch_case, *mms_cases, bar_case, cylinder_case]


def test_criterion_1_linear_patch_test(patch_case):
    exact = patch_case.solution.value(patch_case.geometry.cell_centroid)
    err = np.abs(patch_case.result.u.cell_values - exact).max() / np.abs(exact).max()
    ok = err <= 1e-8 and patch_case.seconds < 10
    report(1, "linear patch test (4x4x4, 20% distortion)", ok,
           f"relative Linf {err:.2e} (<= 1e-8), {patch_case.seconds:.1f} s (< 10 s)")


def test_criterion_2_mms_order(mms_cases):
    reports = [c.error for c in mms_cases]
    orders = observed_order(reports, "l2")
    seconds = mms_cases[0].total_seconds
    ok = all(1.9 <= p <= 2.2 for p in orders) and seconds < 300
    report(2, "quadratic MMS order (8/16/32)", ok,
           f"L2 errors {', '.join(f'{r.l2:.3e}' for r in reports)}; orders "
           f"{', '.join(f'{p:.3f}' for p in orders)} (in [1.9, 2.2]), {seconds:.0f} s (< 300 s)")


def test_criterion_3_uniaxial_bar(bar_case):
    sigma = stress_from_gradient(bar_case.result.cell_grads, MATERIAL)
    stress_err = np.abs(sigma[:, 0, 0] - 1.0).max()
    mesh = bar_case.mesh
    end = bar_case.result.u.patch_values[mesh.boundary_slice(mesh.patch("maxX")), 0]
    tip = 1.0 * 10.0 / MATERIAL.youngs_modulus
    disp_err = np.abs(end / tip - 1.0).max()
    ok = stress_err <= 5e-3 and disp_err <= 5e-3 and bar_case.seconds < 30
    report(3, "uniaxial bar (20x2x2, nu = 0.3)", ok,
           f"max |sxx/T - 1| {stress_err:.2e}, max |u_x(L)/(TL/E) - 1| {disp_err:.2e} "
           f"(<= 5e-3), {bar_case.seconds:.1f} s (< 30 s)")


def test_criterion_4_thick_cylinder(cylinder_case):
    mesh, geom = cylinder_case.mesh, cylinder_case.geometry
    x = geom.cell_centroid
    radius = np.linalg.norm(x[:, :2], axis=1)
    exact = lame_thick_cylinder(1.0, 2.0, 1.0, MATERIAL, radius)
    srr, stt = polar_stresses(x, stress_from_gradient(cylinder_case.result.cell_grads, MATERIAL))
    cells = np.arange(mesh.n_cells)
    i, j = cells % 40, (cells // 40) % 40  # radial and circumferential indices
    core = (i >= 2) & (i <= 37) & (j >= 2) & (j <= 37)
    err_rr = (np.abs(srr - exact.sigma_rr) / np.abs(exact.sigma_rr))[core].max()
    err_tt = (np.abs(stt - exact.sigma_tt) / np.abs(exact.sigma_tt))[core].max()
    xf, ub = patch_face_values(mesh, geom, "inner", cylinder_case.result.u.patch_values)
    rf = np.linalg.norm(xf[:, :2], axis=1)
    ur = np.einsum("fi,fi->f", ub[:, :2], xf[:, :2] / rf[:, None])
    err_u = np.abs(ur / lame_thick_cylinder(1.0, 2.0, 1.0, MATERIAL, rf).u_r - 1.0).max()
    ok = max(err_rr, err_tt, err_u) <= 0.02 and cylinder_case.seconds < 120
    report(4, "Lame thick cylinder (40x40x1)", ok,
           f"core max rel error srr {err_rr:.2%}, stt {err_tt:.2%}; u_r(a) {err_u:.2%} "
           f"(<= 2%), {cylinder_case.seconds:.1f} s (< 120 s)")


def test_criterion_5_matrix_properties(steady_cases):
    failures = []
    for case in steady_cases:
        system, mesh = case.system, case.mesh
        ni = mesh.n_internal_faces
        held = np.zeros((mesh.n_cells, 3))
        np.add.at(held, mesh.owner[ni:], case.result.last_step.boundary.implicit_coeffs)
        row_sum = neighbour_coefficient_sum(system.off_diag, mesh)
        constrained = held.sum(axis=1) > 0
        if not np.all(system.off_diag > 0):
            failures.append(f"{case.name}: a_N <= 0")
        for c in range(3):
            A = system.matrix(c).to_csr()
            if (A != A.T).nnz:
                failures.append(f"{case.name}/{c}: not symmetric")
            if not np.all(system.diag[:, c] >= row_sum):
                failures.append(f"{case.name}/{c}: not diagonally dominant")
        margin = (system.diag - row_sum[:, None]).sum(axis=1)
        if not np.all(margin[constrained] > 0):
            failures.append(f"{case.name}: constrained row without strict dominance")
    ok = not failures
    report(5, "matrix properties", ok,
           f"{len(steady_cases)} systems x 3 components: symmetry, a_N > 0, dominance"
           + ("" if ok else f"; {'; '.join(failures)}"))


def test_criterion_6_conservation(steady_cases):
    worst_pair, worst_balance, details = 0.0, 0.0, []
    for case in steady_cases:
        mesh, geom, mat = case.mesh, case.geometry, case.material
        ni = mesh.n_internal_faces
        step = case.result.last_step
        face_grads = interpolate_face_gradient(step.cell_grads, mesh, geom)
        per_face = (face_traction_force(geom.face_area[:ni], face_grads, mat)
                    + stabilization_face_force(step.u, face_grads, mat, mesh, geom))
        # Owner gains minus neighbour losses summed over all cells.
        net = addressing(mesh, geom).antisymmetric(per_face).sum(axis=0)
        pair = np.abs(net).max() / np.abs(per_face).sum()
        force = step.boundary.force
        body = np.zeros(3)
        if case.body_force is not None:
            body = (mat.density * case.body_force * geom.cell_volume[:, None]).sum(axis=0)
        balance = np.abs(force.sum(axis=0) + body).max() / np.abs(force).sum()
        worst_pair, worst_balance = max(worst_pair, pair), max(worst_balance, balance)
        details.append(f"{case.name} {balance:.1e}")
    ok = worst_pair <= 1e-13 and worst_balance <= 1e-6
    report(6, "conservation", ok,
           f"pairwise cancellation {worst_pair:.1e} (round-off, <= 1e-13); global balance "
           f"{worst_balance:.1e} (<= 1e-6) [{', '.join(details)}]")


def test_criterion_7_wave_speed():
    start = time.perf_counter()
    wave = measure_wave_speed(n_cells=100, steps_per_cell=5)
    seconds = time.perf_counter() - start
    cells_per_step = wave.expected_speed * wave.dt * 100
    ok = wave.relative_error <= 0.05 and cells_per_step <= 0.2 and seconds < 60
    report(7, "longitudinal wave speed (100 cells)", ok,
           f"front speed {wave.speed:.4f} vs {wave.expected_speed:.4f} "
           f"({wave.relative_error:.2%}, <= 5%), {1 / cells_per_step:.1f} steps per cell (>= 5), "
           f"{seconds:.1f} s (< 60 s)")


def test_criterion_8_cg_oracle():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 51))
        A = np.zeros((n, n))
        mask = np.triu(rng.random((n, n)) < 0.3, 1)
        A[mask] = rng.uniform(-1, 1, mask.sum())
        A = A + A.T
        A[np.diag_indices(n)] = np.abs(A).sum(axis=1) + rng.uniform(0.1, 2.0, n)
        b = rng.normal(size=n)
        ref = np.linalg.solve(A, b)
        S = SparseSymmetricMatrix.from_dense(A)
        for kind in (JACOBI, INCOMPLETE_CHOLESKY):
            x, _ = cg_solve(S, b, rel_tol=1e-14, max_iter=10 * n, precond=kind)
            worst = max(worst, np.linalg.norm(x - ref) / np.linalg.norm(ref))
    seconds = time.perf_counter() - start
    ok = worst <= 1e-9 and seconds < 10
    report(8, "CG vs dense oracle (50 systems, both preconditioners)", ok,
           f"worst relative error {worst:.1e} (<= 1e-9), {seconds:.2f} s (< 10 s)")


BAR_CONFIG = """\
material.E = 1.0
material.nu = 0.3
solver.outerTolerance = 1e-10
mesh.extent = 10 1 1
mesh.divisions = 20 2 2
boundaries.minX.kind = symmetry
boundaries.minY.kind = symmetry
boundaries.minZ.kind = symmetry
boundaries.maxX.kind = traction
boundaries.maxX.value = 1 0 0
boundaries.maxY.kind = traction
boundaries.maxZ.kind = traction
"""


def test_criterion_9_determinism(tmp_path):
    outputs = []
    for k in range(2):
        case = tmp_path / f"run{k}"
        case.mkdir()
        (case / "case.cfg").write_text(BAR_CONFIG)
        assert main(["run", str(case)]) == 0
        results = case / "results"
        outputs.append({p.name: p.read_bytes() for p in sorted(results.iterdir())})
    same = outputs[0].keys() == outputs[1].keys() and all(
        outputs[0][name] == outputs[1][name] for name in outputs[0])
    report(9, "determinism (criterion 3 case, two CLI runs)", same,
           f"files {', '.join(outputs[0])} byte-identical: {same}")
