import io

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from fvsolid.fields import BoundaryCondition, BoundaryConditions, initialise_field
from fvsolid.linsolve import JACOBI
from fvsolid.material import LinearElasticMaterial, stress_from_gradient
from fvsolid.mesh import build_block_mesh, compute_geometry
from fvsolid.solver import (
    LOG_HEADER, RunFailedError, SolverControls, StepFailedError, TimeControls, run_case,
    solve_time_step,
)
from fvsolid.verify import (
    manufactured_bar_case, patch_test_case, solution_error, uniaxial_bar_case,
)

PATCHES = ("minX", "maxX", "minY", "maxY", "minZ", "maxZ")


def run_bar(divisions=(10, 1, 1), E=1.0, traction=1.0, tol=1e-8, **kw):
    mesh, geom, bcs = uniaxial_bar_case(10.0, divisions, traction)
    mat = LinearElasticMaterial(E, 0.3)
    log = io.StringIO()
    result = run_case(mesh, geom, mat, bcs, SolverControls(outer_tolerance=tol, **kw),
                      residual_log=log)
    return mesh, geom, mat, result, log.getvalue()


def test_zero_problem_converges_immediately():
    mesh = build_block_mesh((0, 0, 0), (1, 1, 1), (2, 2, 2))
    bcs = BoundaryConditions({p: BoundaryCondition("fixedDisplacement") for p in PATCHES})
    geom = compute_geometry(mesh)
    result = run_case(mesh, geom, LinearElasticMaterial(1.0, 0.3), bcs)
    assert len(result.record.iterations) == 1
    assert_array_equal(result.u.cell_values, 0.0)


def test_affine_patch_small_mesh():
    mesh, geom, bcs, sol = patch_test_case((3, 3, 3), 0.2, seed=5)
    result = run_case(mesh, geom, LinearElasticMaterial(1.0, 0.3), bcs,
                      SolverControls(outer_tolerance=1e-12))
    exact = sol.value(geom.cell_centroid)
    err = np.abs(result.u.cell_values - exact).max() / np.abs(exact).max()
    assert err <= 1e-9


@pytest.mark.parametrize("preconditioner", [JACOBI, "incompleteCholesky"])
def test_uniaxial_bar_coarse(preconditioner):
    mesh, geom, mat, result, _ = run_bar(preconditioner=preconditioner)
    sigma = stress_from_gradient(result.cell_grads, mat)
    assert_allclose(sigma[:, 0, 0], 1.0, rtol=5e-3)
    end = mesh.boundary_slice(mesh.patch("maxX"))
    assert_allclose(result.u.patch_values[end, 0].mean(), 10.0, rtol=5e-3)


def test_bar_error_decreases_with_refinement():
    errors = []
    for divisions in [(10, 1, 1), (20, 2, 2)]:
        mesh, geom, bcs, fb, sol = manufactured_bar_case(divisions=divisions)
        result = run_case(mesh, geom, LinearElasticMaterial(1.0, 0.3), bcs,
                          SolverControls(outer_tolerance=1e-10), body_force=fb)
        errors.append(solution_error(result.u.cell_values, sol, geom).l2)
    assert errors[1] < errors[0]


def test_global_equilibrium_with_body_force():
    mesh, geom, bcs, fb, _ = manufactured_bar_case(divisions=(20, 2, 2))
    mat = LinearElasticMaterial(1.0, 0.3, density=2.0)
    tol = 1e-9
    result = run_case(mesh, geom, mat, bcs, SolverControls(outer_tolerance=tol),
                      body_force=fb / 2.0)
    force = result.last_step.boundary.force
    body = (mat.density * fb / 2.0 * geom.cell_volume[:, None]).sum(axis=0)
    imbalance = np.abs(force.sum(axis=0) + body).max()
    system = result.last_step.system
    scale = (np.abs(system.diag) * np.abs(result.last_step.u.cell_values)
             + np.abs(system.rhs)).sum()
    assert imbalance <= tol * scale
    assert imbalance <= 1e-6 * np.abs(force).sum()


def test_residual_scale_invariance():
    *_, a, log_a = run_bar(E=1.0, traction=1.0)
    *_, b, log_b = run_bar(E=1000.0, traction=1000.0)
    ra = np.array([r.residual for r in a.record.iterations])
    rb = np.array([r.residual for r in b.record.iterations])
    assert ra.shape == rb.shape
    assert_allclose(rb, ra, rtol=1e-8, atol=1e-14)
    assert_allclose(b.u.cell_values, a.u.cell_values, rtol=1e-9, atol=1e-12)
    # A power-of-two factor is exact in floating point.
    *_, c, log_c = run_bar(E=1024.0, traction=1024.0)
    assert log_c == log_a


def test_relaxation_neutral_at_convergence():
    mesh, geom, bcs = uniaxial_bar_case(10.0, (10, 1, 1))
    mat = LinearElasticMaterial(1.0, 0.3)
    converged = run_case(mesh, geom, mat, bcs, SolverControls(outer_tolerance=1e-13))
    controls = SolverControls(outer_tolerance=1e-300, max_outer_iterations=1,
                              relaxation_factor=1.0, inner_rel_tol=1e-12)
    with pytest.raises(StepFailedError) as info:
        solve_time_step(converged.u, mat, mesh, geom, bcs, controls=controls)
    moved = info.value.u.cell_values - converged.u.cell_values
    assert np.abs(moved).max() <= 1e-9 * np.abs(converged.u.cell_values).max()


def test_determinism():
    *_, a, log_a = run_bar()
    *_, b, log_b = run_bar()
    assert log_a == log_b
    assert_array_equal(a.u.cell_values, b.u.cell_values)


def test_residual_log_format():
    *_, result, log = run_bar()
    lines = log.splitlines()
    assert lines[0] == LOG_HEADER
    assert len(lines) == 1 + len(result.record.iterations)
    for line, rec in zip(lines[1:], result.record.iterations):
        fields = line.split()
        assert len(fields) == 8
        assert int(fields[0]) == 1 and int(fields[1]) == rec.outer_iteration
        for text in fields[2:5]:
            mantissa = text.split("e")[0].lstrip("-")
            assert len(mantissa.replace(".", "")) == 6
    # Residuals are recorded before each solve; the last line has no inner work.
    assert lines[-1].split()[5:] == ["0", "0", "0"]


def test_failed_step_raises():
    mesh, geom, bcs = uniaxial_bar_case(10.0, (10, 1, 1))
    with pytest.raises(RunFailedError) as info:
        run_case(mesh, geom, LinearElasticMaterial(1.0, 0.3), bcs,
                 SolverControls(max_outer_iterations=3))
    assert len(info.value.record.iterations) == 3
    assert info.value.partial is None


@pytest.mark.parametrize("interval, expected", [(2, [2, 4, 6, 8, 10]), (3, [3, 6, 9, 10])])
def test_dynamic_write_schedule(interval, expected):
    mesh = build_block_mesh((0, 0, 0), (1, 0.1, 0.1), (5, 1, 1))
    bcs = BoundaryConditions({p: BoundaryCondition("symmetry") for p in PATCHES})
    bcs["minX"] = BoundaryCondition("fixedDisplacement")
    bcs["maxX"] = BoundaryCondition("fixedDisplacement")
    mesh = bcs.apply_kinds(mesh)
    geom = compute_geometry(mesh)
    writes = []
    result = run_case(mesh, geom, LinearElasticMaterial(1.0, 0.3), bcs,
                      time_controls=TimeControls(steady=False, dt=0.01, end_time=0.1,
                                                 write_interval=interval),
                      writer=lambda step, t, u, g: writes.append((step, round(t, 12))))
    assert [s for s, _ in writes] == expected == result.written_steps
    assert_allclose([t for _, t in writes], np.array(expected) * 0.01)
    assert result.time_state.step_index == 10
    assert len(result.record.outer_iterations_per_step) == 10


def test_dynamic_rest_state_stays_at_rest():
    mesh = build_block_mesh((0, 0, 0), (1, 0.1, 0.1), (5, 1, 1))
    bcs = BoundaryConditions({p: BoundaryCondition("traction") for p in PATCHES})
    mesh = bcs.apply_kinds(mesh)
    geom = compute_geometry(mesh)
    u0 = initialise_field(mesh, (0.1, 0.0, 0.0), bcs)
    result = run_case(mesh, geom, LinearElasticMaterial(1.0, 0.3), bcs,
                      time_controls=TimeControls(steady=False, dt=0.01, end_time=0.05),
                      initial_field=u0)
    # Free rigid translation with zero velocity is an equilibrium.
    assert_allclose(result.u.cell_values, np.tile([0.1, 0.0, 0.0], (5, 1)), atol=1e-12)


@pytest.mark.parametrize("kwargs", [
    {"relaxation_factor": 0.0}, {"relaxation_factor": 1.5}, {"outer_tolerance": 0.0},
    {"max_outer_iterations": 0}, {"preconditioner": "ilu"}, {"gradient_weighting": "cubic"},
])
def test_controls_validation(kwargs):
    with pytest.raises(ValueError):
        SolverControls(**kwargs)
