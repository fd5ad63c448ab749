"""Segregated solution algorithm.

Each outer (Picard) iteration refreshes boundary values and gradients from the
latest displacement, reassembles the source terms, solves the three scalar
component systems with preconditioned CG to a loose tolerance and
under-relaxes the displacement. Outer iterations stop when the normalised
residual of every component is below the outer tolerance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .discretisation import (
    INVERSE_DISTANCE,
    WEIGHTINGS,
    BoundaryContribution,
    MomentumSystem,
    assemble_momentum,
    least_squares_gradient,
    update_boundary_values,
)
from .fields import BoundaryConditions, TimeState, VectorField, advance_time, initialise_field
from .linsolve import INCOMPLETE_CHOLESKY, PRECONDITIONERS, cg_solve, make_preconditioner
from .material import LinearElasticMaterial
from .mesh import MeshGeometry, PolyMesh

log = logging.getLogger(__name__)

LOG_HEADER = "# step  outerIter  resX  resY  resZ  innerItersX  innerItersY  innerItersZ"


@dataclass
class SolverControls:
    outer_tolerance: float = 1e-6
    max_outer_iterations: int = 1000
    inner_rel_tol: float = 0.1
    inner_max_iter: int = 1000
    relaxation_factor: float = 0.95
    preconditioner: str = INCOMPLETE_CHOLESKY
    gradient_weighting: str = INVERSE_DISTANCE

    def __post_init__(self):
        if not 0.0 < self.relaxation_factor <= 1.0:
            raise ValueError(f"relaxation factor must lie in (0, 1], got {self.relaxation_factor}")
        for name in ("outer_tolerance", "inner_rel_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer_iterations < 1 or self.inner_max_iter < 1:
            raise ValueError("iteration limits must be at least 1")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.gradient_weighting not in WEIGHTINGS:
            raise ValueError(f"unknown gradient weighting {self.gradient_weighting!r}")


@dataclass
class IterationRecord:
    step: int
    outer_iteration: int
    residual: tuple[float, float, float]
    inner_iterations: tuple[int, int, int]

    def log_line(self) -> str:
        res = "  ".join(f"{r:.5e}" for r in self.residual)
        inner = "  ".join(str(i) for i in self.inner_iterations)
        return f"{self.step}  {self.outer_iteration}  {res}  {inner}"


@dataclass
class ConvergenceRecord:
    iterations: list[IterationRecord] = field(default_factory=list)
    outer_iterations_per_step: list[int] = field(default_factory=list)

    def extend(self, other: "ConvergenceRecord") -> None:
        self.iterations.extend(other.iterations)
        self.outer_iterations_per_step.extend(other.outer_iterations_per_step)

    @property
    def final_residual(self):
        return self.iterations[-1].residual if self.iterations else (0.0, 0.0, 0.0)


class StepFailedError(RuntimeError):
    """Outer iterations exhausted; ``u`` holds the last (unconverged) iterate."""

    def __init__(self, message, record: ConvergenceRecord, u: VectorField | None = None):
        super().__init__(message)
        self.record = record
        self.u = u


@dataclass
class StepResult:
    u: VectorField
    cell_grads: np.ndarray
    system: MomentumSystem
    boundary: BoundaryContribution
    record: ConvergenceRecord


def solve_time_step(u: VectorField, material: LinearElasticMaterial, mesh: PolyMesh,
                    geometry: MeshGeometry, bcs: BoundaryConditions, body_force=None,
                    time_state: TimeState | None = None,
                    controls: SolverControls | None = None,
                    residual_log: TextIO | None = None) -> StepResult:
    """Converge the displacement of one time step (or the steady problem).

    ``u`` is not modified; the converged field is returned in the result.
    Raises StepFailedError if the outer tolerance is not met.
    """
    time_state = time_state or TimeState()
    controls = controls or SolverControls()
    step = time_state.step_index + 1
    alpha = controls.relaxation_factor
    u = u.copy()
    record = ConvergenceRecord()

    # Start from the incoming boundary values so that a converged state is a
    # fixed point of the iteration.
    grads = least_squares_gradient(u, mesh, geometry, controls.gradient_weighting)

    preconditioners = None
    for it in range(1, controls.max_outer_iterations + 1):
        update_boundary_values(u, grads, mesh, geometry, bcs)
        grads = least_squares_gradient(u, mesh, geometry, controls.gradient_weighting)
        system, boundary, grads, _ = assemble_momentum(
            u, material, mesh, geometry, bcs, body_force, time_state, cell_grads=grads)
        residual = system.normalised_residual(u.cell_values)
        if np.all(residual <= controls.outer_tolerance):
            rec = IterationRecord(step, it, tuple(map(float, residual)), (0, 0, 0))
            record.iterations.append(rec)
            if residual_log is not None:
                residual_log.write(rec.log_line() + "\n")
                residual_log.flush()
            record.outer_iterations_per_step.append(it)
            log.info("step %d converged in %d outer iterations", step, it)
            return StepResult(u, grads, system, boundary, record)

        if preconditioners is None:
            # The matrix depends only on geometry, material and dt.
            matrices = [system.matrix(c) for c in range(3)]
            preconditioners = [make_preconditioner(A, controls.preconditioner) for A in matrices]
        inner = []
        new = u.cell_values.copy()
        for c in range(3):
            x, stats = cg_solve(matrices[c], system.rhs[:, c], u.cell_values[:, c],
                                controls.inner_rel_tol, controls.inner_max_iter,
                                preconditioners[c])
            new[:, c] = x
            inner.append(stats.iterations)
        u.cell_values = u.cell_values + alpha * (new - u.cell_values)

        rec = IterationRecord(step, it, tuple(map(float, residual)), tuple(inner))
        record.iterations.append(rec)
        if residual_log is not None:
            residual_log.write(rec.log_line() + "\n")
            residual_log.flush()
        log.debug("step %d outer %d residual %s inner %s", step, it,
                  " ".join(f"{r:.3e}" for r in residual), inner)
        if not np.all(np.isfinite(u.cell_values)):
            break

    record.outer_iterations_per_step.append(controls.max_outer_iterations)
    raise StepFailedError(
        f"step {step} did not converge in {controls.max_outer_iterations} outer iterations "
        f"(residual {' '.join(f'{r:.3e}' for r in record.final_residual)})", record, u)


@dataclass
class TimeControls:
    steady: bool = True
    dt: float = 1.0
    end_time: float = 1.0
    write_interval: int = 1

    def __post_init__(self):
        if not self.steady:
            if not self.dt > 0 or not self.end_time > 0:
                raise ValueError("dynamic runs need positive dt and endTime")
        if self.write_interval < 1:
            raise ValueError("writeInterval must be at least 1")

    @property
    def n_steps(self) -> int:
        if self.steady:
            return 1
        return max(1, int(math.floor(self.end_time / self.dt + 0.5)))


@dataclass
class RunResult:
    u: VectorField
    cell_grads: np.ndarray
    time_state: TimeState
    record: ConvergenceRecord
    written_steps: list[int]
    last_step: StepResult


Writer = Callable[[int, float, VectorField, np.ndarray], None]


class RunFailedError(RuntimeError):
    def __init__(self, message, partial: RunResult | None, record: ConvergenceRecord):
        super().__init__(message)
        self.partial = partial
        self.record = record


def run_case(mesh: PolyMesh, geometry: MeshGeometry, material: LinearElasticMaterial,
             bcs: BoundaryConditions, controls: SolverControls | None = None,
             time_controls: TimeControls | None = None, body_force=None,
             initial_field: VectorField | None = None, writer: Writer | None = None,
             residual_log: TextIO | None = None) -> RunResult:
    """Steady: one step with inertia off. Dynamic: march to endTime.

    ``writer(step, time, u, cell_grads)`` is called every ``write_interval``
    steps and after the final step.
    """
    controls = controls or SolverControls()
    time_controls = time_controls or TimeControls()
    bcs.check(mesh)
    u = initial_field if initial_field is not None else initialise_field(mesh, bcs=bcs)
    state = TimeState(dt=time_controls.dt, steady=time_controls.steady)
    record = ConvergenceRecord()
    written: list[int] = []
    if residual_log is not None:
        residual_log.write(LOG_HEADER + "\n")
    n_steps = time_controls.n_steps
    result = None
    for _ in range(n_steps):
        try:
            result = solve_time_step(u, material, mesh, geometry, bcs, body_force, state,
                                     controls, residual_log)
        except StepFailedError as exc:
            record.extend(exc.record)
            partial = None
            if result is not None:
                partial = RunResult(u, result.cell_grads, state, record, written, result)
            raise RunFailedError(str(exc), partial, record) from exc
        record.extend(result.record)
        u, state = advance_time(result.u, state)
        if writer is not None and (state.step_index % time_controls.write_interval == 0
                                   or state.step_index == n_steps):
            writer(state.step_index, state.current_time, u, result.cell_grads)
            written.append(state.step_index)
    return RunResult(u, result.cell_grads, state, record, written, result)
