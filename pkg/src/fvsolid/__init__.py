"""Cell-centred finite volume solver for small-strain linear elasticity."""

from .fields import (
    BoundaryCondition,
    BoundaryConditions,
    TimeState,
    VectorField,
    advance_time,
    initialise_field,
)
from .material import LinearElasticMaterial, derived_moduli, stress_from_gradient
from .mesh import (
    FIXED_DISPLACEMENT,
    SYMMETRY,
    TRACTION,
    PolyMesh,
    build_block_mesh,
    compute_geometry,
    read_mesh,
    validate_mesh,
    write_mesh,
)
from .solver import SolverControls, TimeControls, run_case, solve_time_step

__version__ = "0.1.0"
