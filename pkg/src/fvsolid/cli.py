"""Command-line front end: ``fvsolid run|check|mesh block|mms``."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import verify
from .config import ConfigError, check_against_mesh, load_config
from .fields import BoundaryConditionError
from .material import LinearElasticMaterial, stress_from_gradient, von_mises
from .mesh import MeshError, build_block_mesh, compute_geometry, read_mesh, validate_mesh, write_mesh
from .solver import RunFailedError, SolverControls, run_case
from .vtk import write_vtk

log = logging.getLogger("fvsolid")

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("FVSOLID_LOG", "info").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _load_case(case_dir: Path):
    """Return ``(config, mesh, problems)``; problems list config/mesh mismatches."""
    config = load_config(case_dir / "case.cfg")
    if config.mesh_file is not None:
        mesh = read_mesh(config.mesh_file)
    else:
        mesh = build_block_mesh(**config.block)
    problems = check_against_mesh(config, mesh)
    if not problems:
        mesh = config.boundaries.apply_kinds(mesh)
    return config, mesh, problems


def cmd_check(args) -> int:
    case_dir = Path(args.case)
    try:
        config, mesh, problems = _load_case(case_dir)
    except (ConfigError, MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = validate_mesh(mesh)
    print(f"mesh: {mesh.n_cells} cells, {mesh.n_faces} faces "
          f"({mesh.n_internal_faces} internal), {len(mesh.patches)} patches")
    print(str(report))
    for p in problems:
        print(f"config: {p}")
    if not problems:
        print("config OK")
    return 0 if report.ok and not problems else 1


def cmd_run(args) -> int:
    case_dir = Path(args.case)
    try:
        config, mesh, problems = _load_case(case_dir)
    except (ConfigError, MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return 1
    report = validate_mesh(mesh)
    if not report.ok:
        print("mesh validation failed:", file=sys.stderr)
        print(str(report), file=sys.stderr)
        return 1
    geometry = compute_geometry(mesh)
    material = config.material

    results = case_dir / "results"
    results.mkdir(exist_ok=True)
    for stale in list(results.glob("step_*.vtk")) + [results / "FAILED"]:
        if stale.exists():
            stale.unlink()

    def writer(step, time, u, grads):
        sigma = stress_from_gradient(grads, material)
        write_vtk(results / f"step_{step}.vtk", mesh,
                  cell_vectors={"displacement": u.cell_values},
                  cell_tensors={"stress": sigma},
                  cell_scalars={"vonMises": von_mises(sigma)},
                  title=f"fvsolid step {step} time {time:.10g}")

    with open(results / "residuals.log", "w", encoding="ascii") as residual_log:
        try:
            result = run_case(mesh, geometry, material, config.boundaries, config.solver,
                              config.time, body_force=config.body_force, writer=writer,
                              residual_log=residual_log)
        except RunFailedError as exc:
            (results / "FAILED").write_text(f"{exc}\n", encoding="utf-8")
            print(f"error: {exc}; partial results kept in {results}", file=sys.stderr)
            return 2
        except (BoundaryConditionError, ArithmeticError) as exc:
            (results / "FAILED").write_text(f"{exc}\n", encoding="utf-8")
            print(f"error: {exc}", file=sys.stderr)
            return 2
    log.info("finished %d step(s); wrote %d output set(s) to %s",
             result.time_state.step_index, len(result.written_steps), results)
    return 0


def cmd_mesh_block(args) -> int:
    try:
        mesh = build_block_mesh(args.origin, args.extent, args.divisions)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_cells} cells, {mesh.n_faces} faces "
          f"({mesh.n_internal_faces} internal)")
    return 0


def cmd_mms(args) -> int:
    if args.solution not in verify.CATALOGUE:
        print(f"error: unknown solution {args.solution!r}; available: "
              f"{', '.join(sorted(verify.CATALOGUE))}", file=sys.stderr)
        return 1
    sizes = sorted(set(args.sizes))
    if len(sizes) < 2:
        print("error: need at least two mesh sizes", file=sys.stderr)
        return 1
    controls = SolverControls(outer_tolerance=args.outer_tolerance)
    material = LinearElasticMaterial(args.E, args.nu)
    try:
        reports = verify.run_mms_study(args.solution, sizes, material, controls)
    except RunFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(verify.format_convergence_table(reports, exact_tol=args.exact_tol))
    if all(r.l2 <= args.exact_tol and r.linf <= args.exact_tol for r in reports):
        return 0
    final = reports[-1].order
    return 0 if final is not None and not math.isnan(final) and final >= args.threshold else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fvsolid",
                                     description="Cell-centred finite volume linear elasticity")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the case in a directory")
    p.add_argument("case")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="validate mesh and configuration without solving")
    p.add_argument("case")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("mesh", help="mesh utilities")
    msub = p.add_subparsers(dest="mesh_command", required=True)
    b = msub.add_parser("block", help="write an axis-aligned hexahedral block mesh")
    b.add_argument("--origin", type=float, nargs=3, default=(0.0, 0.0, 0.0))
    b.add_argument("--extent", type=float, nargs=3, required=True)
    b.add_argument("--divisions", type=int, nargs=3, required=True)
    b.add_argument("--out", default="mesh.txt")
    b.set_defaults(func=cmd_mesh_block)

    p = sub.add_parser("mms", help="manufactured-solution convergence study")
    p.add_argument("--solution", default="quadratic")
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32])
    p.add_argument("--threshold", type=float, default=1.9,
                   help="minimum observed order on the finest pair")
    p.add_argument("--outer-tolerance", type=float, default=1e-10)
    p.add_argument("--exact-tol", type=float, default=1e-8,
                   help="errors below this count as exact")
    p.add_argument("--E", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=0.3)
    p.set_defaults(func=cmd_mms)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
