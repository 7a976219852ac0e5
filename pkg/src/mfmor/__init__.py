"""Iterative multi-fidelity snapshot selection for projection-based
model order reduction, with two parametric FEM benchmarks and a greedy
reduced-basis baseline."""

from .config import RunConfig, load_config
from .driver import (
    MfReport,
    MultiFidelityDriver,
    error_pod_global,
    error_rom_global,
    error_train,
    error_val,
    relative_error,
    rank_sweep,
)
from .estimators import GreedyReducedBasis, MultiFidelityROM
from .experiments import run_compare, run_experiment, run_trials
from .exceptions import (
    AssemblyError,
    ConfigurationError,
    DomainError,
    MfmorError,
    NumericalError,
    SolverError,
)
from .fem import (
    AffineSystem,
    FomSolution,
    SupgAssembler,
    VelocityField,
    assemble_advdiff_supg,
    assemble_heat_affine,
    solve_fom,
    solve_potential_flow,
)
from .greedy import GreedyRbmDriver
from .mesh import Mesh, build_unit_square_mesh, load_mesh, resolution_for_target_nodes, save_mesh
from .params import (
    ParameterGrid,
    grid_1d,
    lhs,
    load_params_csv,
    save_params_csv,
    split_train_val,
    tensor_grid,
)
from .problems import AdvectionDiffusion, HeatConduction, make_problem
from .reduction import (
    ReducedBasis,
    SnapshotMatrix,
    SvdTriple,
    gram_schmidt_enrich,
    pod_truncate,
    projection_error,
    thin_svd,
)
from .rom import (
    ReducedAffineSystem,
    RomSolution,
    project_affine,
    reconstruct,
    solve_rom_affine,
    solve_rom_nonaffine,
)
from .sampling import DeimState, deim_select, orthogonalize_against_history

__version__ = "0.1.0"

__all__ = [
    "AdvectionDiffusion",
    "AffineSystem",
    "AssemblyError",
    "ConfigurationError",
    "DeimState",
    "DomainError",
    "FomSolution",
    "GreedyRbmDriver",
    "GreedyReducedBasis",
    "HeatConduction",
    "Mesh",
    "MfReport",
    "MfmorError",
    "MultiFidelityDriver",
    "MultiFidelityROM",
    "NumericalError",
    "ParameterGrid",
    "ReducedAffineSystem",
    "ReducedBasis",
    "RomSolution",
    "RunConfig",
    "SnapshotMatrix",
    "SolverError",
    "SupgAssembler",
    "SvdTriple",
    "VelocityField",
    "assemble_advdiff_supg",
    "assemble_heat_affine",
    "build_unit_square_mesh",
    "deim_select",
    "error_pod_global",
    "error_rom_global",
    "error_train",
    "error_val",
    "relative_error",
    "gram_schmidt_enrich",
    "grid_1d",
    "lhs",
    "load_config",
    "load_mesh",
    "load_params_csv",
    "make_problem",
    "run_compare",
    "run_experiment",
    "run_trials",
    "orthogonalize_against_history",
    "pod_truncate",
    "project_affine",
    "projection_error",
    "rank_sweep",
    "reconstruct",
    "resolution_for_target_nodes",
    "save_mesh",
    "save_params_csv",
    "solve_fom",
    "solve_potential_flow",
    "solve_rom_affine",
    "solve_rom_nonaffine",
    "split_train_val",
    "tensor_grid",
    "thin_svd",
]
