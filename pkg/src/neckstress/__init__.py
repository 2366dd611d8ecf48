"""neckstress: a numerical laboratory for gradient concentration between two
rigid inclusions separated by a thin neck."""

from .asymptotics import (
    RatePrediction,
    ScalingLaw,
    flat_entry_oracle,
    integral_law,
    gram_integral_cases,
    pointwise_bound,
    predicted_rate,
    rho,
    rho_law,
    singular_integral_oracle,
    vbar,
    vbar_grad,
    vtilde,
)
from .decomposition import (
    CellSolutions,
    CoefficientSystem,
    assemble_system,
    cramer_diff,
    reconstruct,
    solve_cell_problems,
    solve_coefficients,
    sum_field_check,
)
from .elasticity import (
    ElasticParams,
    RigidMotion,
    energy_pairing,
    lame_apply,
    n_rigid,
    rigid_basis,
    strain,
)
from .fem import (
    DirichletSolver,
    DisplacementField,
    P2Space,
    Region,
    SolveReport,
    SolverConfig,
    boundary_traction_moment,
    energy_integral,
    export_field,
    gradient_at,
    gradient_sq_integral,
    interpolate,
    max_gradient,
    solve_dirichlet,
)
from .geometry import (
    ChartError,
    GeometryError,
    NeckProfile,
    ProfileKind,
    dist_to_flat,
    gap,
    make_profile,
)
from .harness import (
    ExperimentConfig,
    RateFit,
    compare_oracles,
    default_eps_list,
    fit_rate,
    patch_energy_profile,
    read_csv,
    resolve_phi,
    run_point,
    run_sweep,
    sweep_summary,
    write_csv,
)
from .meshing import (
    BoundaryTag,
    GradingConfig,
    GradingReport,
    Mesh,
    MeshingError,
    build_mesh,
    load_mesh,
    refine_uniform,
    save_mesh,
)

__version__ = "0.1.0"
