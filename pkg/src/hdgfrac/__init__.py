"""HDG spatial discretization with fractional Crank-Nicolson time stepping
for subdiffusion, with element-local postprocessing and convergence tools."""

from .bench import (
    ConvergenceTable,
    ManufacturedProblem,
    RunConfig,
    convergence_study,
    emit_table,
    error_norms,
    manufactured_source,
)
from .fractional import (
    KernelWeights,
    cn_weights,
    coercivity_check,
    coercivity_constant,
    memory_term,
    omega,
    riemann_liouville_integral,
)
from .hdg import (
    CondensedStep,
    DegenerateElementError,
    HDGState,
    ProjectionPair,
    assemble_local,
    build_step,
    condense,
    hdg_projection,
    initialize,
    run_transient,
    solve_step,
)
from .mesh import ElementBasis, Mesh1D, QuadratureRule, build_uniform_mesh, gauss_rule, project_L2
from .postprocess import PostprocessedField, postprocess, postprocess_element

__version__ = "0.1.0"
