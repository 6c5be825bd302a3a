"""Solver and verification toolkit for degenerate parabolic HJB equations on the flat torus."""

from .torus_grid import (
    Field,
    GridError,
    LatticeDirection,
    TorusGrid,
    cyclic_shift,
    directional_second_difference,
    discrete_lipschitz,
    make_grid,
    one_sided_gradients,
    oscillation,
)
from .problem_model import (
    ControlSet,
    DegeneracyMask,
    HJBProblem,
    ModelError,
    SigmaColumn,
    degeneracy_set,
    eval_diffusion,
    eval_hamiltonian,
    lipschitz_viscosity,
)
from .scheme import (
    OperatorKernel,
    SchemeError,
    SchemeParams,
    apply_operator,
    make_scheme_params,
    numerical_hamiltonian,
    stable_timestep,
)
from .solver import (
    ErgodicResult,
    SolverError,
    Trajectory,
    long_time_slope,
    nr_ergodic_constant,
    run_cauchy,
    solve_discounted,
)
from .diagnostics import (
    ConvergenceVerdict,
    ProbeParams,
    compute_M_series,
    compute_P,
    convergence_verdict,
    shift_by_constant_rate,
)
from .verifier import (
    HOLDS,
    INCONCLUSIVE,
    VIOLATED,
    CheckReport,
    H10Params,
    SuperlinearParams,
    check_H10,
    check_convexity,
    check_convexity_plain,
    check_kernel_condition,
    check_nr_structure,
    check_superlinear,
    check_uniform_ellipticity,
)
from . import catalog

__version__ = "0.1.0"
