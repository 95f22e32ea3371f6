"""Translation-invariant solutions of Levy-driven SPDEs in Hermite-Sobolev spaces.

The SPDE solution is ``Y_t = tau_{U_t} xi``: a translate of the initial
condition by the solution of a finite-dimensional jump SDE whose
coefficients pair against ``tau_z xi``.  Elements of S_p are handled as
truncated Hermite coefficient vectors.
"""
from .coefficients import (
    CoefficientSet,
    IdentityJump,
    MarkFunction,
    SeparableJump,
    SeparableTerm,
    ZeroJump,
    bar_b,
    bar_sigma,
    F_eval,
    G_eval,
    hypothesis_report,
)
from .errors import (
    ConfigError,
    InvalidInputError,
    NumericalBlowupError,
    ProjectionError,
    TispdeError,
    UnsupportedMeasureError,
    UnsupportedOrderError,
)
from .hermite import basis, gauss_hermite_rule, hermite_table, hermite_values, multi_indices
from .kernels import available_backends, backend_name, use_backend
from .levy import AtomMeasure, DensityMeasure, LevyModel, NoisePath, epsilon_truncated, generate_noise
from .operators import (
    CoeffOperator,
    adjoint_in_p,
    derivative_op,
    op_A,
    op_L,
    op_Ltilde,
    second_derivative_op,
    t_operator,
    translate,
    translation_matrix,
)
from .sde import Trajectory, euler_step, pathwise_uniqueness_probe, solve_sde, solve_sde_interlaced
from .sobolev import HermiteRep, duality, inner_p, norm_p, project, tail_mass
from .spde import (
    SpdePath,
    ito_residual,
    reconstruct_Z,
    translate_solution,
    uniqueness_gap,
    weak_residual,
)

__version__ = "0.1.0"
