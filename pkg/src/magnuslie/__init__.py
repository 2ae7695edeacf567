"""Classical, pre-Lie and post-Lie Magnus expansions and Lie-group integrators
for linear matrix ODEs ``Y' = A(t) Y``."""

from .linalg import ad_pow, bernoulli, commutator, dexp, dexpinv, expm, logm_near_identity
from .matpoly import MatPoly
from .magnus import (
    Trajectory,
    integrate,
    magnus2_step,
    magnus4_step,
    magnus_term,
    magnus_term_poly,
    reference_solve,
)
from .rkmk import (
    TABLEAUS,
    ButcherTableau,
    ContinuousCoeffs,
    RkmkOptions,
    cstage_step,
    gl4_exponent,
    heun_exponent,
    rkmk_step,
)
from .prelie import (
    TreeSeries,
    eval_matrix_prelie,
    eval_vector_field_prelie,
    expand_magmatic,
    graft,
    prelie_inverse,
    prelie_magnus,
    substitute,
)
from .postlie import (
    TauSeries,
    TField,
    adjoint_product,
    cartan_connection,
    geometric_magnus_check,
    jacobi_bracket,
    postlie_axiom_check,
    shifted_field,
    theta_series,
    torsion_bracket,
)
from .autonomize import AugmentedState, augment, solve_augmented

__version__ = "0.1.0"
