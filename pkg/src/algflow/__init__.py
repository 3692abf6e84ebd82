"""Flows of finite-dimensional algebras.

Cubic matrices of structural constants, their three associative products, flows
``M[s, t]`` obeying the Kolmogorov-Chapman equation, and tools to trace how
algebraic properties (commutativity, associativity, baric and evolution
structure) change with time.
"""
__version__ = "0.1.0"

from .cubic import (  # noqa: E402
    AlgebraProperty,
    AssocOp,
    StochasticityKind,
    algebra_product,
    associator_defect,
    check_algebra_property,
    check_stochastic,
    collapse,
    cubic_from_json,
    cubic_to_json,
    layer,
    mul_c,
    mul_d,
    mul_e,
    mul_general,
    multiply,
    qso_apply,
    sup_distance,
)
from .functions import (  # noqa: E402
    Const,
    Cos,
    DescriptorError,
    Exp,
    Geom,
    Poly,
    Product,
    Recip,
    Sin,
    Sum,
    descriptor,
)
from .families import (  # noqa: E402
    AFamilySpec,
    Conjugation,
    ConstRow,
    FlowDomainError,
    FlowSpec,
    Rotation,
    SingularFlowError,
    SpecError,
    admissible_triples,
    canonical_flows,
    eval_flow,
    kc_residual,
    make_flow,
    make_flow_tA,
    make_flow_tE,
    qsp_residual_A,
    qsp_residual_B,
    trajectory,
)
from .analysis import (  # noqa: E402
    PropertyDiagram,
    TimeGrid,
    density_search,
    detect_homogeneous,
    detect_periodic,
    ea_duration_e8,
    limit_algebra,
    scan_property,
    split_associativity_duration,
    split_commutativity_duration,
    stochasticity_closure_sweep,
)
