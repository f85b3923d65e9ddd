"""Exact-rational toolkit for finite metric measure spaces.

Distances (Prohorov, box, Gromov-Hausdorff), the Lipschitz order and its
epsilon relaxation, and the constructions that produce dominating spaces.
Every scalar is a :class:`fractions.Fraction`; every produced witness is
re-verified before it is returned.
"""

from mmkit.core import (
    BoxWitness,
    ConstructionFailed,
    CorrWitness,
    Coupling,
    DenominatorMismatch,
    DimensionMismatch,
    EpsWitness,
    FiniteMetric,
    FinitePseudoMetric,
    GHWitness,
    MapWitness,
    MassError,
    MetricAxiomViolation,
    MMError,
    MMSpace,
    PreconditionFailed,
    SizeGuard,
    mm_isomorphic,
    pseudo_to_metric,
    pushforward,
    validate_space,
)
from mmkit.transport import prohorov, prohorov_oracle
from mmkit.verify import Report, verify_witness
from mmkit.metrics import box, box_oracle, box_upper_from_coupling, gh, gh_eps_check
from mmkit.order import (
    check_domination,
    check_eps_domination,
    chain_compress,
    compose_eps,
    eps_from_box,
    regularize,
    regularize_gh,
)
from mmkit.construct import (
    glue_chain,
    glue_pair,
    kuratowski,
    net_chain_limit,
    product,
    quotient_dominator,
    universal_dominate,
    universal_space,
)
from mmkit.pipeline import (
    PipelineConfig,
    build_ambient_chain,
    common_dominator,
    common_dominator_step,
    eps_partition,
)

__all__ = [
    "BoxWitness",
    "ConstructionFailed",
    "CorrWitness",
    "Coupling",
    "DenominatorMismatch",
    "DimensionMismatch",
    "EpsWitness",
    "FiniteMetric",
    "FinitePseudoMetric",
    "GHWitness",
    "MapWitness",
    "MassError",
    "MetricAxiomViolation",
    "MMError",
    "MMSpace",
    "PipelineConfig",
    "PreconditionFailed",
    "Report",
    "SizeGuard",
    "box",
    "box_oracle",
    "box_upper_from_coupling",
    "build_ambient_chain",
    "chain_compress",
    "check_domination",
    "check_eps_domination",
    "common_dominator",
    "common_dominator_step",
    "compose_eps",
    "eps_from_box",
    "eps_partition",
    "gh",
    "gh_eps_check",
    "glue_chain",
    "glue_pair",
    "kuratowski",
    "mm_isomorphic",
    "net_chain_limit",
    "product",
    "prohorov",
    "prohorov_oracle",
    "pseudo_to_metric",
    "pushforward",
    "quotient_dominator",
    "regularize",
    "regularize_gh",
    "universal_dominate",
    "universal_space",
    "validate_space",
    "verify_witness",
]
