from hgr.exact import (
    DiscreteJoint,
    chi2_divergence_exact,
    contingency,
    d_metric,
    discretize,
    dual_value_exact,
    f_star,
    hgr_binned,
    hgr_exact_conditional,
    hgr_exact_discrete,
)
from hgr.dual import (
    DualCritic,
    HgrEstimate,
    chi2_dual_objective,
    estimate_hgr_independence,
    estimate_hgr_separation,
    permute_rows,
    permute_within_strata,
)
