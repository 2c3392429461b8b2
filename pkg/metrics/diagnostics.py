"""
metrics/diagnostics.py
Fairness/utility improvement bookkeeping between a model fitted on the original
data and its counterpart fitted on the transformed data, with both sides of the
improvement bounds evaluated on plug-in estimates.

Notation (rho is the estimated HGR correlation with A, L a risk):

  Delta~_F    = rho(h*(X)) - rho(h~(X~))               upstream fairness improvement
  Delta~_F^k  = rho(h_k(X)) - rho(h~_k(X~))            downstream fairness improvement
  Delta_F^k   = rho(h*(X)) - rho(h_k(X))               unfairness gap on the original data
  Delta~_L    = L(h*; D) - L(h~; D~)
  Delta_L^k   = L(h_k; D) - L(h*; D)
  e(A)        = L(h*; D) - eps, eps the risk of a model fitted on (X, A)

Bounds whose constants (Lipschitz moduli, capacity gaps) cannot be estimated are
reported without those constants. Nothing here asserts.
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from hgr.exact import d_metric, hgr_binned
from metrics.report import FairnessReport
from utils.errors import InputError

UPSTREAM = "upstream"
DEFAULT_SLACK = 0.15


@dataclass(frozen=True)
class HgrEvidence:
    """Pairwise correlations and risks that the reports alone do not carry."""

    rho_y_original: float  # rho(Y, h*(X))
    rho_y_transformed: float  # rho(Y, h~(X~))
    rho_ytilde_original: float  # rho(Y~, h*(X))
    rho_ytilde_transformed: float  # rho(Y~, h~(X~))
    rho_ytilde_a: float  # rho(Y~, A)
    rho_ytilde_k: Dict[str, float]  # rho(Y~, h~_k(X~))
    rho_upstream_k: Dict[str, float]  # rho(h~(X~), h~_k(X~))
    joint_risk: float  # eps
    risk_y_transformed: float  # E l(Y, h~(X~))

    @classmethod
    def from_scores(
        cls,
        y,
        y_tilde,
        groups,
        upstream_original,
        upstream_transformed,
        downstream_transformed: Mapping[str, np.ndarray],
        joint_risk: float,
        risk_y_transformed: float,
        bins: int = 10,
    ) -> "HgrEvidence":
        return cls(
            rho_y_original=hgr_binned(y, upstream_original, bins),
            rho_y_transformed=hgr_binned(y, upstream_transformed, bins),
            rho_ytilde_original=hgr_binned(y_tilde, upstream_original, bins),
            rho_ytilde_transformed=hgr_binned(y_tilde, upstream_transformed, bins),
            rho_ytilde_a=hgr_binned(y_tilde, groups, bins),
            rho_ytilde_k={k: hgr_binned(y_tilde, s, bins) for k, s in downstream_transformed.items()},
            rho_upstream_k={k: hgr_binned(upstream_transformed, s, bins) for k, s in downstream_transformed.items()},
            joint_risk=float(joint_risk),
            risk_y_transformed=float(risk_y_transformed),
        )


@dataclass(frozen=True)
class ImprovementDiagnostics:
    delta_f_tilde: float
    delta_f_k_tilde: Dict[str, float]
    delta_f_k: Dict[str, float]
    delta_l_tilde: float
    delta_l_k: Dict[str, float]
    d_upstream_ytilde: float
    d_downstream_ytilde: Dict[str, float]
    d_upstream_downstream: Dict[str, float]
    e_a: float
    check_epsilon: float
    slack: float
    # Upstream bounds with the original label.
    upstream_lower_bound: Optional[float]
    upstream_upper_bound: float
    upstream_lower_holds: Optional[bool]
    # Upstream bounds with the auxiliary label.
    d_improvement: float
    auxiliary_lower_bound: float
    auxiliary_upper_bound: float
    # Downstream bracket (without the unidentifiable constant) and the sufficient condition.
    downstream_lower: Dict[str, float] = field(default_factory=dict)
    downstream_upper: Dict[str, float] = field(default_factory=dict)
    sufficient_rhs: Dict[str, float] = field(default_factory=dict)
    sufficient_holds: Dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def improvement_diagnostics(
    original_reports: Mapping[str, FairnessReport],
    transformed_reports: Mapping[str, FairnessReport],
    hgr_estimates: HgrEvidence,
    lambda_f: float,
    slack: float = DEFAULT_SLACK,
) -> ImprovementDiagnostics:
    """Assemble the improvement quantities; ``*_reports`` map model name -> report, with an "upstream" entry."""
    if hgr_estimates is None:
        raise InputError("improvement diagnostics need HGR evidence")
    for name, reports in (("original", original_reports), ("transformed", transformed_reports)):
        if UPSTREAM not in reports:
            raise InputError(f"{name} reports have no '{UPSTREAM}' entry")
    kinds = sorted(k for k in original_reports if k != UPSTREAM)
    missing = [k for k in kinds if k not in transformed_reports]
    if missing:
        raise InputError(f"transformed reports missing model(s): {', '.join(missing)}")
    ev = hgr_estimates
    up, up_t = original_reports[UPSTREAM], transformed_reports[UPSTREAM]

    delta_f_tilde = up.hgr_hat - up_t.hgr_hat
    delta_f_k_tilde = {k: original_reports[k].hgr_hat - transformed_reports[k].hgr_hat for k in kinds}
    delta_f_k = {k: up.hgr_hat - original_reports[k].hgr_hat for k in kinds}
    delta_l_tilde = up.loss - up_t.loss
    delta_l_k = {k: original_reports[k].loss - up.loss for k in kinds}

    d_upstream_ytilde = d_metric(ev.rho_ytilde_transformed)
    d_downstream_ytilde = {k: d_metric(ev.rho_ytilde_k.get(k, 0.0)) for k in kinds}
    d_upstream_downstream = {k: d_metric(ev.rho_upstream_k.get(k, 0.0)) for k in kinds}

    e_a = up.loss - ev.joint_risk
    lower = None if lambda_f <= 0 else (ev.risk_y_transformed - e_a - ev.joint_risk) / lambda_f
    upper = d_metric(ev.rho_y_original) + d_metric(ev.rho_y_transformed)

    d_a_original, d_a_transformed = d_metric(up.hgr_hat), d_metric(up_t.hgr_hat)
    auxiliary_lower = d_metric(ev.rho_ytilde_a) - d_upstream_ytilde - d_a_original
    auxiliary_upper = d_metric(ev.rho_ytilde_original) + d_upstream_ytilde

    downstream_lower = {k: delta_f_tilde - delta_f_k[k] - d_upstream_downstream[k] for k in kinds}
    downstream_upper = {k: delta_f_tilde - delta_f_k[k] + d_upstream_downstream[k] for k in kinds}
    sufficient_rhs = {k: delta_f_k[k] + d_downstream_ytilde[k] + d_upstream_ytilde for k in kinds}

    return ImprovementDiagnostics(
        delta_f_tilde=delta_f_tilde,
        delta_f_k_tilde=delta_f_k_tilde,
        delta_f_k=delta_f_k,
        delta_l_tilde=delta_l_tilde,
        delta_l_k=delta_l_k,
        d_upstream_ytilde=d_upstream_ytilde,
        d_downstream_ytilde=d_downstream_ytilde,
        d_upstream_downstream=d_upstream_downstream,
        e_a=e_a,
        check_epsilon=ev.joint_risk,
        slack=slack,
        upstream_lower_bound=lower,
        upstream_upper_bound=upper,
        upstream_lower_holds=None if lower is None else bool(delta_f_tilde >= lower - slack),
        d_improvement=d_a_transformed - d_a_original,
        auxiliary_lower_bound=auxiliary_lower,
        auxiliary_upper_bound=auxiliary_upper,
        downstream_lower=downstream_lower,
        downstream_upper=downstream_upper,
        sufficient_rhs=sufficient_rhs,
        sufficient_holds={k: bool(delta_f_tilde >= sufficient_rhs[k]) for k in kinds},
    )
