from metrics.fairness import (
    auc,
    choose_threshold,
    eo_ratio,
    group_labels,
    ks_eo,
    ks_sp,
    ks_statistic,
    sp_ratio,
)
from metrics.tradeoff import (
    TradeoffPoint,
    consistency_scores,
    hypervolume_2d,
    pareto_front,
    risk_spread,
    scale_fairness,
)
from metrics.report import FairnessReport, aggregate_reports, evaluate_scores, prediction_loss
from metrics.diagnostics import HgrEvidence, ImprovementDiagnostics, improvement_diagnostics
