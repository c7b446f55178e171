"""Sentiment-specific influence and susceptibility representations learned
from timestamped infection cascades with a continuous-time survival model."""

from .domain import (
    CascadeRecord,
    ConfigurationError,
    ContractViolation,
    Dataset,
    ParameterStore,
    load_dataset,
    validate_dataset,
)
from .model import (
    cascade_log_likelihood,
    event_likelihood,
    gradients,
    hazard,
    log_survivor,
    objective,
    transmission_rate,
    LatentRateModel,
)
from .sampling import NegativeSampler, compute_frequencies, sample_negatives
from .training import TrainerConfig, adadelta_step, projected_backtracking_update, train
from .baselines import (
    PairwiseRates,
    fit_ct_bernoulli,
    fit_ct_jaccard,
    fit_netrate,
    score_pairwise,
)
from .evaluation import EvalReport, csp, kfold_split, pcd_auc, pcd_mrr, wbr
from .pipeline import assign_sentiment, onion_peel
from .synthetic import GeneratorConfig, generate
from .analysis import export_norms, export_rates

__all__ = [
    "CascadeRecord", "ConfigurationError", "ContractViolation", "Dataset",
    "ParameterStore", "load_dataset", "validate_dataset",
    "transmission_rate", "hazard", "log_survivor", "event_likelihood",
    "cascade_log_likelihood", "objective", "gradients", "LatentRateModel",
    "NegativeSampler", "compute_frequencies", "sample_negatives",
    "TrainerConfig", "adadelta_step", "projected_backtracking_update", "train",
    "PairwiseRates", "fit_ct_bernoulli", "fit_ct_jaccard", "fit_netrate",
    "score_pairwise",
    "EvalReport", "csp", "kfold_split", "pcd_auc", "pcd_mrr", "wbr",
    "assign_sentiment", "onion_peel",
    "GeneratorConfig", "generate",
    "export_norms", "export_rates",
]
