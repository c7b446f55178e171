"""Fit-by-name model dispatch and cross-validated task evaluation."""

from __future__ import annotations

from dataclasses import dataclass

from .baselines import (
    PairwiseRateModel,
    PairwiseRates,
    fit_ct_bernoulli,
    fit_ct_jaccard,
    fit_netrate,
)
from .domain import ConfigurationError, Dataset, ParameterStore
from .evaluation import (
    PCD_TIME_EPSILON,
    EvalReport,
    MetricSummary,
    csp,
    kfold_split,
    pcd,
    wbr,
)
from .model import LatentRateModel
from .training import TrainerConfig, train

MODEL_NAMES = ("sent-lis", "ct-lis", "ct-bernoulli", "ct-jaccard", "netrate")
TASK_NAMES = ("pcd", "wbr", "csp")


@dataclass
class FittedModel:
    name: str
    rate_model: object
    artifact: ParameterStore | PairwiseRates


def fit_model(name: str, dataset: Dataset, config: TrainerConfig,
              dim: int = 8, bernoulli_trials: str = "influencer") -> FittedModel:
    """Train or count-fit the named model on the given (training) dataset."""
    if name == "sent-lis":
        result = train(dataset, config, dim=dim)
        return FittedModel(name, LatentRateModel(result.params, dataset.adjacency),
                           result.params)
    if name == "ct-lis":
        result = train(dataset, config, dim=dim, classes=1)
        return FittedModel(name, LatentRateModel(result.params, dataset.adjacency),
                           result.params)
    if name == "ct-bernoulli":
        rates = fit_ct_bernoulli(dataset, trials=bernoulli_trials)
        return FittedModel(name, PairwiseRateModel(rates), rates)
    if name == "ct-jaccard":
        rates = fit_ct_jaccard(dataset)
        return FittedModel(name, PairwiseRateModel(rates), rates)
    if name == "netrate":
        rates = fit_netrate(dataset, fit_ct_jaccard(dataset), config)
        return FittedModel(name, PairwiseRateModel(rates), rates)
    raise ConfigurationError(f"unknown model {name!r}; choose from {MODEL_NAMES}")


@dataclass
class TaskOptions:
    pcd_epsilon: float = PCD_TIME_EPSILON
    pcd_pooled: bool = False
    csp_seed_count: int = 10
    csp_sims: int = 100
    csp_scales: int = 50


def evaluate_fold(task: str, fitted: FittedModel, test: Dataset,
                  options: TaskOptions, seed: int) -> tuple[dict[str, float], dict[str, float]]:
    """Metric values and bookkeeping counts for one model on one test fold."""
    if task == "pcd":
        result = pcd(test.cascades, fitted.rate_model, test.M,
                     epsilon=options.pcd_epsilon, pooled=options.pcd_pooled)
        return ({"AUC": result.auc, "MRR": result.mrr},
                {"skipped_cascades": result.skipped_cascades,
                 "ranked_events": result.ranked_events})
    if task == "wbr":
        if test.parents is None:
            raise ConfigurationError("WBR needs parent ground truth")
        result = wbr(test.cascades, test.parents, fitted.rate_model)
        return ({"Acc": result.accuracy, "MRR": result.mrr},
                {"scored_events": result.scored_events,
                 "excluded_missing_parent": result.excluded_missing_parent,
                 "excluded_invalid_parent": result.excluded_invalid_parent})
    if task == "csp":
        result = csp(test.cascades, fitted.rate_model, test.M,
                     seed_count=options.csp_seed_count, n_sims=options.csp_sims,
                     n_scales=options.csp_scales, seed=seed)
        return ({"MAPE": result.mape},
                {"excluded_cascades": result.excluded_cascades})
    raise ConfigurationError(f"unknown task {task!r}; choose from {TASK_NAMES}")


def cross_validate(dataset: Dataset, task: str, model_names: list[str],
                   config: TrainerConfig, dim: int = 8, folds: int = 10,
                   seed: int = 0, options: TaskOptions | None = None
                   ) -> list[EvalReport]:
    """Fit and score every named model over a shared k-fold split."""
    options = options or TaskOptions()
    fold_pairs = kfold_split(dataset, k=folds, seed=seed)
    reports = []
    for name in model_names:
        per_metric: dict[str, list[float]] = {}
        notes: dict[str, float] = {}
        for train_ds, test_ds in fold_pairs:
            fitted = fit_model(name, train_ds, config, dim=dim)
            values, counts = evaluate_fold(task, fitted, test_ds, options, seed)
            for metric, value in values.items():
                per_metric.setdefault(metric, []).append(value)
            for key, count in counts.items():
                notes[key] = notes.get(key, 0) + count
        reports.append(EvalReport(
            task=task, model=name,
            metrics={m: MetricSummary.from_values(v) for m, v in per_metric.items()},
            notes=notes))
    return reports
