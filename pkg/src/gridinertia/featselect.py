"""Greedy forward feature selection over the PMU channel types.

Starting from the empty set, each round scores every remaining candidate
feature joined to the current set and keeps the one with the highest
validation accuracy (ties broken by lower MSE, then by feature definition
order).  Selection stops as soon as the best candidate fails to strictly
improve on the accuracy already achieved.

The scorer is injectable: anything mapping a feature tuple to a Metrics
object works, which keeps the selection logic testable without training.
The default scorer trains a fresh estimator per subset and can average
scores over several model seeds.
"""

from dataclasses import dataclass

from .errors import SelectionError
from .features import ALL_FEATURES, canonical_order
from .models import (DEFAULT_BASE_LR, Metrics, TrainConfig, build_model,
                     evaluate, make_spec, observed_adjacency, train)


@dataclass(frozen=True)
class SelectionRound:
    """One scored candidate: the subset is the current set plus candidate."""
    round: int
    candidate: str
    features: tuple
    acc: float
    mse: float
    r2: float | None
    selected: bool


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple
    best_acc: float
    best_mse: float
    trace: tuple


def greedy_forward_selection(scorer, candidates=ALL_FEATURES):
    """Run greedy forward selection; scorer(features_tuple) -> Metrics.

    Returns a SelectionResult whose ``selected`` tuple is in selection
    order and whose trace holds one row per scored candidate.
    """
    remaining = list(canonical_order(candidates))
    if not remaining:
        raise SelectionError("feature selection needs at least one candidate")
    chosen = []
    best_acc = float("-inf")
    best_mse = float("inf")
    trace = []
    round_no = 0
    while remaining:
        round_no += 1
        rows = []
        for feat in remaining:
            subset = canonical_order(tuple(chosen) + (feat,))
            metrics = scorer(subset)
            if not isinstance(metrics, Metrics):
                raise SelectionError(
                    f"scorer returned {type(metrics).__name__}, expected Metrics")
            rows.append((feat, subset, metrics))
        winner = None
        for feat, subset, metrics in rows:
            if winner is None:
                winner = (feat, subset, metrics)
                continue
            _, _, best = winner
            if (metrics.acc > best.acc
                    or (metrics.acc == best.acc and metrics.mse < best.mse)):
                winner = (feat, subset, metrics)
        win_feat, _, win_metrics = winner
        improved = win_metrics.acc > best_acc
        for feat, subset, metrics in rows:
            trace.append(SelectionRound(
                round=round_no, candidate=feat.value, features=subset,
                acc=metrics.acc, mse=metrics.mse, r2=metrics.r2,
                selected=improved and feat is win_feat))
        if not improved:
            break
        chosen.append(win_feat)
        remaining.remove(win_feat)
        best_acc = win_metrics.acc
        best_mse = win_metrics.mse
    if not chosen:
        raise SelectionError("no feature improved on the empty model")
    return SelectionResult(selected=tuple(chosen), best_acc=best_acc,
                           best_mse=best_mse, trace=tuple(trace))


def make_dataset_scorer(dataset, family, *, system=None, train_cfg=None,
                        mu=0.5, seeds=(0,), max_epochs=200):
    """Build the default scorer: train `family` on the dataset restricted to
    each candidate subset and return validation metrics, averaged over the
    given model seeds.

    The gcn family needs `system` to derive the observed-bus adjacency.
    """
    if not seeds:
        raise SelectionError("scorer needs at least one model seed")
    if family == "gcn" and system is None:
        raise SelectionError("scoring the gcn family needs the power system")
    base_cfg = train_cfg or TrainConfig(max_epochs=max_epochs,
                                        base_lr=DEFAULT_BASE_LR[family])

    def scorer(features):
        subset = dataset.restrict_features(features)
        adjacency = (observed_adjacency(system, subset.buses)
                     if family == "gcn" else None)
        accs, mses, r2s = [], [], []
        for seed in seeds:
            spec = make_spec(family, subset, seed=seed)
            model = build_model(spec, adjacency=adjacency)
            train(model, subset, base_cfg)
            metrics = evaluate(model, subset, "val", mu=mu)
            accs.append(metrics.acc)
            mses.append(metrics.mse)
            r2s.append(metrics.r2)
        r2 = (None if any(v is None for v in r2s)
              else sum(r2s) / len(r2s))
        return Metrics(acc=sum(accs) / len(accs), mse=sum(mses) / len(mses),
                       r2=r2, n=len(subset.val_idx), mu=mu)

    return scorer
