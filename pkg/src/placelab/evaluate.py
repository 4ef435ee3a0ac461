"""Stratified cross-validation, metrics, and the window comparison.

The harness owns the train/test discipline: population-fitted feature
statistics (bag-of-words vocabulary, imputation means) are refit on the
training folds of every split, and a pre-built matrix containing such
blocks is refused outright.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureMatrix
from .features.assemble import POPULATION_FITTED_BLOCKS
from .models import ModelSpec, TreeEnsemble, fit_spec, predict

CLASSIFICATION_METRICS = ("precision", "recall", "f1", "auc")
REGRESSION_METRICS = ("rmse", "r2", "adj_r2")


class EvalError(ValueError):
    pass


class LeakageError(EvalError):
    """A configuration that would leak test-fold data into fitting."""


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignment: dict[str, int]
    strata: str

    def fold_members(self, fold: int) -> list[str]:
        return [c for c, f in self.assignment.items() if f == fold]

    def train_members(self, fold: int) -> list[str]:
        return [c for c, f in self.assignment.items() if f != fold]


def stratified_kfold(labels: dict, k: int, seed: int, task: str) -> FoldPlan:
    """Assign communities to k folds, balanced within strata.

    Classification stratifies on the class label; regression stratifies on
    label deciles. Fold sizes differ by at most one overall and within each
    stratum. The same seed always produces the same assignment.
    """
    if task not in ("classification", "regression"):
        raise EvalError(f"unknown task: {task}")
    names = sorted(labels)
    n = len(names)
    if n < k:
        raise EvalError(f"cannot make {k} folds from {n} samples")
    if k < 2:
        raise EvalError("k must be at least 2")

    if task == "classification":
        strata: dict = {}
        for name in names:
            strata.setdefault(bool(labels[name]), []).append(name)
        small = {cls: len(v) for cls, v in strata.items() if len(v) < k}
        if small:
            raise EvalError(f"class(es) with fewer than k={k} members: {small}")
        strata_desc = "class"
    else:
        values = np.array([float(labels[name]) for name in names])
        order = np.sort(values)
        left = np.searchsorted(order, values, side="left")
        right = np.searchsorted(order, values, side="right")
        rho = (left + 0.5 * (right - left)) / n
        deciles = np.minimum((rho * 10).astype(int), 9)
        strata = {}
        for name, decile in zip(names, deciles):
            strata.setdefault(int(decile), []).append(name)
        strata_desc = "label_decile"

    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    cursor = 0
    for key in sorted(strata):
        members = strata[key]
        for idx in rng.permutation(len(members)):
            assignment[members[int(idx)]] = cursor % k
            cursor += 1
    return FoldPlan(k=k, seed=seed, assignment={c: assignment[c] for c in names}, strata=strata_desc)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def classification_metrics(y_true, y_prob, threshold: float = 0.5) -> dict[str, float]:
    """Precision/recall/F1 at the threshold plus rank-based AUC.

    AUC is the Mann-Whitney statistic with half credit for tied scores;
    it is NaN when only one class is present.
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    y_prob = np.asarray(y_prob, dtype=np.float64)
    pred = y_prob >= threshold
    pos = y_true > 0.5
    tp = float((pred & pos).sum())
    fp = float((pred & ~pos).sum())
    fn = float((~pred & pos).sum())
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        auc = float("nan")
    else:
        order = np.sort(y_prob)
        left = np.searchsorted(order, y_prob, side="left")
        right = np.searchsorted(order, y_prob, side="right")
        ranks = (left + right + 1) / 2.0
        auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return {"precision": precision, "recall": recall, "f1": f1, "auc": float(auc)}


def regression_metrics(y_true, y_pred, p_features: int) -> dict[str, float]:
    """RMSE, R^2, and adjusted R^2; undefined values come back as NaN."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    n = y_true.shape[0]
    if n < 2:
        raise EvalError("regression metrics need at least two samples")
    sse = float(((y_true - y_pred) ** 2).sum())
    sst = float(((y_true - y_true.mean()) ** 2).sum())
    rmse = float(np.sqrt(sse / n))
    r2 = 1.0 - sse / sst if sst > 0 else float("nan")
    if sst > 0 and n - p_features - 1 >= 1:
        adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p_features - 1)
    else:
        adj = float("nan")
    return {"rmse": rmse, "r2": r2, "adj_r2": adj}


def n_features_used(model) -> int:
    if isinstance(model, TreeEnsemble):
        used: set[int] = set()
        for tree in model.trees:
            used.update(int(f) for f in tree.feature[tree.feature >= 0].tolist())
        return len(used)
    return len(model.feature_names)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    task: str
    per_fold: tuple[dict, ...]
    mean: dict[str, float]
    std: dict[str, float]
    predictions: dict[str, float] = field(repr=False)
    fingerprint: str = ""
    n_features: int = 0

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "per_fold": list(self.per_fold),
            "mean": self.mean,
            "std": self.std,
            "fingerprint": self.fingerprint,
            "n_features": self.n_features,
            "predictions": dict(sorted(self.predictions.items())),
        }


def cross_validate(features, labels: dict, model_spec: ModelSpec, fold_plan: FoldPlan, task: str) -> EvalReport:
    """Per-fold fit/predict with refit of population-fitted feature statistics.

    ``features`` is either a builder with fit/transform (refit per fold) or
    a static :class:`FeatureMatrix`. A static matrix whose provenance shows
    population-fitted blocks is refused, since its statistics saw the test
    folds when it was built.
    """
    _refuse_leaky(features)
    missing = [c for c in fold_plan.assignment if c not in labels]
    if missing:
        raise EvalError(f"fold plan covers unlabeled communities: {missing[:10]}")

    per_fold: list[dict] = []
    predictions: dict[str, float] = {}
    for fold in range(fold_plan.k):
        train = fold_plan.train_members(fold)
        test = fold_plan.fold_members(fold)
        train_X, test_X = _fold_matrices(features, train, test)
        y_train = np.array([float(labels[c]) for c in train])
        y_test = np.array([float(labels[c]) for c in test])
        model = fit_spec(model_spec, train_X, y_train, task)
        y_hat = predict(model, test_X)
        for community, value in zip(test, y_hat.tolist()):
            predictions[community] = value
        if task == "classification":
            per_fold.append(classification_metrics(y_test, y_hat))
        else:
            per_fold.append(regression_metrics(y_test, y_hat, n_features_used(model)))
    mean, std = _aggregate(per_fold)
    return EvalReport(
        task=task,
        per_fold=tuple(per_fold),
        mean=mean,
        std=std,
        predictions=predictions,
        fingerprint=_fingerprint(features, labels, model_spec, fold_plan, task),
        n_features=_n_columns(features),
    )


def _refuse_leaky(features) -> None:
    if isinstance(features, FeatureMatrix):
        leaky = [
            b for b in features.provenance.get("blocks", ())
            if b in POPULATION_FITTED_BLOCKS
        ]
        if leaky:
            raise LeakageError(
                f"pre-built matrix contains population-fitted block(s) {leaky}; "
                "pass the feature builder so they can be refit per fold"
            )


def _fold_matrices(features, train, test):
    if isinstance(features, FeatureMatrix):
        names = features.columns
        return (
            FeatureMatrix(tuple(train), names, features.rows_for(train), dict(features.provenance)),
            FeatureMatrix(tuple(test), names, features.rows_for(test), dict(features.provenance)),
        )
    fitted = features.fit(train)
    return fitted.transform(train), fitted.transform(test)


def _n_columns(features) -> int:
    if isinstance(features, FeatureMatrix):
        return len(features.columns)
    return 0  # builder width varies per fold with the fitted vocabulary


def _aggregate(per_fold):
    keys = sorted({k for fold in per_fold for k in fold})
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for key in keys:
        values = np.array([fold[key] for fold in per_fold], dtype=np.float64)
        defined = values[~np.isnan(values)]
        if defined.shape[0] == 0:
            mean[key] = float("nan")
            std[key] = float("nan")
        else:
            mean[key] = float(defined.mean())
            std[key] = float(defined.std())
    return mean, std


def _fingerprint(features, labels, model_spec, fold_plan, task) -> str:
    provenance = features.provenance if isinstance(features, FeatureMatrix) else {
        "window": getattr(features, "window_name", "?"),
        "blocks": list(getattr(features, "blocks", ())),
    }
    payload = {
        "task": task,
        "algorithm": model_spec.algorithm,
        "params": {k: repr(v) for k, v in sorted(model_spec.params.items())},
        "feature": model_spec.feature,
        "k": fold_plan.k,
        "seed": fold_plan.seed,
        "strata": fold_plan.strata,
        "blocks": provenance.get("blocks", []),
        "window": provenance.get("window", "?"),
        "n_labels": len(labels),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Window comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowContrast:
    correlation: float
    deltas: dict[str, float]
    top_divergent: tuple[str, ...]
    mean_bp: dict[str, float]
    mean_dp: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "correlation": self.correlation,
            "top_divergent": list(self.top_divergent),
            "mean_bp": self.mean_bp,
            "mean_dp": self.mean_dp,
            "deltas": dict(sorted(self.deltas.items())),
        }


def compare_windows(
    report_bp: EvalReport,
    predictions_bp: dict[str, float],
    report_dp: EvalReport,
    predictions_dp: dict[str, float],
    top_n: int = 10,
) -> WindowContrast:
    """Contrast the two windows' models on the same community list.

    Emits per-community prediction deltas (DP minus BP), the Pearson
    correlation between the prediction vectors, and the communities whose
    predictions diverge the most.
    """
    if set(predictions_bp) != set(predictions_dp):
        only_bp = sorted(set(predictions_bp) - set(predictions_dp))[:5]
        only_dp = sorted(set(predictions_dp) - set(predictions_bp))[:5]
        raise EvalError(
            f"prediction community sets differ (bp-only {only_bp}, dp-only {only_dp})"
        )
    names = sorted(predictions_bp)
    bp = np.array([predictions_bp[c] for c in names])
    dp = np.array([predictions_dp[c] for c in names])
    da = bp - bp.mean()
    db = dp - dp.mean()
    denom = float(np.sqrt((da * da).sum() * (db * db).sum()))
    correlation = float((da * db).sum() / denom) if denom > 0 else float("nan")
    deltas = {c: float(d - b) for c, b, d in zip(names, bp.tolist(), dp.tolist())}
    divergent = sorted(names, key=lambda c: (-abs(deltas[c]), c))
    if np.allclose(bp, dp):
        divergent = []
    return WindowContrast(
        correlation=correlation,
        deltas=deltas,
        top_divergent=tuple(divergent[:top_n]),
        mean_bp=dict(report_bp.mean),
        mean_dp=dict(report_dp.mean),
    )
