"""Prediction models: univariate baselines, linear/logistic regression,
gradient-boosted trees, and random forests.

Trees are grown with exact greedy variance-reduction splits (ties go to the
smaller threshold, then the lower feature index) and stored as flat arrays.
All fitting is deterministic given the seed in the params.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import kernels

MODEL_FILE_VERSION = 1

GBT_DEFAULTS = {
    "n_trees": 200,
    "learning_rate": 0.05,
    "max_depth": 3,
    "min_samples_leaf": 5,
    "subsample": 1.0,
    "seed": 0,
}

FOREST_DEFAULTS = {
    "n_trees": 200,
    "max_depth": 8,
    "min_samples_leaf": 5,
    "n_features_per_split": None,  # None = all features
    "seed": 0,
}

LOGISTIC_MAX_ITER = 100
LOGISTIC_TOL = 1e-8
LOGISTIC_RIDGE = 1e-6


class FitError(ValueError):
    pass


class PredictError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Model containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearModel:
    feature_names: tuple[str, ...]
    coef: np.ndarray
    intercept: float
    link: str  # "identity" | "logistic"

    @property
    def weights(self) -> dict[str, float]:
        return dict(zip(self.feature_names, self.coef.tolist()))


@dataclass(frozen=True)
class RegressionTree:
    """Flat-array binary tree; feature == -1 marks a leaf.

    ``cover`` holds the number of training rows that reached each node,
    which doubles as the background distribution for path-dependent
    Shapley attribution.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        for i in range(X.shape[0]):
            node = 0
            while self.feature[node] >= 0:
                if X[i, self.feature[node]] <= self.threshold[node]:
                    node = int(self.left[node])
                else:
                    node = int(self.right[node])
            out[i] = self.value[node]
        return out


@dataclass(frozen=True)
class TreeEnsemble:
    kind: str  # "gbt_regressor" | "gbt_classifier" | "random_forest"
    trees: tuple[RegressionTree, ...]
    learning_rate: float
    base_score: float
    feature_names: tuple[str, ...]
    params: dict = field(default_factory=dict)
    oob_prediction: np.ndarray | None = field(default=None, compare=False)

    def raw_score(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out


# ---------------------------------------------------------------------------
# Tree growing
# ---------------------------------------------------------------------------


def _grow_tree(X, grad, rows, max_depth, min_leaf, hess=None, rng=None, n_feats=None):
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    cover: list[float] = []

    def leaf_value(idx):
        if hess is None:
            return float(grad[idx].mean())
        h = float(hess[idx].sum())
        return float(grad[idx].sum()) / max(h, 1e-12)

    def emit(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        cover.append(float(idx.shape[0]))
        if depth >= max_depth or idx.shape[0] < max(2, 2 * min_leaf):
            value[node] = leaf_value(idx)
            return node
        if n_feats is None or n_feats >= X.shape[1]:
            feats = np.arange(X.shape[1], dtype=np.int64)
        else:
            feats = np.sort(rng.choice(X.shape[1], size=n_feats, replace=False)).astype(np.int64)
        f, thr, gain, _ = kernels.best_split(
            np.ascontiguousarray(X[idx]), np.ascontiguousarray(grad[idx]), feats, min_leaf
        )
        if f < 0 or gain <= 0.0:
            value[node] = leaf_value(idx)
            return node
        mask = X[idx, f] <= thr
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = emit(idx[mask], depth + 1)
        right[node] = emit(idx[~mask], depth + 1)
        return node

    emit(rows, 0)
    return RegressionTree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        value=np.array(value, dtype=np.float64),
        cover=np.array(cover, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# Gradient boosting
# ---------------------------------------------------------------------------


def fit_gbt(X, y, params=None, loss: str = "squared", feature_names=None) -> TreeEnsemble:
    """Stagewise boosting of regression trees on the negative gradient.

    ``squared`` fits residuals with mean-value leaves; ``deviance`` fits
    ``y - sigmoid(F)`` with one Newton step per leaf and a log-odds base
    score. With subsample == 1 the training loss is checked to be
    non-increasing after every stage.
    """
    X, y, feature_names = _as_training_arrays(X, y, feature_names)
    if loss not in ("squared", "deviance"):
        raise FitError(f"unknown loss: {loss}")
    p = dict(GBT_DEFAULTS, **(params or {}))
    n = X.shape[0]
    if n < 1:
        raise FitError("fit_gbt needs at least one sample")
    rng = np.random.default_rng(p["seed"])

    if loss == "deviance":
        classes = np.unique(y)
        if not np.isin(classes, (0.0, 1.0)).all() or classes.shape[0] < 2:
            raise FitError("deviance loss needs both classes present in y (0/1)")
        base_rate = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
        base = float(np.log(base_rate / (1.0 - base_rate)))
    else:
        base = float(y.mean())

    current = np.full(n, base)
    trees: list[RegressionTree] = []
    check_loss = p["subsample"] >= 1.0
    prev_loss = _train_loss(loss, y, current)
    for _ in range(int(p["n_trees"])):
        if p["subsample"] < 1.0:
            take = max(1, int(round(p["subsample"] * n)))
            rows = np.sort(rng.choice(n, size=take, replace=False))
        else:
            rows = np.arange(n)
        if loss == "deviance":
            prob = expit(current)
            grad = y - prob
            hess = prob * (1.0 - prob)
        else:
            grad = y - current
            hess = None
        tree = _grow_tree(
            X, grad, rows,
            max_depth=int(p["max_depth"]),
            min_leaf=int(p["min_samples_leaf"]),
            hess=hess,
        )
        trees.append(tree)
        current += p["learning_rate"] * tree.predict(X)
        if check_loss:
            stage_loss = _train_loss(loss, y, current)
            if stage_loss > prev_loss + 1e-9 * max(1.0, abs(prev_loss)):
                raise FitError(
                    f"training loss increased at stage {len(trees)}: "
                    f"{prev_loss} -> {stage_loss}"
                )
            prev_loss = stage_loss
    kind = "gbt_classifier" if loss == "deviance" else "gbt_regressor"
    return TreeEnsemble(
        kind=kind,
        trees=tuple(trees),
        learning_rate=float(p["learning_rate"]),
        base_score=base,
        feature_names=feature_names,
        params={**p, "loss": loss},
    )


def _train_loss(loss, y, raw):
    if loss == "squared":
        return float(((y - raw) ** 2).mean())
    prob = np.clip(expit(raw), 1e-12, 1 - 1e-12)
    return float(-(y * np.log(prob) + (1 - y) * np.log(1 - prob)).mean())


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


def fit_random_forest(X, y, params=None, feature_names=None) -> TreeEnsemble:
    """Bootstrap-aggregated trees fit directly on y; prediction is the tree mean.

    For 0/1 labels the mean of leaf means is the class probability. The
    returned ensemble carries out-of-bag predictions (NaN for rows that
    every bootstrap sample contained).
    """
    X, y, feature_names = _as_training_arrays(X, y, feature_names)
    p = dict(FOREST_DEFAULTS, **(params or {}))
    n = X.shape[0]
    if n < 1:
        raise FitError("fit_random_forest needs at least one sample")
    rng = np.random.default_rng(p["seed"])
    n_trees = int(p["n_trees"])
    bootstrap = bool(p.get("bootstrap", True))

    trees: list[RegressionTree] = []
    oob_sum = np.zeros(n)
    oob_count = np.zeros(n)
    for _ in range(n_trees):
        rows = np.sort(rng.integers(0, n, size=n)) if bootstrap else np.arange(n)
        tree = _grow_tree(
            X, y, rows,
            max_depth=int(p["max_depth"]),
            min_leaf=int(p["min_samples_leaf"]),
            rng=rng,
            n_feats=p["n_features_per_split"],
        )
        trees.append(tree)
        if bootstrap:
            out = np.setdiff1d(np.arange(n), rows, assume_unique=False)
            if out.shape[0]:
                oob_sum[out] += tree.predict(X[out])
                oob_count[out] += 1.0
    oob = np.full(n, np.nan)
    scored = oob_count > 0
    oob[scored] = oob_sum[scored] / oob_count[scored]
    return TreeEnsemble(
        kind="random_forest",
        trees=tuple(trees),
        learning_rate=1.0 / n_trees,
        base_score=0.0,
        feature_names=feature_names,
        params=dict(p),
        oob_prediction=oob if bootstrap else None,
    )


def _as_training_arrays(X, y, feature_names):
    from .features import FeatureMatrix

    if isinstance(X, FeatureMatrix):
        feature_names = X.columns
        X = X.values
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(X.shape[1]))
    if len(feature_names) != X.shape[1]:
        raise FitError("feature_names length does not match the matrix width")
    if X.shape[0] != y.shape[0]:
        raise FitError("X and y row counts differ")
    return X, y, tuple(feature_names)


# ---------------------------------------------------------------------------
# Linear models
# ---------------------------------------------------------------------------


def fit_linear(X, y, feature_names=None) -> LinearModel:
    """Least-squares fit (minimum-norm when the matrix is wide)."""
    X, y, feature_names = _as_training_arrays(X, y, feature_names)
    design = np.hstack([X, np.ones((X.shape[0], 1))])
    solution, *_ = np.linalg.lstsq(design, y, rcond=None)
    return LinearModel(
        feature_names=feature_names,
        coef=solution[:-1],
        intercept=float(solution[-1]),
        link="identity",
    )


def fit_logistic(X, y, feature_names=None) -> LinearModel:
    """Newton-Raphson logistic regression with a small ridge for conditioning."""
    X, y, feature_names = _as_training_arrays(X, y, feature_names)
    if np.unique(y).shape[0] < 2:
        raise FitError("logistic regression needs both classes present")
    design = np.hstack([X, np.ones((X.shape[0], 1))])
    beta = np.zeros(design.shape[1])
    ridge = LOGISTIC_RIDGE * np.eye(design.shape[1])
    for _ in range(LOGISTIC_MAX_ITER):
        prob = expit(design @ beta)
        gradient = design.T @ (y - prob) - LOGISTIC_RIDGE * beta
        if np.linalg.norm(gradient) < LOGISTIC_TOL:
            break
        weights = np.clip(prob * (1.0 - prob), 1e-12, None)
        hessian = (design * weights[:, None]).T @ design + ridge
        beta = beta + np.linalg.solve(hessian, gradient)
    return LinearModel(
        feature_names=feature_names,
        coef=beta[:-1],
        intercept=float(beta[-1]),
        link="logistic",
    )


def fit_univariate_baseline(x, y, link: str = "identity", feature_name: str = "x") -> LinearModel:
    """Single-feature baseline; zero variance in x is an error."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] < 2:
        raise FitError("univariate baseline needs at least two samples")
    if np.ptp(x) == 0.0:
        raise FitError("univariate baseline feature has zero variance")
    X = x[:, None]
    if link == "identity":
        model = fit_linear(X, y, feature_names=(feature_name,))
    elif link == "logistic":
        model = fit_logistic(X, y, feature_names=(feature_name,))
    else:
        raise FitError(f"unknown link: {link}")
    return model


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def align_columns(data, feature_names) -> np.ndarray:
    """Reorder named matrix columns to the model's order; plain arrays pass
    through when the width already matches."""
    from .features import FeatureMatrix

    if isinstance(data, FeatureMatrix):
        index = {c: i for i, c in enumerate(data.columns)}
        missing = [name for name in feature_names if name not in index]
        if missing:
            raise PredictError(f"matrix is missing model column(s): {missing[:10]}")
        return data.values[:, [index[name] for name in feature_names]]
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != len(feature_names):
        raise PredictError(
            f"matrix has {X.shape[1]} columns but the model expects {len(feature_names)}"
        )
    return X


def predict(model, data) -> np.ndarray:
    """Model output: probabilities in [0,1] for classifiers, raw values otherwise."""
    raw = predict_raw(model, data)
    if getattr(model, "link", None) == "logistic" or getattr(model, "kind", None) == "gbt_classifier":
        return expit(raw)
    return raw


def predict_raw(model, data) -> np.ndarray:
    """Pre-link score: log-odds for classifiers, identity for regressors."""
    X = align_columns(data, model.feature_names)
    if isinstance(model, TreeEnsemble):
        return model.raw_score(X)
    if isinstance(model, LinearModel):
        return X @ model.coef + model.intercept
    raise PredictError(f"unsupported model type: {type(model).__name__}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_model_payload(model), handle, sort_keys=True)
        handle.write("\n")


def _model_payload(model) -> dict:
    if isinstance(model, TreeEnsemble):
        return {
            "version": MODEL_FILE_VERSION,
            "model_type": "tree_ensemble",
            "kind": model.kind,
            "params": _jsonable(model.params),
            "feature_names": list(model.feature_names),
            "base_score": model.base_score,
            "learning_rate": model.learning_rate,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                    "cover": t.cover.tolist(),
                }
                for t in model.trees
            ],
        }
    if isinstance(model, LinearModel):
        return {
            "version": MODEL_FILE_VERSION,
            "model_type": "linear",
            "link": model.link,
            "feature_names": list(model.feature_names),
            "coef": model.coef.tolist(),
            "intercept": model.intercept,
        }
    raise ValueError(f"cannot serialize model type: {type(model).__name__}")


def _jsonable(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if isinstance(value, (np.integer,)):
            value = int(value)
        elif isinstance(value, (np.floating,)):
            value = float(value)
        out[key] = value
    return out


def load_model(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot read model file {path}: {exc}") from exc
    version = payload.get("version")
    if version != MODEL_FILE_VERSION:
        raise ValueError(f"unsupported model file version: {version!r}")
    if payload["model_type"] == "linear":
        return LinearModel(
            feature_names=tuple(payload["feature_names"]),
            coef=np.array(payload["coef"], dtype=np.float64),
            intercept=float(payload["intercept"]),
            link=payload["link"],
        )
    if payload["model_type"] == "tree_ensemble":
        trees = tuple(
            RegressionTree(
                feature=np.array(t["feature"], dtype=np.int32),
                threshold=np.array(t["threshold"], dtype=np.float64),
                left=np.array(t["left"], dtype=np.int32),
                right=np.array(t["right"], dtype=np.int32),
                value=np.array(t["value"], dtype=np.float64),
                cover=np.array(t["cover"], dtype=np.float64),
            )
            for t in payload["trees"]
        )
        return TreeEnsemble(
            kind=payload["kind"],
            trees=trees,
            learning_rate=float(payload["learning_rate"]),
            base_score=float(payload["base_score"]),
            feature_names=tuple(payload["feature_names"]),
            params=payload.get("params", {}),
        )
    raise ValueError(f"unknown model_type: {payload['model_type']!r}")


# ---------------------------------------------------------------------------
# Model specs (used by the evaluation harness and the CLI)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """A fit recipe: algorithm plus params, resolved against a task type."""

    algorithm: str  # "gbt" | "random_forest" | "linear" | "logistic" | "univariate"
    params: dict = field(default_factory=dict)
    feature: str | None = None  # univariate baselines only

    def with_seed(self, seed: int) -> "ModelSpec":
        return replace(self, params={**self.params, "seed": seed})


def fit_spec(spec: ModelSpec, X, y, task: str, feature_names=None):
    """Fit the model a spec describes for a classification/regression task."""
    if task not in ("classification", "regression"):
        raise FitError(f"unknown task: {task}")
    if spec.algorithm == "gbt":
        loss = "deviance" if task == "classification" else "squared"
        return fit_gbt(X, y, params=spec.params, loss=loss, feature_names=feature_names)
    if spec.algorithm == "random_forest":
        return fit_random_forest(X, y, params=spec.params, feature_names=feature_names)
    if spec.algorithm in ("linear", "logistic"):
        if task == "classification":
            return fit_logistic(X, y, feature_names=feature_names)
        return fit_linear(X, y, feature_names=feature_names)
    if spec.algorithm == "univariate":
        if spec.feature is None:
            raise FitError("univariate spec needs a feature name")
        from .features import FeatureMatrix

        if isinstance(X, FeatureMatrix):
            names = list(X.columns)
            matrix = X.values
        else:
            names = list(feature_names or [])
            matrix = np.asarray(X, dtype=np.float64)
            if matrix.ndim == 1:
                matrix = matrix[:, None]
        if names:
            if spec.feature not in names:
                raise FitError(f"baseline feature {spec.feature!r} not in matrix")
            column = matrix[:, names.index(spec.feature)]
        else:
            column = matrix[:, 0]
        link = "logistic" if task == "classification" else "identity"
        return fit_univariate_baseline(column, y, link=link, feature_name=spec.feature)
    raise FitError(f"unknown algorithm: {spec.algorithm}")
