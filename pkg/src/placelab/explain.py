"""Exact Shapley attributions for tree ensembles.

Implements the polynomial-time path-dependent algorithm: conditional
expectations follow the per-node training covers recorded at fit time, and
attributions are computed on the raw (pre-link) score where additivity is
exact. Linear models get the weights-times-centered-values attribution,
flagged by ``method``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .models import LinearModel, RegressionTree, TreeEnsemble, align_columns


class ExplainError(TypeError):
    pass


@dataclass(frozen=True)
class Attribution:
    community: str
    base_value: float
    phi: dict[str, float] = field(repr=False)
    prediction: float = 0.0
    values: dict[str, float] = field(default_factory=dict, repr=False)
    method: str = "tree_path_dependent"


def tree_shap(ensemble: TreeEnsemble, instance, community: str = "") -> Attribution:
    """Exact Shapley values of the ensemble's raw score for one instance."""
    if not isinstance(ensemble, TreeEnsemble):
        raise ExplainError(
            f"tree_shap needs a tree ensemble, got {type(ensemble).__name__}; "
            "use linear_attribution for linear models"
        )
    x = align_columns(instance, ensemble.feature_names)
    if x.shape[0] != 1:
        raise ValueError("tree_shap explains one instance; use tree_shap_batch")
    row = np.ascontiguousarray(x[0], dtype=np.float64)
    n_features = len(ensemble.feature_names)
    phi = np.zeros(n_features)
    base = ensemble.base_score
    for tree in ensemble.trees:
        phi_tree = np.zeros(n_features)
        _shap_recurse(tree, 0, row, phi_tree, [], 1.0, 1.0, -1)
        phi += ensemble.learning_rate * phi_tree
        base += ensemble.learning_rate * _expected_value(tree)
    prediction = float(ensemble.raw_score(row[None, :])[0])
    return Attribution(
        community=community,
        base_value=float(base),
        phi={name: float(v) for name, v in zip(ensemble.feature_names, phi)},
        prediction=prediction,
        values={name: float(v) for name, v in zip(ensemble.feature_names, row)},
    )


def tree_shap_batch(ensemble: TreeEnsemble, matrix, communities=None) -> list[Attribution]:
    x = align_columns(matrix, ensemble.feature_names)
    if communities is None:
        communities = getattr(matrix, "communities", None) or [str(i) for i in range(x.shape[0])]
    return [tree_shap(ensemble, x[i: i + 1], c) for i, c in enumerate(communities)]


def _expected_value(tree: RegressionTree) -> float:
    """Cover-weighted mean leaf value, i.e. the tree's output on no evidence."""
    total = 0.0
    root_cover = float(tree.cover[0])
    for node in range(tree.n_nodes):
        if tree.feature[node] < 0:
            total += tree.value[node] * tree.cover[node]
    return total / root_cover


# Path entries are [feature_index, zero_fraction, one_fraction, pweight].
_D, _Z, _O, _W = 0, 1, 2, 3


def _shap_recurse(tree, node, x, phi, parent_path, p_zero, p_one, p_feature):
    path = [entry.copy() for entry in parent_path]
    _extend(path, p_zero, p_one, p_feature)
    if tree.feature[node] < 0:
        for i in range(1, len(path)):
            w = _unwound_sum(path, i)
            phi[int(path[i][_D])] += w * (path[i][_O] - path[i][_Z]) * tree.value[node]
        return
    f = int(tree.feature[node])
    left, right = int(tree.left[node]), int(tree.right[node])
    hot, cold = (left, right) if x[f] <= tree.threshold[node] else (right, left)
    cover = float(tree.cover[node])
    hot_zero = tree.cover[hot] / cover
    cold_zero = tree.cover[cold] / cover
    incoming_zero = 1.0
    incoming_one = 1.0
    for k in range(len(path)):
        if path[k][_D] == f:
            incoming_zero = path[k][_Z]
            incoming_one = path[k][_O]
            _unwind(path, k)
            break
    _shap_recurse(tree, hot, x, phi, path, hot_zero * incoming_zero, incoming_one, f)
    _shap_recurse(tree, cold, x, phi, path, cold_zero * incoming_zero, 0.0, f)


def _extend(path, p_zero, p_one, p_feature):
    depth = len(path)
    path.append([float(p_feature), p_zero, p_one, 1.0 if depth == 0 else 0.0])
    for i in range(depth - 1, -1, -1):
        path[i + 1][_W] += p_one * path[i][_W] * (i + 1) / (depth + 1)
        path[i][_W] = p_zero * path[i][_W] * (depth - i) / (depth + 1)


def _unwind(path, index):
    depth = len(path) - 1
    one = path[index][_O]
    zero = path[index][_Z]
    next_one = path[depth][_W]
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = path[i][_W]
            path[i][_W] = next_one * (depth + 1) / ((i + 1) * one)
            next_one = tmp - path[i][_W] * zero * (depth - i) / (depth + 1)
        else:
            path[i][_W] = path[i][_W] * (depth + 1) / (zero * (depth - i))
    for i in range(index, depth):
        path[i][_D] = path[i + 1][_D]
        path[i][_Z] = path[i + 1][_Z]
        path[i][_O] = path[i + 1][_O]
    path.pop()


def _unwound_sum(path, index):
    depth = len(path) - 1
    one = path[index][_O]
    zero = path[index][_Z]
    total = 0.0
    if one != 0.0:
        next_one = path[depth][_W]
        for i in range(depth - 1, -1, -1):
            tmp = next_one / ((i + 1) * one)
            total += tmp
            next_one = path[i][_W] - tmp * zero * (depth - i)
    else:
        for i in range(depth - 1, -1, -1):
            total += path[i][_W] / (zero * (depth - i))
    return total * (depth + 1)


# ---------------------------------------------------------------------------
# Linear fallback and aggregate summaries
# ---------------------------------------------------------------------------


def linear_attribution(model: LinearModel, instance, means, community: str = "") -> Attribution:
    """weights * (x - mean) attribution for linear models, flagged as such."""
    x = align_columns(instance, model.feature_names)[0]
    means = np.asarray(means, dtype=np.float64)
    contributions = model.coef * (x - means)
    base = float(model.coef @ means + model.intercept)
    return Attribution(
        community=community,
        base_value=base,
        phi={n: float(v) for n, v in zip(model.feature_names, contributions)},
        prediction=float(x @ model.coef + model.intercept),
        values={n: float(v) for n, v in zip(model.feature_names, x)},
        method="linear",
    )


def shap_summary(attributions) -> pd.DataFrame:
    """Per-feature importance table: mean |phi|, mean phi, value-phi correlation.

    Rows are sorted by mean |phi| descending (name ascending on ties). The
    correlation column carries the sign used to read beeswarm colors; it is
    NaN when either side has zero variance.
    """
    if not attributions:
        raise ValueError("shap_summary needs at least one attribution")
    names = list(attributions[0].phi)
    rows = []
    for name in names:
        phis = np.array([a.phi[name] for a in attributions])
        vals = np.array([a.values.get(name, np.nan) for a in attributions])
        corr = float("nan")
        if np.isfinite(vals).all():
            dv = vals - vals.mean()
            dp = phis - phis.mean()
            denom = np.sqrt((dv * dv).sum() * (dp * dp).sum())
            if denom > 0:
                corr = float((dv * dp).sum() / denom)
        rows.append(
            {
                "feature": name,
                "mean_abs_phi": float(np.abs(phis).mean()),
                "mean_phi": float(phis.mean()),
                "value_phi_corr": corr,
            }
        )
    frame = pd.DataFrame(rows)
    return frame.sort_values(
        ["mean_abs_phi", "feature"], ascending=[False, True], kind="stable"
    ).reset_index(drop=True)


def group_importance(attributions, feature_type_map: dict[str, str]) -> dict[str, float]:
    """Share of total mean-|phi| importance per feature type; shares sum to 1."""
    if not attributions:
        raise ValueError("group_importance needs at least one attribution")
    names = list(attributions[0].phi)
    unmapped = [n for n in names if n not in feature_type_map]
    if unmapped:
        raise ValueError(f"feature(s) without a type mapping: {unmapped[:10]}")
    importance = {
        n: float(np.mean([abs(a.phi[n]) for a in attributions])) for n in names
    }
    total = sum(importance.values())
    groups = sorted({feature_type_map[n] for n in names})
    if total == 0.0:
        return {g: 0.0 for g in groups}
    shares = dict.fromkeys(groups, 0.0)
    for name, value in importance.items():
        shares[feature_type_map[name]] += value / total
    return shares


def attributions_to_frame(attributions) -> pd.DataFrame:
    rows = []
    for a in attributions:
        for name, phi in a.phi.items():
            rows.append(
                {
                    "community": a.community,
                    "feature": name,
                    "value": a.values.get(name, float("nan")),
                    "phi": phi,
                }
            )
    return pd.DataFrame(rows, columns=["community", "feature", "value", "phi"])
