"""Success labels: the binary flag and the five continuous scores.

Every continuous score is the artwork pixel count scaled by a percentile
factor clamped from below at ``alpha``; percentiles are computed over
surviving communities only (failed communities have no artwork to measure).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .artwork import ArtworkMetrics, PixelMask
from .ingest import CommunityMeta, normalize_community

MEASURES = ("s_phi", "s_size", "s_pop", "s_diam", "s_entropy")
DEFAULT_ALPHA = 0.1
DEFAULT_MIN_PIXELS = 5


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class SuccessLabels:
    community: str
    survived: bool
    s_phi: float
    s_size: float
    s_pop: float
    s_diam: float
    s_entropy: float

    def score(self, measure: str) -> float:
        if measure not in MEASURES:
            raise KeyError(measure)
        return getattr(self, measure)


@dataclass(frozen=True)
class PercentileMap:
    measure: str
    values: dict[str, float]
    rho: dict[str, float]


def percentile_rank(values: dict[str, float], measure: str = "") -> PercentileMap:
    """Midrank percentile in (0, 1): (strictly-smaller + half the ties) / n."""
    if not values:
        raise LabelError("percentile_rank: empty input")
    names = list(values)
    arr = np.array([float(values[k]) for k in names], dtype=np.float64)
    sorted_arr = np.sort(arr)
    n = arr.shape[0]
    left = np.searchsorted(sorted_arr, arr, side="left")
    right = np.searchsorted(sorted_arr, arr, side="right")
    rho = (left + 0.5 * (right - left)) / n
    return PercentileMap(
        measure=measure,
        values=dict(zip(names, arr.tolist())),
        rho=dict(zip(names, rho.tolist())),
    )


def binary_label(
    mask: PixelMask | None = None,
    annotation: bool | None = None,
    min_pixels: int = DEFAULT_MIN_PIXELS,
) -> bool:
    """Survival flag: an explicit annotation wins, else mask size >= min_pixels."""
    if annotation is not None:
        return bool(annotation)
    if mask is not None:
        return len(mask.pixels) >= min_pixels
    raise LabelError("binary_label needs a final-state mask or an annotation")


def compute_labels(
    metrics: dict[str, ArtworkMetrics],
    meta: dict[str, CommunityMeta],
    alpha: float = DEFAULT_ALPHA,
    survived: dict[str, bool] | None = None,
) -> dict[str, SuccessLabels]:
    """Score every community; failed ones get survived=False and zero scores.

    Communities with metrics count as survivors unless ``survived`` says
    otherwise; entries in ``survived`` without metrics are failures. Each
    surviving community must have both metrics and a size in ``meta``.
    """
    if not 0.0 < alpha < 1.0:
        raise LabelError(f"alpha must be in (0, 1), got {alpha}")
    survived = survived or {}
    communities = sorted(set(metrics) | set(survived))
    flags = {c: bool(survived.get(c, c in metrics)) for c in communities}
    survivors = [c for c in communities if flags[c]]

    missing_metrics = [c for c in survivors if c not in metrics]
    missing_size = [c for c in survivors if c not in meta]
    if missing_metrics or missing_size:
        raise LabelError(
            "surviving communities missing inputs: "
            f"no metrics {missing_metrics[:10]}, no size {missing_size[:10]}"
        )

    out: dict[str, SuccessLabels] = {}
    if survivors:
        rho_size = percentile_rank({c: meta[c].size for c in survivors}, "size").rho
        rho_pop = percentile_rank({c: metrics[c].popularity for c in survivors}, "pop").rho
        rho_diam = percentile_rank({c: metrics[c].diameter for c in survivors}, "diam").rho
        rho_ent = percentile_rank({c: metrics[c].entropy for c in survivors}, "entropy").rho
        for c in survivors:
            s_phi = float(metrics[c].pixel_count)
            out[c] = SuccessLabels(
                community=c,
                survived=True,
                s_phi=s_phi,
                s_size=s_phi * max(1.0 - rho_size[c], alpha),
                s_pop=s_phi * max(rho_pop[c], alpha),
                s_diam=s_phi * max(rho_diam[c], alpha),
                s_entropy=s_phi * max(rho_ent[c], alpha),
            )
    for c in communities:
        if not flags[c]:
            out[c] = SuccessLabels(c, False, 0.0, 0.0, 0.0, 0.0, 0.0)
    return out


@dataclass(frozen=True)
class CorrelationMatrix:
    measures: tuple[str, ...]
    pearson: np.ndarray
    spearman: np.ndarray
    undefined: frozenset  # measure names with zero variance

    def pair(self, a: str, b: str) -> tuple[float, float]:
        i, j = self.measures.index(a), self.measures.index(b)
        return float(self.pearson[i, j]), float(self.spearman[i, j])


def label_correlations(labels: dict[str, SuccessLabels]) -> CorrelationMatrix:
    """Pearson and Spearman correlations between the five scores over survivors.

    Zero-variance measures produce NaN rows flagged in ``undefined`` rather
    than silently reporting zeros. Spearman is Pearson over midranks.
    """
    survivors = sorted(c for c, lab in labels.items() if lab.survived)
    if len(survivors) < 3:
        raise LabelError("label_correlations needs at least 3 surviving communities")
    columns = {
        m: np.array([labels[c].score(m) for c in survivors], dtype=np.float64)
        for m in MEASURES
    }
    undefined = frozenset(m for m, col in columns.items() if np.ptp(col) == 0.0)
    k = len(MEASURES)
    pearson = np.full((k, k), np.nan)
    spearman = np.full((k, k), np.nan)
    ranks = {m: _midranks(col) for m, col in columns.items()}
    for i, a in enumerate(MEASURES):
        for j, b in enumerate(MEASURES):
            if i == j:
                pearson[i, j] = spearman[i, j] = 1.0
            elif a not in undefined and b not in undefined:
                pearson[i, j] = _pearson(columns[a], columns[b])
                spearman[i, j] = _pearson(ranks[a], ranks[b])
    return CorrelationMatrix(MEASURES, pearson, spearman, undefined)


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.sort(values)
    left = np.searchsorted(order, values, side="left")
    right = np.searchsorted(order, values, side="right")
    return (left + right + 1) / 2.0


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    return float((da * db).sum() / denom) if denom > 0 else float("nan")


def rank_divergent(
    labels: dict[str, SuccessLabels], quartile: float = 0.25
) -> set[str]:
    """Survivors ranked in the top quartile under one measure and the bottom
    under another (midrank percentiles, so ties are handled symmetrically)."""
    survivors = sorted(c for c, lab in labels.items() if lab.survived)
    if len(survivors) < 4:
        return set()
    rho = {
        m: percentile_rank({c: labels[c].score(m) for c in survivors}, m).rho
        for m in MEASURES
    }
    out: set[str] = set()
    for c in survivors:
        top = any(rho[m][c] >= 1.0 - quartile for m in MEASURES)
        bottom = any(rho[m][c] <= quartile for m in MEASURES)
        if top and bottom:
            out.add(c)
    return out


def labels_to_frame(labels: dict[str, SuccessLabels]) -> pd.DataFrame:
    rows = [
        {
            "community": lab.community,
            "survived": lab.survived,
            "s_phi": lab.s_phi,
            "s_size": lab.s_size,
            "s_pop": lab.s_pop,
            "s_diam": lab.s_diam,
            "s_entropy": lab.s_entropy,
        }
        for _, lab in sorted(labels.items())
    ]
    return pd.DataFrame(rows, columns=["community", "survived", *MEASURES])


def frame_to_labels(frame: pd.DataFrame) -> dict[str, SuccessLabels]:
    out = {}
    for row in frame.itertuples(index=False):
        out[row.community] = SuccessLabels(
            community=row.community,
            survived=bool(row.survived),
            s_phi=float(row.s_phi),
            s_size=float(row.s_size),
            s_pop=float(row.s_pop),
            s_diam=float(row.s_diam),
            s_entropy=float(row.s_entropy),
        )
    return out


def read_annotations(source) -> dict[str, bool]:
    """CSV community,survived with truthy strings accepted for the flag."""
    frame = pd.read_csv(source)
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    if not {"community", "survived"} <= set(frame.columns):
        raise LabelError("annotation file needs columns community,survived")
    truthy = {"1", "true", "yes", "t"}
    out = {}
    for row in frame.itertuples(index=False):
        flag = row.survived
        value = flag if isinstance(flag, (bool, np.bool_)) else str(flag).strip().lower() in truthy
        out[normalize_community(row.community)] = bool(value)
    return out
