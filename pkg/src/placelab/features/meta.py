"""Community meta-features over one content window."""

from __future__ import annotations

from datetime import datetime

import numpy as np

from ..ingest import CommunityMeta
from ..windows import EXPERIMENT_START, TimeWindow
from .text import tokenize

DELETED_AUTHOR = "[deleted]"

META_SCHEMA = (
    "subscriber_count",
    "age_days",
    "n_submissions",
    "n_comments",
    "n_items",
    "n_active_users",
    "distinct_submitters",
    "distinct_commenters",
    "comments_per_submission",
    "distinct_commenters_per_submission",
    "removed_submission_ratio",
    "avg_submission_score",
    "std_submission_score",
    "avg_comment_score",
    "std_comment_score",
    "posts_per_day",
    "comments_per_day",
    "avg_title_tokens",
    "avg_comment_tokens",
    "deleted_author_fraction",
    "activity_gini",
    "has_submissions",
)


def meta_features(
    items,
    meta: CommunityMeta | None,
    window: TimeWindow,
    *,
    age_anchor: datetime = EXPERIMENT_START,
) -> dict[str, float]:
    """Fixed meta-feature schema for one community's items in one window.

    Per-submission ratios are 0 when there are no submissions; the
    ``has_submissions`` flag disambiguates that case. Community age counts
    days back from the experiment-start anchor.
    """
    out = dict.fromkeys(META_SCHEMA, 0.0)
    subs = [i for i in items if i.kind == "submission"]
    comments = [i for i in items if i.kind == "comment"]
    out["n_submissions"] = float(len(subs))
    out["n_comments"] = float(len(comments))
    out["n_items"] = float(len(items))
    out["has_submissions"] = 1.0 if subs else 0.0

    if meta is not None:
        out["subscriber_count"] = float(meta.size)
        out["age_days"] = (age_anchor.timestamp() - meta.created) / 86400.0

    authors = [i.author for i in items if i.author and i.author != DELETED_AUTHOR]
    out["n_active_users"] = float(len(set(authors)))
    out["distinct_submitters"] = float(
        len({i.author for i in subs if i.author and i.author != DELETED_AUTHOR})
    )
    out["distinct_commenters"] = float(
        len({i.author for i in comments if i.author and i.author != DELETED_AUTHOR})
    )
    if items:
        deleted = sum(1 for i in items if i.author == DELETED_AUTHOR)
        out["deleted_author_fraction"] = deleted / len(items)

    if subs:
        out["comments_per_submission"] = len(comments) / len(subs)
        out["removed_submission_ratio"] = sum(1 for s in subs if s.removed) / len(subs)
        scores = np.array([s.score for s in subs], dtype=np.float64)
        out["avg_submission_score"] = float(scores.mean())
        out["std_submission_score"] = float(scores.std())
        out["avg_title_tokens"] = float(
            np.mean([len(tokenize(s.text.split("\n", 1)[0])) for s in subs])
        )
        repliers: dict[str, set[str]] = {s.id: set() for s in subs}
        for c in comments:
            parent = (c.parent_id or "").removeprefix("t3_").removeprefix("t1_")
            if parent in repliers:
                repliers[parent].add(c.author)
        out["distinct_commenters_per_submission"] = float(
            np.mean([len(v) for v in repliers.values()])
        )
    if comments:
        scores = np.array([c.score for c in comments], dtype=np.float64)
        out["avg_comment_score"] = float(scores.mean())
        out["std_comment_score"] = float(scores.std())
        out["avg_comment_tokens"] = float(np.mean([len(tokenize(c.text)) for c in comments]))

    days = window.duration_days()
    if days > 0:
        out["posts_per_day"] = len(subs) / days
        out["comments_per_day"] = len(comments) / days

    out["activity_gini"] = _gini([a for a in authors])
    return out


def _gini(authors: list[str]) -> float:
    """Gini of per-user item counts via the mean-absolute-difference formula."""
    if not authors:
        return 0.0
    counts = np.array(
        sorted(np.unique(np.array(authors, dtype=object), return_counts=True)[1]),
        dtype=np.float64,
    )
    n = counts.shape[0]
    if n < 2 or counts.sum() == 0:
        return 0.0
    diffs = np.abs(counts[:, None] - counts[None, :]).sum()
    return float(diffs / (2.0 * n * n * counts.mean()))
