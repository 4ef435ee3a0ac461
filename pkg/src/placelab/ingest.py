"""Parsers for all external inputs.

Everything the pipeline consumes comes through here: the placement log
(CSV), the artwork atlas (JSON), community content (JSON lines), community
metadata (CSV), embedding tables (TSV), and the ``%``-delimited category
dictionary. Parsers are pure and never mutate their inputs, so they are safe
to run per-file in parallel.
"""

from __future__ import annotations

import io
import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .windows import TimeWindow

log = logging.getLogger(__name__)

CANVAS_WIDTH = 1000
CANVAS_HEIGHT = 1000
PALETTE_SIZE = 16
REMOVAL_SENTINEL = "[removed]"

# The public placement dumps circulate with two column-name conventions.
COLUMN_ALIASES = {
    "ts": ("ts", "timestamp"),
    "user": ("user", "user_hash", "user_id"),
    "x": ("x", "x_coordinate"),
    "y": ("y", "y_coordinate"),
    "color": ("color", "pixel_color"),
}


class IngestError(ValueError):
    """Fatal input problem: missing column, corrupt table, bad dictionary."""


def normalize_community(name) -> str:
    """Lowercase and strip any 'r/' prefix; idempotent."""
    text = str(name).strip().lower()
    while text.startswith(("r/", "/")):
        text = text[2:] if text.startswith("r/") else text[1:]
        text = text.strip()
    return text


# ---------------------------------------------------------------------------
# Placements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlacementEvent:
    ts: int  # epoch milliseconds
    user: str | None
    x: int
    y: int
    color: int


class PlacementLog(Sequence):
    """Columnar event log, sorted ascending by timestamp.

    Behaves as a sequence of :class:`PlacementEvent` while storing the ~16M
    rows of the full dataset as flat numpy arrays.
    """

    def __init__(self, ts, x, y, color, users=None, n_malformed=0, n_filtered=0):
        self.ts = np.ascontiguousarray(ts, dtype=np.int64)
        self.x = np.ascontiguousarray(x, dtype=np.int32)
        self.y = np.ascontiguousarray(y, dtype=np.int32)
        self.color = np.ascontiguousarray(color, dtype=np.int8)
        self.users = users
        self.n_malformed = int(n_malformed)
        self.n_filtered = int(n_filtered)

    def __len__(self):
        return self.ts.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            users = self.users[idx] if self.users is not None else None
            return PlacementLog(
                self.ts[idx], self.x[idx], self.y[idx], self.color[idx], users
            )
        user = None if self.users is None else str(self.users[idx])
        return PlacementEvent(
            ts=int(self.ts[idx]),
            user=user,
            x=int(self.x[idx]),
            y=int(self.y[idx]),
            color=int(self.color[idx]),
        )

    def is_sorted(self) -> bool:
        return bool(np.all(self.ts[1:] >= self.ts[:-1]))


def parse_placements(
    source,
    bounds_policy: str = "skip",
    *,
    width: int = CANVAS_WIDTH,
    height: int = CANVAS_HEIGHT,
    window: TimeWindow | None = None,
    keep_users: bool = True,
) -> PlacementLog:
    """Parse a placement CSV into a timestamp-sorted event log.

    Timestamps are accepted as epoch milliseconds or ISO-8601 strings.
    Malformed rows (bad field counts, unparseable values, out-of-range
    coordinates or colors) are skipped and counted under ``policy="skip"``
    and fatal under ``policy="strict"``. Rows outside ``window``, when one
    is given, are dropped and counted separately as filtered.
    """
    if bounds_policy not in ("skip", "strict"):
        raise ValueError(f"unknown bounds_policy: {bounds_policy!r}")

    bad_lines = [0]

    def _on_bad_line(line):
        bad_lines[0] += 1
        return None

    frame = pd.read_csv(
        source,
        dtype=str,
        engine="python",
        on_bad_lines=_on_bad_line,
        skip_blank_lines=True,
    )
    frame.columns = [str(c).strip().lower() for c in frame.columns]

    columns = {}
    for canonical, aliases in COLUMN_ALIASES.items():
        found = next((a for a in aliases if a in frame.columns), None)
        if found is None and canonical != "user":
            raise IngestError(f"placement input is missing required column: {canonical}")
        columns[canonical] = found

    ts = _parse_timestamps(frame[columns["ts"]])
    x = pd.to_numeric(frame[columns["x"]], errors="coerce")
    y = pd.to_numeric(frame[columns["y"]], errors="coerce")
    color = pd.to_numeric(frame[columns["color"]], errors="coerce")

    parseable = ts.notna() & x.notna() & y.notna() & color.notna()
    in_bounds = (
        (x >= 0) & (x < width) & (y >= 0) & (y < height)
        & (color >= 0) & (color < PALETTE_SIZE)
    )
    good = parseable & in_bounds
    n_malformed = int((~good).sum()) + bad_lines[0]
    if n_malformed and bounds_policy == "strict":
        first_bad = int(np.flatnonzero(~good.to_numpy())[0]) if (~good).any() else -1
        raise IngestError(
            f"{n_malformed} malformed placement row(s); first bad data row index: {first_bad}"
        )
    if n_malformed:
        log.warning("parse_placements: skipped %d malformed row(s)", n_malformed)

    ts = ts[good].to_numpy(dtype=np.int64)
    x = x[good].to_numpy(dtype=np.int32)
    y = y[good].to_numpy(dtype=np.int32)
    color = color[good].to_numpy(dtype=np.int8)
    users = frame.loc[good, columns["user"]].to_numpy(dtype=object) if (
        keep_users and columns["user"] is not None
    ) else None

    n_filtered = 0
    if window is not None:
        in_window = (ts >= window.start_ms) & (ts <= window.end_ms)
        n_filtered = int((~in_window).sum())
        ts, x, y, color = ts[in_window], x[in_window], y[in_window], color[in_window]
        if users is not None:
            users = users[in_window]

    order = np.argsort(ts, kind="stable")
    if users is not None:
        users = users[order]
    return PlacementLog(
        ts[order], x[order], y[order], color[order], users,
        n_malformed=n_malformed, n_filtered=n_filtered,
    )


def _parse_timestamps(series: pd.Series) -> pd.Series:
    """Epoch-millis integers or ISO-8601 strings, mixed freely, to int64 ms."""
    numeric = pd.to_numeric(series, errors="coerce")
    result = numeric.astype("float64")
    textual = numeric.isna() & series.notna()
    if textual.any():
        stamps = pd.to_datetime(series[textual], errors="coerce", utc=True, format="ISO8601")
        result[textual] = stamps.astype("int64") / 1e6
        result[textual & stamps.isna()] = np.nan
    return result


# ---------------------------------------------------------------------------
# Atlas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtlasEntry:
    id: str
    name: str
    subreddits: tuple[str, ...]
    polygons: tuple[tuple[tuple[float, float], ...], ...]


def parse_atlas(
    document,
    *,
    width: int = CANVAS_WIDTH,
    height: int = CANVAS_HEIGHT,
    margin: float = 50.0,
) -> list[AtlasEntry]:
    """Parse an atlas export (JSON array of region entries).

    Entries with non-numeric vertices, no polygon of at least three
    vertices, or vertices farther than ``margin`` outside the canvas are
    skipped with a warning. Duplicate ids keep the first occurrence.
    """
    if isinstance(document, (str, bytes)):
        raw = json.loads(document)
    elif hasattr(document, "read"):
        raw = json.load(document)
    else:
        raw = document
    if not isinstance(raw, list):
        raise IngestError("atlas document must be a JSON array of entries")

    entries: list[AtlasEntry] = []
    seen: set[str] = set()
    for item in raw:
        entry_id = str(item.get("id", "")).strip()
        if not entry_id:
            log.warning("parse_atlas: entry without id skipped")
            continue
        if entry_id in seen:
            log.warning("parse_atlas: duplicate id %s, keeping first", entry_id)
            continue
        polygons = _extract_polygons(item, entry_id, width, height, margin)
        if polygons is None:
            continue
        seen.add(entry_id)
        entries.append(
            AtlasEntry(
                id=entry_id,
                name=str(item.get("name", "")),
                subreddits=_extract_subreddits(item),
                polygons=polygons,
            )
        )
    return entries


def _extract_polygons(item, entry_id, width, height, margin):
    paths = item.get("paths") if "paths" in item else [item.get("path")]
    if not paths or paths == [None]:
        log.warning("parse_atlas: entry %s has no path, skipped", entry_id)
        return None
    polygons = []
    for path in paths:
        cleaned = []
        for vertex in path or ():
            try:
                vx, vy = float(vertex[0]), float(vertex[1])
            except (TypeError, ValueError, IndexError):
                log.warning("parse_atlas: entry %s has a non-numeric vertex, skipped", entry_id)
                return None
            if not (-margin <= vx <= width + margin and -margin <= vy <= height + margin):
                log.warning("parse_atlas: entry %s vertex out of bounds, skipped", entry_id)
                return None
            cleaned.append((vx, vy))
        if len(cleaned) >= 3:
            polygons.append(tuple(cleaned))
    if not polygons:
        log.warning("parse_atlas: entry %s has no polygon with >=3 vertices, skipped", entry_id)
        return None
    return tuple(polygons)


def _extract_subreddits(item) -> tuple[str, ...]:
    raw: list[str] = []
    if isinstance(item.get("subreddits"), (list, tuple)):
        raw.extend(item["subreddits"])
    links = item.get("links")
    if isinstance(links, dict):
        raw.extend(links.get("subreddit", ()))
    elif isinstance(links, (list, tuple)):
        raw.extend(links)
    if isinstance(item.get("subreddit"), str):
        raw.extend(item["subreddit"].split(","))
    out: list[str] = []
    for name in raw:
        norm = normalize_community(name)
        if norm and norm not in out:
            out.append(norm)
    return tuple(out)


# ---------------------------------------------------------------------------
# Content
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContentItem:
    kind: str  # "submission" | "comment"
    id: str
    parent_id: str | None
    author: str
    community: str
    created: float  # epoch seconds
    text: str
    score: int
    removed: bool


class ParsedContent(Sequence):
    """Window-filtered content items plus drop counters."""

    def __init__(self, items, n_skipped=0, n_out_of_window=0):
        self.items: list[ContentItem] = list(items)
        self.n_skipped = n_skipped
        self.n_out_of_window = n_out_of_window

    def __len__(self):
        return len(self.items)

    def __getitem__(self, idx):
        return self.items[idx]


def parse_content(stream, window: TimeWindow | None = None) -> ParsedContent:
    """Parse JSON-lines content, keeping items whose creation time is in window.

    Unparseable lines, unknown kinds, and comments without a parent are
    skipped and counted; out-of-window items are counted separately.
    """
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream.decode() if isinstance(stream, bytes) else stream)
    items: list[ContentItem] = []
    n_skipped = 0
    n_out = 0
    for line in stream:
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            item = _content_item(obj)
        except (ValueError, KeyError, TypeError):
            n_skipped += 1
            continue
        if item is None:
            n_skipped += 1
            continue
        if window is not None and not window.contains_s(item.created):
            n_out += 1
            continue
        items.append(item)
    return ParsedContent(items, n_skipped=n_skipped, n_out_of_window=n_out)


def _content_item(obj) -> ContentItem | None:
    kind = obj.get("kind")
    if kind == "submission":
        title = str(obj.get("title", ""))
        selftext = obj.get("selftext")
        text = title if not selftext else f"{title}\n{selftext}"
        if "removed" in obj:
            removed = bool(obj["removed"])
        else:
            removed = selftext == REMOVAL_SENTINEL
        parent = None
    elif kind == "comment":
        if not obj.get("parent_id"):
            return None
        body = str(obj.get("body", ""))
        text = body
        removed = body == REMOVAL_SENTINEL
        parent = str(obj["parent_id"])
    else:
        return None
    return ContentItem(
        kind=kind,
        id=str(obj["id"]),
        parent_id=parent,
        author=str(obj.get("author", "")),
        community=normalize_community(obj["subreddit"]),
        created=float(obj["created_utc"]),
        text=text,
        score=int(obj.get("score", 0)),
        removed=removed,
    )


# ---------------------------------------------------------------------------
# Community metadata
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommunityMeta:
    name: str
    size: int  # subscriber count
    created: float  # epoch seconds


def parse_community_meta(source) -> dict[str, CommunityMeta]:
    """CSV name,subscribers,created_utc keyed by normalized community name."""
    frame = pd.read_csv(source)
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    required = {"name", "subscribers", "created_utc"}
    missing = required - set(frame.columns)
    if missing:
        raise IngestError(f"community metadata is missing column(s): {sorted(missing)}")
    out: dict[str, CommunityMeta] = {}
    for row in frame.itertuples(index=False):
        name = normalize_community(getattr(row, "name"))
        size = int(getattr(row, "subscribers"))
        if size < 0:
            log.warning("parse_community_meta: negative size for %s, skipped", name)
            continue
        if name not in out:
            out[name] = CommunityMeta(name=name, size=size, created=float(getattr(row, "created_utc")))
    return out


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingTable:
    name: str
    dim: int
    vectors: dict[str, np.ndarray] = field(repr=False)

    def get(self, community: str) -> np.ndarray | None:
        return self.vectors.get(normalize_community(community))


def load_embeddings(source, name: str) -> EmbeddingTable:
    """Load a TSV of ``community\\tv1...vd`` rows; ragged rows are fatal."""
    if isinstance(source, (str, bytes)) and "\t" not in str(source):
        with open(source, "r", encoding="utf-8") as handle:
            return load_embeddings(handle, name)
    if isinstance(source, str):
        source = io.StringIO(source)
    vectors: dict[str, np.ndarray] = {}
    dim = None
    for lineno, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        community = normalize_community(parts[0])
        try:
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise IngestError(f"embedding table {name}: bad value on line {lineno}") from exc
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise IngestError(
                f"embedding table {name}: ragged row on line {lineno} "
                f"({vec.shape[0]} values, expected {dim})"
            )
        vectors.setdefault(community, vec)
    return EmbeddingTable(name=name, dim=dim or 0, vectors=vectors)


# ---------------------------------------------------------------------------
# Category dictionary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CategoryDictionary:
    """Word-pattern to category mapping in the %-delimited dictionary layout."""

    categories: dict[str, str]  # id -> name
    entries: dict[str, frozenset[str]]  # pattern -> category ids

    def category_names(self) -> list[str]:
        return sorted(set(self.categories.values()))

    def match(self, token: str) -> set[str]:
        """Category names whose patterns match the token (prefix for ``*``)."""
        hit_ids: set[str] = set()
        exact = self.entries.get(token)
        if exact:
            hit_ids |= exact
        for length in range(len(token), 0, -1):
            ids = self.entries.get(token[:length] + "*")
            if ids:
                hit_ids |= ids
        return {self.categories[i] for i in hit_ids}


def load_category_dictionary(source) -> CategoryDictionary:
    """Parse a ``%``-delimited dictionary: category block, then word rows."""
    if isinstance(source, (str, bytes)) and "\n" not in str(source):
        with open(source, "r", encoding="utf-8") as handle:
            return load_category_dictionary(handle)
    if isinstance(source, str):
        source = io.StringIO(source)
    lines = [ln.rstrip("\n") for ln in source]

    categories: dict[str, str] = {}
    entries: dict[str, frozenset[str]] = {}
    in_header = False
    header_done = False
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped == "%":
            if not in_header and not header_done:
                in_header = True
            elif in_header:
                in_header = False
                header_done = True
            continue
        parts = stripped.split()
        if in_header:
            if len(parts) < 2:
                raise IngestError(f"category dictionary: bad category row on line {lineno}")
            categories[parts[0]] = parts[1].lower()
        else:
            if not header_done:
                raise IngestError("category dictionary: word rows before category block")
            pattern = parts[0].lower()
            ids = frozenset(parts[1:])
            unknown = ids - categories.keys()
            if unknown:
                raise IngestError(
                    f"category dictionary: line {lineno} references undeclared "
                    f"category id(s) {sorted(unknown)}"
                )
            entries[pattern] = entries.get(pattern, frozenset()) | ids
    return CategoryDictionary(categories=categories, entries=entries)
