"""Pixel masks and per-artwork measurements.

Atlas entries store polygon outlines; the paper-facing quantities (pixel
count, Manhattan diameter, color entropy, location popularity) are computed
on rasterized masks against the final canvas and the activity grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .canvas import Canvas, CellActivity
from .ingest import AtlasEntry

log = logging.getLogger(__name__)


class DegenerateArtworkError(ValueError):
    """Raised when an artwork rasterizes to no canvas cells."""


@dataclass(frozen=True)
class PixelMask:
    pixels: frozenset  # of (x, y) int pairs

    def __len__(self):
        return len(self.pixels)

    def arrays(self):
        xs = np.fromiter((p[0] for p in self.pixels), dtype=np.int64, count=len(self.pixels))
        ys = np.fromiter((p[1] for p in self.pixels), dtype=np.int64, count=len(self.pixels))
        return xs, ys

    def union(self, other: "PixelMask") -> "PixelMask":
        return PixelMask(self.pixels | other.pixels)


@dataclass(frozen=True)
class ArtworkMetrics:
    pixel_count: int
    diameter: int
    entropy: float  # bits
    popularity: float  # placements per mask pixel


def rasterize(polygons, *, width: int = 1000, height: int = 1000) -> PixelMask:
    """Union of lattice points covered by each polygon.

    A point counts as covered when it is strictly inside under the even-odd
    rule or exactly on a polygon edge. The result is clipped to the canvas;
    an empty result is a degenerate artwork and raises.
    """
    hits: set = set()
    for polygon in polygons:
        if len(polygon) < 3:
            raise ValueError("polygons must have at least 3 vertices")
        px = np.array([v[0] for v in polygon], dtype=np.float64)
        py = np.array([v[1] for v in polygon], dtype=np.float64)
        x0 = max(0, int(math.ceil(px.min() - 1e-9)))
        x1 = min(width - 1, int(math.floor(px.max() + 1e-9)))
        y0 = max(0, int(math.ceil(py.min() - 1e-9)))
        y1 = min(height - 1, int(math.floor(py.max() + 1e-9)))
        if x0 > x1 or y0 > y1:
            continue
        grid = kernels.polygon_hits(px, py, x0, y0, x1 - x0 + 1, y1 - y0 + 1)
        ys, xs = np.nonzero(grid)
        hits.update(zip((xs + x0).tolist(), (ys + y0).tolist()))
    if not hits:
        raise DegenerateArtworkError("artwork rasterizes to an empty mask")
    return PixelMask(frozenset(hits))


def manhattan_diameter(mask: PixelMask) -> int:
    """Max L1 distance between mask pixels, via the rotated-coordinate extrema."""
    if not mask.pixels:
        raise ValueError("mask is empty")
    xs, ys = mask.arrays()
    s = xs + ys
    d = xs - ys
    return int(max(s.max() - s.min(), d.max() - d.min()))


def color_entropy(mask: PixelMask, canvas: Canvas) -> float:
    """Shannon entropy (bits) of the color distribution over the mask."""
    if not mask.pixels:
        raise ValueError("mask is empty")
    xs, ys = mask.arrays()
    colors = canvas.cells[ys, xs]
    counts = np.bincount(colors)
    probs = counts[counts > 0] / colors.shape[0]
    return float(-(probs * np.log2(probs)).sum())


def location_popularity(mask: PixelMask, activity: CellActivity) -> float:
    """Total placements on the mask divided by the mask size."""
    if not mask.pixels:
        raise ValueError("mask is empty")
    xs, ys = mask.arrays()
    return float(activity.counts[ys, xs].sum(dtype=np.int64)) / len(mask.pixels)


def measure(mask: PixelMask, canvas: Canvas, activity: CellActivity) -> ArtworkMetrics:
    return ArtworkMetrics(
        pixel_count=len(mask.pixels),
        diameter=manhattan_diameter(mask),
        entropy=color_entropy(mask, canvas),
        popularity=location_popularity(mask, activity),
    )


def measure_entry(entry: AtlasEntry, canvas: Canvas, activity: CellActivity) -> ArtworkMetrics:
    mask = rasterize(entry.polygons, width=canvas.width, height=canvas.height)
    return measure(mask, canvas, activity)


def masks_by_community(entries, *, width: int = 1000, height: int = 1000) -> dict[str, PixelMask]:
    """Union mask per community; entries naming several communities count for each.

    Entries that rasterize to nothing are skipped with a warning, as are
    entries with no community link.
    """
    masks: dict[str, PixelMask] = {}
    for entry in entries:
        if not entry.subreddits:
            continue
        try:
            mask = rasterize(entry.polygons, width=width, height=height)
        except DegenerateArtworkError:
            log.warning("atlas entry %s rasterizes to an empty mask, skipped", entry.id)
            continue
        for community in entry.subreddits:
            masks[community] = masks[community].union(mask) if community in masks else mask
    return masks


def measure_all(
    masks: dict[str, PixelMask], canvas: Canvas, activity: CellActivity
) -> dict[str, ArtworkMetrics]:
    return {name: measure(mask, canvas, activity) for name, mask in sorted(masks.items())}
