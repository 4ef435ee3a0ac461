"""Canvas state reconstruction from the placement log.

``replay`` applies last-writer-wins over a dense palette-index grid;
``accumulate_activity`` counts placements per cell. Both take the
timestamp-sorted log produced by :mod:`placelab.ingest`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import kernels
from .ingest import PALETTE_SIZE, PlacementLog
from .windows import TimeWindow


class ReplayError(ValueError):
    pass


@dataclass(frozen=True)
class Palette:
    """Palette-index to RGB mapping; the white entry is the background."""

    colors: np.ndarray  # (n, 3) uint8
    background: int

    @property
    def size(self) -> int:
        return self.colors.shape[0]


def load_palette(source) -> Palette:
    """Load a CSV of index,r,g,b rows. Background is the (255,255,255) entry."""
    frame = pd.read_csv(source)
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    missing = {"index", "r", "g", "b"} - set(frame.columns)
    if missing:
        raise ValueError(f"palette file is missing column(s): {sorted(missing)}")
    n = int(frame["index"].max()) + 1
    colors = np.zeros((n, 3), dtype=np.uint8)
    seen = np.zeros(n, dtype=bool)
    for row in frame.itertuples(index=False):
        idx = int(getattr(row, "index"))
        colors[idx] = (int(row.r), int(row.g), int(row.b))
        seen[idx] = True
    if not seen.all():
        raise ValueError(f"palette file has gaps at indices {np.flatnonzero(~seen).tolist()}")
    white = np.flatnonzero((colors == 255).all(axis=1))
    if white.size == 0:
        raise ValueError("palette file has no white (255,255,255) entry for the background")
    return Palette(colors=colors, background=int(white[0]))


@dataclass(frozen=True)
class Canvas:
    width: int
    height: int
    cells: np.ndarray  # (height, width) palette indices
    as_of: int  # epoch milliseconds

    def color_at(self, x: int, y: int) -> int:
        return int(self.cells[y, x])


@dataclass(frozen=True)
class CellActivity:
    width: int
    height: int
    counts: np.ndarray  # (height, width) int32
    window: tuple[int, int]  # [t_start, t_end] in epoch milliseconds

    def count_at(self, x: int, y: int) -> int:
        return int(self.counts[y, x])

    @property
    def total(self) -> int:
        return int(self.counts.sum(dtype=np.int64))


def replay(
    events: PlacementLog,
    until_ts: int,
    *,
    width: int = 1000,
    height: int = 1000,
    background: int = 0,
) -> Canvas:
    """Reconstruct the canvas as of ``until_ts`` (inclusive).

    Each cell ends at the color of its last event with ts <= until_ts; cells
    with no event stay at the background index. Equal timestamps at one cell
    resolve in input order, which the stable upstream sort preserves.
    """
    if not events.is_sorted():
        raise ReplayError("placement events must be sorted ascending by ts")
    grid = np.full((height, width), background, dtype=np.uint8)
    cutoff = int(np.searchsorted(events.ts, until_ts, side="right"))
    kernels.replay(events.x[:cutoff], events.y[:cutoff], events.color[:cutoff], grid)
    return Canvas(width=width, height=height, cells=grid, as_of=int(until_ts))


def accumulate_activity(
    events: PlacementLog,
    window: TimeWindow | tuple[int, int],
    *,
    width: int = 1000,
    height: int = 1000,
) -> CellActivity:
    """Count in-window placements per cell; empty windows give all zeros."""
    if not events.is_sorted():
        raise ReplayError("placement events must be sorted ascending by ts")
    if isinstance(window, TimeWindow):
        t_start, t_end = window.start_ms, window.end_ms
    else:
        t_start, t_end = int(window[0]), int(window[1])
    counts = np.zeros((height, width), dtype=np.int32)
    if t_start <= t_end:
        lo = int(np.searchsorted(events.ts, t_start, side="left"))
        hi = int(np.searchsorted(events.ts, t_end, side="right"))
        kernels.accumulate(events.x[lo:hi], events.y[lo:hi], counts)
    return CellActivity(width=width, height=height, counts=counts, window=(t_start, t_end))


def export_snapshot(canvas: Canvas, palette: Palette, path) -> None:
    """Write the canvas as a lossless raster image (PNG or binary PPM)."""
    if int(canvas.cells.max(initial=0)) >= palette.size:
        raise ValueError(
            f"canvas holds palette index {int(canvas.cells.max())} "
            f"but the palette has only {palette.size} entries"
        )
    rgb = palette.colors[canvas.cells]
    path = str(path)
    if path.lower().endswith((".ppm", ".pnm")):
        header = f"P6\n{canvas.width} {canvas.height}\n255\n".encode("ascii")
        with open(path, "wb") as handle:
            handle.write(header)
            handle.write(rgb.tobytes())
    else:
        from PIL import Image

        Image.fromarray(rgb, mode="RGB").save(path, format="PNG")


def decode_snapshot(path, palette: Palette) -> np.ndarray:
    """Read a snapshot image back into palette indices; -1 for unknown colors."""
    from PIL import Image

    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"))
    lookup = {tuple(c): i for i, c in enumerate(palette.colors.tolist())}
    flat = rgb.reshape(-1, 3)
    out = np.full(flat.shape[0], -1, dtype=np.int16)
    packed = flat[:, 0].astype(np.int32) << 16 | flat[:, 1].astype(np.int32) << 8 | flat[:, 2]
    for (r, g, b), idx in lookup.items():
        out[packed == (r << 16 | g << 8 | b)] = idx
    return out.reshape(rgb.shape[0], rgb.shape[1])


def _require_16_colors(palette: Palette) -> None:
    if palette.size != PALETTE_SIZE:
        raise ValueError(f"expected a {PALETTE_SIZE}-entry palette, got {palette.size}")
