"""Pipeline configuration: a single JSON document with validated defaults."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .features.assemble import BLOCK_NAMES, IMPUTATION_POLICIES
from .labels import DEFAULT_ALPHA, DEFAULT_MIN_PIXELS, MEASURES
from .windows import TimeWindow, default_windows

TARGETS = ("binary",) + MEASURES


@dataclass(frozen=True)
class Problem:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass
class PipelineConfig:
    out_dir: Path
    paths: dict[str, Path | None]
    embeddings: list[dict]  # {"name", "window", "path"}
    windows: dict[str, TimeWindow]
    canvas_width: int = 1000
    canvas_height: int = 1000
    alpha: float = DEFAULT_ALPHA
    min_pixels: int = DEFAULT_MIN_PIXELS
    blocks: tuple[str, ...] = ("meta", "network", "bow", "categories")
    max_vocab: int = 5000
    min_df: int = 5
    imputation: str = "zero_indicator"
    model_params: dict = field(default_factory=dict)
    eval_k: int = 5
    eval_seed: int = 7
    targets: tuple[str, ...] = TARGETS
    eval_windows: tuple[str, ...] = ("bp", "dp")
    ablations: bool = True
    log_targets: bool = True  # log1p-transform continuous regression targets
    bounds_policy: str = "skip"

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle), base_dir=Path(path).resolve().parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "PipelineConfig":
        base = Path(base_dir) if base_dir else Path.cwd()

        def _path(value):
            if value is None:
                return None
            p = Path(value)
            return p if p.is_absolute() else base / p

        paths = {
            key: _path(raw.get("paths", {}).get(key))
            for key in (
                "placements", "atlas", "content", "meta", "palette",
                "category_dictionary", "annotations", "reference_image",
            )
        }
        windows = default_windows()
        for name, pair in raw.get("windows", {}).items():
            windows[name] = TimeWindow.parse(pair)
        features = raw.get("features", {})
        ev = raw.get("eval", {})
        labels = raw.get("labels", {})
        canvas = raw.get("canvas", {})
        return cls(
            out_dir=_path(raw.get("out_dir", "out")),
            paths=paths,
            embeddings=[
                {
                    "name": str(e.get("name", "")),
                    "window": str(e.get("window", "any")),
                    "path": _path(e.get("path")),
                }
                for e in raw.get("embeddings", [])
            ],
            windows=windows,
            canvas_width=int(canvas.get("width", 1000)),
            canvas_height=int(canvas.get("height", 1000)),
            alpha=float(labels.get("alpha", DEFAULT_ALPHA)),
            min_pixels=int(labels.get("min_pixels", DEFAULT_MIN_PIXELS)),
            blocks=tuple(features.get("blocks", ("meta", "network", "bow", "categories"))),
            max_vocab=int(features.get("max_vocab", 5000)),
            min_df=int(features.get("min_df", 5)),
            imputation=str(features.get("imputation", "zero_indicator")),
            model_params=dict(raw.get("models", {}).get("gbt", {})),
            eval_k=int(ev.get("k", 5)),
            eval_seed=int(ev.get("seed", 7)),
            targets=tuple(ev.get("targets", TARGETS)),
            eval_windows=tuple(ev.get("windows", ("bp", "dp"))),
            ablations=bool(ev.get("ablations", True)),
            log_targets=bool(ev.get("log_targets", True)),
            bounds_policy=str(raw.get("bounds_policy", "skip")),
        )

    def palette_path(self) -> Path:
        if self.paths.get("palette"):
            return self.paths["palette"]
        return Path(str(resources.files("placelab") / "data" / "palette_2017.csv"))

    def embedding_blocks(self) -> set[str]:
        return {e["name"] for e in self.embeddings}


def validate(config: PipelineConfig) -> list[Problem]:
    """Machine-readable configuration checks; empty means runnable."""
    problems: list[Problem] = []

    for key in ("placements", "atlas", "content", "meta"):
        path = config.paths.get(key)
        if path is None:
            problems.append(Problem("MISSING_PATH", f"required input path not set: {key}"))
        elif not Path(path).exists():
            problems.append(Problem("MISSING_PATH", f"{key} path does not exist: {path}"))
    for key in ("palette", "category_dictionary", "annotations", "reference_image"):
        path = config.paths.get(key)
        if path is not None and not Path(path).exists():
            problems.append(Problem("MISSING_PATH", f"{key} path does not exist: {path}"))
    for emb in config.embeddings:
        if emb["path"] is None or not Path(emb["path"]).exists():
            problems.append(
                Problem("MISSING_PATH", f"embedding {emb['name']} path does not exist: {emb['path']}")
            )
        if emb["window"] not in ("bp", "dp", "any"):
            problems.append(
                Problem("EMBEDDING_WINDOW", f"embedding {emb['name']} has window {emb['window']!r}")
            )

    bp, dp = config.windows.get("bp"), config.windows.get("dp")
    for name, win in (("bp", bp), ("dp", dp)):
        if win is None:
            problems.append(Problem("WINDOW_MISSING", f"window {name} is not configured"))
        elif win.start > win.end:
            problems.append(Problem("WINDOW_ORDER", f"window {name} starts after it ends"))
    if bp and dp and bp.start <= bp.end and dp.start <= dp.end and bp.overlaps(dp):
        problems.append(Problem("WINDOW_OVERLAP", "bp and dp windows overlap"))

    if not 0.0 < config.alpha < 1.0:
        problems.append(Problem("ALPHA_RANGE", f"alpha must be in (0, 1), got {config.alpha}"))
    if config.min_pixels < 1:
        problems.append(Problem("MIN_PIXELS_RANGE", f"min_pixels must be >= 1, got {config.min_pixels}"))
    if config.eval_k < 2:
        problems.append(Problem("K_RANGE", f"eval k must be >= 2, got {config.eval_k}"))
    if config.canvas_width < 1 or config.canvas_height < 1:
        problems.append(Problem("CANVAS_SIZE", "canvas dimensions must be positive"))

    known_blocks = set(BLOCK_NAMES)
    for block in config.blocks:
        if block not in known_blocks:
            problems.append(Problem("BLOCK_UNKNOWN", f"unknown feature block: {block}"))
        elif block in ("snap", "com2vec", "graph2vec") and block not in config.embedding_blocks():
            problems.append(
                Problem("BLOCK_UNKNOWN", f"embedding block {block} has no configured table")
            )
    if "categories" in config.blocks and config.paths.get("category_dictionary") is None:
        problems.append(
            Problem("MISSING_PATH", "categories block requires paths.category_dictionary")
        )
    if config.imputation not in IMPUTATION_POLICIES:
        problems.append(Problem("IMPUTATION_UNKNOWN", f"unknown imputation: {config.imputation}"))
    for target in config.targets:
        if target not in TARGETS:
            problems.append(Problem("TARGET_UNKNOWN", f"unknown target: {target}"))
    for window in config.eval_windows:
        if window not in ("bp", "dp"):
            problems.append(Problem("WINDOW_UNKNOWN", f"unknown eval window: {window}"))
    if config.bounds_policy not in ("skip", "strict"):
        problems.append(Problem("BOUNDS_POLICY", f"unknown bounds policy: {config.bounds_policy}"))
    return problems
