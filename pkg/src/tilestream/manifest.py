"""Self-describing per-video manifest: layout, ladder and per-chunk tile tables."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .flowfield import InputError
from .qoe import QualityLadder, TileScoreGrid
from .tiling import TileLayout, TileRect, fixed_grid_layout

MANIFEST_VERSION = 1
VERSATILE = "versatile"
FIXED = "fixed"


@dataclass
class ChunkTables:
    """Per-cell tables for one chunk, each ``(rows, cols, levels)``.

    ``psnr_of`` is the JND-masked score, ``psnr`` the unmasked one.
    """

    psnr_of: np.ndarray
    psnr: np.ndarray
    sizes: np.ndarray

    def grid(self, masked: bool = True, ladder=None) -> TileScoreGrid:
        return TileScoreGrid(self.psnr_of if masked else self.psnr, self.sizes, ladder or QualityLadder())


@dataclass
class VideoManifest:
    video_id: str
    chunk_duration: float
    layout: TileLayout
    chunks: list
    ladder: QualityLadder = field(default_factory=QualityLadder)
    _prepared: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def chunk_count(self) -> int:
        return len(self.chunks)

    @property
    def duration(self) -> float:
        return self.chunk_count * self.chunk_duration

    def validate(self):
        self.layout.validate()
        for c in self.chunks:
            for grid in (c.grid(True, self.ladder), c.grid(False, self.ladder)):
                if grid.scores.shape[:2] != (self.layout.rows, self.layout.cols):
                    raise InputError("chunk grid does not match layout dimensions")
                grid.validate()

    def prepared(self, scheme: str = VERSATILE):
        """Cached per-scheme lookup tables used by the simulator."""
        if scheme not in self._prepared:
            from .sim.session import PreparedVideo

            self._prepared[scheme] = PreparedVideo.build(self, scheme)
        return self._prepared[scheme]

    def to_json(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "video_id": self.video_id,
            "chunk_count": self.chunk_count,
            "chunk_duration": self.chunk_duration,
            "ladder": list(self.ladder.levels),
            "layout": layout_to_json(self.layout),
            "chunks": [
                {"psnr_of": c.psnr_of.tolist(), "psnr": c.psnr.tolist(), "sizes": c.sizes.astype(int).tolist()}
                for c in self.chunks
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "VideoManifest":
        if doc.get("version") != MANIFEST_VERSION:
            raise InputError(f"unsupported manifest version {doc.get('version')}")
        chunks = [
            ChunkTables(np.asarray(c["psnr_of"], dtype=np.float64), np.asarray(c["psnr"], dtype=np.float64),
                        np.asarray(c["sizes"], dtype=np.int64))
            for c in doc["chunks"]
        ]
        if len(chunks) != doc["chunk_count"]:
            raise InputError("chunk_count disagrees with chunk list")
        m = cls(doc["video_id"], float(doc["chunk_duration"]), layout_from_json(doc["layout"]), chunks,
                QualityLadder(tuple(doc["ladder"])))
        m.validate()
        return m

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path) -> "VideoManifest":
        with open(path) as f:
            return cls.from_json(json.load(f))


def layout_to_json(layout: TileLayout) -> dict:
    return {"rows": layout.rows, "cols": layout.cols, "K": layout.K,
            "rects": [{"x1": r.x1, "x2": r.x2, "y1": r.y1, "y2": r.y2} for r in layout.rects]}


def layout_from_json(doc: dict) -> TileLayout:
    layout = TileLayout([TileRect(r["x1"], r["x2"], r["y1"], r["y2"]) for r in doc["rects"]],
                        int(doc["K"]), int(doc["rows"]), int(doc["cols"]))
    layout.validate()
    return layout


def scheme_layout(manifest: VideoManifest, scheme: str) -> TileLayout:
    if scheme == VERSATILE:
        return manifest.layout
    if scheme == FIXED:
        return fixed_grid_layout(manifest.layout.rows, manifest.layout.cols)
    raise InputError(f"unknown tiling scheme {scheme!r}")
