"""Random contrast augmentation: gamma, log, sigmoid and CLAHE transforms.

Each transform maps [0, 1] to [0, 1]; a random application records its
parameter draw so any sample can be replayed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .imagecore import Slice2D


class AugKind(str, Enum):
    GAMMA = "gamma"
    LOG = "log"
    SIGMOID = "sigmoid"
    ADAPTIVE_HIST = "adaptive_hist"
    NONE = "none"


GAMMA_RANGE = (0.25, 4.0)
LOG_GAIN_RANGE = (0.0, 2.0)  # half-open: gain drawn in (0, 2]
SIGMOID_CUTOFF_RANGE = (0.3, 0.7)
SIGMOID_GAIN_RANGE = (3.0, 12.0)
CLAHE_CLIP_RANGE = (0.005, 0.05)
CLAHE_TILE_CHOICES = (4, 8, 16)
CLAHE_BINS = 256


@dataclass(frozen=True)
class AugRecord:
    """Provenance of one augmentation: which transform, which parameters."""

    kind: AugKind
    params: dict[str, float]
    seed: int = 0

    def to_json_dict(self) -> dict:
        return {"kind": self.kind.value, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_json_dict(cls, d: dict) -> "AugRecord":
        return cls(kind=AugKind(d["kind"]), params=dict(d["params"]), seed=int(d.get("seed", 0)))


def gamma_adjust(s: Slice2D, gamma: float) -> Slice2D:
    """Pixelwise power law p -> p**gamma."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    return Slice2D(np.power(s.pixels, gamma))


def log_adjust(s: Slice2D, gain: float) -> Slice2D:
    """p -> clip(gain * log2(1 + p), 0, 1)."""
    if not 0 < gain <= LOG_GAIN_RANGE[1]:
        raise ValueError(f"log gain must be in (0, {LOG_GAIN_RANGE[1]}], got {gain}")
    return Slice2D(np.clip(gain * np.log2(1.0 + s.pixels), 0.0, 1.0))


def sigmoid_adjust(s: Slice2D, cutoff: float, gain: float) -> Slice2D:
    """p -> 1 / (1 + exp(gain * (cutoff - p)))."""
    if not SIGMOID_CUTOFF_RANGE[0] <= cutoff <= SIGMOID_CUTOFF_RANGE[1]:
        raise ValueError(f"sigmoid cutoff must be in {SIGMOID_CUTOFF_RANGE}, got {cutoff}")
    if not SIGMOID_GAIN_RANGE[0] <= gain <= SIGMOID_GAIN_RANGE[1]:
        raise ValueError(f"sigmoid gain must be in {SIGMOID_GAIN_RANGE}, got {gain}")
    return Slice2D(1.0 / (1.0 + np.exp(gain * (cutoff - s.pixels))))


def _tile_edges(n: int, tiles: int) -> np.ndarray:
    # equal tiles of floor(n/tiles); the last tile extends to the image edge
    base = n // tiles
    edges = np.arange(tiles + 1) * base
    edges[-1] = n
    return edges


def adaptive_hist(s: Slice2D, clip_limit: float, tiles: int) -> Slice2D:
    """Contrast-limited adaptive histogram equalization.

    Per-tile 256-bin histograms are clipped at clip_limit * tile_pixels with
    the excess redistributed uniformly; each pixel is remapped through a
    bilinear blend of the four nearest tile mappings. tiles=1 degenerates to
    plain (clipped) global histogram equalization.
    """
    if not 0 < clip_limit <= 1.0:
        raise ValueError(f"clip limit must be in (0, 1], got {clip_limit}")
    if tiles < 1:
        raise ValueError(f"tile count must be >= 1, got {tiles}")
    h, w = s.pixels.shape
    if h < tiles or w < tiles:
        raise ValueError(f"image {h}x{w} smaller than a {tiles}x{tiles} tile grid")

    q = np.minimum((s.pixels * CLAHE_BINS).astype(np.intp), CLAHE_BINS - 1)
    row_edges = _tile_edges(h, tiles)
    col_edges = _tile_edges(w, tiles)

    mappings = np.empty((tiles, tiles, CLAHE_BINS), dtype=np.float64)
    for i in range(tiles):
        for j in range(tiles):
            tile = q[row_edges[i]:row_edges[i + 1], col_edges[j]:col_edges[j + 1]]
            npix = tile.size
            hist = np.bincount(tile.ravel(), minlength=CLAHE_BINS).astype(np.float64)
            clip = max(clip_limit * npix, 1.0)
            excess = float(np.maximum(hist - clip, 0.0).sum())
            hist = np.minimum(hist, clip) + excess / CLAHE_BINS
            # pixel -> its tile quantile; clip guards cumsum float spill
            mappings[i, j] = np.clip(np.cumsum(hist) / npix, 0.0, 1.0)

    if tiles == 1:
        return Slice2D(mappings[0, 0][q])

    # blend between the mappings of the four surrounding tile centers
    row_centers = (row_edges[:-1] + row_edges[1:] - 1) / 2.0
    col_centers = (col_edges[:-1] + col_edges[1:] - 1) / 2.0

    def _axis_blend(coords, centers):
        hi = np.clip(np.searchsorted(centers, coords), 1, tiles - 1)
        lo = hi - 1
        t = np.clip((coords - centers[lo]) / (centers[hi] - centers[lo]), 0.0, 1.0)
        return lo, hi, t

    r_lo, r_hi, tr = _axis_blend(np.arange(h, dtype=np.float64), row_centers)
    c_lo, c_hi, tc = _axis_blend(np.arange(w, dtype=np.float64), col_centers)

    v00 = mappings[r_lo[:, None], c_lo[None, :], q]
    v01 = mappings[r_lo[:, None], c_hi[None, :], q]
    v10 = mappings[r_hi[:, None], c_lo[None, :], q]
    v11 = mappings[r_hi[:, None], c_hi[None, :], q]
    top = v00 * (1 - tc)[None, :] + v01 * tc[None, :]
    bot = v10 * (1 - tc)[None, :] + v11 * tc[None, :]
    out = top * (1 - tr)[:, None] + bot * tr[:, None]
    return Slice2D(np.clip(out, 0.0, 1.0))


def apply_record(s: Slice2D, record: AugRecord) -> Slice2D:
    """Replay a recorded augmentation on a slice."""
    p = record.params
    if record.kind is AugKind.NONE:
        return s
    if record.kind is AugKind.GAMMA:
        return gamma_adjust(s, p["gamma"])
    if record.kind is AugKind.LOG:
        return log_adjust(s, p["gain"])
    if record.kind is AugKind.SIGMOID:
        return sigmoid_adjust(s, p["cutoff"], p["gain"])
    if record.kind is AugKind.ADAPTIVE_HIST:
        return adaptive_hist(s, p["clip_limit"], int(p["tiles"]))
    raise ValueError(f"unknown augmentation kind {record.kind!r}")


def draw_record(
    rng: np.random.Generator,
    kind: AugKind | None = None,
    seed: int = 0,
) -> AugRecord:
    """Draw a random augmentation record: kind uniform over the four
    transforms unless forced, then uniform parameters inside the configured
    ranges, in the transform's argument order."""
    if kind is None:
        kinds = (AugKind.GAMMA, AugKind.LOG, AugKind.SIGMOID, AugKind.ADAPTIVE_HIST)
        kind = kinds[int(rng.integers(0, len(kinds)))]
    if kind is AugKind.NONE:
        return AugRecord(AugKind.NONE, {}, seed=seed)
    if kind is AugKind.GAMMA:
        params = {"gamma": float(rng.uniform(*GAMMA_RANGE))}
    elif kind is AugKind.LOG:
        # uniform over (0, 2]: mirror the draw so the open end is at zero
        params = {"gain": LOG_GAIN_RANGE[1] - float(rng.uniform(0.0, LOG_GAIN_RANGE[1]))}
    elif kind is AugKind.SIGMOID:
        params = {
            "cutoff": float(rng.uniform(*SIGMOID_CUTOFF_RANGE)),
            "gain": float(rng.uniform(*SIGMOID_GAIN_RANGE)),
        }
    else:
        params = {
            "clip_limit": float(rng.uniform(*CLAHE_CLIP_RANGE)),
            "tiles": float(CLAHE_TILE_CHOICES[int(rng.integers(0, len(CLAHE_TILE_CHOICES)))]),
        }
    return AugRecord(kind, params, seed=seed)


def random_augment(
    s: Slice2D,
    rng: np.random.Generator,
    enabled: bool = True,
    seed: int = 0,
) -> tuple[Slice2D, AugRecord]:
    """Apply one of the four transforms, drawn uniformly.

    Disabled augmentation consumes no draws and passes the slice through.
    """
    if not enabled:
        return s, AugRecord(AugKind.NONE, {}, seed=seed)
    record = draw_record(rng, seed=seed)
    return apply_record(s, record), record
