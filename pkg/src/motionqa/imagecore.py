"""Volume/slice data model, intensity normalization and spatial conformance.

Slices are the unit of corruption and scoring: 2D grayscale images
normalized to [0, 1], conformed to the 256x256 network input size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NETWORK_INPUT_SIZE = 256
# spacing ratio above which a volume counts as anisotropic
ISOTROPY_TOLERANCE = 1.1
# fraction of slices eligible for sampling (edge slices are mostly air)
CENTRAL_FRACTION = 0.8
MIN_VOLUME_DIM = 8


@dataclass(frozen=True)
class SliceRef:
    """Location of a slice inside a source volume."""

    volume_id: str
    axis: int
    index: int

    def __post_init__(self) -> None:
        if self.axis not in (0, 1, 2):
            raise ValueError(f"axis must be 0, 1 or 2, got {self.axis}")
        if self.index < 0:
            raise ValueError(f"slice index must be >= 0, got {self.index}")


@dataclass
class Volume3D:
    """3D scalar field with voxel spacing (mm) and an identifier."""

    data: np.ndarray
    spacing: tuple[float, float, float]
    id: str

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"volume {self.id!r}: expected 3D data, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError(f"volume {self.id!r}: data contains NaN/Inf")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError(f"volume {self.id!r}: spacing must be 3 positive values, got {self.spacing}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def is_isotropic(self, tolerance: float = ISOTROPY_TOLERANCE) -> bool:
        return max(self.spacing) / min(self.spacing) <= tolerance

    def get_slice(self, axis: int, index: int) -> np.ndarray:
        """Raw (unnormalized) 2D plane orthogonal to `axis`."""
        if not 0 <= index < self.dims[axis]:
            raise ValueError(f"slice index {index} out of range for axis {axis} (dim {self.dims[axis]})")
        return np.take(self.data, index, axis=axis)


@dataclass
class Slice2D:
    """2D grayscale image with all pixels in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise ValueError(f"expected 2D pixels, got shape {self.pixels.shape}")
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("slice contains NaN/Inf")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"slice pixels outside [0, 1]: min={lo:.6g}, max={hi:.6g}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def normalize(raw: np.ndarray) -> Slice2D:
    """Min-max normalize a raw 2D array to [0, 1].

    A constant input maps to all zeros, which keeps the output well defined
    (and gives the constant-image closed form for any later SSIM).
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ValueError(f"expected a 2D array, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        bad = int(np.count_nonzero(~np.isfinite(raw)))
        raise ValueError(f"cannot normalize: {bad} non-finite value(s) in input")
    lo = float(raw.min())
    hi = float(raw.max())
    if hi == lo:
        return Slice2D(np.zeros_like(raw))
    return Slice2D((raw - lo) / (hi - lo))


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel-center alignment and edge clamping."""
    in_h, in_w = img.shape
    rows = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0, in_h - 1)
    cols = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0, in_w - 1)
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    fr = rows - r0
    fc = cols - c0
    r1 = np.minimum(r0 + 1, in_h - 1)
    c1 = np.minimum(c0 + 1, in_w - 1)

    top = img[r0[:, None], c0[None, :]] * (1 - fc) + img[r0[:, None], c1[None, :]] * fc
    bot = img[r1[:, None], c0[None, :]] * (1 - fc) + img[r1[:, None], c1[None, :]] * fc
    return top * (1 - fr)[:, None] + bot * fr[:, None]


def conform(s: Slice2D, target: int = NETWORK_INPUT_SIZE) -> Slice2D:
    """Fit a slice into a target x target frame.

    If the larger side exceeds the target, rescale by target/max(h, w)
    (bilinear, round-half-up output dims) so aspect ratio is preserved;
    then zero-pad symmetrically, with the extra pixel on the high side
    when the margin is odd.
    """
    if target < 1:
        raise ValueError(f"target size must be >= 1, got {target}")
    px = s.pixels
    h, w = px.shape
    if max(h, w) > target:
        f = target / max(h, w)
        nh = int(np.floor(h * f + 0.5))
        nw = int(np.floor(w * f + 0.5))
        px = np.clip(_bilinear_resize(px, nh, nw), 0.0, 1.0)
        h, w = nh, nw
    out = np.zeros((target, target), dtype=np.float64)
    top = (target - h) // 2
    left = (target - w) // 2
    out[top:top + h, left:left + w] = px
    return Slice2D(out)


def slice_index_range(n: int, central_fraction: float = CENTRAL_FRACTION) -> tuple[int, int]:
    """Half-open index range covering the central fraction of n slices."""
    # epsilon guards float spill, e.g. 10 * (1 - 0.8) / 2 = 0.999...8
    margin = int(np.floor(n * (1.0 - central_fraction) / 2.0 + 1e-9))
    return margin, n - margin


def random_slice(v: Volume3D, rng: np.random.Generator) -> tuple[Slice2D, SliceRef]:
    """Draw a normalized slice from a volume.

    Isotropic volumes (spacing ratio <= 1.1) draw the axis uniformly from
    {0, 1, 2}; anisotropic volumes always slice along the axis of largest
    spacing, i.e. the acquisition direction. The index is uniform over the
    central 80% of slices.
    """
    if min(v.dims) < MIN_VOLUME_DIM:
        raise ValueError(f"volume {v.id!r}: all dims must be >= {MIN_VOLUME_DIM}, got {v.dims}")
    if v.is_isotropic():
        axis = int(rng.integers(0, 3))
    else:
        axis = int(np.argmax(v.spacing))
    lo, hi = slice_index_range(v.dims[axis])
    index = int(rng.integers(lo, hi))
    return normalize(v.get_slice(axis, index)), SliceRef(v.id, axis, index)
