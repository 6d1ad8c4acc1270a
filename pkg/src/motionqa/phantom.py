"""Synthetic layered-ellipsoid head phantoms.

Self-contained, redistributable test volumes: a bright outer shell, a brain
ellipsoid with band-limited texture, ventricle-like dark pockets and a
handful of random internal blobs, lightly smoothed so slices carry
realistic gradients. Default dimensions mirror common brain acquisitions,
so slices roughly fill the 256x256 network frame after conformance.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .imagecore import Volume3D
from .rng import make_rng

DEFAULT_DIMS = (240, 240, 150)
TEXTURE_AMPLITUDE = 0.10


def _paint_ellipsoid(data, center, semiaxes, value):
    grids = np.ogrid[[slice(0, n) for n in data.shape]]
    d = sum(((g - c) / a) ** 2 for g, c, a in zip(grids, center, semiaxes))
    data[d <= 1.0] = value


def make_phantom(
    dims: tuple[int, int, int] = DEFAULT_DIMS,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
    seed: int = 0,
    n_blobs: int = 5,
    volume_id: str | None = None,
) -> Volume3D:
    """Deterministic layered-ellipsoid phantom for a given seed."""
    rng = make_rng(seed)
    nx, ny, nz = dims
    data = np.zeros(dims, dtype=np.float64)
    center = np.array(dims) / 2.0

    # skull shell, brain, and ventricle-like pockets
    _paint_ellipsoid(data, center, 0.46 * np.array(dims), 0.9)
    _paint_ellipsoid(data, center, 0.40 * np.array(dims), 0.55)
    for side in (-1.0, 1.0):
        c = center + np.array([side * 0.08 * nx, 0.0, 0.0])
        _paint_ellipsoid(data, c, (0.05 * nx, 0.16 * ny, 0.10 * nz), 0.15)

    for _ in range(n_blobs):
        c = center + (rng.uniform(-0.22, 0.22, size=3) * np.array(dims))
        semi = rng.uniform(0.04, 0.12, size=3) * np.array(dims)
        val = float(rng.uniform(0.25, 1.0))
        _paint_ellipsoid(data, c, semi, val)

    data = ndimage.gaussian_filter(data, sigma=1.0)

    # band-limited tissue texture; pure step edges score unrealistically
    # high SSIM under mild corruption
    noise = ndimage.gaussian_filter(rng.normal(0.0, 1.0, size=dims), sigma=1.2)
    noise /= np.abs(noise).max()
    data = np.clip(data + TEXTURE_AMPLITUDE * noise * (data > 0.05), 0.0, None)

    vid = volume_id if volume_id is not None else f"phantom-{seed:04d}"
    return Volume3D(data=data, spacing=spacing, id=vid)


def make_phantom_set(
    count: int,
    dims: tuple[int, int, int] = DEFAULT_DIMS,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
    seed: int = 0,
) -> list[Volume3D]:
    """Phantoms with per-volume seeds derived from one master seed."""
    return [make_phantom(dims=dims, spacing=spacing, seed=seed + i) for i in range(count)]
