"""Structural similarity index: the single quality metric of the toolkit.

Produces the ground-truth labels for corrupted slices. Local statistics use
an 11x11 Gaussian window (sigma 1.5) in "same" mode with symmetric boundary
reflection; stabilizers K1=0.01, K2=0.03 on a dynamic range of 1.0 (inputs
are normalized slices).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .imagecore import Slice2D


@dataclass(frozen=True)
class SsimConfig:
    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    def __post_init__(self) -> None:
        if self.window_size % 2 != 1 or self.window_size < 3:
            raise ValueError(f"window size must be odd and >= 3, got {self.window_size}")
        if self.sigma <= 0 or self.data_range <= 0:
            raise ValueError("sigma and data_range must be positive")

    def as_dict(self) -> dict:
        return {
            "window_size": self.window_size,
            "sigma": self.sigma,
            "k1": self.k1,
            "k2": self.k2,
            "data_range": self.data_range,
        }


DEFAULT_SSIM = SsimConfig()


@dataclass
class SsimResult:
    mean: float
    map: np.ndarray | None = field(default=None, repr=False)


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """1D Gaussian taps centered on the window, normalized to sum 1."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    w = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def _filter(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    # separable, full-size output, symmetric edge reflection
    out = ndimage.correlate1d(img, window, axis=0, mode="reflect")
    return ndimage.correlate1d(out, window, axis=1, mode="reflect")


def ssim_mean(a: Slice2D, b: Slice2D, cfg: SsimConfig = DEFAULT_SSIM, keep_map: bool = False) -> SsimResult:
    """Mean SSIM between two same-sized slices.

    Per-window means/variances/covariance come from Gaussian filtering; the
    local index is
        ((2*mu_a*mu_b + C1) * (2*cov + C2)) /
        ((mu_a^2 + mu_b^2 + C1) * (var_a + var_b + C2))
    averaged over every pixel position.
    """
    x = a.pixels
    y = b.pixels
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if min(x.shape) < cfg.window_size:
        raise ValueError(f"image dims {x.shape} smaller than the {cfg.window_size}-tap window")

    w = gaussian_window(cfg.window_size, cfg.sigma)
    c1 = (cfg.k1 * cfg.data_range) ** 2
    c2 = (cfg.k2 * cfg.data_range) ** 2

    mu_x = _filter(x, w)
    mu_y = _filter(y, w)
    var_x = _filter(x * x, w) - mu_x * mu_x
    var_y = _filter(y * y, w) - mu_y * mu_y
    cov = _filter(x * y, w) - mu_x * mu_y

    smap = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
    return SsimResult(mean=float(smap.mean()), map=smap if keep_map else None)
