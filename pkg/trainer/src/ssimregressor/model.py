"""Residual network with a sigmoid regression head.

Standard resnet18/resnet101 topology with a single-channel stem (slices are
grayscale) and one output unit; the sigmoid keeps predictions inside the
SSIM label range [0, 1] by construction.
"""

from __future__ import annotations

import torch
from torch import nn
from torchvision import models

SUPPORTED_DEPTHS = (18, 101)


class SsimRegressor(nn.Module):
    def __init__(self, depth: int = 18):
        super().__init__()
        if depth not in SUPPORTED_DEPTHS:
            raise ValueError(f"depth must be one of {SUPPORTED_DEPTHS}, got {depth}")
        factory = models.resnet18 if depth == 18 else models.resnet101
        backbone = factory(weights=None, num_classes=1)
        backbone.conv1 = nn.Conv2d(1, 64, kernel_size=7, stride=2, padding=3, bias=False)
        self.depth = depth
        self.backbone = backbone

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(N, 1, H, W) -> (N,) predictions in (0, 1)."""
        return torch.sigmoid(self.backbone(x).squeeze(1))
