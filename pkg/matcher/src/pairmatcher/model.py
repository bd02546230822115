"""Small convolutional pair-matchers over six-channel inputs."""

from __future__ import annotations

import torch
from torch import nn

IN_CHANNELS = 6

ARCHITECTURES = ("tile-stat", "tile-mean")


class TileStatNet(nn.Module):
    """Tile-statistics comparator with a one-logit match head.

    Average pools of x and x^2 summarize each tile of both halves; the
    convolutional trunk sees only the half differences of those
    statistics, which matching (pixel-permuted) pairs drive toward zero.
    Purely relational features keep the model from keying on the
    identity of either half alone.
    """

    def __init__(self, side: int):
        super().__init__()
        self.pool = nn.AvgPool2d(max(1, side // 16))
        self.trunk = nn.Sequential(
            nn.Conv2d(6, 32, 1),
            nn.ReLU(),
            nn.Conv2d(32, 32, 3, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(4),
            nn.Flatten(),
            nn.Linear(32 * 16, 64),
            nn.ReLU(),
            nn.Linear(64, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != IN_CHANNELS:
            raise ValueError(f"expected {IN_CHANNELS}-channel input, got {x.shape[1]}")
        z = self.pool(x)
        z2 = self.pool(x * x)
        feats = torch.cat([z[:, :3] - z[:, 3:], z2[:, :3] - z2[:, 3:]], dim=1)
        return self.trunk(feats).squeeze(-1)


class TileMeanNet(nn.Module):
    """Plain variant: tile means only, no explicit statistics."""

    def __init__(self, side: int):
        super().__init__()
        self.pool = nn.AvgPool2d(max(1, side // 16))
        self.trunk = nn.Sequential(
            nn.Conv2d(IN_CHANNELS, 32, 1),
            nn.ReLU(),
            nn.Conv2d(32, 32, 3, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(4),
            nn.Flatten(),
            nn.Linear(32 * 16, 64),
            nn.ReLU(),
            nn.Linear(64, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != IN_CHANNELS:
            raise ValueError(f"expected {IN_CHANNELS}-channel input, got {x.shape[1]}")
        return self.trunk(self.pool(x)).squeeze(-1)


def build_model(architecture: str, side: int) -> nn.Module:
    if architecture == "tile-stat":
        return TileStatNet(side)
    if architecture == "tile-mean":
        return TileMeanNet(side)
    raise ValueError(f"unknown architecture {architecture!r}; choose from {ARCHITECTURES}")
