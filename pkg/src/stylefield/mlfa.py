"""Multi-level feature adaptor: per-level MLPs plus learnable instance normalization.

Each level owns a small MLP turning basic point features (C_b) into level
features (C_l).  During stylization the output additionally passes through
LIN, an elementwise (x - mu) / sigma with *global* learnable per-channel
parameters - no per-view statistics, so a 3D point maps to the same feature
no matter which ray queried it.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .errors import ValidationError
from .scene_field import STAGE1, STAGE2

LEVELS = ("low", "mid", "high")
SIGMA_FLOOR = 1e-4

# softplus(raw) + SIGMA_FLOOR == 1 at init, so LIN starts as the identity
_RAW_SCALE_INIT = math.log(math.expm1(1.0 - SIGMA_FLOOR))


def _build_mlp(in_dim: int, out_dim: int, depth: int) -> nn.Sequential:
    if depth < 1:
        raise ValidationError("mlfa depth must be >= 1")
    layers: list[nn.Module] = []
    width = in_dim
    for i in range(depth):
        layers.append(nn.Linear(width, out_dim))
        width = out_dim
        if i + 1 < depth:
            layers.append(nn.ReLU())
    return nn.Sequential(*layers)


class FeatureAdaptor(nn.Module):
    """Per-level point-feature MLPs and LIN parameters."""

    def __init__(self, basic_channels: int, level_channels: dict[str, int] | tuple,
                 depth: int = 2):
        super().__init__()
        if not isinstance(level_channels, dict):
            level_channels = dict(zip(LEVELS, level_channels))
        if tuple(level_channels) != LEVELS:
            raise ValidationError(f"levels must be {LEVELS}")
        self.basic_channels = basic_channels
        self.level_channels = dict(level_channels)
        self.mlps = nn.ModuleDict({
            level: _build_mlp(basic_channels, channels, depth)
            for level, channels in level_channels.items()
        })
        self.lin_mu = nn.ParameterDict({
            level: nn.Parameter(torch.zeros(channels))
            for level, channels in level_channels.items()
        })
        self.lin_scale_raw = nn.ParameterDict({
            level: nn.Parameter(torch.full((channels,), _RAW_SCALE_INIT))
            for level, channels in level_channels.items()
        })

    def lin_sigma(self, level: str) -> torch.Tensor:
        return torch.nn.functional.softplus(self.lin_scale_raw[level]) + SIGMA_FLOOR

    def lin(self, x: torch.Tensor, level: str) -> torch.Tensor:
        """Global learnable normalization (x - mu) / sigma, applied elementwise."""
        if x.shape[-1] != self.level_channels[level]:
            raise ValidationError(f"lin: expected {self.level_channels[level]} channels "
                                  f"at level {level}, got {x.shape[-1]}")
        return (x - self.lin_mu[level]) / self.lin_sigma(level)

    def adapt(self, features: torch.Tensor, level: str, stage: str) -> torch.Tensor:
        """Basic point features (..., C_b) -> level features (..., C_l)."""
        if level not in self.level_channels:
            raise ValidationError(f"unknown level {level!r}")
        if stage not in (STAGE1, STAGE2):
            raise ValidationError(f"stage must be {STAGE1!r} or {STAGE2!r}")
        if features.shape[-1] != self.basic_channels:
            raise ValidationError(f"adapt: expected {self.basic_channels} input channels, "
                                  f"got {features.shape[-1]}")
        out = self.mlps[level](features)
        if stage == STAGE2:
            out = self.lin(out, level)
        return out

    def mlp_parameters(self):
        return list(self.mlps.parameters())

    def lin_parameters(self):
        return list(self.lin_mu.parameters()) + list(self.lin_scale_raw.parameters())

    def named_tensor_dict(self) -> dict[str, torch.Tensor]:
        out = {}
        for level in LEVELS:
            for name, param in self.mlps[level].named_parameters():
                out[f"mlfa.{level}.mlp.{name}"] = param.detach()
            out[f"lin.{level}.mu"] = self.lin_mu[level].detach()
            out[f"lin.{level}.scale_raw"] = self.lin_scale_raw[level].detach()
        return out

    def load_named_tensors(self, tensors):
        with torch.no_grad():
            for level in LEVELS:
                for name, param in self.mlps[level].named_parameters():
                    value = torch.as_tensor(tensors[f"mlfa.{level}.mlp.{name}"],
                                            dtype=param.dtype)
                    param.copy_(value)
                self.lin_mu[level].copy_(
                    torch.as_tensor(tensors[f"lin.{level}.mu"],
                                    dtype=self.lin_mu[level].dtype))
                self.lin_scale_raw[level].copy_(
                    torch.as_tensor(tensors[f"lin.{level}.scale_raw"],
                                    dtype=self.lin_scale_raw[level].dtype))

    @staticmethod
    def shape_from_tensors(tensors) -> dict:
        channels = {level: tensors[f"lin.{level}.mu"].shape[0] for level in LEVELS}
        basic = tensors["mlfa.low.mlp.0.weight"].shape[1]
        depth = sum(1 for name in tensors
                    if name.startswith("mlfa.low.mlp.") and name.endswith(".weight"))
        return {"basic_channels": basic, "level_channels": channels, "depth": depth}
