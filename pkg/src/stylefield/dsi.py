"""Dynamic style injection: per-level weight/bias generators and the 1x1 grouped affine.

For each level a generator turns the style feature map into one weight and
one bias per channel.  Two branches feed it: a spatial branch (convolutions
interleaved with adaptive average pooling, ending in a global 1x1 pool) and a
channel branch (squeeze-excitation gates).  The gated vector is split into
weight and bias heads initialized so injection starts near the identity.

Applying the parameters is an elementwise affine per channel -
``out[h, w, c] = in[h, w, c] * w[c] + b[c]`` - which commutes with volume
compositing and therefore acts consistently across views.  The statistics
baseline (adain_inject) and mask amplification for 3D references live here
too.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .encoder import StyleFeatures
from .errors import StyleObjectNotVisibleError, ValidationError
from .mlfa import LEVELS
from .renderer import LevelFeatureMaps

ADAIN_EPS = 1e-5


@dataclass
class InjectionParams:
    weight: torch.Tensor  # (C,)
    bias: torch.Tensor    # (C,)

    @classmethod
    def identity(cls, channels: int, dtype=torch.float32) -> "InjectionParams":
        return cls(weight=torch.ones(channels, dtype=dtype),
                   bias=torch.zeros(channels, dtype=dtype))


class StyleParamGenerator(nn.Module):
    """Weight/bias generator for one feature level."""

    def __init__(self, channels: int, spatial_depth: int = 3, se_reduction: int = 4):
        super().__init__()
        if spatial_depth < 1:
            raise ValidationError("spatial_depth must be >= 1")
        self.channels = channels
        self.spatial_convs = nn.ModuleList(
            [nn.Conv2d(channels, channels, 3, padding=1) for _ in range(spatial_depth)])
        hidden = max(1, channels // se_reduction)
        self.se_fc1 = nn.Linear(channels, hidden)
        self.se_fc2 = nn.Linear(hidden, channels)
        self.head_w = nn.Linear(channels, channels)
        self.head_b = nn.Linear(channels, channels)
        # start close to identity injection
        with torch.no_grad():
            self.head_w.weight.normal_(std=0.01)
            self.head_w.bias.fill_(1.0)
            self.head_b.weight.normal_(std=0.01)
            self.head_b.bias.zero_()

    def spatial_vector(self, x: torch.Tensor) -> torch.Tensor:
        """Conv + adaptive-average-pool stack collapsing (1, C, H, W) to (C,)."""
        n_blocks = len(self.spatial_convs)
        for i, conv in enumerate(self.spatial_convs):
            x = F.relu(conv(x))
            if i + 1 < n_blocks:
                target = (max(1, x.shape[2] // 2), max(1, x.shape[3] // 2))
                x = F.adaptive_avg_pool2d(x, target)
            else:
                x = F.adaptive_avg_pool2d(x, (1, 1))
        return x.reshape(-1)

    def channel_gates(self, x: torch.Tensor) -> torch.Tensor:
        """Squeeze-excitation gates from the globally pooled style map."""
        squeezed = x.mean(dim=(2, 3)).reshape(-1)
        return torch.sigmoid(self.se_fc2(F.relu(self.se_fc1(squeezed))))

    def forward(self, style_map: torch.Tensor) -> InjectionParams:
        if style_map.ndim != 3 or style_map.shape[-1] != self.channels:
            raise ValidationError(f"generator expects (H, W, {self.channels}) style "
                                  f"features, got {tuple(style_map.shape)}")
        x = style_map.permute(2, 0, 1).unsqueeze(0)
        combined = self.spatial_vector(x) * self.channel_gates(x)
        return InjectionParams(weight=self.head_w(combined), bias=self.head_b(combined))


class InjectionGenerators(nn.Module):
    """One StyleParamGenerator per feature level."""

    def __init__(self, level_channels: dict[str, int], spatial_depth: int = 3,
                 se_reduction: int = 4):
        super().__init__()
        self.level_channels = dict(level_channels)
        self.generators = nn.ModuleDict({
            level: StyleParamGenerator(channels, spatial_depth, se_reduction)
            for level, channels in level_channels.items()
        })

    def generate(self, style_feats: StyleFeatures, level: str) -> InjectionParams:
        return self.generators[level](style_feats[level])

    def generate_all(self, style_feats: StyleFeatures, levels=LEVELS):
        return {level: self.generate(style_feats, level) for level in levels}

    def named_tensor_dict(self) -> dict[str, torch.Tensor]:
        out = {}
        for level in LEVELS:
            for name, param in self.generators[level].named_parameters():
                out[f"dsi.{level}.{name}"] = param.detach()
        return out

    def load_named_tensors(self, tensors):
        with torch.no_grad():
            for level in LEVELS:
                for name, param in self.generators[level].named_parameters():
                    value = torch.as_tensor(tensors[f"dsi.{level}.{name}"], dtype=param.dtype)
                    param.copy_(value)

    @staticmethod
    def shape_from_tensors(tensors) -> dict:
        channels = {level: tensors[f"dsi.{level}.head_w.bias"].shape[0] for level in LEVELS}
        depth = sum(1 for name in tensors
                    if name.startswith("dsi.low.spatial_convs.") and name.endswith(".weight"))
        c_low = channels["low"]
        hidden = tensors["dsi.low.se_fc1.weight"].shape[0]
        return {"level_channels": channels, "spatial_depth": depth,
                "se_reduction": max(1, c_low // hidden)}


def generate_params(style_feats: StyleFeatures, level: str,
                    generator: StyleParamGenerator) -> InjectionParams:
    """Per-channel injection parameters for one level of style features."""
    return generator(style_feats[level])


def inject(content: torch.Tensor, params: InjectionParams) -> torch.Tensor:
    """Grouped 1x1 affine: content (H, W, C) * weight + bias, per channel."""
    if content.shape[-1] != params.weight.shape[0]:
        raise ValidationError(f"inject: {content.shape[-1]} content channels vs "
                              f"{params.weight.shape[0]} parameter channels")
    return content * params.weight + params.bias


def adain_inject(content: torch.Tensor, style_map: torch.Tensor) -> torch.Tensor:
    """Statistics baseline: move content channel mean/std onto the style's."""
    if content.shape[-1] != style_map.shape[-1]:
        raise ValidationError(f"adain: {content.shape[-1]} content channels vs "
                              f"{style_map.shape[-1]} style channels")
    c_mean = content.mean(dim=(0, 1))
    c_std = torch.sqrt(content.var(dim=(0, 1), unbiased=False) + ADAIN_EPS)
    s_mean = style_map.mean(dim=(0, 1))
    s_std = torch.sqrt(style_map.var(dim=(0, 1), unbiased=False) + ADAIN_EPS)
    return (content - c_mean) / c_std * s_std + s_mean


def nearest_downsample_mask(mask: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Nearest-neighbor downsample of an (H, W) mask (top-left rule)."""
    src_h, src_w = mask.shape
    rows = (torch.arange(height) * src_h) // height
    cols = (torch.arange(width) * src_w) // width
    return mask[rows][:, cols]


def mask_amplify(style_feats: StyleFeatures, mask: torch.Tensor) -> StyleFeatures:
    """Zero style features outside the object mask, then rescale.

    The scale (all pixels / object pixels, per level) restores the pooled
    activation magnitude the generators' average pooling would otherwise lose.
    """
    if mask.ndim != 2:
        raise ValidationError("mask must be (H, W)")
    mask = mask.to(torch.bool)
    out = {}
    for level in LEVELS:
        feat = style_feats[level]
        level_mask = nearest_downsample_mask(mask, feat.shape[0], feat.shape[1])
        count = int(level_mask.sum())
        if count == 0:
            raise StyleObjectNotVisibleError()
        scale = (feat.shape[0] * feat.shape[1]) / count
        out[level] = feat * level_mask[..., None].to(feat.dtype) * scale
    return StyleFeatures(maps=out, image_hw=style_feats.image_hw)


def inject_levels(content_maps: LevelFeatureMaps,
                  params_by_level: dict[str, InjectionParams]) -> LevelFeatureMaps:
    """Apply per-level injection parameters to all three content maps."""
    missing = [level for level in LEVELS if level not in params_by_level]
    if missing:
        raise ValidationError(f"missing injection parameters for levels: {missing}")
    maps = {level: inject(content_maps.maps[level], params_by_level[level])
            for level in LEVELS}
    return LevelFeatureMaps(maps=maps, opacity=content_maps.opacity,
                            view_id=content_maps.view_id)
