"""Multi-level cascade decoder: dilated-convolution fusion of the three feature maps.

All inputs already sit at view resolution, so the decoder never resamples;
receptive fields are widened with dilation instead (rate 4 for the stage
fusing high+mid features, 2 for the stage adding the low level, 1 for the
final RGB convolution).  Every convolution preserves H x W via
padding = dilation * (kernel - 1) / 2.  The raw (unclamped) RGB is returned;
clamping to [0,1] happens only at image export.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .errors import ValidationError
from .mlfa import LEVELS


def _fusion_stack(in_channels: int, out_channels: int, n_convs: int,
                  dilation: int) -> nn.ModuleList:
    convs = []
    width = in_channels
    for _ in range(n_convs):
        convs.append(nn.Conv2d(width, out_channels, 3, padding=dilation, dilation=dilation))
        width = out_channels
    return nn.ModuleList(convs)


class CascadeDecoder(nn.Module):
    def __init__(self, level_channels: dict[str, int] | tuple, convs_per_stage: int = 2,
                 dilations=(4, 2, 1)):
        super().__init__()
        if not isinstance(level_channels, dict):
            level_channels = dict(zip(LEVELS, level_channels))
        if convs_per_stage < 1:
            raise ValidationError("convs_per_stage must be >= 1")
        if len(dilations) != 3:
            raise ValidationError("dilations must list three rates")
        c_low, c_mid, c_high = (level_channels["low"], level_channels["mid"],
                                level_channels["high"])
        self.level_channels = dict(level_channels)
        self.dilations = tuple(int(d) for d in dilations)
        d_hm, d_low, d_rgb = self.dilations

        self.align_high = nn.Conv2d(c_high, c_mid, 1)
        self.align_mid = nn.Conv2d(c_mid, c_mid, 1)
        self.fuse_high_mid = _fusion_stack(2 * c_mid, c_mid, convs_per_stage, d_hm)
        self.align_fused = nn.Conv2d(c_mid, c_low, 1)
        self.align_low = nn.Conv2d(c_low, c_low, 1)
        self.fuse_low = _fusion_stack(2 * c_low, c_low, convs_per_stage, d_low)
        self.to_rgb = nn.Conv2d(c_low, 3, 3, padding=d_rgb, dilation=d_rgb)

    def receptive_radius(self) -> int:
        """Half-width of the output receptive field (for equivariance testing)."""
        d_hm, d_low, d_rgb = self.dilations
        n = len(self.fuse_high_mid)
        return n * d_hm + n * d_low + d_rgb

    def decode(self, maps) -> torch.Tensor:
        """Three (H, W, C_l) maps -> raw RGB (H, W, 3)."""
        if hasattr(maps, "maps"):
            maps = maps.maps
        shapes = {level: tuple(maps[level].shape[:2]) for level in LEVELS}
        if len(set(shapes.values())) > 1:
            raise ValidationError(f"decoder inputs disagree on resolution: {shapes}")
        for level in LEVELS:
            if maps[level].shape[-1] != self.level_channels[level]:
                raise ValidationError(f"level {level}: expected "
                                      f"{self.level_channels[level]} channels, got "
                                      f"{maps[level].shape[-1]}")
        h, w = shapes["low"]

        def chw(level):
            return maps[level].permute(2, 0, 1).unsqueeze(0)

        def check(x):
            if x.shape[-2:] != (h, w):
                raise ValidationError("decoder layer changed spatial size")
            return x

        x = torch.cat([check(self.align_high(chw("high"))),
                       check(self.align_mid(chw("mid")))], dim=1)
        for conv in self.fuse_high_mid:
            x = F.relu(check(conv(x)))
        x = torch.cat([check(self.align_fused(x)),
                       check(self.align_low(chw("low")))], dim=1)
        for conv in self.fuse_low:
            x = F.relu(check(conv(x)))
        rgb = check(self.to_rgb(x))
        return rgb[0].permute(1, 2, 0)

    def forward(self, maps) -> torch.Tensor:
        return self.decode(maps)

    def named_tensor_dict(self) -> dict[str, torch.Tensor]:
        return {f"mlcd.{name}": param.detach() for name, param in self.named_parameters()}

    def load_named_tensors(self, tensors):
        with torch.no_grad():
            for name, param in self.named_parameters():
                value = torch.as_tensor(tensors[f"mlcd.{name}"], dtype=param.dtype)
                param.copy_(value)

    @staticmethod
    def shape_from_tensors(tensors) -> dict:
        c_mid = tensors["mlcd.align_high.weight"].shape[0]
        c_high = tensors["mlcd.align_high.weight"].shape[1]
        c_low = tensors["mlcd.align_low.weight"].shape[0]
        convs = sum(1 for name in tensors
                    if name.startswith("mlcd.fuse_high_mid.") and name.endswith(".weight"))
        return {"level_channels": {"low": c_low, "mid": c_mid, "high": c_high},
                "convs_per_stage": convs}
