"""Multi-level perceptual encoder: a truncated VGG-19 forward pass.

Taps sit at the first activation of each of the first three blocks, so for an
H x W input the level maps have shapes (H, W, c1), (H/2, W/2, c2) and
(H/4, W/4, c3).  Pretrained weights are ingested from a named-tensor
checkpoint; a "tiny random" mode with the same topology but reduced channels
(8/16/32 by default) ships so the test suite never needs a download.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .checkpoint import Checkpoint
from .errors import ValidationError
from .mlfa import LEVELS

# standard ImageNet input normalization
_INPUT_MEAN = (0.485, 0.456, 0.406)
_INPUT_STD = (0.229, 0.224, 0.225)

# torchvision vgg19.features indices of the convolutions we keep
_VGG19_LAYER_MAP = {
    "conv1_1": 0, "conv1_2": 2, "conv2_1": 5, "conv2_2": 7, "conv3_1": 10,
}


@dataclass
class StyleFeatures:
    """Per-level encoder outputs at their native resolutions."""
    maps: dict[str, torch.Tensor]
    image_hw: tuple

    def __getitem__(self, level: str) -> torch.Tensor:
        return self.maps[level]


class PerceptualEncoder(nn.Module):
    def __init__(self, channels=(64, 128, 256)):
        super().__init__()
        if len(channels) != 3:
            raise ValidationError("encoder needs three tap widths")
        c1, c2, c3 = channels
        self.conv1_1 = nn.Conv2d(3, c1, 3, padding=1)
        self.conv1_2 = nn.Conv2d(c1, c1, 3, padding=1)
        self.conv2_1 = nn.Conv2d(c1, c2, 3, padding=1)
        self.conv2_2 = nn.Conv2d(c2, c2, 3, padding=1)
        self.conv3_1 = nn.Conv2d(c2, c3, 3, padding=1)
        self.register_buffer("input_mean", torch.tensor(_INPUT_MEAN).view(1, 3, 1, 1))
        self.register_buffer("input_std", torch.tensor(_INPUT_STD).view(1, 3, 1, 1))
        for p in self.parameters():
            p.requires_grad_(False)

    @property
    def channels(self):
        return (self.conv1_1.out_channels, self.conv2_1.out_channels,
                self.conv3_1.out_channels)

    @classmethod
    def tiny_random(cls, channels=(8, 16, 32), seed: int = 7) -> "PerceptualEncoder":
        """Seeded random weights with the same topology; for tests and desk scale."""
        generator = torch.Generator().manual_seed(seed)
        enc = cls(channels)
        with torch.no_grad():
            for conv in (enc.conv1_1, enc.conv1_2, enc.conv2_1, enc.conv2_2, enc.conv3_1):
                fan_in = conv.in_channels * 9
                std = (2.0 / fan_in) ** 0.5
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=generator) * std)
                conv.bias.copy_(0.05 * torch.randn(conv.bias.shape, generator=generator))
        return enc

    def _check_size(self, h: int, w: int, resize_policy: str):
        ok = h >= 4 and w >= 4 and h % 4 == 0 and w % 4 == 0
        if ok:
            return h, w
        if resize_policy == "resize":
            new_h = max(4, ((h + 3) // 4) * 4)
            new_w = max(4, ((w + 3) // 4) * 4)
            warnings.warn(f"encoder input {h}x{w} resized to {new_h}x{new_w}")
            return new_h, new_w
        raise ValidationError(f"encoder input must be >= 4 and divisible by 4, got {h}x{w}")

    def encode_levels(self, image: torch.Tensor, resize_policy: str = "error") -> StyleFeatures:
        """RGB image (H, W, 3) in [0,1] -> three post-activation feature maps."""
        if image.ndim != 3 or image.shape[-1] != 3:
            raise ValidationError(f"expected (H, W, 3) image, got {tuple(image.shape)}")
        h, w = image.shape[:2]
        target_h, target_w = self._check_size(h, w, resize_policy)
        x = image.permute(2, 0, 1).unsqueeze(0)
        if (target_h, target_w) != (h, w):
            x = F.interpolate(x, size=(target_h, target_w), mode="bilinear",
                              align_corners=False)
        x = (x - self.input_mean.to(x.dtype)) / self.input_std.to(x.dtype)
        tap1 = F.relu(self.conv1_1(x))
        x = F.relu(self.conv1_2(tap1))
        x = F.max_pool2d(x, 2)
        tap2 = F.relu(self.conv2_1(x))
        x = F.relu(self.conv2_2(tap2))
        x = F.max_pool2d(x, 2)
        tap3 = F.relu(self.conv3_1(x))
        maps = {
            "low": tap1[0].permute(1, 2, 0),
            "mid": tap2[0].permute(1, 2, 0),
            "high": tap3[0].permute(1, 2, 0),
        }
        return StyleFeatures(maps=maps, image_hw=(target_h, target_w))

    # -- weight ingestion -------------------------------------------------

    def named_tensor_dict(self) -> dict[str, torch.Tensor]:
        out = {}
        for name in _VGG19_LAYER_MAP:
            conv = getattr(self, name)
            out[f"enc.{name}.weight"] = conv.weight.detach()
            out[f"enc.{name}.bias"] = conv.bias.detach()
        out["enc.mean"] = self.input_mean.reshape(3).detach()
        out["enc.std"] = self.input_std.reshape(3).detach()
        return out

    def to_checkpoint(self) -> Checkpoint:
        tensors = {k: v.numpy() for k, v in self.named_tensor_dict().items()}
        return Checkpoint(tensors, stage="encoder")

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "PerceptualEncoder":
        channels = (ckpt["enc.conv1_1.weight"].shape[0],
                    ckpt["enc.conv2_1.weight"].shape[0],
                    ckpt["enc.conv3_1.weight"].shape[0])
        enc = cls(channels)
        with torch.no_grad():
            for name in _VGG19_LAYER_MAP:
                conv = getattr(enc, name)
                conv.weight.copy_(torch.from_numpy(ckpt[f"enc.{name}.weight"].copy()))
                conv.bias.copy_(torch.from_numpy(ckpt[f"enc.{name}.bias"].copy()))
            enc.input_mean.copy_(torch.from_numpy(ckpt["enc.mean"].copy()).view(1, 3, 1, 1))
            enc.input_std.copy_(torch.from_numpy(ckpt["enc.std"].copy()).view(1, 3, 1, 1))
        return enc

    @classmethod
    def from_file(cls, path) -> "PerceptualEncoder":
        return cls.from_checkpoint(Checkpoint.load(path))

    def save(self, path):
        self.to_checkpoint().save(path)

    @classmethod
    def from_vgg19_features_state_dict(cls, state_dict) -> "PerceptualEncoder":
        """Convert a torchvision ``vgg19().features`` state dict (no download here)."""
        enc = cls((64, 128, 256))
        with torch.no_grad():
            for name, idx in _VGG19_LAYER_MAP.items():
                conv = getattr(enc, name)
                conv.weight.copy_(state_dict[f"{idx}.weight"])
                conv.bias.copy_(state_dict[f"{idx}.bias"])
        return enc


def build_encoder(cfg) -> PerceptualEncoder:
    if cfg.encoder_mode == "file":
        if not cfg.encoder_path:
            raise ValidationError("encoder_mode=file requires encoder_path")
        return PerceptualEncoder.from_file(cfg.encoder_path)
    return PerceptualEncoder.tiny_random(tuple(cfg.encoder_channels), seed=cfg.encoder_seed)


def upsample_to(feat: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Bilinear (align_corners off) upsampling of an (h, w, C) map to (height, width, C)."""
    h, w = feat.shape[:2]
    if height < h or width < w:
        raise ValidationError(f"upsample target {height}x{width} smaller than source {h}x{w}")
    if (height, width) == (h, w):
        return feat
    x = feat.permute(2, 0, 1).unsqueeze(0)
    x = F.interpolate(x, size=(height, width), mode="bilinear", align_corners=False)
    return x[0].permute(1, 2, 0)


def feature_supervision_loss(rendered_maps, encoded: StyleFeatures) -> torch.Tensor:
    """Mean-squared error between rendered maps and upsampled encoder maps, summed over levels."""
    if hasattr(rendered_maps, "maps"):
        rendered_maps = rendered_maps.maps
    total = None
    for level in LEVELS:
        rendered = rendered_maps[level]
        target = upsample_to(encoded[level], rendered.shape[0], rendered.shape[1])
        if target.shape != rendered.shape:
            raise ValidationError(f"level {level}: rendered {tuple(rendered.shape)} vs "
                                  f"upsampled target {tuple(target.shape)}")
        term = ((rendered - target) ** 2).mean()
        total = term if total is None else total + term
    return total
