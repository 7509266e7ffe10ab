"""Quantitative indicators and the ablation harness.

Style discrepancy reuses the statistic-matching style loss; content
discrepancy is a perceptual feature distance (per-pixel unit-normalized
channel vectors, squared differences spatially averaged, summed over the
three taps) with optional calibrated per-channel weights loadable from a
named-tensor file.  The consistency ratio compares stylized color
differences against content color differences over pixel pairs imaging the
same 3D point.
"""

from __future__ import annotations

import torch

from .checkpoint import Checkpoint
from .errors import ValidationError
from .mlfa import LEVELS
from .trainer import style_statistics_loss

_NORM_EPS = 1e-10


def style_discrepancy(images, style_image: torch.Tensor, encoder,
                      resize_policy: str = "error") -> float:
    """Mean statistic-matching style loss of a set of images against one style."""
    if len(images) == 0:
        raise ValidationError("style_discrepancy needs at least one image")
    style_feats = encoder.encode_levels(style_image, resize_policy)
    total = 0.0
    with torch.no_grad():
        for image in images:
            feats = encoder.encode_levels(image, resize_policy)
            total += float(style_statistics_loss(feats, style_feats))
    return total / len(images)


def _unit_normalize(feat: torch.Tensor) -> torch.Tensor:
    norm = torch.sqrt((feat ** 2).sum(dim=-1, keepdim=True) + _NORM_EPS)
    return feat / norm


def content_discrepancy(stylized: torch.Tensor, original: torch.Tensor, encoder,
                        channel_weights: dict | None = None,
                        resize_policy: str = "error") -> float:
    """Perceptual feature distance between two images (0 iff identical)."""
    if stylized.shape != original.shape:
        raise ValidationError(f"image shapes differ: {tuple(stylized.shape)} vs "
                              f"{tuple(original.shape)}")
    with torch.no_grad():
        feats_a = encoder.encode_levels(stylized, resize_policy)
        feats_b = encoder.encode_levels(original, resize_policy)
        total = 0.0
        for level in LEVELS:
            diff = _unit_normalize(feats_a[level]) - _unit_normalize(feats_b[level])
            if channel_weights is not None:
                diff = diff * channel_weights[level]
            total += float((diff ** 2).sum(dim=-1).mean())
    return total


def load_discrepancy_weights(path) -> dict:
    """Optional calibrated per-channel weights ('cdw.<level>' tensors)."""
    ckpt = Checkpoint.load(path)
    return {level: torch.from_numpy(ckpt[f"cdw.{level}"].copy()) for level in LEVELS}


def consistency_check(pipeline, camera_a, camera_b, correspondences,
                      style_image: torch.Tensor, injection_params=None) -> float:
    """RMSE ratio of stylized vs content color differences over correspondences.

    The content pass runs the identical pipeline with identity injection, so
    an identity-injection stylized pass gives a ratio of exactly 1.  A 0/0
    ratio (e.g. identical poses) is defined as 1.0.
    """
    pixels_a, pixels_b = correspondences
    if len(pixels_a) == 0:
        raise ValidationError("consistency_check needs at least one correspondence")

    from .dsi import InjectionParams, inject_levels
    from .scene_field import STAGE2

    with torch.no_grad():
        style_feats = pipeline.encode_style(style_image)
        frames = {}
        for tag, camera in (("a", camera_a), ("b", camera_b)):
            content = pipeline.render_content_maps(camera, STAGE2)
            if injection_params is None:
                params, _ = pipeline.injection_params(style_feats)
            else:
                params = injection_params
            identity = {level: InjectionParams.identity(pipeline.adaptor.level_channels[level])
                        for level in LEVELS}
            frames[tag, "styl"] = pipeline.decoder.decode(inject_levels(content, params))
            frames[tag, "cont"] = pipeline.decoder.decode(inject_levels(content, identity))

    def gather(image, pixels):
        rows = torch.as_tensor(pixels[:, 0], dtype=torch.long)
        cols = torch.as_tensor(pixels[:, 1], dtype=torch.long)
        return image[rows, cols]

    def rmse(x, y):
        return float(torch.sqrt(((x - y) ** 2).mean()))

    num = rmse(gather(frames["a", "styl"], pixels_a), gather(frames["b", "styl"], pixels_b))
    den = rmse(gather(frames["a", "cont"], pixels_a), gather(frames["b", "cont"], pixels_b))
    if den < 1e-12:
        return 1.0 if num < 1e-12 else float("inf")
    return num / den


ABLATION_VARIANTS = ("single_adain", "single_dsi", "multi_adain", "multi_dsi")


def ablation_run(views, style_images, variant_pipelines: dict, originals=None) -> list[dict]:
    """Style/content discrepancies per variant; absent variants are recorded as such.

    `variant_pipelines` maps variant name -> (pipeline, injection, level_mode)
    or None when that variant's checkpoint is missing.
    """
    rows = []
    for variant in ABLATION_VARIANTS:
        entry = variant_pipelines.get(variant)
        if entry is None:
            rows.append({"variant": variant, "status": "absent",
                         "style_discrepancy": "", "content_discrepancy": ""})
            continue
        pipeline, injection, level_mode = entry
        style_total = 0.0
        content_total = 0.0
        count = 0
        with torch.no_grad():
            for style_image in style_images:
                for view_id, camera in enumerate(views.cameras):
                    stylized = pipeline.stylize_view(camera, style_image,
                                                     injection=injection,
                                                     level_mode=level_mode)
                    stylized = stylized.clamp(0.0, 1.0)
                    original = (originals[view_id] if originals is not None
                                else views.images[view_id])
                    style_total += style_discrepancy([stylized], style_image,
                                                     pipeline.encoder)
                    content_total += content_discrepancy(stylized, original,
                                                         pipeline.encoder)
                    count += 1
        rows.append({"variant": variant, "status": "ok",
                     "style_discrepancy": style_total / count,
                     "content_discrepancy": content_total / count})
    return rows


def ablation_table_csv(rows) -> str:
    header = "variant,status,style_discrepancy,content_discrepancy"
    lines = [header]
    for row in rows:
        lines.append(f"{row['variant']},{row['status']},"
                     f"{row['style_discrepancy']},{row['content_discrepancy']}")
    return "\n".join(lines) + "\n"
