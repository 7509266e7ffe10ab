"""Training stages and losses.

Stage0 (plumbing): photometric fit of the base scene on toy views.
Stage1: feature-grid reconstruction - adaptor MLPs + decoder against
    L_g = L_f + L_r (encoder supervision plus RGB recovery).
Stage2: stylization - LIN + injection generators at one learning rate, the
    decoder at a smaller one, against L_cs = L_c + lambda * L_s with a random
    style reference each iteration.  The base scene and the adaptor MLPs stay
    frozen; both stages cache everything the frozen parts produce.

LIN commutes through compositing: with per-point LIN the composited map is
(M - mu * A) / sigma where M is the pre-LIN map and A the accumulated
opacity, which is how stage2 trains from cached maps without re-rendering.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import torch

from .config import RunConfig
from .encoder import StyleFeatures, feature_supervision_loss, upsample_to
from .errors import ConfigError, ValidationError
from .mlfa import LEVELS
from .pipeline import StylePipeline
from .renderer import (LevelFeatureMaps, composite_level_maps, render_pixel_feature,
                       trace_rays, trace_view)
from .scene_field import STAGE1, STAGE2, SceneField

STAGE0_OPACITY_WEIGHT = 0.25


@dataclass
class LossReport:
    columns: list
    rows: list = field(default_factory=list)

    def append(self, **values):
        row = {}
        for key in self.columns:
            value = values[key]
            if isinstance(value, torch.Tensor):
                value = value.detach()
            row[key] = float(value)
        self.rows.append(row)

    def column(self, name):
        return [row[name] for row in self.rows]

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(repr(row[c]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.to_csv())


def rgb_recovery_loss(decoded: torch.Tensor, ground_truth: torch.Tensor) -> torch.Tensor:
    """Per-pixel mean squared error between decoded and ground-truth images."""
    if decoded.shape != ground_truth.shape:
        raise ValidationError(f"image shapes differ: {tuple(decoded.shape)} vs "
                              f"{tuple(ground_truth.shape)}")
    return ((decoded - ground_truth) ** 2).mean()


def psnr(decoded: torch.Tensor, ground_truth: torch.Tensor) -> float:
    mse = float(rgb_recovery_loss(decoded.clamp(0, 1), ground_truth))
    if mse == 0:
        return float("inf")
    return -10.0 * torch.log10(torch.tensor(mse)).item()


def channel_statistics(feat: torch.Tensor):
    """Per-channel spatial mean and (eps-guarded) std of an (H, W, C) map."""
    mean = feat.mean(dim=(0, 1))
    std = torch.sqrt(feat.var(dim=(0, 1), unbiased=False) + 1e-5)
    return mean, std


def style_statistics_loss(feats_a: StyleFeatures, feats_b: StyleFeatures) -> torch.Tensor:
    """Squared differences of per-channel means and stds, summed over levels."""
    total = None
    for level in LEVELS:
        mean_a, std_a = channel_statistics(feats_a[level])
        mean_b, std_b = channel_statistics(feats_b[level])
        term = ((mean_a - mean_b) ** 2).mean() + ((std_a - std_b) ** 2).mean()
        total = term if total is None else total + term
    return total


def style_content_loss(stylized: torch.Tensor, content_high_pre_lin: torch.Tensor,
                       style_feats: StyleFeatures, encoder, style_weight: float,
                       resize_policy: str = "error"):
    """Stage2 losses (L_c, L_s, L_cs) for one stylized view.

    The content target is the rendered high-level map before LIN and
    injection; the stylized image is encoded once and reused for both terms.
    """
    stylized_feats = encoder.encode_levels(stylized, resize_policy)
    loss_s = style_statistics_loss(stylized_feats, style_feats)
    high = upsample_to(stylized_feats["high"], content_high_pre_lin.shape[0],
                       content_high_pre_lin.shape[1])
    loss_c = ((high - content_high_pre_lin) ** 2).mean()
    return loss_c, loss_s, loss_c + style_weight * loss_s


def apply_lin_to_maps(adaptor, maps: LevelFeatureMaps) -> LevelFeatureMaps:
    """Composited equivalent of per-point LIN: (M - mu * A) / sigma."""
    acc = maps.opacity[..., None]
    out = {}
    for level in LEVELS:
        mu = adaptor.lin_mu[level]
        sigma = adaptor.lin_sigma(level)
        out[level] = (maps.maps[level] - mu * acc) / sigma
    return LevelFeatureMaps(maps=out, opacity=maps.opacity, view_id=maps.view_id)


# ---------------------------------------------------------------------------
# Stage0: photometric pre-training of the base scene (plumbing)

def train_stage0(scene: SceneField, views, cfg: RunConfig, log_every: int = 50):
    """Fit density + features + RGB head to posed toy views by photometric MSE.

    When the view set carries masks, the accumulated opacity is additionally
    pulled toward the mask, which sharpens geometry on synthetic scenes.
    """
    if len(views) == 0:
        raise ConfigError("stage0 requires ground-truth views")
    torch.manual_seed(cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed + 1)

    all_origins, all_dirs, all_rgb, all_alpha = [], [], [], []
    for i, cam in enumerate(views.cameras):
        origins, dirs = cam.rays(dtype=torch.float32)
        all_origins.append(origins.reshape(-1, 3))
        all_dirs.append(dirs.reshape(-1, 3))
        all_rgb.append(views.images[i].reshape(-1, 3))
        mask = views.masks[i] if views.masks else None
        if mask is None:
            all_alpha.append(None)
        else:
            all_alpha.append(mask.reshape(-1).to(torch.float32))
    origins = torch.cat(all_origins)
    dirs = torch.cat(all_dirs)
    rgb_gt = torch.cat(all_rgb)
    alpha_gt = torch.cat(all_alpha) if all(a is not None for a in all_alpha) else None

    grid_params = [scene.grid.plane_xy, scene.grid.plane_xz, scene.grid.plane_yz,
                   scene.grid.line_x, scene.grid.line_y, scene.grid.line_z,
                   scene.opacity.values]
    net_params = list(scene.grid.proj.parameters()) + list(scene.rgb.parameters())
    optimizer = torch.optim.Adam([
        {"params": grid_params, "lr": cfg.stage0_lr_grid},
        {"params": net_params, "lr": cfg.stage0_lr_net},
    ])

    report = LossReport(columns=["iteration", "l_rgb", "l_alpha", "wall_clock"])
    start = time.perf_counter()
    n_rays = origins.shape[0]
    for iteration in range(cfg.stage0_iters):
        idx = torch.randint(0, n_rays, (min(cfg.stage0_rays_per_batch, n_rays),),
                            generator=generator)
        feats, weights = trace_rays(scene, origins[idx], dirs[idx],
                                    cfg.samples_per_ray, cfg.near, cfg.far,
                                    chunk_rays=cfg.chunk_rays, jitter=cfg.jitter,
                                    generator=generator)
        colors = scene.point_rgb(feats.reshape(-1, feats.shape[-1]))
        colors = colors.reshape(*weights.shape, 3)
        rendered = render_pixel_feature(weights, colors)
        loss_rgb = ((rendered - rgb_gt[idx]) ** 2).mean()
        loss_alpha = torch.tensor(0.0)
        if alpha_gt is not None:
            loss_alpha = ((weights.sum(-1) - alpha_gt[idx]) ** 2).mean()
        loss = loss_rgb + STAGE0_OPACITY_WEIGHT * loss_alpha
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        scene.opacity.clamp_nonnegative_()
        if iteration % log_every == 0 or iteration + 1 == cfg.stage0_iters:
            report.append(iteration=iteration, l_rgb=loss_rgb, l_alpha=loss_alpha,
                          wall_clock=time.perf_counter() - start)
    return report


# ---------------------------------------------------------------------------
# Stage1: multi-level feature grid reconstruction

def _cache_view_bundles(pipeline: StylePipeline, views):
    cfg = pipeline.cfg
    bundles = []
    with torch.no_grad():
        for cam in views.cameras:
            bundle = trace_view(pipeline.scene, cam, cfg.samples_per_ray, cfg.near,
                                cfg.far, chunk_rays=cfg.chunk_rays)
            bundle.features = bundle.features.detach()
            bundle.weights = bundle.weights.detach()
            bundles.append(bundle)
    return bundles


def train_stage1(pipeline: StylePipeline, views, cfg: RunConfig | None = None,
                 log_every: int = 1):
    """Optimize adaptor MLPs + decoder against L_g = L_f + L_r."""
    cfg = cfg or pipeline.cfg
    if len(views) == 0:
        raise ConfigError("stage1 requires ground-truth views")
    torch.manual_seed(cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed + 2)

    report = LossReport(columns=["iteration", "l_f", "l_r", "l_g", "wall_clock"])
    checkpoint = pipeline.to_checkpoint(STAGE1)
    if cfg.stage1_iters == 0:
        return checkpoint, report

    bundles = _cache_view_bundles(pipeline, views)
    with torch.no_grad():
        targets = [pipeline.encoder.encode_levels(img, cfg.resize_policy)
                   for img in views.images]

    params = pipeline.adaptor.mlp_parameters() + list(pipeline.decoder.parameters())
    optimizer = torch.optim.Adam(params, lr=cfg.stage1_lr)

    start = time.perf_counter()
    for iteration in range(cfg.stage1_iters):
        view_id = int(torch.randint(0, len(views), (1,), generator=generator))
        maps = composite_level_maps(bundles[view_id], pipeline.adaptor, STAGE1,
                                    view_id=view_id)
        loss_f = feature_supervision_loss(maps, targets[view_id])
        decoded = pipeline.decoder.decode(maps)
        loss_r = rgb_recovery_loss(decoded, views.images[view_id])
        loss_g = loss_f + loss_r
        optimizer.zero_grad()
        loss_g.backward()
        optimizer.step()
        if iteration % log_every == 0 or iteration + 1 == cfg.stage1_iters:
            report.append(iteration=iteration, l_f=loss_f, l_r=loss_r, l_g=loss_g,
                          wall_clock=time.perf_counter() - start)
    return pipeline.to_checkpoint(STAGE1), report


# ---------------------------------------------------------------------------
# Stage2: zero-shot stylization training

def train_stage2(pipeline: StylePipeline, views, style_images, cfg: RunConfig | None = None,
                 log_every: int = 1):
    """Optimize LIN + generators (and gently the decoder) against L_cs.

    Each iteration draws one training view and one style image uniformly.
    The injection/level variant comes from cfg.injection and cfg.levels, so
    the same loop trains the ablation baselines.
    """
    cfg = cfg or pipeline.cfg
    if len(style_images) == 0:
        raise ConfigError("stage2 requires a non-empty style corpus")
    if len(views) == 0:
        raise ConfigError("stage2 requires training views")
    torch.manual_seed(cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed + 3)

    report = LossReport(columns=["iteration", "l_c", "l_s", "l_cs", "wall_clock"])
    if cfg.stage2_iters == 0:
        return pipeline.to_checkpoint(STAGE2), report

    # frozen per-view content maps (pre-LIN) and per-style encodings
    with torch.no_grad():
        content_maps = []
        for view_id, cam in enumerate(views.cameras):
            maps = pipeline.render_content_maps(cam, STAGE1, view_id=view_id)
            content_maps.append(maps.detached())
        style_feats = [pipeline.encoder.encode_levels(img, cfg.resize_policy)
                       for img in style_images]

    style_params = (pipeline.adaptor.lin_parameters()
                    + list(pipeline.generators.parameters()))
    optimizer = torch.optim.Adam([
        {"params": style_params, "lr": cfg.stage2_lr_style},
        {"params": list(pipeline.decoder.parameters()), "lr": cfg.stage2_lr_decoder},
    ])

    start = time.perf_counter()
    for iteration in range(cfg.stage2_iters):
        view_id = int(torch.randint(0, len(views), (1,), generator=generator))
        style_id = int(torch.randint(0, len(style_images), (1,), generator=generator))
        maps = apply_lin_to_maps(pipeline.adaptor, content_maps[view_id])
        injected = pipeline.stylize_maps(maps, style_feats[style_id],
                                         injection=cfg.injection, level_mode=cfg.levels)
        stylized = pipeline.decoder.decode(injected)
        loss_c, loss_s, loss_cs = style_content_loss(
            stylized, content_maps[view_id].maps["high"], style_feats[style_id],
            pipeline.encoder, cfg.style_weight, cfg.resize_policy)
        optimizer.zero_grad()
        loss_cs.backward()
        optimizer.step()
        if iteration % log_every == 0 or iteration + 1 == cfg.stage2_iters:
            report.append(iteration=iteration, l_c=loss_c, l_s=loss_s, l_cs=loss_cs,
                          wall_clock=time.perf_counter() - start)
    return pipeline.to_checkpoint(STAGE2), report
