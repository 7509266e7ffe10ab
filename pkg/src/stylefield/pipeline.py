"""End-to-end stylization pipeline and checkpoint glue.

A pipeline owns the frozen base scene, the feature adaptor, the injection
generators, the cascade decoder, and the perceptual encoder.  Checkpoints
store every learnable tensor under stable names (scene.*, mlfa.*, lin.*,
dsi.*, mlcd.*); module shapes are inferred back from those tensors on load,
so a checkpoint plus the run configuration fully determines the pipeline.
"""

from __future__ import annotations

import torch

from .checkpoint import Checkpoint
from .config import RunConfig, config_hash
from .dsi import InjectionParams, adain_inject, inject_levels, mask_amplify
from .encoder import PerceptualEncoder, build_encoder
from .errors import ValidationError
from .mlcd import CascadeDecoder
from .mlfa import LEVELS, FeatureAdaptor
from .renderer import LevelFeatureMaps, render_view
from .scene_field import STAGE1, STAGE2, SceneField


class StylePipeline:
    def __init__(self, cfg: RunConfig, scene: SceneField, adaptor: FeatureAdaptor,
                 generators, decoder: CascadeDecoder, encoder: PerceptualEncoder):
        self.cfg = cfg
        self.scene = scene
        self.adaptor = adaptor
        self.generators = generators
        self.decoder = decoder
        self.encoder = encoder

    @classmethod
    def build(cls, cfg: RunConfig, encoder: PerceptualEncoder | None = None,
              scene: SceneField | None = None) -> "StylePipeline":
        from .dsi import InjectionGenerators

        encoder = encoder if encoder is not None else build_encoder(cfg)
        channels = dict(zip(LEVELS, encoder.channels))
        scene = scene if scene is not None else SceneField(
            resolution=cfg.grid_resolution, rank=cfg.grid_rank,
            feature_dim=cfg.basic_channels, extent=cfg.scene_extent)
        adaptor = FeatureAdaptor(scene.feature_dim, channels, depth=cfg.mlfa_depth)
        generators = InjectionGenerators(channels, spatial_depth=cfg.dsi_spatial_depth,
                                         se_reduction=cfg.dsi_se_reduction)
        decoder = CascadeDecoder(channels, convs_per_stage=cfg.mlcd_stage_convs,
                                 dilations=cfg.mlcd_dilations)
        return cls(cfg, scene, adaptor, generators, decoder, encoder)

    # -- checkpointing ------------------------------------------------------

    def named_tensor_dict(self) -> dict[str, torch.Tensor]:
        out = {}
        out.update(self.scene.named_tensor_dict())
        out.update(self.adaptor.named_tensor_dict())
        out.update(self.generators.named_tensor_dict())
        out.update(self.decoder.named_tensor_dict())
        return out

    def to_checkpoint(self, stage: str) -> Checkpoint:
        tensors = {name: value.cpu().numpy()
                   for name, value in self.named_tensor_dict().items()}
        return Checkpoint(tensors, stage=stage, config_hash=config_hash(self.cfg),
                          seed=self.cfg.seed)

    def load_checkpoint(self, ckpt: Checkpoint):
        self.scene.load_named_tensors(ckpt.tensors)
        self.adaptor.load_named_tensors(ckpt.tensors)
        self.generators.load_named_tensors(ckpt.tensors)
        self.decoder.load_named_tensors(ckpt.tensors)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, cfg: RunConfig,
                        encoder: PerceptualEncoder | None = None) -> "StylePipeline":
        from .dsi import InjectionGenerators

        scene_shape = SceneField.shape_from_tensors(ckpt.tensors)
        scene = SceneField(extent=cfg.scene_extent, **scene_shape)
        mlfa_shape = FeatureAdaptor.shape_from_tensors(ckpt.tensors)
        adaptor = FeatureAdaptor(**mlfa_shape)
        dsi_shape = InjectionGenerators.shape_from_tensors(ckpt.tensors)
        generators = InjectionGenerators(**dsi_shape)
        mlcd_shape = CascadeDecoder.shape_from_tensors(ckpt.tensors)
        decoder = CascadeDecoder(dilations=cfg.mlcd_dilations, **mlcd_shape)
        encoder = encoder if encoder is not None else build_encoder(cfg)
        if tuple(encoder.channels) != tuple(mlfa_shape["level_channels"][lv] for lv in LEVELS):
            raise ValidationError("encoder tap widths do not match checkpoint channels")
        pipeline = cls(cfg, scene, adaptor, generators, decoder, encoder)
        pipeline.load_checkpoint(ckpt)
        return pipeline

    # -- rendering ------------------------------------------------------------

    def render_content_maps(self, camera, stage: str, view_id: int = -1) -> LevelFeatureMaps:
        cfg = self.cfg
        return render_view(self.scene, self.adaptor, camera, stage,
                           n_samples=cfg.samples_per_ray, near=cfg.near, far=cfg.far,
                           chunk_rays=cfg.chunk_rays, view_id=view_id)

    def decode_content(self, camera, stage: str = STAGE1) -> torch.Tensor:
        """Content decode: rendered maps straight through the decoder (raw RGB)."""
        with torch.no_grad():
            maps = self.render_content_maps(camera, stage)
            return self.decoder.decode(maps)

    def encode_style(self, style_image: torch.Tensor, mask: torch.Tensor | None = None):
        feats = self.encoder.encode_levels(style_image, self.cfg.resize_policy)
        if mask is not None:
            feats = mask_amplify(feats, mask)
        return feats

    def injection_params(self, style_feats, injection: str | None = None,
                         level_mode: str | None = None, content_maps=None):
        """Per-level injection parameters; identity at levels outside the level set."""
        injection = injection or self.cfg.injection
        level_mode = level_mode or self.cfg.levels
        active = LEVELS if level_mode == "multi" else ("high",)
        params = {}
        for level in LEVELS:
            channels = self.adaptor.level_channels[level]
            if level in active and injection == "dsi":
                params[level] = self.generators.generate(style_feats, level)
            else:
                params[level] = InjectionParams.identity(channels)
        return params, active

    def stylize_maps(self, content_maps: LevelFeatureMaps, style_feats,
                     injection: str | None = None,
                     level_mode: str | None = None) -> LevelFeatureMaps:
        injection = injection or self.cfg.injection
        params, active = self.injection_params(style_feats, injection, level_mode)
        if injection == "adain":
            maps = {}
            for level in LEVELS:
                if level in active:
                    maps[level] = adain_inject(content_maps.maps[level], style_feats[level])
                else:
                    maps[level] = content_maps.maps[level]
            return LevelFeatureMaps(maps=maps, opacity=content_maps.opacity,
                                    view_id=content_maps.view_id)
        return inject_levels(content_maps, params)

    def stylize_view(self, camera, style_image: torch.Tensor,
                     mask: torch.Tensor | None = None, injection: str | None = None,
                     level_mode: str | None = None) -> torch.Tensor:
        """Render, inject, decode one view against a 2D style reference (raw RGB)."""
        with torch.no_grad():
            content = self.render_content_maps(camera, STAGE2)
            style_feats = self.encode_style(style_image, mask=mask)
            injected = self.stylize_maps(content, style_feats, injection, level_mode)
            return self.decoder.decode(injected)

    def stylize_view_mixed(self, camera, styles_by_level: dict[str, torch.Tensor]) -> torch.Tensor:
        """Per-level style mixing: each level gets parameters from its own reference."""
        missing = [level for level in LEVELS if level not in styles_by_level]
        if missing:
            raise ValidationError(f"style mixing is missing levels: {missing}")
        with torch.no_grad():
            content = self.render_content_maps(camera, STAGE2)
            params = {}
            for level in LEVELS:
                feats = self.encode_style(styles_by_level[level])
                params[level] = self.generators.generate(feats, level)
            return self.decoder.decode(inject_levels(content, params))
