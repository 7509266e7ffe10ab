import pytest
import torch

from stylefield.cameras import orbit_cameras
from stylefield.config import config_hash
from stylefield.errors import ValidationError
from stylefield.mlfa import LEVELS
from stylefield.pipeline import StylePipeline
from stylefield.scene_field import STAGE2
from stylefield.toyscene import analytic_scene_field, three_sphere_scene


@pytest.fixture
def pipeline(tiny_cfg):
    spec = three_sphere_scene()
    scene = analytic_scene_field(spec, resolution=tiny_cfg.grid_resolution,
                                 rank=tiny_cfg.grid_rank,
                                 feature_dim=tiny_cfg.basic_channels, seed=41)
    torch.manual_seed(41)
    return StylePipeline.build(tiny_cfg, scene=scene)


class TestCheckpointGlue:
    def test_round_trip_reproduces_renders(self, pipeline, tiny_cfg, tmp_path):
        ckpt = pipeline.to_checkpoint("stage2")
        assert ckpt.config_hash == config_hash(tiny_cfg)
        ckpt.save(tmp_path / "ck")
        from stylefield.checkpoint import Checkpoint

        loaded = Checkpoint.load(tmp_path / "ck")
        clone = StylePipeline.from_checkpoint(loaded, tiny_cfg)
        camera = orbit_cameras(2, 16, 16)[0]
        style = torch.rand(16, 16, 3, generator=torch.Generator().manual_seed(1))
        a = pipeline.stylize_view(camera, style)
        b = clone.stylize_view(camera, style)
        assert torch.equal(a, b)

    def test_shape_inference_matches_build(self, pipeline, tiny_cfg):
        ckpt = pipeline.to_checkpoint("stage1")
        clone = StylePipeline.from_checkpoint(ckpt, tiny_cfg)
        assert clone.scene.grid.resolution == pipeline.scene.grid.resolution
        assert clone.adaptor.level_channels == pipeline.adaptor.level_channels
        assert clone.decoder.level_channels == pipeline.decoder.level_channels

    def test_encoder_channel_mismatch_rejected(self, pipeline, tiny_cfg):
        ckpt = pipeline.to_checkpoint("stage1")
        bad_cfg = tiny_cfg.with_overrides(encoder_channels=(8, 16, 32))
        with pytest.raises(ValidationError, match="tap widths"):
            StylePipeline.from_checkpoint(ckpt, bad_cfg)


class TestStylizePaths:
    def test_mixed_same_style_equals_plain(self, pipeline):
        camera = orbit_cameras(2, 16, 16)[1]
        style = torch.rand(16, 16, 3, generator=torch.Generator().manual_seed(2))
        plain = pipeline.stylize_view(camera, style)
        mixed = pipeline.stylize_view_mixed(camera, {level: style for level in LEVELS})
        assert torch.equal(plain, mixed)

    def test_mixed_missing_level_rejected(self, pipeline):
        camera = orbit_cameras(2, 16, 16)[0]
        style = torch.rand(16, 16, 3)
        with pytest.raises(ValidationError, match="missing"):
            pipeline.stylize_view_mixed(camera, {"low": style})

    def test_single_level_mode_touches_only_high(self, pipeline):
        camera = orbit_cameras(2, 16, 16)[0]
        style = torch.rand(16, 16, 3, generator=torch.Generator().manual_seed(3))
        content = pipeline.render_content_maps(camera, STAGE2)
        feats = pipeline.encode_style(style)
        injected = pipeline.stylize_maps(content, feats, injection="dsi",
                                         level_mode="single")
        assert torch.equal(injected.maps["low"], content.maps["low"])
        assert torch.equal(injected.maps["mid"], content.maps["mid"])
        assert not torch.equal(injected.maps["high"], content.maps["high"])

    def test_adain_mode_matches_direct_adain(self, pipeline):
        from stylefield.dsi import adain_inject

        camera = orbit_cameras(2, 16, 16)[0]
        style = torch.rand(16, 16, 3, generator=torch.Generator().manual_seed(4))
        content = pipeline.render_content_maps(camera, STAGE2)
        feats = pipeline.encode_style(style)
        injected = pipeline.stylize_maps(content, feats, injection="adain",
                                         level_mode="multi")
        for level in LEVELS:
            expected = adain_inject(content.maps[level], feats[level])
            assert torch.equal(injected.maps[level], expected)

    def test_determinism(self, pipeline):
        camera = orbit_cameras(2, 16, 16)[0]
        style = torch.rand(16, 16, 3, generator=torch.Generator().manual_seed(5))
        assert torch.equal(pipeline.stylize_view(camera, style),
                           pipeline.stylize_view(camera, style))
