import numpy as np
import pytest
import torch

from oracles import naive_bilinear_resize, naive_conv2d, naive_maxpool2
from stylefield.encoder import (PerceptualEncoder, StyleFeatures,
                                feature_supervision_loss, upsample_to)
from stylefield.errors import ValidationError
from stylefield.mlfa import LEVELS


class TestEncodeLevels:
    def test_architecture_forced_shapes(self, tiny_encoder):
        image = torch.rand(16, 24, 3)
        feats = tiny_encoder.encode_levels(image)
        assert feats["low"].shape == (16, 24, 4)
        assert feats["mid"].shape == (8, 12, 6)
        assert feats["high"].shape == (4, 6, 8)

    def test_outputs_non_negative(self, tiny_encoder):
        feats = tiny_encoder.encode_levels(torch.rand(8, 8, 3))
        for level in LEVELS:
            assert float(feats[level].min()) >= 0.0

    def test_matches_naive_convolution_oracle(self):
        enc = PerceptualEncoder.tiny_random((2, 3, 4), seed=5).double()
        image = torch.full((4, 4, 3), 0.5, dtype=torch.float64)
        feats = enc.encode_levels(image)

        x = ((image.numpy() - enc.input_mean.reshape(3).numpy())
             / enc.input_std.reshape(3).numpy())

        def conv(name, data):
            conv_mod = getattr(enc, name)
            return naive_conv2d(data, conv_mod.weight.detach().numpy(),
                                conv_mod.bias.detach().numpy())

        tap1 = np.maximum(conv("conv1_1", x), 0.0)
        np.testing.assert_allclose(feats["low"].detach().numpy(), tap1, atol=1e-10)
        y = naive_maxpool2(np.maximum(conv("conv1_2", tap1), 0.0))
        tap2 = np.maximum(conv("conv2_1", y), 0.0)
        np.testing.assert_allclose(feats["mid"].detach().numpy(), tap2, atol=1e-10)
        z = naive_maxpool2(np.maximum(conv("conv2_2", tap2), 0.0))
        tap3 = np.maximum(conv("conv3_1", z), 0.0)
        np.testing.assert_allclose(feats["high"].detach().numpy(), tap3, atol=1e-10)

    def test_size_policy(self, tiny_encoder):
        with pytest.raises(ValidationError):
            tiny_encoder.encode_levels(torch.rand(6, 8, 3), resize_policy="error")
        with pytest.warns(UserWarning):
            feats = tiny_encoder.encode_levels(torch.rand(6, 8, 3), resize_policy="resize")
        assert feats["low"].shape[:2] == (8, 8)

    def test_deterministic(self, tiny_encoder):
        image = torch.rand(8, 8, 3)
        a = tiny_encoder.encode_levels(image)
        b = tiny_encoder.encode_levels(image)
        for level in LEVELS:
            assert torch.equal(a[level], b[level])

    def test_checkpoint_round_trip(self, tiny_encoder, tmp_path):
        path = tmp_path / "enc"
        tiny_encoder.save(path)
        clone = PerceptualEncoder.from_file(path)
        image = torch.rand(8, 8, 3)
        a = tiny_encoder.encode_levels(image)
        b = clone.encode_levels(image)
        for level in LEVELS:
            np.testing.assert_allclose(a[level].numpy(), b[level].numpy(), atol=1e-7)

    def test_vgg19_state_dict_ingestion(self):
        # synthetic state dict with torchvision's features.* indices
        rng = torch.Generator().manual_seed(0)
        shapes = {0: (64, 3), 2: (64, 64), 5: (128, 64), 7: (128, 128), 10: (256, 128)}
        sd = {}
        for idx, (out_c, in_c) in shapes.items():
            sd[f"{idx}.weight"] = torch.randn(out_c, in_c, 3, 3, generator=rng)
            sd[f"{idx}.bias"] = torch.randn(out_c, generator=rng)
        enc = PerceptualEncoder.from_vgg19_features_state_dict(sd)
        assert enc.channels == (64, 128, 256)
        assert torch.equal(enc.conv2_1.weight, sd["5.weight"])


class TestUpsample:
    def test_same_size_identity(self):
        feat = torch.rand(4, 4, 2)
        assert torch.equal(upsample_to(feat, 4, 4), feat)

    def test_constant_preserved(self):
        feat = torch.full((3, 5, 2), 0.7)
        out = upsample_to(feat, 9, 10)
        np.testing.assert_allclose(out.numpy(), 0.7, atol=1e-6)

    def test_hand_computed_two_by_two(self):
        feat = torch.tensor([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1)
        out = upsample_to(feat, 4, 4)[:, :, 0]
        expected = np.array([
            [1.0, 1.25, 1.75, 2.0],
            [1.5, 1.75, 2.25, 2.5],
            [2.5, 2.75, 3.25, 3.5],
            [3.0, 3.25, 3.75, 4.0],
        ])
        np.testing.assert_allclose(out.numpy(), expected, atol=1e-6)

    def test_matches_general_oracle(self):
        rng = np.random.default_rng(3)
        feat = rng.normal(size=(3, 4, 2))
        out = upsample_to(torch.from_numpy(feat), 7, 9)
        np.testing.assert_allclose(out.numpy(), naive_bilinear_resize(feat, 7, 9),
                                   atol=1e-10)

    def test_linear_in_input(self):
        rng = np.random.default_rng(4)
        a = torch.from_numpy(rng.normal(size=(2, 2, 3)))
        b = torch.from_numpy(rng.normal(size=(2, 2, 3)))
        lhs = upsample_to(2.0 * a + 0.3 * b, 5, 5)
        rhs = 2.0 * upsample_to(a, 5, 5) + 0.3 * upsample_to(b, 5, 5)
        np.testing.assert_allclose(lhs.numpy(), rhs.numpy(), atol=1e-12)

    def test_downsample_rejected(self):
        with pytest.raises(ValidationError):
            upsample_to(torch.rand(4, 4, 1), 2, 4)


def make_maps(h, w, channels=(4, 6, 8), seed=0):
    g = torch.Generator().manual_seed(seed)
    return {level: torch.rand(h, w, c, generator=g)
            for level, c in zip(LEVELS, channels)}


def make_feats(h, w, channels=(4, 6, 8), seed=1):
    g = torch.Generator().manual_seed(seed)
    maps = {"low": torch.rand(h, w, channels[0], generator=g),
            "mid": torch.rand(h // 2, w // 2, channels[1], generator=g),
            "high": torch.rand(h // 4, w // 4, channels[2], generator=g)}
    return StyleFeatures(maps=maps, image_hw=(h, w))


class TestFeatureSupervisionLoss:
    def test_zero_when_equal(self):
        feats = make_feats(8, 8)
        rendered = {level: upsample_to(feats[level], 8, 8) for level in LEVELS}
        assert float(feature_supervision_loss(rendered, feats)) == pytest.approx(0.0,
                                                                                 abs=1e-12)

    def test_single_element_difference(self):
        feats = make_feats(8, 8)
        rendered = {level: upsample_to(feats[level], 8, 8).clone() for level in LEVELS}
        rendered["low"][0, 0, 0] += 0.5
        expected = 0.5 ** 2 / (8 * 8 * 4)
        assert float(feature_supervision_loss(rendered, feats)) == pytest.approx(
            expected, abs=1e-9)

    def test_matches_loop_oracle(self):
        rendered = make_maps(8, 8, seed=5)
        feats = make_feats(8, 8, seed=6)
        got = float(feature_supervision_loss(rendered, feats))
        expected = 0.0
        for level in LEVELS:
            target = naive_bilinear_resize(feats[level].numpy().astype(np.float64), 8, 8)
            diff = rendered[level].numpy().astype(np.float64) - target
            expected += (diff ** 2).mean()
        assert got == pytest.approx(expected, abs=1e-6)

    def test_symmetric_and_nonnegative(self):
        a = make_maps(4, 4, seed=7)
        b = make_maps(4, 4, seed=8)
        fa = StyleFeatures(maps=a, image_hw=(4, 4))
        fb = StyleFeatures(maps=b, image_hw=(4, 4))
        lab = float(feature_supervision_loss(a, fb))
        lba = float(feature_supervision_loss(b, fa))
        assert lab == pytest.approx(lba, rel=1e-6)
        assert lab >= 0

    def test_channel_mismatch_rejected(self):
        rendered = make_maps(8, 8, channels=(4, 6, 8))
        feats = make_feats(8, 8, channels=(4, 6, 9))
        with pytest.raises(ValidationError):
            feature_supervision_loss(rendered, feats)
