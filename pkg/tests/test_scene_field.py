import numpy as np
import pytest
import torch

from oracles import materialize_dense_features, trilinear
from stylefield.errors import ValidationError
from stylefield.scene_field import (FactorizedGrid, OpacityField, Ray, SceneField,
                                    query_basic_feature, query_density, sample_ray)


def make_ray(near=0.0, far=1.0):
    return Ray(origin=torch.zeros(3), direction=torch.tensor([0.0, 0.0, 1.0]),
               near=near, far=far)


class TestSampleRay:
    def test_uniform_midpoints(self):
        batch = sample_ray(make_ray(), 4, jitter=False)
        np.testing.assert_allclose(batch.depths.numpy(), [0.125, 0.375, 0.625, 0.875],
                                   atol=1e-12)
        # consecutive spacing 0.25; the last delta closes out to `far`
        np.testing.assert_allclose(batch.deltas.numpy(), [0.25, 0.25, 0.25, 0.125],
                                   atol=1e-12)

    def test_single_sample(self):
        batch = sample_ray(make_ray(), 1)
        np.testing.assert_allclose(batch.depths.numpy(), [0.5], atol=1e-12)
        np.testing.assert_allclose(batch.deltas.numpy(), [0.5], atol=1e-12)

    def test_jitter_reproducible(self):
        a = sample_ray(make_ray(), 8, jitter=True, seed=123)
        b = sample_ray(make_ray(), 8, jitter=True, seed=123)
        assert torch.equal(a.depths, b.depths)
        assert torch.equal(a.positions, b.positions)

    def test_jitter_seeds_differ(self):
        a = sample_ray(make_ray(), 8, jitter=True, seed=1)
        b = sample_ray(make_ray(), 8, jitter=True, seed=2)
        assert not torch.equal(a.depths, b.depths)

    def test_monotone_and_bounded(self):
        for seed in range(5):
            batch = sample_ray(make_ray(0.3, 2.7), 16, jitter=True, seed=seed)
            depths = batch.depths.numpy()
            assert (np.diff(depths) > 0).all()
            assert depths[0] >= 0.3 and depths[-1] <= 2.7
            assert batch.deltas.numpy().sum() <= (2.7 - 0.3) + batch.deltas[-1].item() + 1e-12

    def test_positions_along_ray(self):
        ray = Ray(origin=torch.tensor([1.0, 2.0, 3.0]),
                  direction=torch.tensor([0.0, 1.0, 0.0]), near=0.0, far=2.0)
        batch = sample_ray(ray, 4)
        np.testing.assert_allclose(batch.positions[:, 1].numpy(),
                                   2.0 + batch.depths.numpy(), atol=1e-12)

    def test_validation(self):
        with pytest.raises(ValidationError):
            Ray(origin=torch.zeros(3), direction=torch.tensor([0.0, 0.0, 2.0]),
                near=0.0, far=1.0)
        with pytest.raises(ValidationError):
            Ray(origin=torch.zeros(3), direction=torch.tensor([0.0, 0.0, 1.0]),
                near=1.0, far=1.0)
        with pytest.raises(ValidationError):
            sample_ray(make_ray(), 0)


class TestFactorizedGrid:
    def test_constant_rank1_identity_projection(self):
        # all-ones factors, rank 1, identity projection: every in-bounds point
        # sums one product per axis pair
        grid = FactorizedGrid(resolution=4, rank=1, feature_dim=1)
        with torch.no_grad():
            for p in (grid.plane_xy, grid.plane_xz, grid.plane_yz,
                      grid.line_x, grid.line_y, grid.line_z):
                p.fill_(1.0)
            grid.proj.weight.fill_(1.0)
        points = torch.tensor([[0.0, 0.0, 0.0], [0.31, -0.62, 0.97], [-1.0, 1.0, -1.0]])
        feats, inbounds = grid.query(points)
        assert inbounds.all()
        np.testing.assert_allclose(feats.detach().numpy(), 3.0, atol=1e-6)

    def test_matches_dense_reconstruction(self):
        torch.manual_seed(5)
        grid = FactorizedGrid(resolution=4, rank=2, feature_dim=5).double()
        dense = materialize_dense_features(
            grid.plane_xy.detach().numpy(), grid.plane_xz.detach().numpy(),
            grid.plane_yz.detach().numpy(), grid.line_x.detach().numpy(),
            grid.line_y.detach().numpy(), grid.line_z.detach().numpy(),
            grid.proj.weight.detach().numpy())
        r = grid.resolution
        axis = np.linspace(-1.0, 1.0, r)
        # exact node positions (voxel corners)
        for ix, iy, iz in [(0, 0, 0), (3, 2, 1), (1, 3, 3), (2, 2, 2)]:
            point = torch.tensor([[axis[ix], axis[iy], axis[iz]]], dtype=torch.float64)
            feats, _ = grid.query(point)
            np.testing.assert_allclose(feats[0].detach().numpy(), dense[ix, iy, iz],
                                       atol=1e-10)
        # voxel centers and random interior points: trilinear of the dense grid
        rng = np.random.default_rng(0)
        centers = (axis[:-1] + axis[1:]) / 2
        queries = [(centers[i], centers[j], centers[k])
                   for i, j, k in rng.integers(0, r - 1, size=(8, 3))]
        queries += [tuple(rng.uniform(-1, 1, 3)) for _ in range(20)]
        for point in queries:
            coords = [(c + 1) / 2 * (r - 1) for c in point]
            expected = trilinear(dense, coords)
            feats, _ = grid.query(torch.tensor([point], dtype=torch.float64))
            np.testing.assert_allclose(feats[0].detach().numpy(), expected, atol=1e-10)

    def test_out_of_bounds_zero_and_flagged(self):
        grid = FactorizedGrid(resolution=4, rank=2, feature_dim=3)
        feats, inbounds = grid.query(torch.tensor([[1.5, 0.0, 0.0]]))
        assert not inbounds[0]
        np.testing.assert_allclose(feats.detach().numpy(), 0.0)

    def test_single_point_wrapper_deterministic(self):
        grid = FactorizedGrid(resolution=6, rank=3, feature_dim=4)
        p = [0.21, -0.4, 0.77]
        a = query_basic_feature(grid, p)
        b = query_basic_feature(grid, p)
        assert torch.equal(a, b)


class TestOpacityField:
    def test_empty_everywhere_zero(self):
        field = OpacityField(resolution=4)
        pts = torch.rand(20, 3) * 2 - 1
        np.testing.assert_allclose(field.query(pts).detach().numpy(), 0.0)

    def test_single_voxel_center_value(self):
        values = torch.zeros(5, 5, 5)
        values[2, 2, 2] = 3.5
        field = OpacityField.from_grid(values)
        # node (2,2,2) sits at the origin for resolution 5 over [-1, 1]
        assert float(query_density(field, [0.0, 0.0, 0.0])) == pytest.approx(3.5, abs=1e-6)

    def test_trilinear_midpoint(self):
        values = torch.zeros(3, 3, 3)
        values[1, 1, 1] = 0.0
        values[2, 1, 1] = 2.0
        field = OpacityField.from_grid(values)
        # midway between nodes (1,1,1) and (2,1,1): x = 0.5 over [-1, 1]
        assert float(query_density(field, [0.5, 0.0, 0.0])) == pytest.approx(1.0, abs=1e-6)

    def test_out_of_bounds_zero(self):
        field = OpacityField.from_grid(torch.ones(3, 3, 3))
        assert float(query_density(field, [0.0, 0.0, 1.7])) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            OpacityField.from_grid(-torch.ones(3, 3, 3))

    def test_matches_trilinear_oracle(self):
        torch.manual_seed(2)
        values = torch.rand(4, 4, 4, dtype=torch.float64) * 5
        field = OpacityField.from_grid(values).double()
        rng = np.random.default_rng(7)
        for _ in range(20):
            point = rng.uniform(-1, 1, 3)
            coords = [(c + 1) / 2 * 3 for c in point]
            expected = trilinear(values.numpy(), coords)
            got = float(query_density(field, point.tolist()))
            assert got == pytest.approx(expected, abs=1e-10)


class TestSceneFieldContainer:
    def test_named_tensor_round_trip(self):
        a = SceneField(resolution=6, rank=2, feature_dim=8)
        b = SceneField(resolution=6, rank=2, feature_dim=8)
        b.load_named_tensors({k: v.numpy() for k, v in a.named_tensor_dict().items()})
        for (ka, va), (kb, vb) in zip(a.named_tensor_dict().items(),
                                      b.named_tensor_dict().items()):
            assert ka == kb
            assert torch.equal(va, vb)

    def test_shape_inference(self):
        scene = SceneField(resolution=7, rank=3, feature_dim=9, rgb_hidden=16)
        shape = SceneField.shape_from_tensors(
            {k: v.numpy() for k, v in scene.named_tensor_dict().items()})
        assert shape == {"resolution": 7, "rank": 3, "feature_dim": 9, "rgb_hidden": 16}
