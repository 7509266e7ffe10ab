import numpy as np
import pytest
import torch

from stylefield.cameras import ViewSet, look_at, orbit_cameras
from stylefield.dsi import InjectionParams, mask_amplify
from stylefield.errors import StyleObjectNotVisibleError, ValidationError
from stylefield.mlfa import LEVELS as LEVELS_
from stylefield.pipeline import StylePipeline
from stylefield.reference3d import (StyleReference, align_poses, stylize_omniview,
                                    synchronized_style_view)
from stylefield.renderer import render_rgb_view
from stylefield.scene_field import SceneField
from stylefield.toyscene import analytic_scene_field, sphere_object_scene, three_sphere_scene


def rotation_about_y(angle_deg):
    a = np.radians(angle_deg)
    pose = np.eye(4)
    pose[:3, :3] = np.array([
        [np.cos(a), 0.0, np.sin(a)],
        [0.0, 1.0, 0.0],
        [-np.sin(a), 0.0, np.cos(a)],
    ])
    return pose


class TestAlignPoses:
    def test_identical_fronts_identity(self):
        pose = look_at([0, 0, 2.0], [0, 0, 0])
        transform = align_poses(pose, pose.copy())
        np.testing.assert_allclose(transform, np.eye(4), atol=1e-12)

    def test_rotated_front(self):
        content = look_at([0, 0, 2.0], [0, 0, 0])
        rot = rotation_about_y(90.0)
        style = rot @ content
        transform = align_poses(content, style)
        np.testing.assert_allclose(transform, rot, atol=1e-10)

    def test_random_rigid_composition(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            content = look_at(rng.normal(size=3) * 2 + 4, rng.normal(size=3) * 0.1)
            style = look_at(rng.normal(size=3) * 2 - 4, rng.normal(size=3) * 0.1)
            transform = align_poses(content, style)
            np.testing.assert_allclose(transform @ content, style, atol=1e-10)

    def test_rigidity_preserves_distances(self):
        rng = np.random.default_rng(5)
        content = look_at([0, 1, 3], [0, 0, 0])
        style = look_at([2, -1, -3], [0.2, 0, 0])
        transform = align_poses(content, style)
        points = rng.normal(size=(10, 3))
        mapped = points @ transform[:3, :3].T + transform[:3, 3]
        for i in range(9):
            original = np.linalg.norm(points[i] - points[i + 1])
            moved = np.linalg.norm(mapped[i] - mapped[i + 1])
            assert moved == pytest.approx(original, abs=1e-10)

    def test_non_rigid_rejected(self):
        pose = look_at([0, 0, 2.0], [0, 0, 0])
        bad = pose.copy()
        bad[:3, :3] *= 1.5
        with pytest.raises(ValidationError):
            align_poses(bad, pose)


@pytest.fixture
def style_setup(tiny_cfg):
    spec = sphere_object_scene()
    scene = analytic_scene_field(spec, resolution=tiny_cfg.grid_resolution,
                                 rank=tiny_cfg.grid_rank,
                                 feature_dim=tiny_cfg.basic_channels, seed=8)
    cameras = orbit_cameras(4, 16, 16)
    renders = [spec.render(cam) for cam in cameras]
    views = ViewSet(cameras=cameras, images=[r[0] for r in renders],
                    masks=[r[1] for r in renders])
    return StyleReference(kind="multiview3d", views=views, front_index=0, scene=scene)


class TestSynchronizedStyleView:
    def test_front_view_matches_declared_front(self, tiny_cfg, style_setup):
        content_front = look_at([0, 0, 2.4], [0, 0, 0])
        transform = align_poses(content_front, style_setup.front_camera.pose)
        image, mask = synchronized_style_view(content_front, style_setup, transform,
                                              tiny_cfg)
        with torch.no_grad():
            direct, opacity = render_rgb_view(style_setup.scene,
                                              style_setup.front_camera,
                                              n_samples=tiny_cfg.samples_per_ray,
                                              near=tiny_cfg.near, far=tiny_cfg.far)
        np.testing.assert_allclose(image.numpy(), direct.clamp(0, 1).numpy(), atol=1e-6)
        assert torch.equal(mask, opacity > 0.5)
        assert bool(mask.any())

    def test_synchronization_group_identity(self, tiny_cfg, style_setup):
        content_front = look_at([0, 0, 2.4], [0, 0, 0])
        transform = align_poses(content_front, style_setup.front_camera.pose)
        pose = orbit_cameras(5, 16, 16)[2].pose
        style_pose = transform @ pose
        # offset from the style front equals the offset from the content front
        offset_style = np.linalg.inv(style_setup.front_camera.pose) @ style_pose
        offset_content = np.linalg.inv(content_front) @ pose
        np.testing.assert_allclose(offset_style, offset_content, atol=1e-10)

    def test_empty_style_scene_masks_nothing(self, tiny_cfg, style_setup):
        empty = SceneField(resolution=8, rank=2, feature_dim=tiny_cfg.basic_channels)
        ref = StyleReference(kind="multiview3d", views=style_setup.views,
                             front_index=0, scene=empty)
        content_front = look_at([0, 0, 2.4], [0, 0, 0])
        transform = align_poses(content_front, ref.front_camera.pose)
        image, mask = synchronized_style_view(content_front, ref, transform, tiny_cfg)
        assert float(image.abs().max()) == 0.0
        assert not bool(mask.any())
        with pytest.raises(StyleObjectNotVisibleError):
            from stylefield.encoder import PerceptualEncoder
            enc = PerceptualEncoder.tiny_random((4, 6, 8))
            mask_amplify(enc.encode_levels(image), mask)

    def test_untrained_reference_instructs_pretraining(self, style_setup, tiny_cfg):
        ref = StyleReference(kind="multiview3d", views=style_setup.views, front_index=0)
        with pytest.raises(ValidationError, match="pre-train"):
            synchronized_style_view(np.eye(4) @ look_at([0, 0, 2.4], [0, 0, 0]), ref,
                                    np.eye(4), tiny_cfg)


@pytest.fixture
def content_pipeline(tiny_cfg):
    spec = three_sphere_scene()
    scene = analytic_scene_field(spec, resolution=tiny_cfg.grid_resolution,
                                 rank=tiny_cfg.grid_rank,
                                 feature_dim=tiny_cfg.basic_channels, seed=9)
    torch.manual_seed(9)
    return StylePipeline.build(tiny_cfg, scene=scene)


class TestStylizeOmniview:
    def test_image2d_single_pose_equals_2d_pipeline(self, content_pipeline):
        camera = orbit_cameras(3, 16, 16)[1]
        style = torch.rand(16, 16, 3, generator=torch.Generator().manual_seed(3))
        ref = StyleReference(kind="image2d", image=style)
        frames = stylize_omniview(content_pipeline, camera, [camera.pose], ref)
        direct = content_pipeline.stylize_view(camera, style)
        assert torch.equal(frames[0], direct)

    def test_repeated_pose_bit_identical(self, content_pipeline, style_setup):
        camera = orbit_cameras(3, 16, 16)[0]
        ref = style_setup
        frames = stylize_omniview(content_pipeline, camera,
                                  [camera.pose, camera.pose], ref,
                                  content_front=camera.pose)
        assert torch.equal(frames[0], frames[1])

    def test_empty_trajectory_rejected(self, content_pipeline, style_setup):
        camera = orbit_cameras(3, 16, 16)[0]
        with pytest.raises(ValidationError):
            stylize_omniview(content_pipeline, camera, [], style_setup,
                             content_front=camera.pose)

    def test_missing_front_rejected(self, content_pipeline, style_setup):
        camera = orbit_cameras(3, 16, 16)[0]
        with pytest.raises(ValidationError, match="front"):
            stylize_omniview(content_pipeline, camera, [camera.pose], style_setup)

    def test_nearby_pose_feature_difference_scales_by_weight(self, content_pipeline):
        # with fixed injection parameters, the injected-map difference between
        # two poses is the content-map difference scaled per channel by w
        from stylefield.dsi import inject
        from stylefield.scene_field import STAGE2

        cams = orbit_cameras(12, 16, 16)
        g = torch.Generator().manual_seed(6)
        with torch.no_grad():
            maps_a = content_pipeline.render_content_maps(cams[0], STAGE2)
            maps_b = content_pipeline.render_content_maps(cams[1], STAGE2)
            for level in LEVELS_:
                c = maps_a.maps[level].shape[-1]
                params = InjectionParams(weight=torch.randn(c, generator=g),
                                         bias=torch.randn(c, generator=g))
                diff_injected = (inject(maps_a.maps[level], params)
                                 - inject(maps_b.maps[level], params))
                diff_content = (maps_a.maps[level] - maps_b.maps[level]) * params.weight
                np.testing.assert_allclose(diff_injected.numpy(), diff_content.numpy(),
                                           atol=1e-5)

    def test_failure_names_frame(self, content_pipeline, style_setup):
        cameras = orbit_cameras(3, 16, 16)
        empty = SceneField(resolution=8, rank=2,
                           feature_dim=content_pipeline.scene.feature_dim)
        ref = StyleReference(kind="multiview3d", views=style_setup.views,
                             front_index=0, scene=empty)
        with pytest.raises(RuntimeError, match="frame 0"):
            stylize_omniview(content_pipeline, cameras[0], [cameras[1].pose], ref,
                             content_front=cameras[0].pose)


class TestStyleReferenceValidation:
    def test_kinds(self):
        with pytest.raises(ValidationError):
            StyleReference(kind="image2d")
        with pytest.raises(ValidationError):
            StyleReference(kind="volumetric", image=torch.rand(4, 4, 3))
        with pytest.raises(ValidationError):
            StyleReference(kind="multiview3d", views=ViewSet(cameras=[], images=[]))

    def test_front_index_range(self):
        views = ViewSet(cameras=orbit_cameras(2, 8, 8), images=[torch.rand(8, 8, 3)] * 2)
        with pytest.raises(ValidationError):
            StyleReference(kind="multiview3d", views=views, front_index=5)
