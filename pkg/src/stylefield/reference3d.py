"""View-aligned 3D-to-3D style transfer.

A 3D style reference is a posed multi-view image set with a declared front
view; a small base field is fit to those views (photometric pre-training)
so the style object can be rendered from any pose.  Declaring front views
for both objects fixes a rigid transform T with T @ content_front =
style_front; as the content camera moves, the style camera moves
synchronously through T, and each rendered style view (masked and
amplified) acts as the 2D style reference for that frame.  2D image
references bypass all of this and hit the ordinary pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .cameras import Camera, ViewSet, validate_rigid
from .errors import ValidationError
from .renderer import render_rgb_view
from .scene_field import SceneField

MASK_THRESHOLD = 0.5


@dataclass
class StyleReference:
    """Either a single 2D image or a posed multi-view style object."""
    kind: str  # "image2d" | "multiview3d"
    image: torch.Tensor | None = None
    views: ViewSet | None = None
    front_index: int = 0
    scene: SceneField | None = None

    def __post_init__(self):
        if self.kind == "image2d":
            if self.image is None:
                raise ValidationError("image2d reference needs an image")
        elif self.kind == "multiview3d":
            if self.views is None or len(self.views) == 0:
                raise ValidationError("multiview3d reference needs at least one view")
            if not (0 <= self.front_index < len(self.views)):
                raise ValidationError("front view index out of range")
        else:
            raise ValidationError(f"unknown reference kind {self.kind!r}")

    @property
    def front_camera(self) -> Camera:
        return self.views.cameras[self.front_index]

    def require_scene(self) -> SceneField:
        if self.scene is None:
            raise ValidationError(
                "3D style reference has no trained field; pre-train one from the "
                "style views first (pretrain-scene)")
        return self.scene


def align_poses(content_front: np.ndarray, style_front: np.ndarray) -> np.ndarray:
    """Rigid T with T @ content_front = style_front."""
    content_front = validate_rigid(content_front)
    style_front = validate_rigid(style_front)
    transform = style_front @ np.linalg.inv(content_front)
    return validate_rigid(transform)


def synchronized_style_view(content_pose: np.ndarray, ref: StyleReference,
                            transform: np.ndarray, cfg):
    """Render the style object at the pose synchronized with the content camera.

    Returns (style image (H, W, 3), mask (H, W) bool from accumulated
    opacity > 0.5)."""
    if ref.kind != "multiview3d":
        raise ValidationError("synchronized views need a multiview3d reference")
    scene = ref.require_scene()
    style_pose = validate_rigid(transform @ validate_rigid(content_pose))
    camera = ref.front_camera.with_pose(style_pose)
    with torch.no_grad():
        rgb, opacity = render_rgb_view(scene, camera, n_samples=cfg.samples_per_ray,
                                       near=cfg.near, far=cfg.far,
                                       chunk_rays=cfg.chunk_rays)
    return rgb.clamp(0.0, 1.0), opacity > MASK_THRESHOLD


def stylize_omniview(pipeline, camera_template: Camera, trajectory,
                     ref: StyleReference,
                     content_front: np.ndarray | None = None) -> list[torch.Tensor]:
    """Stylize every trajectory pose against the (2D or 3D) reference.

    `camera_template` supplies the content intrinsics/resolution; its pose is
    replaced per frame.  3D path per frame: synchronized style view -> mask
    amplification -> parameter generation -> injection -> decode."""
    if len(trajectory) == 0:
        raise ValidationError("trajectory must hold at least one pose")
    frames = []
    if ref.kind == "image2d":
        for i, pose in enumerate(trajectory):
            try:
                frames.append(pipeline.stylize_view(camera_template.with_pose(pose),
                                                    ref.image))
            except Exception as exc:
                raise RuntimeError(f"stylization failed at frame {i}") from exc
        return frames

    if content_front is None:
        raise ValidationError("3D references need the content front pose")
    transform = align_poses(content_front, ref.front_camera.pose)
    for i, pose in enumerate(trajectory):
        try:
            style_image, mask = synchronized_style_view(pose, ref, transform, pipeline.cfg)
            frames.append(pipeline.stylize_view(camera_template.with_pose(pose),
                                                style_image, mask=mask))
        except Exception as exc:
            raise RuntimeError(f"stylization failed at frame {i}") from exc
    return frames
