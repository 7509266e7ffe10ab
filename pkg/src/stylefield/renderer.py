"""Volume rendering of per-point features into full-resolution per-view maps.

Compositing weight of sample i along a ray:

    w_i = exp(-sum_{q<i} sigma_q * delta_q) * (1 - exp(-sigma_i * delta_i))

Pixel features are the weighted sum of point features; all three level maps
are emitted at the full view resolution H x W, together with the per-pixel
accumulated opacity (sum of weights) used for object masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ValidationError
from .mlfa import LEVELS, FeatureAdaptor
from .scene_field import SceneField, sample_depths


def compositing_weights(sigmas: torch.Tensor, deltas: torch.Tensor) -> torch.Tensor:
    """Per-sample weights (..., N) from densities and sample spacings."""
    if sigmas.shape != deltas.shape:
        raise ValidationError(f"sigma/delta shapes differ: {tuple(sigmas.shape)} vs "
                              f"{tuple(deltas.shape)}")
    if (sigmas < 0).any():
        raise ValidationError("densities must be non-negative")
    if (deltas <= 0).any():
        raise ValidationError("sample deltas must be positive")
    tau = sigmas * deltas
    accumulated = torch.cumsum(tau, dim=-1)
    transmittance = torch.exp(-(accumulated - tau))  # exclusive prefix sum
    return transmittance * (1.0 - torch.exp(-tau))


def render_pixel_feature(weights: torch.Tensor, point_features: torch.Tensor) -> torch.Tensor:
    """Weighted sum of (..., N, C) point features -> (..., C)."""
    if weights.shape != point_features.shape[:-1]:
        raise ValidationError(f"weights {tuple(weights.shape)} do not match point "
                              f"features {tuple(point_features.shape)}")
    return (weights[..., None] * point_features).sum(dim=-2)


@dataclass
class LevelFeatureMaps:
    """Per-view, per-level feature maps (H, W, C_l) plus accumulated opacity."""
    maps: dict[str, torch.Tensor]
    opacity: torch.Tensor
    view_id: int = -1

    def __post_init__(self):
        shapes = {level: tuple(m.shape[:2]) for level, m in self.maps.items()}
        if len(set(shapes.values())) > 1:
            raise ValidationError(f"level maps disagree on resolution: {shapes}")

    @property
    def resolution(self):
        first = next(iter(self.maps.values()))
        return tuple(first.shape[:2])

    def detached(self) -> "LevelFeatureMaps":
        return LevelFeatureMaps(maps={k: v.detach() for k, v in self.maps.items()},
                                opacity=self.opacity.detach(), view_id=self.view_id)


@dataclass
class RayBundle:
    """Cached frozen-scene quantities for one view: everything but the adaptor."""
    features: torch.Tensor  # (n_rays, N, C_b)
    weights: torch.Tensor   # (n_rays, N)
    height: int
    width: int

    @property
    def opacity(self) -> torch.Tensor:
        return self.weights.sum(dim=-1).reshape(self.height, self.width)


def trace_rays(scene: SceneField, origins: torch.Tensor, dirs: torch.Tensor,
               n_samples: int, near: float, far: float, chunk_rays: int = 4096,
               jitter: bool = False, generator: torch.Generator | None = None):
    """Sample and query the scene along (M, 3) rays.

    Returns (point features (M, N, C_b), compositing weights (M, N))."""
    n_rays = origins.shape[0]
    feature_chunks, weight_chunks = [], []
    for start in range(0, n_rays, chunk_rays):
        o = origins[start:start + chunk_rays]
        d = dirs[start:start + chunk_rays]
        depths, deltas = sample_depths(o.shape[0], n_samples, near, far,
                                       jitter=jitter, generator=generator,
                                       dtype=o.dtype)
        positions = (o[:, None, :] + depths[..., None] * d[:, None, :]).reshape(-1, 3)
        feats, _ = scene.grid.query(positions)
        sigmas = scene.opacity.query(positions).reshape(o.shape[0], n_samples)
        weight_chunks.append(compositing_weights(sigmas, deltas))
        feature_chunks.append(feats.reshape(o.shape[0], n_samples, -1))
    return torch.cat(feature_chunks), torch.cat(weight_chunks)


def trace_view(scene: SceneField, camera, n_samples: int, near: float, far: float,
               chunk_rays: int = 4096, jitter: bool = False, seed: int = 0) -> RayBundle:
    """Sample every pixel ray and query the frozen scene once."""
    dtype = scene.grid.proj.weight.dtype
    origins, dirs = camera.rays(dtype=dtype)
    h, w = origins.shape[:2]
    generator = torch.Generator().manual_seed(seed)
    features, weights = trace_rays(scene, origins.reshape(-1, 3), dirs.reshape(-1, 3),
                                   n_samples, near, far, chunk_rays=chunk_rays,
                                   jitter=jitter, generator=generator)
    return RayBundle(features=features, weights=weights, height=h, width=w)


def composite_level_maps(bundle: RayBundle, adaptor: FeatureAdaptor, stage: str,
                         view_id: int = -1) -> LevelFeatureMaps:
    """Adapt cached point features per level and composite into H x W maps."""
    h, w = bundle.height, bundle.width
    flat_feats = bundle.features.reshape(-1, bundle.features.shape[-1])
    maps = {}
    for level in LEVELS:
        point_feats = adaptor.adapt(flat_feats, level, stage)
        point_feats = point_feats.reshape(*bundle.weights.shape, -1)
        maps[level] = render_pixel_feature(bundle.weights, point_feats).reshape(h, w, -1)
    return LevelFeatureMaps(maps=maps, opacity=bundle.opacity, view_id=view_id)


def render_view(scene: SceneField, adaptor: FeatureAdaptor, camera, stage: str,
                n_samples: int = 32, near: float = 0.6, far: float = 4.2,
                chunk_rays: int = 4096, jitter: bool = False, seed: int = 0,
                view_id: int = -1) -> LevelFeatureMaps:
    """Volume-render the three level feature maps for one camera."""
    bundle = trace_view(scene, camera, n_samples, near, far,
                        chunk_rays=chunk_rays, jitter=jitter, seed=seed)
    return composite_level_maps(bundle, adaptor, stage, view_id=view_id)


def export_feature_maps(maps: LevelFeatureMaps, view_id: int | None = None):
    """Debug export of rendered maps as a named-tensor checkpoint.

    Tensors are named features.<view>.<level> plus features.<view>.opacity."""
    from .checkpoint import Checkpoint

    vid = maps.view_id if view_id is None else view_id
    tensors = {f"features.{vid}.{level}": tensor.detach().cpu().numpy()
               for level, tensor in maps.maps.items()}
    tensors[f"features.{vid}.opacity"] = maps.opacity.detach().cpu().numpy()
    return Checkpoint(tensors, stage="features")


def render_rgb_view(scene: SceneField, camera, n_samples: int = 32, near: float = 0.6,
                    far: float = 4.2, chunk_rays: int = 4096, jitter: bool = False,
                    seed: int = 0):
    """Plain color rendering through the scene's RGB head.

    Returns (rgb (H, W, 3), opacity (H, W)); used by photometric pre-training
    and for rendering 3D style references."""
    bundle = trace_view(scene, camera, n_samples, near, far,
                        chunk_rays=chunk_rays, jitter=jitter, seed=seed)
    flat = bundle.features.reshape(-1, bundle.features.shape[-1])
    colors = scene.point_rgb(flat).reshape(*bundle.weights.shape, 3)
    rgb = render_pixel_feature(bundle.weights, colors)
    return rgb.reshape(bundle.height, bundle.width, 3), bundle.opacity
