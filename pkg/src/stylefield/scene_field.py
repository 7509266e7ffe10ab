"""Base radiance field: factorized feature grid, opacity grid, and ray sampling.

The content scene is a plane/line tensor factorization.  Each of the three
axis pairs contributes a rank-sized coefficient vector (plane value times the
complementary line value); the three pair contributions are summed per rank
component and a linear projection maps the rank coefficients to basic point
features.  Because the factors are interpolated separately, a query is exactly
the trilinear interpolation of the densely materialized grid.

Values live on grid nodes: node i of an axis with R nodes sits at
``-extent + 2 * extent * i / (R - 1)``.  Out-of-bounds queries return zeros
(features, flagged empty) and zero density so rays exiting the volume compose
cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import ValidationError

STAGE1 = "stage1"
STAGE2 = "stage2"


@dataclass
class Ray:
    origin: torch.Tensor
    direction: torch.Tensor
    near: float
    far: float

    def __post_init__(self):
        self.origin = torch.as_tensor(self.origin, dtype=torch.float64)
        self.direction = torch.as_tensor(self.direction, dtype=torch.float64)
        if self.origin.shape != (3,) or self.direction.shape != (3,):
            raise ValidationError("ray origin/direction must be 3-vectors")
        norm = float(self.direction.norm())
        if abs(norm - 1.0) > 1e-6:
            raise ValidationError(f"ray direction must be unit length, |d| = {norm}")
        if not (0.0 <= self.near < self.far):
            raise ValidationError(f"require 0 <= near < far, got [{self.near}, {self.far}]")


@dataclass
class SampleBatch:
    depths: torch.Tensor     # (N,)
    positions: torch.Tensor  # (N, 3)
    deltas: torch.Tensor     # (N,)


def sample_depths(n_rays: int, n_samples: int, near: float, far: float,
                  jitter: bool = False, generator: torch.Generator | None = None,
                  dtype=torch.float32):
    """Stratified depths (n_rays, N) and per-sample deltas.

    Without jitter, samples sit at stratum midpoints.  deltas[i] is the
    distance to the next sample; the last delta is (far - last depth).
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    width = (far - near) / n_samples
    base = near + width * (torch.arange(n_samples, dtype=dtype) + 0.5)
    depths = base.expand(n_rays, n_samples).clone()
    if jitter:
        offsets = torch.rand(n_rays, n_samples, generator=generator, dtype=dtype)
        depths = depths + (offsets - 0.5) * width
    deltas = torch.empty_like(depths)
    deltas[:, :-1] = depths[:, 1:] - depths[:, :-1]
    deltas[:, -1] = far - depths[:, -1]
    return depths, deltas


def sample_ray(ray: Ray, n_samples: int, jitter: bool = False, seed: int = 0) -> SampleBatch:
    """Stratify one ray into N ordered samples; deterministic for a fixed seed."""
    generator = torch.Generator().manual_seed(seed)
    depths, deltas = sample_depths(1, n_samples, ray.near, ray.far,
                                   jitter=jitter, generator=generator,
                                   dtype=torch.float64)
    depths, deltas = depths[0], deltas[0]
    positions = ray.origin + depths[:, None] * ray.direction
    return SampleBatch(depths=depths, positions=positions, deltas=deltas)


def _interp_line(line: torch.Tensor, coords: torch.Tensor) -> torch.Tensor:
    """Linear interpolation of (rank, R) factors at continuous coords (M,) -> (M, rank)."""
    res = line.shape[1]
    clamped = coords.clamp(0.0, res - 1.0)
    i0 = clamped.floor().long().clamp(max=res - 2) if res > 1 else torch.zeros_like(clamped).long()
    frac = (clamped - i0.to(clamped.dtype)) if res > 1 else torch.zeros_like(clamped)
    v0 = line[:, i0]
    v1 = line[:, i0 + 1] if res > 1 else v0
    return (v0 + (v1 - v0) * frac[None, :]).transpose(0, 1)


def _interp_plane(plane: torch.Tensor, ca: torch.Tensor, cb: torch.Tensor) -> torch.Tensor:
    """Bilinear interpolation of (rank, A, B) factors -> (M, rank)."""
    res_a, res_b = plane.shape[1], plane.shape[2]
    ca = ca.clamp(0.0, res_a - 1.0)
    cb = cb.clamp(0.0, res_b - 1.0)
    a0 = ca.floor().long().clamp(max=max(res_a - 2, 0))
    b0 = cb.floor().long().clamp(max=max(res_b - 2, 0))
    fa = ca - a0.to(ca.dtype)
    fb = cb - b0.to(cb.dtype)
    a1 = (a0 + 1).clamp(max=res_a - 1)
    b1 = (b0 + 1).clamp(max=res_b - 1)
    v00 = plane[:, a0, b0]
    v01 = plane[:, a0, b1]
    v10 = plane[:, a1, b0]
    v11 = plane[:, a1, b1]
    top = v00 + (v01 - v00) * fb[None, :]
    bottom = v10 + (v11 - v10) * fb[None, :]
    return (top + (bottom - top) * fa[None, :]).transpose(0, 1)


class FactorizedGrid(nn.Module):
    """Plane/line factorization of the basic feature field."""

    def __init__(self, resolution: int = 32, rank: int = 4, feature_dim: int = 48,
                 extent: float = 1.0, init_scale: float = 0.1):
        super().__init__()
        if resolution < 2:
            raise ValidationError("grid resolution must be >= 2")
        if rank < 1 or feature_dim < 1:
            raise ValidationError("rank and feature_dim must be positive")
        self.resolution = resolution
        self.rank = rank
        self.feature_dim = feature_dim
        self.extent = float(extent)
        r = resolution
        self.plane_xy = nn.Parameter(init_scale * torch.randn(rank, r, r))
        self.plane_xz = nn.Parameter(init_scale * torch.randn(rank, r, r))
        self.plane_yz = nn.Parameter(init_scale * torch.randn(rank, r, r))
        self.line_z = nn.Parameter(init_scale * torch.randn(rank, r))
        self.line_y = nn.Parameter(init_scale * torch.randn(rank, r))
        self.line_x = nn.Parameter(init_scale * torch.randn(rank, r))
        self.proj = nn.Linear(rank, feature_dim, bias=False)

    def grid_coords(self, positions: torch.Tensor):
        """World positions (M, 3) -> continuous node coords plus in-bounds mask."""
        e = self.extent
        inbounds = ((positions >= -e) & (positions <= e)).all(dim=-1)
        coords = (positions.clamp(-e, e) + e) / (2.0 * e) * (self.resolution - 1)
        return coords, inbounds

    def query(self, positions: torch.Tensor):
        """Basic point features (M, C_b) with out-of-bounds rows zeroed.

        Returns (features, inbounds mask)."""
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValidationError("positions must be (M, 3)")
        coords, inbounds = self.grid_coords(positions)
        gx, gy, gz = coords[:, 0], coords[:, 1], coords[:, 2]
        coeffs = (_interp_plane(self.plane_xy, gx, gy) * _interp_line(self.line_z, gz)
                  + _interp_plane(self.plane_xz, gx, gz) * _interp_line(self.line_y, gy)
                  + _interp_plane(self.plane_yz, gy, gz) * _interp_line(self.line_x, gx))
        features = self.proj(coeffs)
        return features * inbounds[:, None].to(features.dtype), inbounds


def query_basic_feature(grid: FactorizedGrid, position) -> torch.Tensor:
    """Single-point convenience wrapper around FactorizedGrid.query."""
    position = torch.as_tensor(position, dtype=grid.proj.weight.dtype)
    with torch.no_grad():
        features, _ = grid.query(position.reshape(1, 3))
    return features[0]


class OpacityField(nn.Module):
    """Dense non-negative density grid with trilinear interpolation."""

    def __init__(self, resolution: int = 32, extent: float = 1.0, init_value: float = 0.0):
        super().__init__()
        if resolution < 2:
            raise ValidationError("opacity resolution must be >= 2")
        self.resolution = resolution
        self.extent = float(extent)
        self.values = nn.Parameter(torch.full((resolution,) * 3, float(init_value)))

    @classmethod
    def from_grid(cls, values: torch.Tensor, extent: float = 1.0) -> "OpacityField":
        values = torch.as_tensor(values)
        if not values.dtype.is_floating_point:
            values = values.to(torch.float32)
        if values.ndim != 3:
            raise ValidationError("opacity grid must be 3-dimensional")
        if values.shape[0] != values.shape[1] or values.shape[0] != values.shape[2]:
            raise ValidationError("opacity grid must be cubic")
        if (values < 0).any():
            raise ValidationError("opacity values must be non-negative")
        field = cls(resolution=values.shape[0], extent=extent)
        field.values = nn.Parameter(values.clone())
        return field

    def clamp_nonnegative_(self):
        with torch.no_grad():
            self.values.clamp_(min=0.0)

    def query(self, positions: torch.Tensor) -> torch.Tensor:
        """Density at (M, 3) world positions; zero outside the bounds."""
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValidationError("positions must be (M, 3)")
        e, r = self.extent, self.resolution
        inbounds = ((positions >= -e) & (positions <= e)).all(dim=-1)
        coords = (positions.clamp(-e, e) + e) / (2.0 * e) * (r - 1)
        i0 = coords.floor().long().clamp(max=r - 2)
        frac = coords - i0.to(coords.dtype)
        x0, y0, z0 = i0[:, 0], i0[:, 1], i0[:, 2]
        fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
        v = self.values
        c00 = v[x0, y0, z0] * (1 - fz) + v[x0, y0, z0 + 1] * fz
        c01 = v[x0, y0 + 1, z0] * (1 - fz) + v[x0, y0 + 1, z0 + 1] * fz
        c10 = v[x0 + 1, y0, z0] * (1 - fz) + v[x0 + 1, y0, z0 + 1] * fz
        c11 = v[x0 + 1, y0 + 1, z0] * (1 - fz) + v[x0 + 1, y0 + 1, z0 + 1] * fz
        c0 = c00 * (1 - fy) + c01 * fy
        c1 = c10 * (1 - fy) + c11 * fy
        sigma = c0 * (1 - fx) + c1 * fx
        return sigma * inbounds.to(sigma.dtype)


def query_density(field: OpacityField, position) -> torch.Tensor:
    """Density at a single position; total function (out-of-bounds -> 0)."""
    position = torch.as_tensor(position, dtype=field.values.dtype)
    with torch.no_grad():
        return field.query(position.reshape(1, 3))[0]


class SceneField(nn.Module):
    """Pre-trained base scene: factorized features, opacity, and an RGB head.

    The RGB head exists only for photometric pre-training and for rendering
    plain color views (style objects); the stylization stages read features
    and densities and keep the whole scene frozen.
    """

    def __init__(self, resolution: int = 32, rank: int = 4, feature_dim: int = 48,
                 extent: float = 1.0, rgb_hidden: int = 32):
        super().__init__()
        self.grid = FactorizedGrid(resolution=resolution, rank=rank,
                                   feature_dim=feature_dim, extent=extent)
        self.opacity = OpacityField(resolution=resolution, extent=extent)
        self.rgb = nn.Sequential(
            nn.Linear(feature_dim, rgb_hidden),
            nn.ReLU(),
            nn.Linear(rgb_hidden, 3),
        )
        self.extent = float(extent)

    @property
    def feature_dim(self) -> int:
        return self.grid.feature_dim

    def point_rgb(self, features: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.rgb(features))

    def named_tensor_dict(self) -> dict[str, torch.Tensor]:
        out = {}
        for name, param in self.named_parameters():
            out[f"scene.{name}"] = param.detach()
        return out

    def load_named_tensors(self, tensors):
        with torch.no_grad():
            for name, param in self.named_parameters():
                key = f"scene.{name}"
                value = torch.as_tensor(tensors[key], dtype=param.dtype)
                if value.shape != param.shape:
                    raise ValidationError(f"{key}: shape {tuple(value.shape)} does not "
                                          f"match module shape {tuple(param.shape)}")
                param.copy_(value)

    @staticmethod
    def shape_from_tensors(tensors) -> dict:
        plane = tensors["scene.grid.plane_xy"]
        proj = tensors["scene.grid.proj.weight"]
        rgb_hidden = tensors["scene.rgb.0.weight"].shape[0]
        return {
            "resolution": plane.shape[1],
            "rank": plane.shape[0],
            "feature_dim": proj.shape[0],
            "rgb_hidden": rgb_hidden,
        }


def ray_through_pixel(camera, row: int, col: int, near: float, far: float) -> Ray:
    origins, dirs = camera.rays(dtype=torch.float64)
    return Ray(origin=origins[row, col], direction=dirs[row, col], near=near, far=far)
