"""Parametric toy scenes and style corpora for desk-scale experiments.

Scenes are unions of textured spheres and axis-aligned boxes on a black
background, rendered analytically (first hit, unlit albedo) so ground truth
is exact.  The generator writes 8-bit views, object masks, a camera manifest,
and a JSON description that tests use for analytic correspondences.
"""

from __future__ import annotations

import json
import os

import numpy as np
import torch

from .cameras import Camera, orbit_cameras, write_manifest
from .errors import ValidationError
from .images import save_image, save_mask

_BIG = 1e30


class Sphere:
    kind = "sphere"

    def __init__(self, center, radius, color, color2=None, stripe_freq=0.0, stripe_axis=1):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)
        self.color = np.asarray(color, dtype=np.float64)
        self.color2 = None if color2 is None else np.asarray(color2, dtype=np.float64)
        self.stripe_freq = float(stripe_freq)
        self.stripe_axis = int(stripe_axis)

    def intersect(self, origins, dirs):
        """First positive hit distance per ray, or +inf."""
        oc = origins - self.center
        b = np.einsum("ij,ij->i", oc, dirs)
        c = np.einsum("ij,ij->i", oc, oc) - self.radius ** 2
        disc = b * b - c
        hit = disc >= 0
        sqrt_disc = np.sqrt(np.where(hit, disc, 0.0))
        t0 = -b - sqrt_disc
        t1 = -b + sqrt_disc
        t = np.where(t0 > 1e-6, t0, np.where(t1 > 1e-6, t1, _BIG))
        return np.where(hit, t, _BIG)

    def contains(self, points):
        return np.linalg.norm(points - self.center, axis=-1) <= self.radius

    def albedo(self, points):
        colors = np.broadcast_to(self.color, points.shape).copy()
        if self.color2 is not None and self.stripe_freq > 0:
            phase = np.sin(self.stripe_freq * (points[:, self.stripe_axis]
                                               - self.center[self.stripe_axis]))
            colors[phase < 0] = self.color2
        return colors

    def to_json(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius,
                "color": self.color.tolist(),
                "color2": None if self.color2 is None else self.color2.tolist(),
                "stripe_freq": self.stripe_freq, "stripe_axis": self.stripe_axis}


class Box:
    kind = "box"

    def __init__(self, center, half_extents, color, checker=0.0):
        self.center = np.asarray(center, dtype=np.float64)
        self.half_extents = np.asarray(half_extents, dtype=np.float64)
        self.color = np.asarray(color, dtype=np.float64)
        self.checker = float(checker)

    def intersect(self, origins, dirs):
        lo = self.center - self.half_extents
        hi = self.center + self.half_extents
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (lo - origins) / dirs
            t_hi = (hi - origins) / dirs
        t_near = np.nanmax(np.minimum(t_lo, t_hi), axis=1)
        t_far = np.nanmin(np.maximum(t_lo, t_hi), axis=1)
        hit = (t_far >= t_near) & (t_far > 1e-6)
        t = np.where(t_near > 1e-6, t_near, t_far)
        return np.where(hit, t, _BIG)

    def contains(self, points):
        return (np.abs(points - self.center) <= self.half_extents + 1e-12).all(axis=-1)

    def albedo(self, points):
        colors = np.broadcast_to(self.color, points.shape).copy()
        if self.checker > 0:
            cells = np.floor((points - self.center) * self.checker).astype(int).sum(axis=1)
            colors[cells % 2 == 1] = 1.0 - colors[cells % 2 == 1]
        return colors

    def to_json(self):
        return {"kind": self.kind, "center": self.center.tolist(),
                "half_extents": self.half_extents.tolist(),
                "color": self.color.tolist(), "checker": self.checker}


def primitive_from_json(data):
    if data["kind"] == "sphere":
        return Sphere(data["center"], data["radius"], data["color"], data["color2"],
                      data["stripe_freq"], data["stripe_axis"])
    if data["kind"] == "box":
        return Box(data["center"], data["half_extents"], data["color"], data["checker"])
    raise ValidationError(f"unknown primitive kind {data['kind']!r}")


class ToyScene:
    def __init__(self, primitives):
        self.primitives = list(primitives)

    def first_hit(self, origins, dirs):
        """Nearest hit distance and primitive index (-1 for background)."""
        best_t = np.full(origins.shape[0], _BIG)
        best_idx = np.full(origins.shape[0], -1, dtype=int)
        for i, prim in enumerate(self.primitives):
            t = prim.intersect(origins, dirs)
            closer = t < best_t
            best_t[closer] = t[closer]
            best_idx[closer] = i
        return best_t, best_idx

    def render(self, camera: Camera):
        """Analytic view: RGB (H, W, 3) in [0,1] and object mask (H, W)."""
        origins, dirs = camera.rays(dtype=torch.float64)
        origins = origins.numpy().reshape(-1, 3)
        dirs = dirs.numpy().reshape(-1, 3)
        t, idx = self.first_hit(origins, dirs)
        image = np.zeros_like(origins)
        for i, prim in enumerate(self.primitives):
            sel = idx == i
            if sel.any():
                points = origins[sel] + t[sel, None] * dirs[sel]
                image[sel] = prim.albedo(points)
        image = image.reshape(camera.height, camera.width, 3)
        mask = (idx >= 0).reshape(camera.height, camera.width)
        return (torch.from_numpy(image).to(torch.float32),
                torch.from_numpy(mask))

    def density(self, points, sigma_inside=60.0):
        occupied = np.zeros(points.shape[0], dtype=bool)
        for prim in self.primitives:
            occupied |= prim.contains(points)
        return occupied.astype(np.float64) * sigma_inside

    def to_json(self):
        return {"primitives": [p.to_json() for p in self.primitives]}

    @classmethod
    def from_json(cls, data):
        return cls([primitive_from_json(p) for p in data["primitives"]])


def three_sphere_scene() -> ToyScene:
    return ToyScene([
        Sphere([-0.42, 0.05, -0.18], 0.34, [0.9, 0.25, 0.2],
               color2=[0.95, 0.75, 0.2], stripe_freq=16.0, stripe_axis=1),
        Sphere([0.4, -0.1, 0.3], 0.3, [0.2, 0.45, 0.9]),
        Sphere([0.12, 0.38, 0.35], 0.24, [0.25, 0.85, 0.4],
               color2=[0.9, 0.9, 0.9], stripe_freq=22.0, stripe_axis=0),
    ])


def sphere_object_scene() -> ToyScene:
    """A single textured sphere; used as a 3D style object."""
    return ToyScene([
        Sphere([0.0, 0.0, 0.0], 0.55, [0.95, 0.55, 0.1],
               color2=[0.3, 0.05, 0.5], stripe_freq=14.0, stripe_axis=1),
    ])


def box_scene() -> ToyScene:
    return ToyScene([
        Box([0.0, -0.15, 0.0], [0.45, 0.3, 0.45], [0.75, 0.3, 0.15], checker=6.0),
        Sphere([0.0, 0.42, 0.0], 0.26, [0.2, 0.6, 0.85]),
    ])


SCENE_BUILDERS = {
    "three-spheres": three_sphere_scene,
    "style-sphere": sphere_object_scene,
    "box": box_scene,
}


def generate_scene_dir(out_dir, scene_name: str = "three-spheres", n_views: int = 8,
                       resolution: int = 64, radius: float = 2.4, fov_deg: float = 45.0):
    """Write posed views + masks + camera manifest + scene description."""
    if scene_name not in SCENE_BUILDERS:
        raise ValidationError(f"unknown toy scene {scene_name!r}; "
                              f"choose from {sorted(SCENE_BUILDERS)}")
    scene = SCENE_BUILDERS[scene_name]()
    cameras = orbit_cameras(n_views, resolution, resolution, radius=radius,
                            fov_deg=fov_deg)
    os.makedirs(out_dir, exist_ok=True)
    write_manifest(cameras, os.path.join(out_dir, "cameras.txt"))
    for i, cam in enumerate(cameras):
        image, mask = scene.render(cam)
        save_image(image, os.path.join(out_dir, f"view_{i:03d}.png"))
        save_mask(mask, os.path.join(out_dir, f"mask_{i:03d}.png"))
    with open(os.path.join(out_dir, "scene.json"), "w", encoding="utf-8") as handle:
        json.dump(scene.to_json(), handle, indent=1)
    return scene, cameras


def load_scene_json(path) -> ToyScene:
    with open(path, "r", encoding="utf-8") as handle:
        return ToyScene.from_json(json.load(handle))


# ---------------------------------------------------------------------------
# style corpus

def _style_image(rng: np.random.Generator, resolution: int) -> np.ndarray:
    palette = rng.uniform(0.05, 0.95, size=(3, 3))
    ys, xs = np.meshgrid(np.arange(resolution), np.arange(resolution), indexing="ij")
    kind = rng.integers(0, 4)
    if kind == 0:  # diagonal stripes
        freq = rng.uniform(0.15, 0.7)
        phase = np.sin(freq * (xs + ys) + rng.uniform(0, 6.28))
        image = np.where(phase[..., None] > 0, palette[0], palette[1])
    elif kind == 1:  # smooth two-corner gradient
        gx = xs / (resolution - 1)
        gy = ys / (resolution - 1)
        image = (palette[0] * gx[..., None] + palette[1] * gy[..., None]
                 + palette[2] * ((1 - gx) * (1 - gy))[..., None])
    elif kind == 2:  # blurred noise blobs
        noise = rng.uniform(0, 1, size=(resolution, resolution, 3))
        kernel = np.ones(7) / 7.0
        for axis in (0, 1):
            noise = np.apply_along_axis(
                lambda channel: np.convolve(channel, kernel, mode="same"), axis, noise)
        image = palette[0] * noise + palette[1] * (1 - noise)
    else:  # concentric rings
        cy, cx = rng.uniform(0.2, 0.8, size=2) * resolution
        dist = np.sqrt((xs - cx) ** 2 + (ys - cy) ** 2)
        phase = np.sin(dist * rng.uniform(0.2, 0.6))
        image = np.where(phase[..., None] > 0, palette[1], palette[2])
    return np.clip(image, 0.0, 1.0)


def generate_style_dir(out_dir, count: int = 25, resolution: int = 64, seed: int = 0):
    """Write a corpus of procedural style images."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        image = torch.from_numpy(_style_image(rng, resolution).astype(np.float32))
        path = os.path.join(out_dir, f"style_{i:03d}.png")
        save_image(image, path)
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# analytic correspondences for the consistency metric

def _pixel_center_hit(scene: ToyScene, cam: Camera, row: int, col: int):
    """First-hit point of the ray through pixel (row, col), or None."""
    dir_cam = np.array([(col + 0.5 - cam.cx) / cam.fx,
                        -(row + 0.5 - cam.cy) / cam.fy, -1.0])
    direction = cam.pose[:3, :3] @ dir_cam
    direction /= np.linalg.norm(direction)
    origin = cam.pose[:3, 3]
    t, idx = scene.first_hit(origin[None, :], direction[None, :])
    if idx[0] < 0:
        return None
    return origin + t[0] * direction


def visible_correspondences(scene: ToyScene, cam_a: Camera, cam_b: Camera,
                            count: int = 64, seed: int = 0, tol: float = 0.1):
    """Pixel pairs in two views imaging the same 3D surface point.

    Surface points are sampled on the primitives and kept when both cameras
    see them unoccluded, in-bounds, and the rounded pixel-center ray actually
    lands within `tol` of the point (rejects silhouette-grazing pixels).
    Returns (pixels_a, pixels_b) integer (row, col) arrays.
    """
    rng = np.random.default_rng(seed)
    spheres = [p for p in scene.primitives if isinstance(p, Sphere)]
    if not spheres:
        raise ValidationError("correspondences need at least one sphere")
    pixels_a, pixels_b = [], []
    attempts = 0
    while len(pixels_a) < count and attempts < 400 * count:
        attempts += 1
        prim = spheres[rng.integers(0, len(spheres))]
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        point = prim.center + prim.radius * direction

        ok = True
        pix = []
        for cam in (cam_a, cam_b):
            row, col, depth = cam.project(point[None, :])
            row, col, depth = row[0], col[0], depth[0]
            if depth <= 0 or not (0 <= row < cam.height - 0.5) or not (0 <= col < cam.width - 0.5):
                ok = False
                break
            origin = cam.pose[:3, 3]
            ray_dir = point - origin
            dist = np.linalg.norm(ray_dir)
            ray_dir = ray_dir / dist
            t, _ = scene.first_hit(origin[None, :], ray_dir[None, :])
            if abs(t[0] - dist) > 1e-6:  # occluded by some other surface
                ok = False
                break
            pixel = (int(round(row)), int(round(col)))
            hit = _pixel_center_hit(scene, cam, *pixel)
            if hit is None or np.linalg.norm(hit - point) > tol:
                ok = False
                break
            pix.append(pixel)
        if ok:
            pixels_a.append(pix[0])
            pixels_b.append(pix[1])
    if len(pixels_a) < count:
        raise ValidationError("could not find enough mutually visible points")
    return np.array(pixels_a), np.array(pixels_b)


# ---------------------------------------------------------------------------
# analytic base field (fast test fixture; stage0 is the honest path)

def analytic_scene_field(scene: ToyScene, resolution: int = 24, rank: int = 4,
                         feature_dim: int = 24, extent: float = 1.0,
                         sigma_inside: float = 60.0, seed: int = 0):
    """SceneField with exact primitive densities and random (seeded) features."""
    from .scene_field import SceneField

    torch.manual_seed(seed)
    field = SceneField(resolution=resolution, rank=rank, feature_dim=feature_dim,
                       extent=extent)
    axis = np.linspace(-extent, extent, resolution)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    nodes = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    density = scene.density(nodes, sigma_inside=sigma_inside)
    with torch.no_grad():
        field.opacity.values.copy_(
            torch.from_numpy(density.reshape(resolution, resolution, resolution))
            .to(torch.float32))
    return field
