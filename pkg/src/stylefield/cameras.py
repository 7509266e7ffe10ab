"""Pinhole cameras, pose math, and the plain-text camera manifest / trajectory formats.

Poses are 4x4 world-from-camera matrices.  The camera looks down its local -Z
axis with +X right and +Y up; intrinsics are (fx, fy, cx, cy) in pixels.

Camera manifest (``cameras.txt``), one block per view::

    view 0
    resolution 64 64
    intrinsics 77.25 77.25 32.0 32.0
    pose r00 r01 r02 tx r10 ... 0 0 0 1

Trajectory files hold one pose (16 floats, row-major) per line.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ValidationError
from .images import load_image, load_mask

RIGID_TOL = 1e-6


def validate_rigid(pose: np.ndarray, tol: float = 1e-5) -> np.ndarray:
    pose = np.asarray(pose, dtype=np.float64)
    if pose.shape != (4, 4):
        raise ValidationError(f"pose must be 4x4, got {pose.shape}")
    if not np.allclose(pose[3], [0.0, 0.0, 0.0, 1.0], atol=tol):
        raise ValidationError("pose bottom row must be [0, 0, 0, 1]")
    rot = pose[:3, :3]
    if not np.allclose(rot @ rot.T, np.eye(3), atol=tol):
        raise ValidationError("pose rotation is not orthonormal")
    if np.linalg.det(rot) < 0:
        raise ValidationError("pose rotation has negative determinant")
    return pose


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """World-from-camera pose with the camera at `eye` looking at `target`."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    z_axis = eye - target
    norm = np.linalg.norm(z_axis)
    if norm < 1e-12:
        raise ValidationError("look_at eye and target coincide")
    z_axis = z_axis / norm
    x_axis = np.cross(up, z_axis)
    norm = np.linalg.norm(x_axis)
    if norm < 1e-12:
        raise ValidationError("look_at up vector is parallel to the view axis")
    x_axis = x_axis / norm
    y_axis = np.cross(z_axis, x_axis)
    pose = np.eye(4)
    pose[:3, 0] = x_axis
    pose[:3, 1] = y_axis
    pose[:3, 2] = z_axis
    pose[:3, 3] = eye
    return pose


@dataclass
class Camera:
    pose: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float
    height: int
    width: int

    def __post_init__(self):
        self.pose = validate_rigid(self.pose)
        if self.height < 1 or self.width < 1:
            raise ValidationError("camera resolution must be positive")

    @classmethod
    def from_fov(cls, pose, height, width, fov_deg=45.0):
        f = 0.5 * width / math.tan(math.radians(fov_deg) / 2.0)
        return cls(pose=pose, fx=f, fy=f, cx=width / 2.0, cy=height / 2.0,
                   height=height, width=width)

    def with_pose(self, pose: np.ndarray) -> "Camera":
        return Camera(pose=pose, fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy,
                      height=self.height, width=self.width)

    def rays(self, dtype=torch.float32):
        """Per-pixel ray origins and unit directions, each (H, W, 3)."""
        rows = np.arange(self.height, dtype=np.float64) + 0.5
        cols = np.arange(self.width, dtype=np.float64) + 0.5
        grid_v, grid_u = np.meshgrid(rows, cols, indexing="ij")
        dirs = np.stack([
            (grid_u - self.cx) / self.fx,
            -(grid_v - self.cy) / self.fy,
            -np.ones_like(grid_u),
        ], axis=-1)
        dirs = dirs @ self.pose[:3, :3].T
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        origins = np.broadcast_to(self.pose[:3, 3], dirs.shape).copy()
        return (torch.from_numpy(origins).to(dtype),
                torch.from_numpy(dirs).to(dtype))

    def project(self, points: np.ndarray):
        """World points (M, 3) -> pixel (row, col) float coordinates and depth."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        rel = points - self.pose[:3, 3]
        cam = rel @ self.pose[:3, :3]  # R^T @ rel for each point
        depth = -cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.cx + self.fx * cam[:, 0] / depth
            v = self.cy + self.fy * (-cam[:, 1]) / depth
        return v - 0.5, u - 0.5, depth


def orbit_cameras(n_views: int, height: int, width: int, radius: float = 2.4,
                  fov_deg: float = 45.0, elevations_deg=(18.0, -12.0),
                  target=(0.0, 0.0, 0.0)) -> list[Camera]:
    """Evenly spaced azimuths around `target`, alternating elevation rings."""
    cameras = []
    for i in range(n_views):
        azimuth = 2.0 * math.pi * i / n_views
        elev = math.radians(elevations_deg[i % len(elevations_deg)])
        eye = np.array([
            radius * math.cos(elev) * math.cos(azimuth),
            radius * math.sin(elev),
            radius * math.cos(elev) * math.sin(azimuth),
        ]) + np.asarray(target)
        cameras.append(Camera.from_fov(look_at(eye, target), height, width, fov_deg))
    return cameras


# ---------------------------------------------------------------------------
# manifest + trajectory I/O

MANIFEST_NAME = "cameras.txt"


def write_manifest(cameras: list[Camera], path):
    lines = []
    for i, cam in enumerate(cameras):
        lines.append(f"view {i}")
        lines.append(f"resolution {cam.height} {cam.width}")
        lines.append("intrinsics " + " ".join(repr(float(v))
                                              for v in (cam.fx, cam.fy, cam.cx, cam.cy)))
        flat = " ".join(repr(float(v)) for v in cam.pose.reshape(-1))
        lines.append(f"pose {flat}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def read_manifest(path) -> list[Camera]:
    cameras = []
    current: dict = {}

    def flush():
        if not current:
            return
        for key in ("resolution", "intrinsics", "pose"):
            if key not in current:
                raise ValidationError(f"camera manifest view missing {key}")
        h, w = current["resolution"]
        fx, fy, cx, cy = current["intrinsics"]
        cameras.append(Camera(pose=current["pose"], fx=fx, fy=fy, cx=cx, cy=cy,
                              height=int(h), width=int(w)))

    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            kind, _, rest = line.partition(" ")
            if kind == "view":
                flush()
                current = {}
            elif kind == "resolution":
                current["resolution"] = [int(p) for p in rest.split()]
            elif kind == "intrinsics":
                current["intrinsics"] = [float(p) for p in rest.split()]
            elif kind == "pose":
                values = [float(p) for p in rest.split()]
                if len(values) != 16:
                    raise ValidationError("pose line must hold 16 values")
                current["pose"] = np.array(values).reshape(4, 4)
            else:
                raise ValidationError(f"unknown camera manifest line: {line!r}")
    flush()
    return cameras


def write_trajectory(poses, path):
    with open(path, "w", encoding="utf-8") as handle:
        for pose in poses:
            pose = validate_rigid(pose)
            handle.write(" ".join(repr(float(v)) for v in pose.reshape(-1)) + "\n")


def read_trajectory(path) -> list[np.ndarray]:
    poses = []
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            values = [float(p) for p in line.split()]
            if len(values) != 16:
                raise ValidationError("trajectory line must hold 16 values")
            poses.append(validate_rigid(np.array(values).reshape(4, 4)))
    if not poses:
        raise ValidationError("trajectory file holds no poses")
    return poses


@dataclass
class ViewSet:
    """Posed views loaded from a directory: cameras + images (+ optional masks)."""
    cameras: list[Camera]
    images: list[torch.Tensor]
    masks: list = field(default_factory=list)

    def __len__(self):
        return len(self.cameras)


def view_image_name(index: int) -> str:
    return f"view_{index:03d}.png"


def view_mask_name(index: int) -> str:
    return f"mask_{index:03d}.png"


def read_view_dir(path) -> ViewSet:
    cameras = read_manifest(os.path.join(path, MANIFEST_NAME))
    images, masks = [], []
    for i in range(len(cameras)):
        images.append(load_image(os.path.join(path, view_image_name(i))))
        mask_path = os.path.join(path, view_mask_name(i))
        masks.append(load_mask(mask_path) if os.path.exists(mask_path) else None)
    return ViewSet(cameras=cameras, images=images, masks=masks)
