"""Spherical projection and ray geometry primitives.

Everything downstream (sweep volumes, layer rendering, the synthetic rig)
goes through the conversions in this module, so the conventions are frozen
here and nowhere else:

World / camera frame (right-handed):
  - +z: forward (optical axis), +y: up, +x: right.

Equirectangular (ERP) images, width W = 2 * H:
  - u axis: longitude. Left edge (u = -0.5) is longitude -pi, image center
    is longitude 0 (forward, +z). Longitude increases to the right.
  - v axis: colatitude. Top edge is the north pole (+y), bottom the south.
  - Pixel (i, j) is sampled at continuous coordinates u = i, v = j; the
    physical sample point sits at (i + 0.5)/W, (j + 0.5)/H of the frame,
    so the image center direction lives at (W/2 - 0.5, H/2 - 0.5).

Fisheye images use the equidistant model r = focal * theta, where theta is
the angle from the optical axis and r the pixel distance from the principal
point. Pixels with theta > fov/2 are outside the image circle.

All geometry runs in float64. Functions are vectorized: coordinate
arguments broadcast, direction arguments take shape (..., 3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_POLE_EPS = 1e-15


@dataclass(frozen=True)
class ErpGrid:
    """Full 360 x 180 equirectangular raster; width must be 2 * height."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width != 2 * self.height:
            raise ValueError(
                f"ERP grid must be 2:1 (full sphere), got {self.width}x{self.height}"
            )
        if self.height < 1:
            raise ValueError("ERP grid height must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class FisheyeIntrinsics:
    """Equidistant fisheye lens parameters.

    focal is in pixels per radian; fov is the full image-circle field of
    view in radians (e.g. 190 or 220 degrees).
    """

    width: int
    height: int
    cx: float
    cy: float
    focal: float
    fov: float

    def __post_init__(self) -> None:
        if not (0.0 < self.fov < 2.0 * np.pi):
            raise ValueError(f"fov must be in (0, 2*pi), got {self.fov}")
        if self.focal <= 0.0:
            raise ValueError(f"focal must be positive, got {self.focal}")
        if not (0.0 <= self.cx < self.width and 0.0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def circle_radius(self) -> float:
        """Image-circle radius in pixels: focal * fov / 2."""
        return self.focal * self.fov / 2.0


@dataclass(frozen=True)
class Pose:
    """Rigid placement of a camera in world space.

    rotation maps camera-frame vectors into the world frame (columns are
    the camera axes expressed in world coordinates); translation is the
    optical center in world meters.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(r) < 0.0:
            raise ValueError("rotation must be proper (det +1)")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "Pose":
        """Rotation about +y; yaw > 0 turns +z toward +x."""
        return cls(rotation_yaw(yaw), np.asarray(translation, dtype=np.float64))

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """self then other applied on top: (self * other)(x) = self(other(x))."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def transform_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def transform_dir(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        return d @ self.rotation.T


def rotation_yaw(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_pitch(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def look_rotation(forward, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Rotation whose +z column is `forward`, with +y as close to `up` as possible."""
    f = np.asarray(forward, dtype=np.float64)
    f = f / np.linalg.norm(f)
    u = np.asarray(up, dtype=np.float64)
    if abs(np.dot(f, u) / np.linalg.norm(u)) > 0.999:
        u = np.array([0.0, 0.0, 1.0]) if abs(f[1]) > 0.999 else np.array([0.0, 1.0, 0.0])
    right = np.cross(u, f)
    right = right / np.linalg.norm(right)
    true_up = np.cross(f, right)
    return np.stack([right, true_up, f], axis=1)


def erp_pixel_to_dir(u, v, grid: ErpGrid) -> np.ndarray:
    """Continuous ERP coordinates to unit direction.

    longitude = (u + 0.5)/W * 2*pi - pi, latitude = pi/2 - (v + 0.5)/H * pi,
    direction = (cos(lat) sin(lon), sin(lat), cos(lat) cos(lon)).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u >= grid.width):
        raise ValueError(f"u out of range [0, {grid.width})")
    if np.any(v < 0.0) or np.any(v >= grid.height):
        raise ValueError(f"v out of range [0, {grid.height})")
    lon = (u + 0.5) / grid.width * (2.0 * np.pi) - np.pi
    lat = np.pi / 2.0 - (v + 0.5) / grid.height * np.pi
    cos_lat = np.cos(lat)
    return np.stack(
        [cos_lat * np.sin(lon), np.sin(lat), cos_lat * np.cos(lon)], axis=-1
    )


def dir_to_erp_pixel(d, grid: ErpGrid) -> tuple[np.ndarray, np.ndarray]:
    """Unit direction to continuous ERP coordinates; inverse of erp_pixel_to_dir.

    Total on unit vectors: longitude wraps so u lands in [0, W); exact poles
    map to u = W/2 with v = 0 (north) or v = H (south).
    """
    d = np.asarray(d, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    planar = np.hypot(x, z)
    at_pole = planar < _POLE_EPS

    # longitude + pi computed directly (flipped atan2) so pixels near the
    # seam do not suffer cancellation and wrap to W - epsilon
    shifted = np.arctan2(-x, -z)
    shifted = np.where(shifted > 0.0, shifted, shifted + 2.0 * np.pi)
    u = np.mod(shifted / (2.0 * np.pi) * grid.width - 0.5, grid.width)
    lat = np.arcsin(np.clip(y, -1.0, 1.0))
    v = np.clip((np.pi / 2.0 - lat) / np.pi * grid.height - 0.5, 0.0, grid.height)

    u = np.where(at_pole, grid.width / 2.0, u)
    v = np.where(at_pole, np.where(y > 0.0, 0.0, float(grid.height)), v)
    return u, v


def fisheye_pixel_to_dir(
    u, v, intr: FisheyeIntrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """Fisheye pixel to camera-frame direction.

    Returns (directions, valid). valid is False where the pixel lies beyond
    the image circle (theta > fov/2); directions there are still finite
    (computed from the same formula) but meaningless.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > intr.width - 1) or np.any(v < 0.0) or np.any(
        v > intr.height - 1
    ):
        raise ValueError("fisheye coordinates out of image bounds")
    dx = u - intr.cx
    dy = v - intr.cy
    r = np.hypot(dx, dy)
    theta = r / intr.focal
    valid = theta <= intr.fov / 2.0

    sin_t, cos_t = np.sin(theta), np.cos(theta)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r > 0.0, sin_t / np.where(r > 0.0, r, 1.0), 0.0)
    d = np.stack([dx * scale, -dy * scale, cos_t], axis=-1)
    return d, valid


def dir_to_fisheye_pixel(
    d, intr: FisheyeIntrinsics
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Camera-frame direction to fisheye pixel; inverse of fisheye_pixel_to_dir.

    Returns (u, v, valid); valid is False where the angle to the optical
    axis exceeds fov/2.
    """
    d = np.asarray(d, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    valid = theta <= intr.fov / 2.0

    planar = np.hypot(x, y)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(planar > 0.0, intr.focal * theta / np.where(planar > 0.0, planar, 1.0), 0.0)
    u = intr.cx + k * x
    v = intr.cy - k * y
    return u, v, valid


def ray_sphere_intersect(origin, dirs, radius: float) -> np.ndarray:
    """Intersection of rays from inside a sphere centered at the origin.

    The viewpoint must be strictly inside (|origin| < radius), so there is
    exactly one intersection with positive ray parameter:
        t = -(o . d) + sqrt((o . d)^2 - |o|^2 + radius^2)
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(dirs, dtype=np.float64)
    if radius <= 0.0:
        raise ValueError("sphere radius must be positive")
    o_norm2 = np.sum(o * o, axis=-1)
    if np.any(o_norm2 >= radius * radius):
        raise ValueError("ray origin lies outside the sphere")
    od = np.sum(o * d, axis=-1)
    disc = od * od - o_norm2 + radius * radius
    t = -od + np.sqrt(disc)
    return o + t[..., None] * d


def erp_direction_grid(grid: ErpGrid) -> np.ndarray:
    """(H, W, 3) unit directions at every pixel center of an ERP grid."""
    u = np.arange(grid.width, dtype=np.float64)
    v = np.arange(grid.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    return erp_pixel_to_dir(uu, vv, grid)
