"""Weighted sphere-sweep volume construction.

Sweep radii are spaced uniformly in inverse depth between a near and a far
bound. For each radius, every input fisheye frame is projected onto that
sphere (centered on the rig) and resampled on the ERP grid; overlapping
projections are fused per pixel with softmax weights over a per-source
quality score gamma = 1 - r, where r is the source-pixel distance to the
optical center normalized by the image-circle radius. Stacking the fused
layers yields the [H, W, N, 3] color volume, together with a per-layer valid
source count and the across-source color variance that the learning-free
alpha estimator feeds on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import (
    ErpGrid,
    FisheyeIntrinsics,
    Pose,
    dir_to_fisheye_pixel,
    erp_direction_grid,
)
from .images import bilinear_sample, masked_bilinear_sample

_WSSV_MAGIC = b"WSSV"
_WSSV_VERSION = 1


def _circle_mask(intr: FisheyeIntrinsics) -> np.ndarray:
    """Boolean map of source pixels inside the lens image circle."""
    uu, vv = np.meshgrid(
        np.arange(intr.width, dtype=np.float64),
        np.arange(intr.height, dtype=np.float64),
    )
    return np.hypot(uu - intr.cx, vv - intr.cy) <= intr.circle_radius


@dataclass(frozen=True)
class SweepRadii:
    """Strictly increasing sphere radii, uniform in reciprocal space."""

    radii: np.ndarray
    near: float
    far: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "radii", np.asarray(self.radii, dtype=np.float64))

    def __len__(self) -> int:
        return int(self.radii.size)


def sweep_radii(near: float, far: float, n: int) -> SweepRadii:
    """1/d_i = 1/near + (i-1)/(n-1) * (1/far - 1/near), i = 1..n."""
    if not 0.0 < near < far:
        raise ValueError(f"need 0 < near < far, got near={near}, far={far}")
    if n < 2:
        raise ValueError(f"need at least 2 radii, got {n}")
    radii = 1.0 / np.linspace(1.0 / near, 1.0 / far, n)
    radii[0] = near
    radii[-1] = far
    return SweepRadii(radii=radii, near=near, far=far)


@dataclass(frozen=True)
class FisheyeView:
    """One calibrated input frame: image, world pose, lens.

    gamma_map optionally replaces the default 1 - r quality weights with a
    measured per-pixel map (e.g. lens MTF data) of the source image's shape.
    """

    image: np.ndarray
    pose: Pose
    intrinsics: FisheyeIntrinsics
    gamma_map: np.ndarray | None = None


@dataclass(frozen=True)
class ProjectedLayer:
    """One source image resampled on one sweep sphere."""

    color: np.ndarray  # (H, W, 3) float32
    gamma: np.ndarray  # (H, W) float32, defined where valid
    valid: np.ndarray  # (H, W) bool


@dataclass(frozen=True)
class Wssv:
    color: np.ndarray  # (H, W, N, 3) float32
    source_count: np.ndarray  # (H, W, N) int32
    variance: np.ndarray  # (H, W, N) float32, mean over channels
    grid: ErpGrid
    radii: SweepRadii
    center: Pose

    @property
    def num_layers(self) -> int:
        return int(self.color.shape[2])


def warp_to_sphere(
    view: FisheyeView, center: Pose, radius: float, grid: ErpGrid
) -> ProjectedLayer:
    """Project one fisheye frame onto the sweep sphere of the given radius.

    Every ERP pixel of the sphere is lifted to its 3-D point (the ray from
    the rig center hits the sphere at exactly `radius`), moved into the
    sensor frame, and looked up in the source image bilinearly. Samples
    never mix in pixels from outside the image circle (masked bilinear);
    pixels whose look-up leaves the circle entirely are invalid.
    """
    offset = view.pose.translation - center.translation
    if float(np.linalg.norm(offset)) >= radius:
        raise ValueError(
            f"sensor sits outside the sweep sphere: |offset| = "
            f"{np.linalg.norm(offset):.3f} >= radius {radius:.3f}"
        )
    dirs_local = erp_direction_grid(grid)
    points_world = center.transform_point(dirs_local * radius)

    inv = view.pose.inverse()
    p_cam = inv.transform_point(points_world)
    d_cam = p_cam / np.linalg.norm(p_cam, axis=-1, keepdims=True)
    u, v, valid = dir_to_fisheye_pixel(d_cam, view.intrinsics)

    intr = view.intrinsics
    valid &= (u >= 0.0) & (u <= intr.width - 1) & (v >= 0.0) & (v <= intr.height - 1)

    color, ok = masked_bilinear_sample(view.image, _circle_mask(intr), u, v)
    valid &= ok
    color = color.astype(np.float32)
    color[~valid] = 0.0

    if view.gamma_map is not None:
        gamma = bilinear_sample(view.gamma_map, u, v)
    else:
        r = np.hypot(u - intr.cx, v - intr.cy) / intr.circle_radius
        gamma = 1.0 - np.clip(r, 0.0, 1.0)
    gamma = np.where(valid, gamma, 0.0).astype(np.float32)
    return ProjectedLayer(color=color, gamma=gamma, valid=valid)


def fuse_layer(
    projections: list[ProjectedLayer],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Softmax-weighted fusion of overlapping projections on one sphere.

    Per pixel, over the Q valid sources:
        c = sum_i softmax(gamma_i) * c_i
    Returns (color (H,W,3) float32, source count (H,W) int32, variance
    (H,W) float32). The variance is the unweighted across-source population
    variance averaged over channels; pixels with no valid source come back
    as zero color, zero variance, count 0.
    """
    if not projections:
        raise ValueError("need at least one projection to fuse")
    shape = projections[0].color.shape
    for p in projections:
        if p.color.shape != shape:
            raise ValueError("projections disagree on grid shape")

    colors = np.stack([p.color for p in projections]).astype(np.float64)
    gammas = np.stack([p.gamma for p in projections]).astype(np.float64)
    valid = np.stack([p.valid for p in projections])

    count = valid.sum(axis=0).astype(np.int32)
    any_valid = count > 0

    # softmax over the valid sources only; invalid ones are excluded rather
    # than fed as -inf so no overflow paths exist
    gmax = np.max(np.where(valid, gammas, -np.inf), axis=0)
    gmax = np.where(any_valid, gmax, 0.0)
    w = np.where(valid, np.exp(gammas - gmax), 0.0)
    denom = w.sum(axis=0)
    w = w / np.where(any_valid, denom, 1.0)

    fused = np.sum(w[..., None] * colors, axis=0)
    fused = np.where(any_valid[..., None], fused, 0.0)

    safe_count = np.maximum(count, 1)
    mean = np.sum(np.where(valid[..., None], colors, 0.0), axis=0) / safe_count[..., None]
    sq = np.sum(np.where(valid[..., None], (colors - mean) ** 2, 0.0), axis=0)
    variance = np.mean(sq, axis=-1) / safe_count
    variance = np.where(any_valid, variance, 0.0)

    return fused.astype(np.float32), count, variance.astype(np.float32)


def build_wssv(
    views: list[FisheyeView], center: Pose, radii: SweepRadii, grid: ErpGrid
) -> Wssv:
    """Warp all views onto every sweep sphere and stack the fused layers."""
    n = len(radii)
    h, w = grid.shape
    color = np.empty((h, w, n, 3), dtype=np.float32)
    count = np.empty((h, w, n), dtype=np.int32)
    variance = np.empty((h, w, n), dtype=np.float32)

    for j, radius in enumerate(radii.radii):
        layers = [warp_to_sphere(view, center, float(radius), grid) for view in views]
        color[:, :, j, :], count[:, :, j], variance[:, :, j] = fuse_layer(layers)

    return Wssv(
        color=color,
        source_count=count,
        variance=variance,
        grid=grid,
        radii=radii,
        center=center,
    )


def fisheye_to_erp(
    image: np.ndarray, intr: FisheyeIntrinsics, grid: ErpGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Purely angular fisheye-to-ERP warp in the sensor's own frame.

    Returns (erp image, valid mask); the mask is False outside the lens
    field of view.
    """
    dirs = erp_direction_grid(grid)
    u, v, valid = dir_to_fisheye_pixel(dirs, intr)
    valid &= (u >= 0.0) & (u <= intr.width - 1) & (v >= 0.0) & (v <= intr.height - 1)
    erp, ok = masked_bilinear_sample(image, _circle_mask(intr), u, v)
    valid &= ok
    erp = erp.astype(np.float32)
    erp[~valid] = 0.0
    return erp, valid


# ---------------------------------------------------------------------------
# binary container
#
# Little-endian layout, documented for cross-tool use:
#   bytes 0..3   magic "WSSV"
#   u32          version (1)
#   u32 x3       H, W, N
#   f64 x N      sweep radii (meters, ascending)
#   f32 x H*W*N*3  color volume, C order [H, W, N, 3]
#   f32 x H*W*N    variance volume, C order [H, W, N]
#   i32 x H*W*N    valid source count, C order [H, W, N]
#
# The volume is stored in the rig-local frame; the world pose of the rig
# center travels with the dataset manifest, not this container.


def save_wssv(path, wssv: Wssv) -> None:
    h, w = wssv.grid.shape
    n = wssv.num_layers
    with open(path, "wb") as f:
        f.write(_WSSV_MAGIC)
        f.write(struct.pack("<IIII", _WSSV_VERSION, h, w, n))
        f.write(wssv.radii.radii.astype("<f8").tobytes())
        f.write(wssv.color.astype("<f4").tobytes())
        f.write(wssv.variance.astype("<f4").tobytes())
        f.write(wssv.source_count.astype("<i4").tobytes())


def load_wssv(path) -> Wssv:
    raw = Path(path).read_bytes()
    if raw[:4] != _WSSV_MAGIC:
        raise ValueError(f"not a WSSV container: {path}")
    version, h, w, n = struct.unpack_from("<IIII", raw, 4)
    if version != _WSSV_VERSION:
        raise ValueError(f"unsupported WSSV version {version}")
    off = 4 + 16
    radii = np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy()
    off += 8 * n
    color = np.frombuffer(raw, dtype="<f4", count=h * w * n * 3, offset=off).reshape(
        h, w, n, 3
    ).copy()
    off += 4 * h * w * n * 3
    variance = np.frombuffer(raw, dtype="<f4", count=h * w * n, offset=off).reshape(
        h, w, n
    ).copy()
    off += 4 * h * w * n
    count = np.frombuffer(raw, dtype="<i4", count=h * w * n, offset=off).reshape(
        h, w, n
    ).copy()
    return Wssv(
        color=color,
        source_count=count,
        variance=variance,
        grid=ErpGrid(w, h),
        radii=SweepRadii(radii=radii, near=float(radii[0]), far=float(radii[-1])),
        center=Pose.identity(),
    )
