"""Procedural scenes and the software ray tracer behind the synthetic rig.

The tracer is deliberately small: sphere / axis-aligned box / axis-aligned
textured rectangle primitives, flat or procedural albedo (checker, stripe,
value noise), one directional light plus an ambient term, no shadows or
secondary bounces. It exists to manufacture deterministic ground truth at
desk scale, not to look pretty.

Rays are traced in batches: `trace_rays` takes (R, 3) origins/directions
and returns (R, 3) colors plus (R,) depths (euclidean distance to the hit,
+inf on miss), so every renderer here is a reshape away from it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import (
    ErpGrid,
    FisheyeIntrinsics,
    Pose,
    erp_direction_grid,
    fisheye_pixel_to_dir,
    look_rotation,
)
from .images import bilinear_sample, nearest_sample

_EPS = 1e-9

#: minimum camera-to-primitive distance for any rig location (meters)
RIG_CLEARANCE = 0.3


# ---------------------------------------------------------------------------
# textures


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic lattice hash -> [0, 1). Classic shader-style sine hash."""
    h = np.sin(ix * 127.1 + iy * 311.7 + seed * 74.7) * 43758.5453123
    return h - np.floor(h)


@dataclass(frozen=True)
class Texture:
    """Albedo as a function of surface UV in [0,1]^2.

    kind: "flat" | "checker" | "stripe" | "noise".
    scale counts pattern repetitions across the unit UV square.
    """

    kind: str = "flat"
    color_a: tuple[float, float, float] = (0.7, 0.7, 0.7)
    color_b: tuple[float, float, float] = (0.2, 0.2, 0.2)
    scale: float = 4.0
    seed: int = 0

    def sample(self, uu: np.ndarray, vv: np.ndarray) -> np.ndarray:
        ca = np.asarray(self.color_a, dtype=np.float64)
        cb = np.asarray(self.color_b, dtype=np.float64)
        if self.kind == "flat":
            return np.broadcast_to(ca, uu.shape + (3,)).copy()
        if self.kind == "checker":
            parity = (np.floor(uu * self.scale) + np.floor(vv * self.scale)) % 2.0
            return np.where(parity[..., None] < 0.5, ca, cb)
        if self.kind == "stripe":
            parity = np.floor(uu * self.scale) % 2.0
            return np.where(parity[..., None] < 0.5, ca, cb)
        if self.kind == "noise":
            # smooth value noise: bilinear blend of hashed lattice corners
            x = uu * self.scale
            y = vv * self.scale
            x0, y0 = np.floor(x), np.floor(y)
            fx, fy = x - x0, y - y0
            fx = fx * fx * (3.0 - 2.0 * fx)
            fy = fy * fy * (3.0 - 2.0 * fy)
            n00 = _hash01(x0, y0, self.seed)
            n10 = _hash01(x0 + 1.0, y0, self.seed)
            n01 = _hash01(x0, y0 + 1.0, self.seed)
            n11 = _hash01(x0 + 1.0, y0 + 1.0, self.seed)
            n = (n00 * (1 - fx) + n10 * fx) * (1 - fy) + (n01 * (1 - fx) + n11 * fx) * fy
            return ca[None] + (cb - ca)[None] * n[..., None]
        raise ConfigError(f"unknown texture kind: {self.kind!r}")


# ---------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    texture: Texture = Texture()

    def distance(self, p: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(p) - np.asarray(self.center)) - self.radius)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and half extents."""

    center: tuple[float, float, float]
    half_size: tuple[float, float, float]
    texture: Texture = Texture()

    def distance(self, p: np.ndarray) -> float:
        q = np.abs(np.asarray(p) - np.asarray(self.center)) - np.asarray(self.half_size)
        outside = np.linalg.norm(np.maximum(q, 0.0))
        inside = min(float(np.max(q)), 0.0)
        return float(outside + inside)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned textured rectangle; axis is the normal direction (0=x,1=y,2=z)."""

    center: tuple[float, float, float]
    axis: int
    half_u: float
    half_v: float
    texture: Texture = Texture()

    def distance(self, p: np.ndarray) -> float:
        a1, a2 = (self.axis + 1) % 3, (self.axis + 2) % 3
        d = np.asarray(p) - np.asarray(self.center)
        du = max(abs(d[a1]) - self.half_u, 0.0)
        dv = max(abs(d[a2]) - self.half_v, 0.0)
        return float(np.sqrt(du * du + dv * dv + d[self.axis] ** 2))


Primitive = Sphere | Box | Rect


@dataclass(frozen=True)
class Scene:
    primitives: tuple[Primitive, ...]
    background: tuple[float, float, float] = (0.05, 0.07, 0.1)
    light_dir: tuple[float, float, float] = (-0.45, -0.8, 0.4)
    ambient: float = 0.35

    def clearance(self, p) -> float:
        """Distance from p to the nearest primitive surface.

        Primitive distances are signed (negative inside a solid); the
        clearance cares only how far the nearest surface is.
        """
        if not self.primitives:
            return np.inf
        return min(abs(prim.distance(p)) for prim in self.primitives)


# ---------------------------------------------------------------------------
# intersection kernels (vectorized over rays)


def _hit_sphere(prim: Sphere, o: np.ndarray, d: np.ndarray):
    c = np.asarray(prim.center, dtype=np.float64)
    oc = o - c
    b = np.sum(oc * d, axis=-1)
    q = np.sum(oc * oc, axis=-1) - prim.radius**2
    disc = b * b - q
    ok = disc > 0.0
    sq = np.sqrt(np.maximum(disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    t = np.where(t0 > _EPS, t0, t1)
    ok &= t > _EPS
    t = np.where(ok, t, np.inf)

    p = o + t[..., None] * d
    n = (p - c) / prim.radius
    # spherical UV of the outward normal
    uu = (np.arctan2(n[..., 0], n[..., 2]) + np.pi) / (2.0 * np.pi)
    vv = (np.arcsin(np.clip(n[..., 1], -1.0, 1.0)) + np.pi / 2.0) / np.pi
    return t, n, uu, vv


def _hit_box(prim: Box, o: np.ndarray, d: np.ndarray):
    c = np.asarray(prim.center, dtype=np.float64)
    h = np.asarray(prim.half_size, dtype=np.float64)
    oc = o - c
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / np.where(np.abs(d) > 1e-300, d, np.where(d >= 0, 1e-300, -1e-300))
    t1 = (-h - oc) * inv
    t2 = (h - oc) * inv
    tmin = np.max(np.minimum(t1, t2), axis=-1)
    tmax = np.min(np.maximum(t1, t2), axis=-1)
    ok = (tmax > np.maximum(tmin, _EPS))
    t = np.where(tmin > _EPS, tmin, tmax)
    ok &= t > _EPS
    t = np.where(ok, t, np.inf)

    p = o + t[..., None] * d
    local = (p - c) / h
    axis = np.argmax(np.abs(local), axis=-1)
    n = np.zeros_like(p)
    rows = np.arange(n.reshape(-1, 3).shape[0])
    flat_n = n.reshape(-1, 3)
    flat_local = local.reshape(-1, 3)
    flat_axis = axis.reshape(-1)
    flat_n[rows, flat_axis] = np.sign(flat_local[rows, flat_axis])
    n = flat_n.reshape(p.shape)

    a1 = (flat_axis + 1) % 3
    a2 = (flat_axis + 2) % 3
    flat_p = (p - c).reshape(-1, 3)
    flat_h = np.broadcast_to(h, flat_p.shape)
    uu = (flat_p[rows, a1] / flat_h[rows, a1] + 1.0) / 2.0
    vv = (flat_p[rows, a2] / flat_h[rows, a2] + 1.0) / 2.0
    return t, n, uu.reshape(t.shape), vv.reshape(t.shape)


def _hit_rect(prim: Rect, o: np.ndarray, d: np.ndarray):
    ax = prim.axis
    a1, a2 = (ax + 1) % 3, (ax + 2) % 3
    c = np.asarray(prim.center, dtype=np.float64)
    dn = d[..., ax]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(dn) > 1e-12, (c[ax] - o[..., ax]) / dn, np.inf)
    p = o + t[..., None] * d
    du = p[..., a1] - c[a1]
    dv = p[..., a2] - c[a2]
    ok = (t > _EPS) & (np.abs(du) <= prim.half_u) & (np.abs(dv) <= prim.half_v)
    t = np.where(ok, t, np.inf)
    n = np.zeros_like(d)
    n[..., ax] = -np.sign(dn)
    uu = (du / prim.half_u + 1.0) / 2.0
    vv = (dv / prim.half_v + 1.0) / 2.0
    return t, n, uu, vv


_HIT = {Sphere: _hit_sphere, Box: _hit_box, Rect: _hit_rect}


def trace_rays(scene: Scene, origins, dirs) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-hit Lambertian shading. Returns (colors (...,3), depth (...,)).

    depth is the euclidean ray distance to the hit (dirs are unit length);
    rays that hit nothing return the background color and +inf depth.
    """
    o = np.asarray(origins, dtype=np.float64)
    d = np.asarray(dirs, dtype=np.float64)
    o = np.broadcast_to(o, d.shape).copy() if o.shape != d.shape else o

    best_t = np.full(d.shape[:-1], np.inf)
    color = np.broadcast_to(
        np.asarray(scene.background, dtype=np.float64), d.shape
    ).copy()

    light = -np.asarray(scene.light_dir, dtype=np.float64)
    light = light / np.linalg.norm(light)

    with np.errstate(invalid="ignore", over="ignore"):
        for prim in scene.primitives:
            t, n, uu, vv = _HIT[type(prim)](prim, o, d)
            closer = t < best_t
            if not np.any(closer):
                continue
            albedo = prim.texture.sample(uu, vv)
            lambert = np.maximum(np.sum(n * light, axis=-1), 0.0)
            shade = np.clip(scene.ambient + (1.0 - scene.ambient) * lambert, 0.0, 1.0)
            lit = np.clip(albedo * shade[..., None], 0.0, 1.0)
            color = np.where(closer[..., None], lit, color)
            best_t = np.where(closer, t, best_t)

    return color, best_t


# ---------------------------------------------------------------------------
# cameras


def render_pinhole(
    scene: Scene, pose: Pose, fov: float, width: int, height: int
) -> tuple[np.ndarray, np.ndarray]:
    """Standard pinhole render; returns (image (H,W,3), depth (H,W)).

    fov is the full horizontal field of view (< pi). Depth is euclidean
    distance from the optical center, matching the ERP renders.
    """
    if not 0.0 < fov < np.pi:
        raise ValueError(f"pinhole fov must be in (0, pi), got {fov}")
    focal = (width / 2.0) / np.tan(fov / 2.0)
    u = np.arange(width, dtype=np.float64)
    v = np.arange(height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    dirs = np.stack(
        [
            (uu + 0.5 - width / 2.0) / focal,
            -(vv + 0.5 - height / 2.0) / focal,
            np.ones_like(uu),
        ],
        axis=-1,
    )
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    world_dirs = pose.transform_dir(dirs)
    img, depth = trace_rays(scene, pose.translation, world_dirs)
    return img.astype(np.float32), depth


def render_erp_direct(
    scene: Scene, center: Pose, grid: ErpGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Trace one ray per ERP pixel from the given pose; the blending oracle."""
    dirs = center.transform_dir(erp_direction_grid(grid))
    img, depth = trace_rays(scene, center.translation, dirs)
    return img.astype(np.float32), depth


def render_fisheye(
    scene: Scene, pose: Pose, intr: FisheyeIntrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """Trace through the fisheye model; returns (image, valid mask).

    Pixels outside the image circle are black with valid = False.
    """
    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    dirs_cam, valid = fisheye_pixel_to_dir(uu, vv, intr)
    world_dirs = pose.transform_dir(dirs_cam)
    img, _ = trace_rays(scene, pose.translation, world_dirs)
    img = np.where(valid[..., None], img, 0.0)
    return img.astype(np.float32), valid


def cube_face_poses(center: Pose) -> list[Pose]:
    """Six poses at a common optical center looking down +-x, +-y, +-z."""
    axes = [
        (1.0, 0.0, 0.0),
        (-1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, -1.0, 0.0),
        (0.0, 0.0, 1.0),
        (0.0, 0.0, -1.0),
    ]
    return [
        Pose(center.rotation @ look_rotation(a), center.translation) for a in axes
    ]


@dataclass(frozen=True)
class FaceRender:
    image: np.ndarray
    depth: np.ndarray
    pose: Pose
    fov: float = np.deg2rad(120.0)


def compose_erp_from_faces(
    faces: list[FaceRender], grid: ErpGrid, center: Pose | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Blend six overlapping pinhole faces into one seamless ERP frame.

    Each face covers 120 deg > 90 deg, so neighbouring faces overlap; per
    pixel, every face containing the viewing direction contributes with a
    weight proportional to its angular margin from the face's field-of-view
    boundary, normalized to sum 1. Depth comes from the max-weight face
    (nearest sample, so infinite-depth background stays exact).

    `center` fixes the output ERP orientation; it defaults to identity at
    the common optical center. Face poses must look along the center
    frame's +-x, +-y, +-z axes.
    """
    if len(faces) != 6:
        raise ConfigError(f"expected 6 faces, got {len(faces)}")
    centers = np.stack([f.pose.translation for f in faces])
    if not np.allclose(centers, centers[0], atol=1e-9):
        raise ConfigError("face optical centers must coincide")
    if center is None:
        center = Pose(np.eye(3), centers[0])
    if not np.allclose(center.translation, centers[0], atol=1e-9):
        raise ConfigError("center pose must sit at the faces' optical center")
    fwd = np.stack([f.pose.rotation[:, 2] for f in faces])
    want = np.concatenate([np.eye(3), -np.eye(3)]) @ center.rotation.T
    matched = [np.any(np.all(np.abs(fwd - w) < 1e-9, axis=1)) for w in want]
    if not all(matched):
        raise ConfigError("face poses must look along the center frame's +-x, +-y, +-z")

    dirs = center.transform_dir(erp_direction_grid(grid))
    h, w = grid.shape
    weights = np.zeros((6, h, w))
    colors = np.zeros((6, h, w, 3))
    depths = np.zeros((6, h, w))

    for i, face in enumerate(faces):
        fh, fw = face.image.shape[:2]
        focal = (fw / 2.0) / np.tan(face.fov / 2.0)
        d_cam = dirs @ face.pose.rotation  # == R^T applied to each dir
        x, y, z = d_cam[..., 0], d_cam[..., 1], d_cam[..., 2]
        in_front = z > 1e-9
        zs = np.where(in_front, z, 1.0)
        margin_x = face.fov / 2.0 - np.abs(np.arctan2(x, zs))
        margin_y = face.fov / 2.0 - np.abs(np.arctan2(y, zs))
        margin = np.minimum(margin_x, margin_y)
        wgt = np.where(in_front, np.maximum(margin, 0.0), 0.0)

        u = focal * x / zs + fw / 2.0 - 0.5
        v = -focal * y / zs + fh / 2.0 - 0.5
        inside = wgt > 0.0
        weights[i] = wgt
        colors[i] = np.where(
            inside[..., None], bilinear_sample(face.image, u, v), 0.0
        )
        depths[i] = np.where(inside, nearest_sample(face.depth, u, v), np.inf)

    total = np.sum(weights, axis=0)
    if np.any(total <= 0.0):
        raise ConfigError("faces do not cover the full sphere")
    weights /= total
    erp = np.sum(weights[..., None] * colors, axis=0)
    best = np.argmax(weights, axis=0)
    erp_depth = np.take_along_axis(depths, best[None], axis=0)[0]
    return erp.astype(np.float32), erp_depth


# ---------------------------------------------------------------------------
# scene serialization (human-editable JSON)


def scene_to_dict(scene: Scene) -> dict:
    prims = []
    for p in scene.primitives:
        tex = {
            "kind": p.texture.kind,
            "color_a": list(p.texture.color_a),
            "color_b": list(p.texture.color_b),
            "scale": p.texture.scale,
            "seed": p.texture.seed,
        }
        if isinstance(p, Sphere):
            prims.append({"type": "sphere", "center": list(p.center), "radius": p.radius, "texture": tex})
        elif isinstance(p, Box):
            prims.append({"type": "box", "center": list(p.center), "half_size": list(p.half_size), "texture": tex})
        elif isinstance(p, Rect):
            prims.append(
                {
                    "type": "rect",
                    "center": list(p.center),
                    "axis": p.axis,
                    "half_u": p.half_u,
                    "half_v": p.half_v,
                    "texture": tex,
                }
            )
    return {
        "background": list(scene.background),
        "light_dir": list(scene.light_dir),
        "ambient": scene.ambient,
        "primitives": prims,
    }


def scene_from_dict(data: dict) -> Scene:
    def tex(d: dict) -> Texture:
        return Texture(
            kind=d.get("kind", "flat"),
            color_a=tuple(d.get("color_a", (0.7, 0.7, 0.7))),
            color_b=tuple(d.get("color_b", (0.2, 0.2, 0.2))),
            scale=float(d.get("scale", 4.0)),
            seed=int(d.get("seed", 0)),
        )

    prims: list[Primitive] = []
    for p in data.get("primitives", []):
        kind = p.get("type")
        if kind == "sphere":
            prims.append(Sphere(tuple(p["center"]), float(p["radius"]), tex(p.get("texture", {}))))
        elif kind == "box":
            prims.append(Box(tuple(p["center"]), tuple(p["half_size"]), tex(p.get("texture", {}))))
        elif kind == "rect":
            prims.append(
                Rect(
                    tuple(p["center"]),
                    int(p["axis"]),
                    float(p["half_u"]),
                    float(p["half_v"]),
                    tex(p.get("texture", {})),
                )
            )
        else:
            raise ConfigError(f"primitives[].type: unknown primitive {kind!r}")
    return Scene(
        primitives=tuple(prims),
        background=tuple(data.get("background", (0.05, 0.07, 0.1))),
        light_dir=tuple(data.get("light_dir", (-0.45, -0.8, 0.4))),
        ambient=float(data.get("ambient", 0.35)),
    )


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as f:
        return scene_from_dict(json.load(f))


def save_scene(path, scene: Scene) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scene_to_dict(scene), f, indent=2, sort_keys=True)
        f.write("\n")
