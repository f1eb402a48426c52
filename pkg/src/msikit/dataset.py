"""Synthetic 6-DoF dataset generation and the depth-derived oracle alpha.

Per rig location the generator writes, under `<out>/<location id>/`:
  - one fisheye PNG per sensor (plus its validity implied by the lens mask),
  - the ground-truth ERP color frame at the rig center, composed from six
    120-degree pinhole faces exactly like the dataset recipe it mimics,
  - a 16-bit scaled-inverse-depth PNG for the center frame,
  - one ground-truth ERP per sensor pose (the novel-view references).

`manifest.json` at the dataset root ties everything together with relative
paths and a disjoint train/eval split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import ErpGrid, Pose
from .images import load_png, save_depth_png, save_png
from .rig import RigConfig, rig_from_dict, rig_to_dict
from .scene import (
    RIG_CLEARANCE,
    FaceRender,
    Scene,
    compose_erp_from_faces,
    cube_face_poses,
    render_fisheye,
    render_pinhole,
)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


def pose_to_dict(pose: Pose) -> dict:
    return {
        "rotation": pose.rotation.tolist(),
        "translation": pose.translation.tolist(),
    }


def pose_from_dict(data: dict) -> Pose:
    return Pose(np.asarray(data["rotation"]), np.asarray(data["translation"]))


@dataclass(frozen=True)
class LocationEntry:
    location_id: str
    split: str  # "train" | "eval"
    center_pose: Pose
    sensor_poses: tuple[Pose, ...]
    sensor_images: tuple[str, ...]
    gt_erp: str
    gt_depth: str
    gt_sensor_erps: tuple[str, ...]


@dataclass(frozen=True)
class DatasetManifest:
    grid: ErpGrid
    rig: RigConfig
    inv_depth_scale: float
    locations: tuple[LocationEntry, ...]
    version: int = MANIFEST_VERSION

    def split_ids(self, split: str) -> list[str]:
        return [loc.location_id for loc in self.locations if loc.split == split]

    def location(self, location_id: str) -> LocationEntry:
        for loc in self.locations:
            if loc.location_id == location_id:
                return loc
        raise ConfigError(f"location id {location_id!r} not in manifest")


def manifest_to_dict(m: DatasetManifest) -> dict:
    return {
        "format_version": m.version,
        "grid": {"width": m.grid.width, "height": m.grid.height},
        "rig": rig_to_dict(m.rig),
        "inv_depth_scale": m.inv_depth_scale,
        "locations": [
            {
                "id": loc.location_id,
                "split": loc.split,
                "center_pose": pose_to_dict(loc.center_pose),
                "sensors": [
                    {"index": i, "pose": pose_to_dict(p), "image": img}
                    for i, (p, img) in enumerate(
                        zip(loc.sensor_poses, loc.sensor_images)
                    )
                ],
                "gt_erp": loc.gt_erp,
                "gt_depth": loc.gt_depth,
                "gt_sensor_erps": list(loc.gt_sensor_erps),
            }
            for loc in m.locations
        ],
    }


def manifest_from_dict(data: dict) -> DatasetManifest:
    try:
        if data["format_version"] != MANIFEST_VERSION:
            raise ConfigError(
                f"format_version: unsupported manifest version {data['format_version']}"
            )
        grid = ErpGrid(int(data["grid"]["width"]), int(data["grid"]["height"]))
        rig = rig_from_dict(data["rig"])
        locations = []
        for loc in data["locations"]:
            sensors = loc["sensors"]
            locations.append(
                LocationEntry(
                    location_id=loc["id"],
                    split=loc["split"],
                    center_pose=pose_from_dict(loc["center_pose"]),
                    sensor_poses=tuple(pose_from_dict(s["pose"]) for s in sensors),
                    sensor_images=tuple(s["image"] for s in sensors),
                    gt_erp=loc["gt_erp"],
                    gt_depth=loc["gt_depth"],
                    gt_sensor_erps=tuple(loc["gt_sensor_erps"]),
                )
            )
        manifest = DatasetManifest(
            grid=grid,
            rig=rig,
            inv_depth_scale=float(data["inv_depth_scale"]),
            locations=tuple(locations),
        )
    except KeyError as exc:
        raise ConfigError(f"manifest missing field {exc.args[0]!r}") from exc
    train = set(manifest.split_ids("train"))
    ev = set(manifest.split_ids("eval"))
    if train & ev:
        raise ConfigError(f"locations: train/eval ids overlap: {sorted(train & ev)}")
    return manifest


def save_manifest(path, manifest: DatasetManifest) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest_to_dict(manifest), f, indent=2, sort_keys=True)
        f.write("\n")


def load_manifest(path) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as f:
        return manifest_from_dict(json.load(f))


def render_erp_from_faces(
    scene: Scene, pose: Pose, grid: ErpGrid, face_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Six 120-degree pinhole faces at a shared center, blended into ERP."""
    fov = np.deg2rad(120.0)
    faces = []
    for face_pose in cube_face_poses(pose):
        img, depth = render_pinhole(scene, face_pose, fov, face_size, face_size)
        faces.append(FaceRender(image=img, depth=depth, pose=face_pose, fov=fov))
    return compose_erp_from_faces(faces, grid, center=pose)


def check_clearance(scene: Scene, rig: RigConfig, center: Pose) -> None:
    points = [center.translation] + [p.translation for p in rig.sensor_poses(center)]
    worst = min(scene.clearance(p) for p in points)
    if worst < RIG_CLEARANCE:
        raise ValueError(
            f"rig at {center.translation.tolist()} violates scene clearance: "
            f"{worst:.3f} m < {RIG_CLEARANCE} m"
        )


def gen_dataset(
    scene: Scene,
    rig: RigConfig,
    locations: list[Pose],
    split_ratio: float,
    out_dir,
    grid: ErpGrid,
    face_size: int | None = None,
    inv_depth_scale: float = 4.0,
) -> DatasetManifest:
    """Render and write the full dataset; returns the manifest (also on disk).

    The first round(split_ratio * n) locations are tagged train, the rest
    eval, so the split is deterministic in the order given.
    """
    if not 0.0 <= split_ratio <= 1.0:
        raise ConfigError(f"split_ratio must be in [0, 1], got {split_ratio}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if face_size is None:
        face_size = grid.height
    n_train = int(round(split_ratio * len(locations)))

    entries = []
    for idx, center in enumerate(locations):
        check_clearance(scene, rig, center)
        loc_id = f"loc_{idx:04d}"
        loc_dir = out / loc_id
        loc_dir.mkdir(parents=True, exist_ok=True)
        sensor_poses = rig.sensor_poses(center)

        sensor_images = []
        for s, pose in enumerate(sensor_poses):
            img, _ = render_fisheye(scene, pose, rig.intrinsics)
            rel = f"{loc_id}/sensor_{s:02d}.png"
            save_png(out / rel, img)
            sensor_images.append(rel)

        erp, depth = render_erp_from_faces(scene, center, grid, face_size)
        gt_erp = f"{loc_id}/gt_erp.png"
        gt_depth = f"{loc_id}/gt_depth.png"
        save_png(out / gt_erp, erp)
        save_depth_png(out / gt_depth, depth, inv_depth_scale)

        gt_sensor_erps = []
        for s, pose in enumerate(sensor_poses):
            serp, _ = render_erp_from_faces(scene, pose, grid, face_size)
            rel = f"{loc_id}/gt_erp_sensor_{s:02d}.png"
            save_png(out / rel, serp)
            gt_sensor_erps.append(rel)

        entries.append(
            LocationEntry(
                location_id=loc_id,
                split="train" if idx < n_train else "eval",
                center_pose=center,
                sensor_poses=tuple(sensor_poses),
                sensor_images=tuple(sensor_images),
                gt_erp=gt_erp,
                gt_depth=gt_depth,
                gt_sensor_erps=tuple(gt_sensor_erps),
            )
        )

    manifest = DatasetManifest(
        grid=grid,
        rig=rig,
        inv_depth_scale=inv_depth_scale,
        locations=tuple(entries),
    )
    save_manifest(out / MANIFEST_NAME, manifest)
    return manifest


def load_location_images(dataset_dir, entry: LocationEntry) -> list[np.ndarray]:
    root = Path(dataset_dir)
    return [load_png(root / rel)[..., :3] for rel in entry.sensor_images]


def gt_alpha_from_depth(erp_depth: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """One-hot alpha volume at the sweep layer nearest in inverse depth.

    Returns (H, W, N, 1) float32. Ties at a reciprocal midpoint break toward
    the nearer layer; infinite depth selects the outermost layer.
    """
    radii = np.asarray(radii, dtype=np.float64)
    if radii.ndim != 1 or radii.size < 1:
        raise ValueError("radii must be a 1-D array")
    if np.any(np.diff(radii) <= 0.0):
        raise ValueError("radii must be strictly increasing")
    depth = np.asarray(erp_depth, dtype=np.float64)
    if np.any(depth <= 0.0):
        raise ValueError("depths must be positive or infinite")

    inv_depth = np.where(np.isfinite(depth), 1.0 / depth, 0.0)
    inv_radii = 1.0 / radii  # descending, so argmin of |diff| favors nearer layers
    diff = np.abs(inv_depth[..., None] - inv_radii)
    nearest = np.argmin(diff, axis=-1)

    alpha = np.zeros(depth.shape + (radii.size,), dtype=np.float32)
    np.put_along_axis(alpha, nearest[..., None], 1.0, axis=-1)
    return alpha[..., None]
