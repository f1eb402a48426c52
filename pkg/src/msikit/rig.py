"""Multi-sensor VR camera rig geometry.

A rig is M identical fisheye sensors equally spaced on a horizontal ring,
each facing outward, plus a center pose that anchors the rig (and every
sweep sphere built from it) in the world.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import FisheyeIntrinsics, Pose, rotation_yaw


@dataclass(frozen=True)
class RigConfig:
    sensor_count: int
    ring_radius: float
    intrinsics: FisheyeIntrinsics

    def __post_init__(self) -> None:
        if self.sensor_count < 2:
            raise ConfigError(f"sensor_count must be >= 2, got {self.sensor_count}")
        if self.ring_radius <= 0.0:
            raise ConfigError(f"ring_radius must be positive, got {self.ring_radius}")

    def sensor_poses(self, center: Pose) -> list[Pose]:
        """World poses of all sensors: ring around `center`, optical axes outward."""
        poses = []
        for i in range(self.sensor_count):
            yaw = 2.0 * np.pi * i / self.sensor_count
            r = rotation_yaw(yaw)
            local = Pose(r, self.ring_radius * r[:, 2])
            poses.append(center.compose(local))
        return poses


def default_rig(
    sensor_count: int = 6,
    ring_radius: float = 0.15,
    fov_deg: float = 220.0,
    width: int = 400,
    height: int = 400,
) -> RigConfig:
    """Ring rig with the image circle inscribed at 98% of the half-extent."""
    fov = np.deg2rad(fov_deg)
    circle = 0.49 * min(width, height)
    intr = FisheyeIntrinsics(
        width=width,
        height=height,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        focal=circle / (fov / 2.0),
        fov=fov,
    )
    return RigConfig(sensor_count=sensor_count, ring_radius=ring_radius, intrinsics=intr)


def rig_to_dict(rig: RigConfig) -> dict:
    return {
        "sensor_count": rig.sensor_count,
        "ring_radius": rig.ring_radius,
        "intrinsics": {
            "width": rig.intrinsics.width,
            "height": rig.intrinsics.height,
            "cx": rig.intrinsics.cx,
            "cy": rig.intrinsics.cy,
            "focal": rig.intrinsics.focal,
            "fov": rig.intrinsics.fov,
        },
    }


def rig_from_dict(data: dict) -> RigConfig:
    try:
        idata = data["intrinsics"]
        intr = FisheyeIntrinsics(
            width=int(idata["width"]),
            height=int(idata["height"]),
            cx=float(idata["cx"]),
            cy=float(idata["cy"]),
            focal=float(idata["focal"]),
            fov=float(idata["fov"]),
        )
        return RigConfig(
            sensor_count=int(data["sensor_count"]),
            ring_radius=float(data["ring_radius"]),
            intrinsics=intr,
        )
    except KeyError as exc:
        raise ConfigError(f"rig config missing field {exc.args[0]!r}") from exc


def load_rig(path) -> RigConfig:
    with open(path, "r", encoding="utf-8") as f:
        return rig_from_dict(json.load(f))


def save_rig(path, rig: RigConfig) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(rig_to_dict(rig), f, indent=2, sort_keys=True)
        f.write("\n")
