"""Generate the viewer's golden fixtures: a 4-layer MSI bundle plus
reference renders produced by the primary renderer.

The bundle comes from the real pipeline (ray-traced rig footage, sweep
volume, ground-truth one-hot alpha) so the layers carry actual parallax.
Reference views are rendered from the *imported* bundle, so both sides of
the golden comparison start from identical quantized layer data.

Usage: python3 scripts/make_viewer_golden.py [out_dir]
"""

import json
import sys
from pathlib import Path

import numpy as np

from msikit.cli import default_scene
from msikit.dataset import gt_alpha_from_depth
from msikit.geometry import ErpGrid, Pose, rotation_pitch, rotation_yaw
from msikit.images import save_png
from msikit.msi import PinholeSpec, ViewRequest, assemble_msi, export_msi, import_msi, render_view
from msikit.rig import default_rig
from msikit.scene import render_erp_direct, render_fisheye
from msikit.wssv import FisheyeView, build_wssv, sweep_radii

VIEWS = [
    {"name": "origin", "eye": [0.0, 0.0, 0.0], "yaw_deg": 0.0, "pitch_deg": 0.0,
     "fov_deg": 90.0, "width": 128, "height": 128},
    {"name": "offset", "eye": [0.12, 0.03, -0.08], "yaw_deg": 30.0, "pitch_deg": -5.0,
     "fov_deg": 90.0, "width": 128, "height": 128},
]


def main(out_dir: str) -> None:
    out = Path(out_dir)
    scene = default_scene(0)
    rig = default_rig(sensor_count=4, ring_radius=0.12, fov_deg=220.0, width=160, height=160)
    grid = ErpGrid(64, 32)
    center = Pose.identity()
    radii = sweep_radii(0.8, 50.0, 4)

    views = []
    for pose in rig.sensor_poses(center):
        img, _ = render_fisheye(scene, pose, rig.intrinsics)
        views.append(FisheyeView(image=img, pose=pose, intrinsics=rig.intrinsics))
    volume = build_wssv(views, center, radii, grid)
    _, depth = render_erp_direct(scene, center, grid)
    msi = assemble_msi(volume, gt_alpha_from_depth(depth, radii.radii))

    bundle_dir = out / "bundle"
    export_msi(msi, bundle_dir)
    imported = import_msi(bundle_dir)

    meta = {"bundle": "bundle", "views": []}
    for spec in VIEWS:
        rot = rotation_yaw(np.deg2rad(spec["yaw_deg"])) @ rotation_pitch(np.deg2rad(spec["pitch_deg"]))
        img, _ = render_view(
            imported,
            ViewRequest(
                eye=np.asarray(spec["eye"]),
                rotation=rot,
                pinhole=PinholeSpec(np.deg2rad(spec["fov_deg"]), spec["width"], spec["height"]),
            ),
        )
        name = f"golden_{spec['name']}.png"
        save_png(out / name, img)
        meta["views"].append({**spec, "image": name, "min_psnr_db": 40.0})
    (out / "golden_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"golden fixtures written to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "frontend/test/golden")
