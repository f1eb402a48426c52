"""Command-line pipeline driver.

One binary, six subcommands covering the full flow:

    msikit gen     render a synthetic rig dataset
    msikit sweep   fuse one location's footage into a sweep volume
    msikit alpha   predict the alpha volume (photo-consistency or network)
    msikit export  assemble sweep volume + alpha into a viewer bundle
    msikit render  render a bundle from an arbitrary viewpoint
    msikit eval    score rendered novel views against ground truth

Settings come from defaults, then an optional JSON config file, then flags
(flags win). All randomness hangs off --seed, so re-running any stage with
identical inputs produces byte-identical artifacts.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 numerical or
precondition failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .alpha import (
    WeightStore,
    forward,
    net_spec_table1,
    photoconsistency_alpha,
)
from .dataset import gen_dataset, load_location_images, load_manifest
from .errors import ConfigError
from .geometry import ErpGrid, Pose, rotation_pitch, rotation_yaw
from .images import load_png, save_png
from .metrics import PSNR_TEXT_CAP, evaluate_pair
from .msi import (
    Msi,
    PinholeSpec,
    ViewRequest,
    assemble_msi,
    export_msi,
    import_msi,
    render_view,
)
from .rig import default_rig, load_rig
from .scene import Rect, Scene, Sphere, Box, Texture, load_scene
from .wssv import build_wssv, load_wssv, sweep_radii, save_wssv, FisheyeView

COVERAGE_THRESHOLD = 0.999


@dataclass(frozen=True)
class PipelineConfig:
    dataset_dir: str = "dataset"
    out_dir: str = "out"
    scene_config: str | None = None
    rig_config: str | None = None
    grid_width: int = 640
    grid_height: int = 320
    layers: int = 32
    near: float = 0.6
    far: float = 1000.0
    alpha_method: str = "photo"  # photo | net
    activation: str = "sigmoid"  # sigmoid | reluclamp
    beta: float = 50.0
    support: int = 1
    weights: str | None = None
    locations: int = 4
    split_ratio: float = 0.8
    face_size: int | None = None
    eval_split: str = "eval"
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.split_ratio <= 1.0:
            raise ConfigError(f"split_ratio must be in [0, 1], got {self.split_ratio}")
        if self.alpha_method not in ("photo", "net"):
            raise ConfigError(f"alpha_method must be photo or net, got {self.alpha_method!r}")
        if self.activation not in ("sigmoid", "reluclamp"):
            raise ConfigError(
                f"activation must be sigmoid or reluclamp, got {self.activation!r}"
            )
        if self.layers < 2:
            raise ConfigError(f"layers must be >= 2, got {self.layers}")
        if not 0.0 < self.near < self.far:
            raise ConfigError(f"need 0 < near < far, got near={self.near}, far={self.far}")
        if self.alpha_method == "net":
            for name, dim in (
                ("grid_height", self.grid_height),
                ("grid_width", self.grid_width),
                ("layers", self.layers),
            ):
                if dim % 8 != 0:
                    raise ConfigError(
                        f"{name}={dim} must be divisible by 8 when alpha_method=net"
                    )

    @property
    def grid(self) -> ErpGrid:
        try:
            return ErpGrid(self.grid_width, self.grid_height)
        except ValueError as exc:
            raise ConfigError(f"grid_width/grid_height: {exc}") from exc


def default_scene(seed: int = 0) -> Scene:
    """Desk-scale test scene: textured ground, a few solids, a far wall."""
    return Scene(
        primitives=(
            Rect((0.0, -1.6, 0.0), axis=1, half_u=14.0, half_v=14.0,
                 texture=Texture("checker", (0.78, 0.73, 0.62), (0.33, 0.3, 0.26), scale=14.0)),
            Rect((0.0, 2.0, -9.0), axis=2, half_u=14.0, half_v=5.0,
                 texture=Texture("noise", (0.25, 0.33, 0.45), (0.65, 0.7, 0.75), scale=9.0, seed=seed)),
            Sphere((1.8, 0.1, 2.6), 0.8,
                   texture=Texture("noise", (0.7, 0.25, 0.2), (0.95, 0.75, 0.45), scale=7.0, seed=seed + 1)),
            Sphere((-2.2, -0.3, -1.6), 0.7,
                   texture=Texture("checker", (0.2, 0.45, 0.7), (0.85, 0.88, 0.9), scale=8.0)),
            Sphere((4.2, 1.4, -5.2), 1.5,
                   texture=Texture("flat", (0.35, 0.6, 0.35))),
            Box((-1.6, -0.8, 2.4), (0.5, 0.8, 0.5),
                texture=Texture("stripe", (0.8, 0.62, 0.25), (0.4, 0.3, 0.14), scale=6.0)),
        ),
        background=(0.36, 0.44, 0.56),
    )


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config: file not found: {path}")
    with open(p, "r", encoding="utf-8") as f:
        data = json.load(f)
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"config: unknown fields {sorted(unknown)}")
    return data


def build_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config:
        cfg = replace(cfg, **_load_config_file(args.config))
    overrides = {}
    for name in (
        "seed", "layers", "near", "far", "alpha_method", "activation",
        "beta", "support", "weights", "locations", "split_ratio",
        "grid_width", "grid_height", "face_size", "eval_split",
        "scene_config", "rig_config", "dataset_dir", "out_dir",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _resolve_scene(cfg: PipelineConfig) -> Scene:
    if cfg.scene_config:
        return load_scene(cfg.scene_config)
    return default_scene(cfg.seed)


def _resolve_rig(cfg: PipelineConfig):
    if cfg.rig_config:
        return load_rig(cfg.rig_config)
    return default_rig()


def _sample_locations(scene: Scene, rig, count: int, seed: int) -> list[Pose]:
    """First location at the origin, the rest uniform in a small box around
    it, rejecting positions that violate scene clearance."""
    from .dataset import check_clearance

    rng = np.random.default_rng(seed)
    locations = [Pose.identity()]
    attempts = 0
    while len(locations) < count:
        p = rng.uniform((-1.2, -0.3, -1.2), (1.2, 0.5, 1.2))
        attempts += 1
        if attempts > 1000 * count:
            raise ValueError("could not sample clearance-respecting locations")
        candidate = Pose(np.eye(3), p)
        try:
            check_clearance(scene, rig, candidate)
        except ValueError:
            continue
        locations.append(candidate)
    return locations[:count]


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(cfg: PipelineConfig) -> int:
    scene = _resolve_scene(cfg)
    rig = _resolve_rig(cfg)
    locations = _sample_locations(scene, rig, cfg.locations, cfg.seed)
    manifest = gen_dataset(
        scene,
        rig,
        locations,
        cfg.split_ratio,
        cfg.dataset_dir,
        cfg.grid,
        face_size=cfg.face_size,
    )
    print(
        f"wrote {len(manifest.locations)} locations "
        f"({len(manifest.split_ids('train'))} train / "
        f"{len(manifest.split_ids('eval'))} eval) to {cfg.dataset_dir}"
    )
    return 0


def _views_for_location(manifest, dataset_dir, entry) -> list[FisheyeView]:
    images = load_location_images(dataset_dir, entry)
    center_inv = entry.center_pose.inverse()
    return [
        FisheyeView(image=img, pose=center_inv.compose(pose), intrinsics=manifest.rig.intrinsics)
        for img, pose in zip(images, entry.sensor_poses)
    ]


def cmd_sweep(cfg: PipelineConfig, location: str, out_path: str) -> int:
    manifest = load_manifest(Path(cfg.dataset_dir) / "manifest.json")
    entry = manifest.location(location)
    views = _views_for_location(manifest, cfg.dataset_dir, entry)
    radii = sweep_radii(cfg.near, cfg.far, cfg.layers)
    volume = build_wssv(views, Pose.identity(), radii, manifest.grid)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_wssv(out_path, volume)
    print(f"wrote sweep volume {volume.color.shape} to {out_path}")
    return 0


def cmd_alpha(cfg: PipelineConfig, wssv_path: str, out_path: str) -> int:
    volume = load_wssv(wssv_path)
    if cfg.alpha_method == "photo":
        alpha = photoconsistency_alpha(volume, beta=cfg.beta, support=cfg.support)
    else:
        spec = net_spec_table1()
        if cfg.weights:
            weights = WeightStore.load(cfg.weights)
        else:
            weights = WeightStore.random(spec, input_channels=3, seed=cfg.seed)
        alpha = forward(spec, weights, volume.color, activation=cfg.activation)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    np.save(out_path, alpha)
    print(f"wrote alpha volume {alpha.shape} to {out_path}")
    return 0


def cmd_export(cfg: PipelineConfig, wssv_path: str, alpha_path: str, out_dir: str) -> int:
    volume = load_wssv(wssv_path)
    alpha = np.load(alpha_path)
    msi = assemble_msi(volume, alpha)
    manifest_path = export_msi(msi, out_dir)
    print(f"wrote MSI bundle ({msi.num_layers} layers) to {manifest_path.parent}")
    return 0


def _parse_vec3(text: str) -> np.ndarray:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"eye: expected x,y,z got {text!r}")
    return np.asarray(parts)


def cmd_render(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    msi = import_msi(args.msi)
    eye = _parse_vec3(args.eye)
    rot = rotation_yaw(np.deg2rad(args.yaw)) @ rotation_pitch(np.deg2rad(args.pitch))
    if args.pinhole_fov is not None:
        req = ViewRequest(
            eye=eye,
            rotation=rot,
            pinhole=PinholeSpec(np.deg2rad(args.pinhole_fov), args.width, args.height),
        )
    else:
        req = ViewRequest(eye=eye, rotation=rot, grid=msi.grid)
    img, _ = render_view(msi, req)
    out = Path(args.out_image)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_png(out, img)
    print(f"wrote render to {out}")
    return 0


def _location_alpha(cfg: PipelineConfig, volume) -> np.ndarray:
    if cfg.alpha_method == "photo":
        return photoconsistency_alpha(volume, beta=cfg.beta, support=cfg.support)
    spec = net_spec_table1()
    if cfg.weights:
        weights = WeightStore.load(cfg.weights)
    else:
        weights = WeightStore.random(spec, input_channels=3, seed=cfg.seed)
    return forward(spec, weights, volume.color, activation=cfg.activation)


def cmd_eval(cfg: PipelineConfig, out_path: str) -> int:
    """Reconstruct every eval location, re-render at the input sensor poses,
    and score against the ray-traced references. The report keeps one row
    per view plus mean/std aggregated both over views and over locations."""
    manifest = load_manifest(Path(cfg.dataset_dir) / "manifest.json")
    radii = sweep_radii(cfg.near, cfg.far, cfg.layers)
    ids = manifest.split_ids(cfg.eval_split)
    if not ids:
        raise ConfigError(f"eval_split: no locations tagged {cfg.eval_split!r}")

    rows = []
    per_location: dict[str, list[dict]] = {}
    for loc_id in ids:
        entry = manifest.location(loc_id)
        views = _views_for_location(manifest, cfg.dataset_dir, entry)
        volume = build_wssv(views, Pose.identity(), radii, manifest.grid)
        msi = assemble_msi(volume, _location_alpha(cfg, volume))
        center_inv = entry.center_pose.inverse()
        for s, (pose, gt_rel) in enumerate(zip(entry.sensor_poses, entry.gt_sensor_erps)):
            rel = center_inv.compose(pose)
            img, coverage = render_view(
                msi, ViewRequest(eye=rel.translation, rotation=rel.rotation, grid=manifest.grid)
            )
            gt = load_png(Path(cfg.dataset_dir) / gt_rel)[..., :3]
            mask = coverage >= COVERAGE_THRESHOLD
            report = evaluate_pair(img, gt, mask)
            row = {"location": loc_id, "sensor": s, **report.to_row()}
            rows.append(row)
            per_location.setdefault(loc_id, []).append(row)

    def agg(values: list[float]) -> dict:
        arr = np.asarray(values, dtype=np.float64)
        return {"mean": float(arr.mean()), "std": float(arr.std())}

    loc_psnr = [float(np.mean([r["psnr"] for r in v])) for v in per_location.values()]
    loc_ssim = [float(np.mean([r["ssim"] for r in v])) for v in per_location.values()]
    report = {
        "alpha_method": cfg.alpha_method,
        "layers": cfg.layers,
        "grid": {"width": manifest.grid.width, "height": manifest.grid.height},
        "views": rows,
        "aggregate": {
            "over_views": {
                "psnr": agg([r["psnr"] for r in rows]),
                "ssim": agg([r["ssim"] for r in rows]),
            },
            "over_locations": {
                "psnr": agg(loc_psnr),
                "ssim": agg(loc_ssim),
            },
        },
    }
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    over_views = report["aggregate"]["over_views"]
    print(
        f"eval ({cfg.alpha_method}): "
        f"PSNR {min(over_views['psnr']['mean'], PSNR_TEXT_CAP):.2f} "
        f"+- {over_views['psnr']['std']:.2f} dB, "
        f"SSIM {over_views['ssim']['mean']:.4f} +- {over_views['ssim']['std']:.4f} "
        f"over {len(rows)} views -> {out}"
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int, help="seed for all stochastic choices")
    p.add_argument("--layers", type=int, help="number of sweep spheres N")
    p.add_argument("--near", type=float, help="inmost sphere radius (m)")
    p.add_argument("--far", type=float, help="outermost sphere radius (m)")
    p.add_argument("--alpha-method", dest="alpha_method", choices=("photo", "net"))
    p.add_argument("--activation", choices=("sigmoid", "reluclamp"))
    p.add_argument("--beta", type=float, help="photo-consistency sharpness")
    p.add_argument("--support", type=int, help="layer-axis smoothing radius")
    p.add_argument("--weights", help="network weight store path")
    p.add_argument("--grid-width", dest="grid_width", type=int)
    p.add_argument("--grid-height", dest="grid_height", type=int)
    p.add_argument("--scene-config", dest="scene_config", help="scene JSON path")
    p.add_argument("--rig-config", dest="rig_config", help="rig JSON path")
    p.add_argument("--dataset", dest="dataset_dir", help="dataset directory")
    p.add_argument("--out", dest="out_dir", help="output directory")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msikit",
        description="fisheye rig footage -> 6-DoF multi-sphere image pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="render a synthetic dataset")
    _common_flags(p)
    p.add_argument("--locations", type=int, help="number of rig locations")
    p.add_argument("--split-ratio", dest="split_ratio", type=float)
    p.add_argument("--face-size", dest="face_size", type=int)

    p = sub.add_parser("sweep", help="build one location's sweep volume")
    _common_flags(p)
    p.add_argument("--location", required=True, help="location id, e.g. loc_0000")
    p.add_argument("--out-file", required=True, help="output .wssv path")

    p = sub.add_parser("alpha", help="predict the alpha volume")
    _common_flags(p)
    p.add_argument("--wssv", required=True, help="input .wssv path")
    p.add_argument("--out-file", required=True, help="output .npy path")

    p = sub.add_parser("export", help="assemble and export a viewer bundle")
    _common_flags(p)
    p.add_argument("--wssv", required=True)
    p.add_argument("--alpha-file", required=True, dest="alpha_file")
    p.add_argument("--out-bundle", required=True, dest="out_bundle")

    p = sub.add_parser("render", help="render an MSI bundle")
    _common_flags(p)
    p.add_argument("--msi", required=True, help="bundle directory")
    p.add_argument("--eye", default="0,0,0", help="x,y,z meters from center")
    p.add_argument("--yaw", type=float, default=0.0, help="degrees")
    p.add_argument("--pitch", type=float, default=0.0, help="degrees")
    p.add_argument("--pinhole-fov", dest="pinhole_fov", type=float,
                   help="render a pinhole view with this fov (degrees) instead of ERP")
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--out-image", required=True, dest="out_image")

    p = sub.add_parser("eval", help="score novel views against ground truth")
    _common_flags(p)
    p.add_argument("--eval-split", dest="eval_split", choices=("train", "eval"))
    p.add_argument("--report", required=True, help="output report JSON path")

    return parser


def run(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    cfg = build_config(args)
    if args.command == "gen":
        return cmd_gen(cfg)
    if args.command == "sweep":
        return cmd_sweep(cfg, args.location, args.out_file)
    if args.command == "alpha":
        return cmd_alpha(cfg, args.wssv, args.out_file)
    if args.command == "export":
        return cmd_export(cfg, args.wssv, args.alpha_file, args.out_bundle)
    if args.command == "render":
        return cmd_render(cfg, args)
    if args.command == "eval":
        return cmd_eval(cfg, args.report)
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
