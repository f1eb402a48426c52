"""Acceptance suite: one test per numbered pipeline criterion.

Run with `pytest tests/test_acceptance.py -v` to get one pass/fail line per
criterion. Tolerances are stated inline; the end-to-end thresholds (28 dB
oracle, 22 dB photo-consistency) were validated against the ray-traced
ground truth during bring-up and are fixed here as regression floors.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from msikit.alpha import (
    WeightStore,
    forward,
    net_spec_table1,
    photoconsistency_alpha,
    shape_check,
)
from msikit.cli import default_scene, main
from msikit.dataset import gt_alpha_from_depth
from msikit.geometry import (
    ErpGrid,
    FisheyeIntrinsics,
    Pose,
    dir_to_erp_pixel,
    dir_to_fisheye_pixel,
    erp_pixel_to_dir,
    fisheye_pixel_to_dir,
    rotation_pitch,
    rotation_yaw,
)
from msikit.metrics import psnr, ssim
from msikit.msi import Msi, ViewRequest, assemble_msi, render_grad_alpha, render_view
from msikit.rig import default_rig
from msikit.scene import render_erp_direct, render_fisheye
from msikit.wssv import FisheyeView, ProjectedLayer, build_wssv, fuse_layer, sweep_radii
from msikit.wssv import SweepRadii

from test_metrics import naive_ssim


# ---------------------------------------------------------------------------
# shared end-to-end pipeline (criteria 8 and 9)


@pytest.fixture(scope="module")
def e2e():
    """Criterion-8 configuration: default procedural scene, 6-sensor ring
    (radius 0.15 m, fov 220 deg), N = 32 spheres, 400x200 ERP grid."""
    scene = default_scene(0)
    rig = default_rig(sensor_count=6, ring_radius=0.15, fov_deg=220.0, width=400, height=400)
    grid = ErpGrid(400, 200)
    center = Pose.identity()
    radii = sweep_radii(0.6, 1000.0, 32)
    poses = rig.sensor_poses(center)

    start = time.perf_counter()
    views = []
    for pose in poses:
        img, _ = render_fisheye(scene, pose, rig.intrinsics)
        views.append(FisheyeView(image=img, pose=pose, intrinsics=rig.intrinsics))
    _, gt_depth = render_erp_direct(scene, center, grid)
    volume = build_wssv(views, center, radii, grid)
    msi_oracle = assemble_msi(volume, gt_alpha_from_depth(gt_depth, radii.radii))

    gt_views = [render_erp_direct(scene, p, grid)[0] for p in poses]
    oracle_psnrs = []
    for pose, gt in zip(poses, gt_views):
        img, cov = render_view(
            msi_oracle, ViewRequest(eye=pose.translation, rotation=pose.rotation, grid=grid)
        )
        oracle_psnrs.append(psnr(img, gt, cov >= 0.999))
    oracle_elapsed = time.perf_counter() - start

    msi_photo = assemble_msi(volume, photoconsistency_alpha(volume, beta=50.0, support=1))
    photo_psnrs = []
    for pose, gt in zip(poses, gt_views):
        img, cov = render_view(
            msi_photo, ViewRequest(eye=pose.translation, rotation=pose.rotation, grid=grid)
        )
        photo_psnrs.append(psnr(img, gt, cov >= 0.999))

    return {
        "oracle_psnrs": oracle_psnrs,
        "photo_psnrs": photo_psnrs,
        "oracle_elapsed": oracle_elapsed,
    }


# ---------------------------------------------------------------------------
# shared CLI chain (criteria 10 and 11)


def run_cli_chain(tmp: Path, seed: int) -> None:
    rig = {
        "sensor_count": 4,
        "ring_radius": 0.12,
        "intrinsics": {
            "width": 128, "height": 128, "cx": 63.5, "cy": 63.5,
            "focal": 62.72 / 1.9198621771937625, "fov": 3.839724354387525,
        },
    }
    rig_path = tmp / "rig.json"
    rig_path.write_text(json.dumps(rig))
    ds = tmp / "ds"
    common = ["--rig-config", str(rig_path), "--seed", str(seed), "--layers", "8"]
    assert main(["gen", "--dataset", str(ds), "--grid-width", "128", "--grid-height", "64",
                 "--locations", "2", "--split-ratio", "0.5"] + common) == 0
    assert main(["sweep", "--dataset", str(ds), "--location", "loc_0001",
                 "--out-file", str(tmp / "loc1.wssv")] + common) == 0
    assert main(["alpha", "--wssv", str(tmp / "loc1.wssv"), "--alpha-method", "photo",
                 "--out-file", str(tmp / "alpha.npy")] + common) == 0
    assert main(["export", "--wssv", str(tmp / "loc1.wssv"), "--alpha-file", str(tmp / "alpha.npy"),
                 "--out-bundle", str(tmp / "bundle")] + common) == 0
    assert main(["render", "--msi", str(tmp / "bundle"), "--eye", "0.04,0.01,-0.03",
                 "--yaw", "25", "--pitch", "-10",
                 "--out-image", str(tmp / "view.png")] + common) == 0
    assert main(["eval", "--dataset", str(ds),
                 "--report", str(tmp / "report.json")] + common) == 0


@pytest.fixture(scope="module")
def cli_runs(tmp_path_factory):
    first = tmp_path_factory.mktemp("run_a")
    second = tmp_path_factory.mktemp("run_b")
    run_cli_chain(first, seed=123)
    run_cli_chain(second, seed=123)
    return first, second


# ---------------------------------------------------------------------------
# criteria


def test_criterion_01_projection_round_trips():
    """All ERP pixel centers (128x64) and all image-circle pixels of a
    220-degree fisheye survive dir<->pixel round trips, error < 1e-9 px,
    in under one second."""
    start = time.perf_counter()

    grid = ErpGrid(128, 64)
    uu, vv = np.meshgrid(np.arange(128, dtype=float), np.arange(64, dtype=float))
    d = erp_pixel_to_dir(uu, vv, grid)
    u2, v2 = dir_to_erp_pixel(d, grid)
    assert np.abs(u2 - uu).max() < 1e-9
    assert np.abs(v2 - vv).max() < 1e-9

    fov = np.deg2rad(220.0)
    intr = FisheyeIntrinsics(width=256, height=256, cx=127.5, cy=127.5,
                             focal=120.0 / (fov / 2.0), fov=fov)
    fu, fv = np.meshgrid(np.arange(256, dtype=float), np.arange(256, dtype=float))
    inside = np.hypot(fu - intr.cx, fv - intr.cy) <= intr.circle_radius
    dirs, valid = fisheye_pixel_to_dir(fu[inside], fv[inside], intr)
    assert valid.all()
    bu, bv, bvalid = dir_to_fisheye_pixel(dirs, intr)
    assert bvalid.all()
    assert np.abs(bu - fu[inside]).max() < 1e-9
    assert np.abs(bv - fv[inside]).max() < 1e-9

    assert time.perf_counter() - start < 1.0


def _random_msi(rng, n=4, h=16, w=32, dtype=np.float32):
    """dtype float64 for differentiation checks: a 1e-4 step must not be
    distorted by float32 storage quantization."""
    layers = rng.random((n, h, w, 4)).astype(dtype)
    layers[..., 3] = rng.uniform(0.05, 0.95, (n, h, w)).astype(dtype)
    return Msi(layers=layers, radii=sweep_radii(1.0, 8.0, n), center=Pose.identity())


def test_criterion_02_center_equivalence():
    """100 random MSIs (16x32, N=4): rendering from the exact center equals
    per-pixel compositing, max abs diff < 1e-6."""
    from msikit.msi import composite_center

    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        msi = _random_msi(rng)
        img, _ = render_view(
            msi, ViewRequest(eye=np.zeros(3), rotation=np.eye(3), grid=msi.grid)
        )
        worst = max(worst, float(np.abs(img - composite_center(msi)).max()))
    assert worst < 1e-6


def test_criterion_03_compositing_telescoping():
    """sum_i a_i prod_{j<i}(1-a_j) + prod_i(1-a_i) = 1 within 1e-9."""
    rng = np.random.default_rng(43)
    for _ in range(20):
        a = rng.random((rng.integers(1, 9), 13, 21))
        trans = np.cumprod(1.0 - a, axis=0)
        vis = np.concatenate([np.ones_like(a[:1]), trans[:-1]], axis=0)
        total = np.sum(a * vis, axis=0) + trans[-1]
        assert np.abs(total - 1.0).max() < 1e-9


def test_criterion_04_gradient_correctness():
    """Analytic alpha gradient vs central differences (h = 1e-4), relative
    error < 1e-3, over 50 random (MSI, viewpoint) pairs."""
    rng = np.random.default_rng(44)
    step = 1e-4
    for _ in range(50):
        msi = _random_msi(rng, n=3, h=8, w=16, dtype=np.float64)
        eye = rng.uniform(-0.4, 0.4, 3)
        rot = rotation_yaw(rng.uniform(0, 2 * np.pi)) @ rotation_pitch(rng.uniform(-1.0, 1.0))
        req = ViewRequest(eye=eye, rotation=rot, grid=msi.grid)
        upstream = rng.random((8, 16, 3))
        grad = render_grad_alpha(msi, req, upstream)

        entries = [
            (int(n), int(y), int(x))
            for n, y, x in zip(
                rng.integers(0, 3, 24), rng.integers(0, 8, 24), rng.integers(0, 16, 24)
            )
        ]
        fd = np.zeros(len(entries))
        for i, (n, y, x) in enumerate(entries):
            vals = []
            for sign in (+1, -1):
                pert = msi.layers.copy()
                pert[n, y, x, 3] += sign * step
                m2 = Msi(layers=pert, radii=msi.radii, center=msi.center)
                img, _ = render_view(m2, req)
                vals.append(float(np.sum(upstream * img.astype(np.float64))))
            fd[i] = (vals[0] - vals[1]) / (2 * step)
        analytic = np.array([grad[n, y, x] for (n, y, x) in entries])
        scale = max(float(np.abs(fd).max()), 1e-12)
        assert float(np.abs(analytic - fd).max()) / scale < 1e-3


def test_criterion_05_fusion_softmax():
    """Softmax weights sum to 1 within 1e-12; fusion is order invariant;
    gamma = (1, 0) on colors (1, 0) gives e/(e+1) = 0.731059 +- 1e-6."""
    rng = np.random.default_rng(45)
    shape = (6, 10)
    layers = [
        ProjectedLayer(
            color=np.ones(shape + (3,), dtype=np.float32),
            gamma=rng.uniform(-3, 3, shape).astype(np.float32),
            valid=np.ones(shape, dtype=bool),
        )
        for _ in range(5)
    ]
    color, _, _ = fuse_layer(layers)
    assert np.abs(color - 1.0).max() < 1e-12

    mixed = [
        ProjectedLayer(
            color=rng.random(shape + (3,)).astype(np.float32),
            gamma=rng.random(shape).astype(np.float32),
            valid=rng.random(shape) > 0.2,
        )
        for _ in range(4)
    ]
    c1, q1, v1 = fuse_layer(mixed)
    c2, q2, v2 = fuse_layer(mixed[::-1])
    np.testing.assert_allclose(c1, c2, atol=1e-9)
    np.testing.assert_array_equal(q1, q2)

    a = ProjectedLayer(np.ones(shape + (3,), np.float32), np.ones(shape, np.float32),
                       np.ones(shape, bool))
    b = ProjectedLayer(np.zeros(shape + (3,), np.float32), np.zeros(shape, np.float32),
                       np.ones(shape, bool))
    color, _, _ = fuse_layer([a, b])
    assert np.abs(color - 0.7310585786300049).max() < 1e-6


def test_criterion_06_inverse_depth_sampling():
    """near 1, far 100, N 3 -> {1, 1.980198..., 100} within 1e-9; reciprocal
    spacing uniform within 1e-12 for every N up to 256."""
    r = sweep_radii(1.0, 100.0, 3)
    np.testing.assert_allclose(r.radii, [1.0, 1.9801980198019802, 100.0], atol=1e-9)
    for n in range(2, 257):
        rad = sweep_radii(0.6, 1000.0, n)
        steps = np.diff(1.0 / rad.radii)
        assert np.abs(steps - steps[0]).max() < 1e-12
        assert rad.radii[0] == 0.6 and rad.radii[-1] == 1000.0


DEPTH_COLUMN_N32 = [
    ("conv1_1", 32), ("conv1_2", 16), ("conv2_1", 16), ("conv2_2", 8),
    ("conv3_1", 8), ("conv3_2", 8), ("conv3_3", 4),
    ("conv4_1", 4), ("conv4_2", 4), ("conv4_3", 4),
    ("nnup_5", 8), ("conv5_1", 8), ("conv5_2", 8), ("conv5_3", 8),
    ("nnup_6", 16), ("conv6_1", 16), ("conv6_2", 16),
    ("nnup_7", 32), ("conv7_1", 32), ("conv7_2", 32), ("conv7_3", 32),
]


def test_criterion_07_network_table_fidelity():
    """Shape propagation reproduces the published depth column for a
    32-layer input and ends at [H, W, N, 1] for both working configurations;
    an all-zero network emits constant activation(0)."""
    spec = net_spec_table1()
    shapes = shape_check(spec, (320, 640, 32, 3))
    for name, depth in DEPTH_COLUMN_N32:
        assert shapes[name][2] == depth, name
    assert shapes["conv7_3"] == (320, 640, 32, 1)
    assert shape_check(spec, (200, 400, 64, 3))["conv7_3"] == (200, 400, 64, 1)

    weights = WeightStore.zeros(spec, input_channels=3)
    volume = np.random.default_rng(46).random((16, 32, 8, 3))
    out = forward(spec, weights, volume, activation="sigmoid")
    assert out.shape == (16, 32, 8, 1)
    np.testing.assert_allclose(out, 0.5, atol=1e-12)
    out = forward(spec, weights, volume, activation="reluclamp")
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_criterion_08_end_to_end_oracle(e2e):
    """Ground-truth one-hot alpha, re-rendered at each input sensor pose:
    masked PSNR >= 28 dB per view; the geometric pipeline runs in under
    60 s single-threaded."""
    for i, value in enumerate(e2e["oracle_psnrs"]):
        assert value >= 28.0, f"view {i}: {value:.2f} dB"
    assert e2e["oracle_elapsed"] < 60.0


def test_criterion_09_photoconsistency_regression(e2e):
    """photoconsistency_alpha (beta = 50) reaches >= 22 dB per view and
    never beats the ground-truth-alpha oracle."""
    for i, (ph, orc) in enumerate(zip(e2e["photo_psnrs"], e2e["oracle_psnrs"])):
        assert ph >= 22.0, f"view {i}: {ph:.2f} dB"
        assert ph <= orc, f"view {i}: photo {ph:.2f} beats oracle {orc:.2f}"


def test_criterion_10_report_format_mirrors_table_layout(cli_runs):
    """Absolute published scores require the trained network and external
    CG engines, both out of scope; this asserts only that the eval report
    keeps the mean +- std layout at both aggregation levels."""
    report = json.loads((cli_runs[0] / "report.json").read_text())
    for agg in ("over_views", "over_locations"):
        for metric in ("psnr", "ssim"):
            stats = report["aggregate"][agg][metric]
            assert set(stats) == {"mean", "std"}
            assert np.isfinite(stats["mean"]) and np.isfinite(stats["std"])
    assert len(report["views"]) >= 1


def test_criterion_11_cli_determinism(cli_runs):
    """Every CLI stage re-run with the same seed produces byte-identical
    artifacts (dataset PNGs, manifests, sweep volume, alpha, bundle,
    render, report)."""
    first, second = cli_runs
    files_a = {p.relative_to(first): p for p in sorted(first.rglob("*")) if p.is_file()}
    files_b = {p.relative_to(second): p for p in sorted(second.rglob("*")) if p.is_file()}
    assert files_a.keys() == files_b.keys()
    for rel in files_a:
        assert files_a[rel].read_bytes() == files_b[rel].read_bytes(), str(rel)


def test_criterion_12_metrics_oracles():
    """psnr at uniform MSE 0.01 reports 20 dB; ssim matches the literal
    windowed definition within 1e-6 on random 32x32 images."""
    a = np.full((16, 16), 0.25)
    b = np.full((16, 16), 0.35)
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    rng = np.random.default_rng(47)
    for _ in range(3):
        x = rng.random((32, 32))
        y = np.clip(x + 0.1 * rng.normal(size=x.shape), 0, 1)
        assert ssim(x, y) == pytest.approx(naive_ssim(x, y), abs=1e-6)
    xc = rng.random((32, 32, 3))
    yc = np.clip(xc + 0.1 * rng.normal(size=xc.shape), 0, 1)
    assert ssim(xc, yc) == pytest.approx(naive_ssim(xc, yc), abs=1e-6)


@pytest.mark.skip(reason="secondary component: exercised by the viewer's own "
                         "node test suite under frontend/ (golden comparison + input fuzz)")
def test_criterion_13_viewer_golden():
    pass
