"""Multi-sphere image representation, rendering, gradients, and bundles.

An MSI is N concentric ERP layers of RGB + straight alpha around a center
pose, ordered innermost first. Rendering composites front to back with the
over operator:

    c = sum_i c_i * a_i * prod_{j<i} (1 - a_j)

From the exact center every ray meets every sphere at the same ERP
coordinate, so rendering degenerates to per-pixel compositing; away from
the center each sphere is intersected analytically and its layer sampled
bilinearly (wrapping in longitude).

The renderer also exposes the analytic gradient of the composited color
with respect to the sampled alphas, back-chained through the bilinear
taps onto the layer grids; that is the piece a training loop would need.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import (
    ErpGrid,
    Pose,
    dir_to_erp_pixel,
    erp_direction_grid,
    ray_sphere_intersect,
)
from .images import load_png, save_png
from .wssv import SweepRadii, Wssv

BUNDLE_VERSION = 1
_ALPHA_TOL = 1e-6


@dataclass(frozen=True)
class Msi:
    """layers: (N, H, W, 4) float32 RGBA, innermost sphere first."""

    layers: np.ndarray
    radii: SweepRadii
    center: Pose

    def __post_init__(self) -> None:
        if self.layers.ndim != 4 or self.layers.shape[3] != 4:
            raise ValueError("layers must have shape (N, H, W, 4)")
        if self.layers.shape[0] != len(self.radii):
            raise ValueError(
                f"layer count {self.layers.shape[0]} != radii count {len(self.radii)}"
            )

    @property
    def grid(self) -> ErpGrid:
        return ErpGrid(self.layers.shape[2], self.layers.shape[1])

    @property
    def num_layers(self) -> int:
        return int(self.layers.shape[0])


@dataclass(frozen=True)
class PinholeSpec:
    fov: float
    width: int
    height: int


@dataclass(frozen=True)
class ViewRequest:
    """Viewpoint inside the inmost sphere, in rig-centered coordinates."""

    eye: np.ndarray
    rotation: np.ndarray
    grid: ErpGrid | None = None
    pinhole: PinholeSpec | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "eye", np.asarray(self.eye, dtype=np.float64).reshape(3))
        object.__setattr__(
            self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        )
        if (self.grid is None) == (self.pinhole is None):
            raise ValueError("specify exactly one of grid or pinhole")


def assemble_msi(wssv: Wssv, alpha: np.ndarray) -> Msi:
    """Attach an alpha volume (H, W, N[, 1]) to the sweep volume's colors."""
    a = np.asarray(alpha, dtype=np.float32)
    if a.ndim == 4 and a.shape[-1] == 1:
        a = a[..., 0]
    if a.shape != wssv.color.shape[:3]:
        raise ValueError(
            f"alpha shape {a.shape} does not match volume {wssv.color.shape[:3]}"
        )
    if np.any(np.isnan(a)) or a.min() < -_ALPHA_TOL or a.max() > 1.0 + _ALPHA_TOL:
        raise ValueError("alpha values outside [0, 1]")
    a = np.clip(a, 0.0, 1.0)

    n = wssv.num_layers
    layers = np.empty((n, *wssv.grid.shape, 4), dtype=np.float32)
    for i in range(n):
        layers[i, ..., :3] = wssv.color[:, :, i, :]
        layers[i, ..., 3] = a[:, :, i]
    return Msi(layers=layers, radii=wssv.radii, center=wssv.center)


def _over_composite(rgb: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Front-to-back over along axis 0. Returns (color, transmittance left)."""
    a = a.astype(np.float64)
    trans = np.cumprod(1.0 - a, axis=0)
    vis = np.concatenate([np.ones_like(a[:1]), trans[:-1]], axis=0)  # exclusive
    weights = a * vis
    color = np.sum(weights[..., None] * rgb.astype(np.float64), axis=0)
    return color, trans[-1]


def _out_dtype(msi: Msi):
    # float32 for image payloads; float64 layers stay float64 so numeric
    # checks (finite differences) are not drowned by output quantization
    return np.result_type(msi.layers.dtype, np.float32)


def composite_center(msi: Msi) -> np.ndarray:
    """Per-pixel compositing of the layer stack as seen from the exact center."""
    color, _ = _over_composite(msi.layers[..., :3], msi.layers[..., 3])
    return color.astype(_out_dtype(msi))


def coverage_center(msi: Msi) -> np.ndarray:
    """1 - prod(1 - a_i): how much of each pixel the stack accounts for."""
    _, residual = _over_composite(msi.layers[..., :3], msi.layers[..., 3])
    return (1.0 - residual).astype(np.float32)


def _request_dirs(req: ViewRequest) -> np.ndarray:
    if req.grid is not None:
        dirs = erp_direction_grid(req.grid)
    else:
        ph = req.pinhole
        focal = (ph.width / 2.0) / np.tan(ph.fov / 2.0)
        u = np.arange(ph.width, dtype=np.float64)
        v = np.arange(ph.height, dtype=np.float64)
        uu, vv = np.meshgrid(u, v)
        dirs = np.stack(
            [
                (uu + 0.5 - ph.width / 2.0) / focal,
                -(vv + 0.5 - ph.height / 2.0) / focal,
                np.ones_like(uu),
            ],
            axis=-1,
        )
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs @ req.rotation.T


def _check_eye(msi: Msi, req: ViewRequest) -> None:
    d1 = float(msi.radii.radii[0])
    if float(np.linalg.norm(req.eye)) >= d1:
        raise ValueError(
            f"eye must be strictly inside the inmost sphere "
            f"(|eye| = {np.linalg.norm(req.eye):.4f} >= d_1 = {d1:.4f})"
        )


def _sample_layer_coords(msi: Msi, req: ViewRequest, dirs: np.ndarray):
    """Per layer: ERP coordinates where each ray pierces that sphere."""
    grid = msi.grid
    us, vs = [], []
    for radius in msi.radii.radii:
        p = ray_sphere_intersect(req.eye, dirs, float(radius))
        u, v = dir_to_erp_pixel(p / radius, grid)
        us.append(u)
        vs.append(v)
    return np.stack(us), np.stack(vs)


def _bilinear_taps(grid: ErpGrid, u: np.ndarray, v: np.ndarray):
    """Wrap-around bilinear taps: corner indices and weights for each sample."""
    h, w = grid.shape
    v = np.clip(v, 0.0, h - 1)
    u = np.mod(u, w)
    u0 = np.floor(u).astype(np.intp)
    fu = u - u0
    u1 = np.mod(u0 + 1, w)
    u0 = np.mod(u0, w)
    v0 = np.floor(v).astype(np.intp)
    fv = v - v0
    v1 = np.minimum(v0 + 1, h - 1)
    w00 = (1.0 - fu) * (1.0 - fv)
    w10 = fu * (1.0 - fv)
    w01 = (1.0 - fu) * fv
    w11 = fu * fv
    return (u0, v0, w00), (u1, v0, w10), (u0, v1, w01), (u1, v1, w11)


def _sample_msi(msi: Msi, us: np.ndarray, vs: np.ndarray):
    """Sample every layer at its own coordinates. Returns (N, ..., 4) float64."""
    out = np.empty(us.shape + (4,), dtype=np.float64)
    for i in range(msi.num_layers):
        layer = msi.layers[i]
        acc = np.zeros(us.shape[1:] + (4,), dtype=np.float64)
        for ui, vi, wgt in _bilinear_taps(msi.grid, us[i], vs[i]):
            acc += wgt[..., None] * layer[vi, ui]
        out[i] = acc
    return out


def render_view(msi: Msi, req: ViewRequest) -> tuple[np.ndarray, np.ndarray]:
    """Render the MSI from an arbitrary viewpoint inside the inmost sphere.

    Returns (image, alpha coverage); coverage is 1 - prod(1 - a_i) along
    each ray, useful for masking comparisons against references that have
    content everywhere.
    """
    _check_eye(msi, req)
    dirs = _request_dirs(req)
    us, vs = _sample_layer_coords(msi, req, dirs)
    rgba = _sample_msi(msi, us, vs)
    color, residual = _over_composite(rgba[..., :3], rgba[..., 3])
    dtype = _out_dtype(msi)
    return color.astype(dtype), (1.0 - residual).astype(dtype)


def render_grad_alpha(
    msi: Msi, req: ViewRequest, upstream: np.ndarray
) -> np.ndarray:
    """d(loss)/d(alpha grids) for loss = sum(upstream * rendered color).

    For sampled values along one ray (front to back), with T_i the exclusive
    transmittance and S_i = sum_{k>i} c_k a_k prod_{i<j<k} (1-a_j):

        dc/da_i = T_i * (c_i - S_i)

    which is the standard over-operator derivative computed without the
    1/(1-a_i) division. The per-sample gradients are scattered back through
    the bilinear tap weights onto the (N, H, W) alpha grids.
    """
    _check_eye(msi, req)
    upstream = np.asarray(upstream, dtype=np.float64)
    dirs = _request_dirs(req)
    us, vs = _sample_layer_coords(msi, req, dirs)
    rgba = _sample_msi(msi, us, vs)
    rgb = rgba[..., :3]
    a = rgba[..., 3]
    n = msi.num_layers

    trans = np.cumprod(1.0 - a, axis=0)
    vis = np.concatenate([np.ones_like(a[:1]), trans[:-1]], axis=0)

    # suffix S_i via backward recursion: S_i = c_{i+1} a_{i+1} + (1-a_{i+1}) S_{i+1}
    suffix = np.zeros_like(rgb)
    for i in range(n - 2, -1, -1):
        suffix[i] = rgb[i + 1] * a[i + 1][..., None] + (1.0 - a[i + 1])[..., None] * suffix[i + 1]

    # dL/da_i at the sample = sum_ch upstream_ch * T_i * (c_i - S_i)_ch
    dsample = vis * np.sum(upstream * (rgb - suffix), axis=-1)

    grad = np.zeros(msi.layers.shape[:3], dtype=np.float64)
    for i in range(n):
        for ui, vi, wgt in _bilinear_taps(msi.grid, us[i], vs[i]):
            np.add.at(grad[i], (vi, ui), dsample[i] * wgt)
    return grad


def render_loss_l1(
    msi: Msi,
    poses: list[Pose],
    references: list[np.ndarray],
    masks: list[np.ndarray] | None = None,
    grid: ErpGrid | None = None,
) -> float:
    """Mean absolute rendering error against per-view ERP references.

    Each pose is rendered in its own orientation relative to the MSI center;
    the absolute color difference is averaged over valid pixels and then
    over views.
    """
    if len(poses) != len(references):
        raise ValueError("poses and references must pair up")
    grid = grid or msi.grid
    total = 0.0
    for i, (pose, ref) in enumerate(zip(poses, references)):
        eye = msi.center.rotation.T @ (pose.translation - msi.center.translation)
        rot = msi.center.rotation.T @ pose.rotation
        img, _ = render_view(msi, ViewRequest(eye=eye, rotation=rot, grid=grid))
        err = np.abs(img.astype(np.float64) - np.asarray(ref, dtype=np.float64))
        if masks is not None:
            m = masks[i]
            if not np.any(m):
                raise ValueError(f"view {i} has an empty mask")
            total += float(err[m].mean())
        else:
            total += float(err.mean())
    return total / len(poses)


# ---------------------------------------------------------------------------
# bundle export: manifest.json + one straight-alpha RGBA PNG per layer


def export_msi(msi: Msi, out_dir) -> Path:
    """Write the viewer bundle; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    layer_files = []
    for i in range(msi.num_layers):
        name = f"layer_{i:03d}.png"
        save_png(out / name, msi.layers[i])
        layer_files.append(name)
    manifest = {
        "format_version": BUNDLE_VERSION,
        "width": msi.grid.width,
        "height": msi.grid.height,
        "num_layers": msi.num_layers,
        "radii_m": [float(r) for r in msi.radii.radii],
        "color_space": "srgb",
        "alpha": "straight",
        "layer_files": layer_files,
    }
    path = out / "manifest.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def import_msi(bundle_dir) -> Msi:
    root = Path(bundle_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"bundle manifest not found: {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as f:
        data = json.load(f)

    for key in ("format_version", "width", "height", "num_layers", "radii_m", "layer_files"):
        if key not in data:
            raise ConfigError(f"bundle manifest missing field {key!r}")
    if data["format_version"] != BUNDLE_VERSION:
        raise ConfigError(f"format_version: unsupported bundle version {data['format_version']}")
    radii = np.asarray(data["radii_m"], dtype=np.float64)
    if radii.size != data["num_layers"]:
        raise ConfigError("radii_m: length must equal num_layers")
    if np.any(np.diff(radii) <= 0.0):
        raise ConfigError("radii_m: radii must be strictly increasing")
    if len(data["layer_files"]) != data["num_layers"]:
        raise ConfigError("layer_files: length must equal num_layers")

    layers = []
    for name in data["layer_files"]:
        path = root / name
        if not path.exists():
            raise ConfigError(f"layer_files: missing layer file {name!r}")
        img = load_png(path)
        if img.shape != (data["height"], data["width"], 4):
            raise ConfigError(
                f"layer_files: {name!r} has shape {img.shape[1]}x{img.shape[0]}, "
                f"manifest says {data['width']}x{data['height']}"
            )
        layers.append(img)
    stack = np.stack(layers).astype(np.float32)
    return Msi(
        layers=stack,
        radii=SweepRadii(radii=radii, near=float(radii[0]), far=float(radii[-1])),
        center=Pose.identity(),
    )
