"""Image containers, interpolation, and PNG serialization.

Color payloads travel as float32 arrays in [0, 1] internally and as 8-bit
PNG at file boundaries. Depth maps are written as 16-bit single-channel
PNG holding scaled inverse depth (0 encodes infinite depth); the scale
lives in the dataset manifest so readers can undo it.
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def bilinear_sample(img: np.ndarray, u, v, wrap_u: bool = False) -> np.ndarray:
    """Sample img (H, W[, C]) at continuous coordinates (pixel i at u = i).

    Coordinates are clamped to the image; with wrap_u the horizontal axis
    is treated as periodic (ERP longitude).
    """
    h, w = img.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    v = np.clip(v, 0.0, h - 1)

    if wrap_u:
        u = np.mod(u, w)
        u0 = np.floor(u).astype(np.intp)
        fu = u - u0
        u1 = np.mod(u0 + 1, w)
        u0 = np.mod(u0, w)
    else:
        u = np.clip(u, 0.0, w - 1)
        u0 = np.floor(u).astype(np.intp)
        fu = u - u0
        u1 = np.minimum(u0 + 1, w - 1)

    v0 = np.floor(v).astype(np.intp)
    fv = v - v0
    v1 = np.minimum(v0 + 1, h - 1)

    if img.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]
    a = img[v0, u0] * (1.0 - fu) + img[v0, u1] * fu
    b = img[v1, u0] * (1.0 - fu) + img[v1, u1] * fu
    return a * (1.0 - fv) + b * fv


def masked_bilinear_sample(
    img: np.ndarray, mask: np.ndarray, u, v
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear sampling that ignores masked-out source pixels.

    Tap weights of invalid pixels are zeroed and the rest renormalized, so
    values never bleed across a validity boundary (e.g. the black region
    outside a fisheye image circle). Returns (values, ok); ok is False where
    no valid tap supports the sample.
    """
    h, w = img.shape[:2]
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, w - 1)
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, h - 1)
    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    fu = u - u0
    fv = v - v0
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)

    acc = np.zeros(u.shape + (img.shape[2],) if img.ndim == 3 else u.shape)
    wsum = np.zeros(u.shape)
    taps = (
        (u0, v0, (1.0 - fu) * (1.0 - fv)),
        (u1, v0, fu * (1.0 - fv)),
        (u0, v1, (1.0 - fu) * fv),
        (u1, v1, fu * fv),
    )
    for ui, vi, wgt in taps:
        wgt = wgt * mask[vi, ui]
        wsum += wgt
        acc += wgt[..., None] * img[vi, ui] if img.ndim == 3 else wgt * img[vi, ui]
    ok = wsum > 1e-9
    safe = np.where(ok, wsum, 1.0)
    acc = acc / (safe[..., None] if img.ndim == 3 else safe)
    return acc, ok


def nearest_sample(img: np.ndarray, u, v) -> np.ndarray:
    h, w = img.shape[:2]
    ui = np.clip(np.rint(np.asarray(u)), 0, w - 1).astype(np.intp)
    vi = np.clip(np.rint(np.asarray(v)), 0, h - 1).astype(np.intp)
    return img[vi, ui]


def quantize_u8(img: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path, img: np.ndarray) -> None:
    """Write a float [0,1] RGB or RGBA image as 8-bit PNG."""
    data = quantize_u8(img)
    mode = {3: "RGB", 4: "RGBA"}[data.shape[2]]
    Image.fromarray(data, mode=mode).save(path, format="PNG")


def load_png(path) -> np.ndarray:
    """Read an 8-bit PNG into float32 [0,1], keeping RGB or RGBA channels."""
    with Image.open(path) as im:
        mode = "RGBA" if im.mode in ("RGBA", "LA", "PA") else "RGB"
        arr = np.asarray(im.convert(mode), dtype=np.float32)
    return arr / 255.0


def save_depth_png(path, depth: np.ndarray, inv_depth_scale: float) -> None:
    """Write depth (meters, +inf for miss) as 16-bit scaled inverse depth.

    Stored value = round(clip(1/depth / inv_depth_scale, 0, 1) * 65535);
    infinite depth maps to 0 exactly.
    """
    inv = np.where(np.isfinite(depth), 1.0 / np.maximum(depth, 1e-12), 0.0)
    q = np.rint(np.clip(inv / inv_depth_scale, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(q).save(path, format="PNG")


def load_depth_png(path, inv_depth_scale: float) -> np.ndarray:
    """Inverse of save_depth_png; stored 0 decodes back to +inf."""
    with Image.open(path) as im:
        q = np.asarray(im, dtype=np.float64)
    inv = q / 65535.0 * inv_depth_scale
    with np.errstate(divide="ignore"):
        return np.where(q > 0, 1.0 / inv, np.inf)
