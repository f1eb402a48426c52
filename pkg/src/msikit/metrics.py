"""PSNR and single-scale SSIM over optionally masked images.

Masked evaluation exists because fisheye validity and MSI coverage leave
regions where the comparison is undefined; both scores are restricted to
the pixels (or window centers) the mask marks as meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.ndimage import correlate

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PSNR_TEXT_CAP = 99.0


@dataclass(frozen=True)
class QualityReport:
    psnr: float
    ssim: float
    pixel_count: int
    coverage: float

    def to_row(self) -> dict:
        row = asdict(self)
        # +inf is not valid JSON; the sentinel is capped for serialization
        row["psnr"] = min(row["psnr"], PSNR_TEXT_CAP)
        return row


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """10 * log10(1 / MSE) over masked pixels, for images in [0, 1].

    Identical images return +inf (callers cap at 99 dB for text output).
    """
    a, b = _check_pair(a, b)
    err = (a - b) ** 2
    if err.ndim == 3:
        err = err.mean(axis=2)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != err.shape:
            raise ValueError(f"mask shape {mask.shape} does not match image {err.shape}")
        if not np.any(mask):
            raise ValueError("mask selects no pixels")
        err = err[mask]
    mse = float(err.mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_kernel() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_single(a: np.ndarray, b: np.ndarray, kern: np.ndarray) -> np.ndarray:
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mu_a = correlate(a, kern, mode="constant")
    mu_b = correlate(b, kern, mode="constant")
    aa = correlate(a * a, kern, mode="constant")
    bb = correlate(b * b, kern, mode="constant")
    ab = correlate(a * b, kern, mode="constant")
    var_a = aa - mu_a**2
    var_b = bb - mu_b**2
    cov = ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
    K2 = 0.03, dynamic range 1.0; channels averaged.

    Scores are averaged over window centers that lie fully inside the
    image; a mask further restricts which centers count.
    """
    a, b = _check_pair(a, b)
    h, w = a.shape[:2]
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side")
    kern = _gaussian_kernel()
    half = SSIM_WINDOW // 2
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    maps = np.stack(
        [_ssim_single(a[..., c], b[..., c], kern) for c in range(a.shape[2])], axis=-1
    )
    valid = maps[half : h - half, half : w - half]
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (h, w):
            raise ValueError(f"mask shape {mask.shape} does not match image ({h}, {w})")
        sel = mask[half : h - half, half : w - half]
        if not np.any(sel):
            raise ValueError("mask selects no interior window centers")
        return float(valid[sel].mean())
    return float(valid.mean())


def evaluate_pair(
    a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None
) -> QualityReport:
    total = a.shape[0] * a.shape[1]
    count = int(np.count_nonzero(mask)) if mask is not None else total
    return QualityReport(
        psnr=psnr(a, b, mask),
        ssim=ssim(a, b, mask),
        pixel_count=count,
        coverage=count / total,
    )
