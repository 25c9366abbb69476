"""Image fidelity metrics: PSNR, SSIM, and CIEDE2000 colour difference.

All functions take planar (C, H, W) images with unit-interval samples
(except :func:`ciede2000`, which works on CIELAB triples) and are pure.
Reductions use numpy's pairwise summation, so results are reproducible
across runs for fixed shapes.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ShapeError, ValidationError

# SSIM stabilisers for unit data range, and the standard 11-tap window.
_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2
_SSIM_WIN = 11
_SSIM_SIGMA = 1.5

# sRGB D65 linear-RGB -> XYZ and the D65 reference white.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65 = np.array([0.95047, 1.0, 1.08883])


def _as_planar(img: np.ndarray, name: str) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3:
        raise ShapeError(f"{name} must be (C, H, W) or (H, W), got shape {img.shape}")
    return img


def _check_pair(pred, gt):
    pred = _as_planar(pred, "pred")
    gt = _as_planar(gt, "gt")
    if pred.shape != gt.shape:
        raise ShapeError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    return pred, gt


def psnr(pred: np.ndarray, gt: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB against peak 1.0; +inf when equal."""
    pred, gt = _check_pair(pred, gt)
    mse = float(np.mean((pred - gt) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gauss_window() -> np.ndarray:
    half = (_SSIM_WIN - 1) / 2.0
    t = np.arange(_SSIM_WIN) - half
    w = np.exp(-(t * t) / (2.0 * _SSIM_SIGMA**2))
    return w / w.sum()


_WINDOW = _gauss_window()


def _local_mean(x: np.ndarray) -> np.ndarray:
    # Separable Gaussian; borders are cropped afterwards so the pad mode
    # never reaches the reported statistic.
    y = correlate1d(x, _WINDOW, axis=0, mode="constant")
    return correlate1d(y, _WINDOW, axis=1, mode="constant")


def ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean structural similarity over the valid (un-padded) region.

    Gaussian-weighted local statistics (11x11, sigma 1.5), population
    covariance, channel results averaged.  Inputs must be at least 11
    pixels on each side.
    """
    pred, gt = _check_pair(pred, gt)
    _, h, w = pred.shape
    if min(h, w) < _SSIM_WIN:
        raise ShapeError(f"ssim needs images >= {_SSIM_WIN}px per side, got {h}x{w}")
    pad = (_SSIM_WIN - 1) // 2
    vals = []
    for x, y in zip(pred, gt):
        mx = _local_mean(x)
        my = _local_mean(y)
        sxx = _local_mean(x * x) - mx * mx
        syy = _local_mean(y * y) - my * my
        sxy = _local_mean(x * y) - mx * my
        num = (2.0 * mx * my + _SSIM_C1) * (2.0 * sxy + _SSIM_C2)
        den = (mx * mx + my * my + _SSIM_C1) * (sxx + syy + _SSIM_C2)
        smap = num / den
        vals.append(float(np.mean(smap[pad:-pad, pad:-pad])))
    return float(np.mean(vals))


def srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB (gamma-encoded, [0,1]) to CIELAB under D65.

    Accepts (3,) triples or (3, H, W) images; the channel axis stays
    leading in the result (L, a, b).
    """
    rgb = np.asarray(rgb, dtype=float)
    if rgb.ndim < 1 or rgb.shape[0] != 3:
        raise ShapeError(f"expected leading channel axis of 3, got shape {rgb.shape}")
    if rgb.min() < 0.0 or rgb.max() > 1.0:
        raise ValidationError("srgb samples outside [0, 1]")
    lin = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = np.tensordot(_RGB_TO_XYZ, lin, axes=(1, 0))
    t = xyz / _D65.reshape((3,) + (1,) * (xyz.ndim - 1))
    d = 6.0 / 29.0
    f = np.where(t > d**3, np.cbrt(t), t / (3.0 * d * d) + 4.0 / 29.0)
    fx, fy, fz = f[0], f[1], f[2]
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)])


def ciede2000(lab1: np.ndarray, lab2: np.ndarray):
    """CIEDE2000 colour difference (kL = kC = kH = 1), vectorised.

    Inputs are CIELAB values with a leading axis of 3; the result drops
    that axis.  Matches the published conformance dataset to 1e-4.
    """
    lab1 = np.asarray(lab1, dtype=float)
    lab2 = np.asarray(lab2, dtype=float)
    if lab1.shape != lab2.shape or lab1.shape[0] != 3:
        raise ShapeError(
            f"expected matching (3, ...) Lab arrays, got {lab1.shape} and {lab2.shape}"
        )
    L1, a1, b1 = lab1[0], lab1[1], lab1[2]
    L2, a2, b2 = lab2[0], lab2[1], lab2[2]

    c1 = np.hypot(a1, b1)
    c2 = np.hypot(a2, b2)
    cbar = (c1 + c2) / 2.0
    g = 0.5 * (1.0 - np.sqrt(cbar**7 / (cbar**7 + 25.0**7)))
    a1p = (1.0 + g) * a1
    a2p = (1.0 + g) * a2
    c1p = np.hypot(a1p, b1)
    c2p = np.hypot(a2p, b2)
    h1p = np.mod(np.degrees(np.arctan2(b1, a1p)), 360.0)
    h2p = np.mod(np.degrees(np.arctan2(b2, a2p)), 360.0)

    achromatic = c1p * c2p == 0.0

    dlp = L2 - L1
    dcp = c2p - c1p
    dh = h2p - h1p
    dh = np.where(dh > 180.0, dh - 360.0, dh)
    dh = np.where(dh < -180.0, dh + 360.0, dh)
    dh = np.where(achromatic, 0.0, dh)
    dhp = 2.0 * np.sqrt(c1p * c2p) * np.sin(np.radians(dh) / 2.0)

    lbar = (L1 + L2) / 2.0
    cbp = (c1p + c2p) / 2.0
    hsum = h1p + h2p
    hbar = np.where(
        np.abs(h1p - h2p) <= 180.0,
        hsum / 2.0,
        np.where(hsum < 360.0, (hsum + 360.0) / 2.0, (hsum - 360.0) / 2.0),
    )
    hbar = np.where(achromatic, hsum, hbar)

    t = (
        1.0
        - 0.17 * np.cos(np.radians(hbar - 30.0))
        + 0.24 * np.cos(np.radians(2.0 * hbar))
        + 0.32 * np.cos(np.radians(3.0 * hbar + 6.0))
        - 0.20 * np.cos(np.radians(4.0 * hbar - 63.0))
    )
    dtheta = 30.0 * np.exp(-(((hbar - 275.0) / 25.0) ** 2))
    rc = 2.0 * np.sqrt(cbp**7 / (cbp**7 + 25.0**7))
    sl = 1.0 + 0.015 * (lbar - 50.0) ** 2 / np.sqrt(20.0 + (lbar - 50.0) ** 2)
    sc = 1.0 + 0.045 * cbp
    sh = 1.0 + 0.015 * cbp * t
    rt = -np.sin(np.radians(2.0 * dtheta)) * rc

    de = np.sqrt(
        (dlp / sl) ** 2
        + (dcp / sc) ** 2
        + (dhp / sh) ** 2
        + rt * (dcp / sc) * (dhp / sh)
    )
    return float(de) if de.ndim == 0 else de


def delta_e_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean per-pixel CIEDE2000 between two sRGB images."""
    pred, gt = _check_pair(pred, gt)
    if pred.shape[0] != 3:
        raise ShapeError(f"delta_e_loss expects RGB images, got {pred.shape[0]} channels")
    return float(np.mean(ciede2000(srgb_to_lab(pred), srgb_to_lab(gt))))
