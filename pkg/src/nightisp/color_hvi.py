"""Polar intensity/chroma colour decoupling.

RGB is split into an intensity plane and two chroma planes laid out on a
polarised hue/saturation disc whose radius shrinks with intensity.  The
radius profile is ``collapse(i, k) = sin(pi*i/2)**(1/k)``: dark pixels are
pulled toward the origin, which is what makes the representation
well-behaved for low-light content, and ``k`` trades how aggressively the
dark end is compressed.  The mapping is exactly invertible away from
black (chroma information below the numerical floor is unrecoverable by
construction, and such pixels are re-emitted as neutral grey).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError

# Below this collapsed-intensity radius the chroma planes carry no usable
# signal; the inverse emits grey instead of amplifying noise.
GRAY_EPS = 1e-4

_SIXTH = math.pi / 3.0


@dataclass
class HviImage:
    """Decoupled planes: chroma (h, v) and intensity, all (H, W)."""

    h: np.ndarray
    v: np.ndarray
    intensity: np.ndarray
    k: float

    def __post_init__(self):
        if not (self.h.shape == self.v.shape == self.intensity.shape):
            raise ShapeError(
                f"plane shapes differ: h {self.h.shape}, v {self.v.shape}, "
                f"intensity {self.intensity.shape}"
            )
        if self.h.ndim != 2:
            raise ShapeError(f"planes must be 2-D, got shape {self.h.shape}")
        if self.k <= 0:
            raise ValidationError(f"k must be positive, got {self.k}")
        if self.intensity.min() < 0.0 or self.intensity.max() > 1.0:
            raise ValidationError("intensity plane outside [0, 1]")
        # Chroma radius can never exceed the collapsed-intensity radius.
        limit = collapse(self.intensity, self.k) ** 2 + 1e-9
        if np.any(self.h**2 + self.v**2 > limit):
            raise ValidationError("chroma magnitude exceeds collapse(intensity, k)")

    def planes(self) -> np.ndarray:
        """Stack as a (3, H, W) array ordered (h, v, intensity)."""
        return np.stack([self.h, self.v, self.intensity])


def collapse(intensity, k: float):
    """Intensity-dependent chroma radius: sin(pi*i/2) ** (1/k), k > 0."""
    if k <= 0:
        raise ValidationError(f"k must be positive, got {k}")
    return np.sin(intensity * (math.pi / 2.0)) ** (1.0 / k)


def rgb_to_hvi(rgb: np.ndarray, k: float = 1.0) -> HviImage:
    """Forward transform of a (3, H, W) image with samples in [0, 1].

    Intensity is max(R, G, B); hue/saturation follow the usual hexcone
    construction; the chroma pair is the saturation-scaled unit hue
    vector shrunk by ``collapse(intensity, k)``.  Grey pixels map to
    exactly zero chroma.
    """
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise ShapeError(f"expected a (3, H, W) image, got shape {rgb.shape}")
    if rgb.min() < 0.0 or rgb.max() > 1.0:
        raise ValidationError("rgb samples outside [0, 1]")
    r, g, b = rgb[0], rgb[1], rgb[2]
    mx = np.max(rgb, axis=0)
    delta = mx - np.min(rgb, axis=0)

    safe_mx = np.where(mx > 0, mx, 1.0)
    sat = np.where(mx > 0, delta / safe_mx, 0.0)

    safe_delta = np.where(delta > 0, delta, 1.0)
    hue6 = np.select(
        [delta == 0, mx == r, mx == g],
        [0.0, np.mod((g - b) / safe_delta, 6.0), (b - r) / safe_delta + 2.0],
        default=(r - g) / safe_delta + 4.0,
    )
    theta = hue6 * _SIXTH

    radius = collapse(mx, k) * sat
    return HviImage(h=radius * np.cos(theta), v=radius * np.sin(theta),
                    intensity=mx, k=k)


def hvi_to_rgb(image: HviImage) -> np.ndarray:
    """Inverse transform back to a (3, H, W) image in [0, 1].

    Pixels whose collapse radius falls below ``GRAY_EPS`` are emitted as
    neutral grey (intensity on all three channels); everywhere else the
    saturation is recovered as chroma/collapse (clamped to 1) and the
    hexcone construction is inverted with value = intensity.
    """
    i = image.intensity
    c = collapse(i, image.k)
    gray = c < GRAY_EPS

    chroma = np.hypot(image.h, image.v)
    sat = np.minimum(chroma / np.where(gray, 1.0, c), 1.0)
    hue6 = np.mod(np.arctan2(image.v, image.h), 2.0 * math.pi) / _SIXTH
    sector = np.clip(np.floor(hue6).astype(np.intp), 0, 5)

    full = i * sat
    ramp = full * (1.0 - np.abs(np.mod(hue6, 2.0) - 1.0))
    zero = np.zeros_like(full)
    base = i - full
    r = np.choose(sector, [full, ramp, zero, zero, ramp, full]) + base
    g = np.choose(sector, [ramp, full, full, ramp, zero, zero]) + base
    b = np.choose(sector, [zero, zero, ramp, full, full, ramp]) + base

    rgb = np.stack([np.where(gray, i, r), np.where(gray, i, g), np.where(gray, i, b)])
    return np.clip(rgb, 0.0, 1.0)
