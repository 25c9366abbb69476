"""PNG input/output with atomic writes.

Output is always 8-bit RGB, quantised by round-half-to-even after x255.
Input accepts 8-bit (x/255) and 16-bit (x/65535) RGB files; everything is
exchanged as planar (3, H, W) float arrays in [0, 1].
"""
from __future__ import annotations

import os
import tempfile

import cv2
import numpy as np

from .errors import ShapeError, ValidationError


def write_png(path: str, rgb: np.ndarray) -> None:
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise ShapeError(f"expected (3, H, W) image, got shape {rgb.shape}")
    q = np.rint(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)  # ties to even
    bgr = np.ascontiguousarray(q[::-1].transpose(1, 2, 0))
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                               suffix=".png")
    os.close(fd)
    try:
        if not cv2.imwrite(tmp, bgr):
            raise ValidationError(f"cannot encode PNG to {path}")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_png(path: str) -> np.ndarray:
    img = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ValidationError(f"cannot read image file: {path}")
    if img.ndim != 3 or img.shape[2] < 3:
        raise ValidationError(f"image {path} is not 3-channel RGB")
    img = img[:, :, :3]  # drop alpha if present
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ValidationError(f"image {path} has unsupported dtype {img.dtype}")
    rgb = img[:, :, ::-1].astype(float) / scale
    return np.ascontiguousarray(rgb.transpose(2, 0, 1))
