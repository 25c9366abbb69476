"""Bayer-domain frontend: normalisation, packing, and geometric alignment.

A capture arrives as a 16-bit mosaic plus a JSON sidecar describing the
colour-filter pattern, per-site black levels, white level, and an optional
alignment homography / crop window.  The frontend turns that into a
4-plane, half-resolution, unit-interval image ready for the network:

    mosaic -> black_white_correct -> pack_rggb -> warp_and_crop

The homography and crop act on the packed (half-resolution) grid, after
packing, so all four planes stay mutually registered.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError
from .parallel import plane_map

PATTERNS = ("RGGB", "BGGR", "GRBG", "GBRG")

# Per pattern: row-major 2x2 site offsets of (R, G1, G2, B).  G1 is the
# green sharing a row with red, G2 the green sharing a row with blue, so
# plane order is the same physical layout whatever the mosaic phase.
_SITE_MAP = {
    "RGGB": ((0, 0), (0, 1), (1, 0), (1, 1)),
    "BGGR": ((1, 1), (1, 0), (0, 1), (0, 0)),
    "GRBG": ((0, 1), (0, 0), (1, 1), (1, 0)),
    "GBRG": ((1, 0), (1, 1), (0, 0), (0, 1)),
}

IDENTITY_H = np.eye(3)


@dataclass
class BayerFrame:
    """One raw capture: mosaic plus the sidecar metadata needed to use it.

    black_levels follow the pattern's row-major site order (site (0,0),
    (0,1), (1,0), (1,1)); crop is (x0, y0, w, h) in packed-pixel units.
    """

    data: np.ndarray
    black_levels: tuple
    white_level: float
    pattern: str
    homography: np.ndarray = field(default_factory=lambda: IDENTITY_H.copy())
    crop: tuple | None = None  # None = full packed frame
    source_id: str = ""

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ShapeError(f"mosaic must be 2-D, got shape {self.data.shape}")
        hb, wb = self.data.shape
        if hb % 2 or wb % 2:
            raise ValidationError(f"mosaic dimensions must be even, got {hb}x{wb}")
        if self.pattern not in PATTERNS:
            raise ValidationError(f"unknown pattern {self.pattern!r}, expected one of {PATTERNS}")
        if len(self.black_levels) != 4:
            raise ValidationError(f"black_levels needs 4 entries, got {len(self.black_levels)}")
        if self.white_level <= max(self.black_levels):
            raise ValidationError(
                f"white_level {self.white_level} must exceed every black level "
                f"{tuple(self.black_levels)}"
            )
        if min(self.black_levels) < 0:
            raise ValidationError(f"black_levels must be >= 0, got {tuple(self.black_levels)}")
        self.homography = np.asarray(self.homography, dtype=float)
        if self.homography.shape != (3, 3):
            raise ValidationError(f"homography must be 3x3, got shape {self.homography.shape}")
        if abs(np.linalg.det(self.homography)) <= 1e-12:
            raise ValidationError("homography is singular")
        if self.crop is not None:
            x0, y0, w, h = self.crop
            if w < 1 or h < 1 or x0 < 0 or y0 < 0 or x0 + w > wb // 2 or y0 + h > hb // 2:
                raise ValidationError(
                    f"crop {self.crop} outside packed frame {wb // 2}x{hb // 2}"
                )


@dataclass
class PackedRaw:
    """Half-resolution 4-plane image, planes ordered (R, G1, G2, B), [0, 1]."""

    planes: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        if self.planes.ndim != 3 or self.planes.shape[0] != 4:
            raise ShapeError(f"planes must be (4, H, W), got shape {self.planes.shape}")


def black_white_correct(frame: BayerFrame) -> np.ndarray:
    """Normalise the mosaic to [0, 1] with per-site black subtraction.

    Each site s becomes clamp((s - b) / (white_level - b), 0, 1) where b is
    that site's black level.
    """
    hb, wb = frame.data.shape
    black = np.empty((hb, wb), dtype=float)
    levels = [float(v) for v in frame.black_levels]
    black[0::2, 0::2] = levels[0]
    black[0::2, 1::2] = levels[1]
    black[1::2, 0::2] = levels[2]
    black[1::2, 1::2] = levels[3]
    out = (frame.data.astype(float) - black) / (float(frame.white_level) - black)
    return np.clip(out, 0.0, 1.0)


def pack_rggb(mosaic: np.ndarray, pattern: str) -> PackedRaw:
    """Pack a corrected mosaic into (R, G1, G2, B) half-resolution planes."""
    if pattern not in _SITE_MAP:
        raise ValidationError(f"unknown pattern {pattern!r}, expected one of {PATTERNS}")
    if mosaic.ndim != 2:
        raise ShapeError(f"mosaic must be 2-D, got shape {mosaic.shape}")
    if mosaic.shape[0] % 2 or mosaic.shape[1] % 2:
        raise ShapeError(f"mosaic dimensions must be even, got {mosaic.shape}")
    planes = np.stack(
        [mosaic[dy::2, dx::2] for dy, dx in _SITE_MAP[pattern]]
    )
    return PackedRaw(planes=planes)


def unpack_rggb(packed: PackedRaw, pattern: str) -> np.ndarray:
    """Re-interleave packed planes into a full-resolution mosaic (exact
    inverse of :func:`pack_rggb`)."""
    if pattern not in _SITE_MAP:
        raise ValidationError(f"unknown pattern {pattern!r}, expected one of {PATTERNS}")
    _, h, w = packed.planes.shape
    mosaic = np.empty((2 * h, 2 * w), dtype=packed.planes.dtype)
    for plane, (dy, dx) in zip(packed.planes, _SITE_MAP[pattern]):
        mosaic[dy::2, dx::2] = plane
    return mosaic


def _warp_plane(plane: np.ndarray, inv_h: np.ndarray, crop) -> np.ndarray:
    x0, y0, w, h = crop
    src_h, src_w = plane.shape
    xs = x0 + np.arange(w, dtype=float)
    ys = y0 + np.arange(h, dtype=float)
    gx, gy = np.meshgrid(xs, ys)
    dst = np.stack([gx.ravel(), gy.ravel(), np.ones(w * h)])
    src = inv_h @ dst
    z = src[2]
    bad = np.abs(z) < 1e-12
    z = np.where(bad, 1.0, z)
    sx = np.where(bad, -1e9, src[0] / z)
    sy = np.where(bad, -1e9, src[1] / z)

    fx = np.floor(sx)
    fy = np.floor(sy)
    wx = sx - fx
    wy = sy - fy
    ix = fx.astype(np.intp)
    iy = fy.astype(np.intp)

    out = np.zeros(w * h, dtype=float)
    for dy, dx, wt in (
        (0, 0, (1 - wx) * (1 - wy)),
        (0, 1, wx * (1 - wy)),
        (1, 0, (1 - wx) * wy),
        (1, 1, wx * wy),
    ):
        cx = ix + dx
        cy = iy + dy
        inside = (cx >= 0) & (cx < src_w) & (cy >= 0) & (cy < src_h)
        # out-of-source samples contribute zero
        out[inside] += wt[inside] * plane[cy[inside], cx[inside]]
    return out.reshape(h, w)


def warp_and_crop(packed: PackedRaw, homography: np.ndarray, crop=None) -> PackedRaw:
    """Align the packed planes by a homography, then crop.

    The homography maps source coordinates to destination coordinates in
    (x, y) = (column, row) convention on the packed grid; resampling is
    inverse-mapped bilinear with zero for samples falling outside the
    source.  crop = (x0, y0, w, h) selects the output window in the warped
    frame (default: full frame).  Composition holds: warping by H1 then H2
    equals warping once by H2 @ H1 up to interpolation error.
    """
    homography = np.asarray(homography, dtype=float)
    if homography.shape != (3, 3):
        raise ValidationError(f"homography must be 3x3, got shape {homography.shape}")
    det = np.linalg.det(homography)
    if abs(det) <= 1e-12:
        raise ValidationError("homography is singular")
    _, src_h, src_w = packed.planes.shape
    if crop is None:
        crop = (0, 0, src_w, src_h)
    x0, y0, w, h = (int(v) for v in crop)
    if w < 1 or h < 1 or x0 < 0 or y0 < 0 or x0 + w > src_w or y0 + h > src_h:
        raise ValidationError(f"crop {crop} outside warped frame {src_w}x{src_h}")
    inv_h = np.linalg.inv(homography)
    planes = plane_map(lambda p: _warp_plane(p, inv_h, (x0, y0, w, h)), packed.planes)
    return PackedRaw(planes=np.stack(planes), source_id=packed.source_id)


def frontend_process(frame: BayerFrame) -> PackedRaw:
    """Full frontend: normalise, pack, align, crop."""
    packed = pack_rggb(black_white_correct(frame), frame.pattern)
    packed.source_id = frame.source_id
    return warp_and_crop(packed, frame.homography, frame.crop)


_REQUIRED_KEYS = ("width", "height", "pattern", "black_levels", "white_level")


def load_sidecar(meta_path: str) -> dict:
    """Parse and validate a metadata sidecar; returns the raw dict."""
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read sidecar {meta_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"sidecar {meta_path} is not valid JSON: {exc}") from exc
    if not isinstance(meta, dict):
        raise ValidationError(f"sidecar {meta_path} must be a JSON object")
    for key in _REQUIRED_KEYS:
        if key not in meta:
            raise ValidationError(f"sidecar {meta_path} missing required key: {key}")
    for key in ("width", "height"):
        if not isinstance(meta[key], int) or meta[key] <= 0 or meta[key] % 2:
            raise ValidationError(f"sidecar key {key} must be a positive even integer")
    if meta["pattern"] not in PATTERNS:
        raise ValidationError(f"sidecar key pattern must be one of {PATTERNS}")
    bl = meta["black_levels"]
    if not isinstance(bl, list) or len(bl) != 4:
        raise ValidationError("sidecar key black_levels must be a list of 4 numbers")
    if not isinstance(meta["white_level"], (int, float)):
        raise ValidationError("sidecar key white_level must be a number")
    if "homography" in meta:
        hm = meta["homography"]
        if not isinstance(hm, list) or len(hm) != 9:
            raise ValidationError("sidecar key homography must be a list of 9 numbers")
    if "crop" in meta:
        cr = meta["crop"]
        if not isinstance(cr, list) or len(cr) != 4:
            raise ValidationError("sidecar key crop must be [x0, y0, w, h]")
    return meta


def load_bayer(raw_path: str, meta_path: str | None = None) -> BayerFrame:
    """Load a raw capture: little-endian uint16 binary + JSON sidecar.

    The sidecar defaults to ``<raw_path>.json``.  Missing ``homography`` /
    ``crop`` keys fall back to identity / full frame.
    """
    if meta_path is None:
        meta_path = raw_path + ".json"
    meta = load_sidecar(meta_path)
    width, height = meta["width"], meta["height"]
    try:
        size = os.path.getsize(raw_path)
    except OSError as exc:
        raise ValidationError(f"cannot read raw file {raw_path}: {exc}") from exc
    if size != width * height * 2:
        raise ValidationError(
            f"raw file {raw_path} holds {size} bytes, sidecar width*height "
            f"implies {width * height * 2}"
        )
    data = np.fromfile(raw_path, dtype="<u2").reshape(height, width)
    homography = (
        np.asarray(meta["homography"], dtype=float).reshape(3, 3)
        if "homography" in meta
        else IDENTITY_H.copy()
    )
    crop = tuple(int(v) for v in meta["crop"]) if "crop" in meta else None
    return BayerFrame(
        data=data,
        black_levels=tuple(float(v) for v in meta["black_levels"]),
        white_level=float(meta["white_level"]),
        pattern=meta["pattern"],
        homography=homography,
        crop=crop,
        source_id=os.path.basename(raw_path),
    )
