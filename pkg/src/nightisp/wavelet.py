"""Single-level orthonormal 2-D Haar transform and the 1x1-conv blocks
built on top of it.

The butterfly uses the /2 normalisation, so analysis and synthesis are
both orthonormal: energy is preserved exactly and the inverse is the
transpose.  Odd spatial sizes are rejected rather than padded; every
caller in this pipeline guarantees even dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass
class SubbandSet:
    """The four half-resolution sub-bands of one plane."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray


def dwt2_haar(plane: np.ndarray) -> SubbandSet:
    """Forward Haar step on an (H, W) plane, H and W even.

    Each disjoint 2x2 block (a b / c d) maps to
        ll = (a+b+c+d)/2   lh = (a+b-c-d)/2
        hl = (a-b+c-d)/2   hh = (a-b-c+d)/2
    giving four (H/2, W/2) sub-bands.
    """
    if plane.ndim != 2:
        raise ShapeError(f"dwt2_haar expects a 2-D plane, got shape {plane.shape}")
    h, w = plane.shape
    if h % 2 or w % 2:
        raise ShapeError(f"dwt2_haar needs even dimensions, got {h}x{w}")
    a = plane[0::2, 0::2]
    b = plane[0::2, 1::2]
    c = plane[1::2, 0::2]
    d = plane[1::2, 1::2]
    return SubbandSet(
        ll=(a + b + c + d) / 2.0,
        lh=(a + b - c - d) / 2.0,
        hl=(a - b + c - d) / 2.0,
        hh=(a - b - c + d) / 2.0,
    )


def idwt2_haar(bands: SubbandSet) -> np.ndarray:
    """Exact inverse of :func:`dwt2_haar`."""
    ll, lh, hl, hh = bands.ll, bands.lh, bands.hl, bands.hh
    for name, band in (("lh", lh), ("hl", hl), ("hh", hh)):
        if band.shape != ll.shape:
            raise ShapeError(
                f"sub-band {name} shape {band.shape} != ll shape {ll.shape}"
            )
    if ll.ndim != 2:
        raise ShapeError(f"idwt2_haar expects 2-D sub-bands, got shape {ll.shape}")
    h, w = ll.shape
    out = np.empty((2 * h, 2 * w), dtype=(ll + lh).dtype)
    out[0::2, 0::2] = (ll + lh + hl + hh) / 2.0
    out[0::2, 1::2] = (ll + lh - hl - hh) / 2.0
    out[1::2, 0::2] = (ll - lh + hl - hh) / 2.0
    out[1::2, 1::2] = (ll - lh - hl + hh) / 2.0
    return out


def _stack_subbands(features: np.ndarray) -> np.ndarray:
    # (C, H, W) -> (4C, H/2, W/2), grouped by band: all LL, all LH, all HL, all HH.
    bands = [dwt2_haar(chan) for chan in features]
    return np.concatenate(
        [
            np.stack([s.ll for s in bands]),
            np.stack([s.lh for s in bands]),
            np.stack([s.hl for s in bands]),
            np.stack([s.hh for s in bands]),
        ]
    )


def wavelet_down_block(
    features: np.ndarray, weights: np.ndarray, bias: np.ndarray
) -> np.ndarray:
    """Haar analysis followed by a 1x1 linear mix.

    features: (C, H, W), H and W even.
    weights:  (C_out, 4*C); bias: (C_out,).
    Returns (C_out, H/2, W/2).  All four sub-bands of every channel feed
    the mix, so the block can learn any band combination (and in
    particular can be made exactly invertible by :func:`wavelet_up_block`
    when C_out >= 4*C).
    """
    if features.ndim != 3:
        raise ShapeError(f"expected (C, H, W) features, got shape {features.shape}")
    c = features.shape[0]
    if weights.ndim != 2 or weights.shape[1] != 4 * c:
        raise ShapeError(
            f"down-block weights must be (C_out, {4 * c}), got {weights.shape}"
        )
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"down-block bias must be ({weights.shape[0]},), got {bias.shape}")
    stacked = _stack_subbands(features)
    out = np.tensordot(weights, stacked, axes=(1, 0))
    return out + bias[:, None, None]


def wavelet_up_block(
    features: np.ndarray, weights: np.ndarray, bias: np.ndarray
) -> np.ndarray:
    """1x1 channel adjustment followed by Haar synthesis.

    features: (C, H, W).
    weights:  (4*C_up, C); bias: (4*C_up,).
    The adjusted channels are split into four equal groups (LL, LH, HL,
    HH) and each quadruple is inverse-transformed, giving
    (C_up, 2H, 2W).
    """
    if features.ndim != 3:
        raise ShapeError(f"expected (C, H, W) features, got shape {features.shape}")
    c = features.shape[0]
    if weights.ndim != 2 or weights.shape[1] != c:
        raise ShapeError(f"up-block weights must be (4*C_up, {c}), got {weights.shape}")
    if weights.shape[0] % 4:
        raise ShapeError(
            f"up-block output channels must be a multiple of 4, got {weights.shape[0]}"
        )
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"up-block bias must be ({weights.shape[0]},), got {bias.shape}")
    adjusted = np.tensordot(weights, features, axes=(1, 0)) + bias[:, None, None]
    c_up = weights.shape[0] // 4
    ll, lh, hl, hh = (adjusted[i * c_up : (i + 1) * c_up] for i in range(4))
    return np.stack(
        [idwt2_haar(SubbandSet(ll[i], lh[i], hl[i], hh[i])) for i in range(c_up)]
    )
