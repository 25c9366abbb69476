"""Training-style supervision terms and their batch composition.

The total objective is

    l_total = l_p + lambda_delta_e * l_delta_e + lambda_fdm * l_fdm

where l_p is a per-sample alpha-weighted sum of six fidelity terms (L1,
1-SSIM, Sobel-edge L1, each in the RGB and decoupled-colour domains),
l_delta_e is mean CIEDE2000, and l_fdm matches feature order statistics.
Everything here is forward-only (no gradients) and deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .color_hvi import HviImage
from .errors import ShapeError, ValidationError
from .metrics import _check_pair, delta_e_loss, ssim

DEFAULT_LAMBDA_DELTA_E = 0.1
DEFAULT_LAMBDA_FDM = 0.01

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T

_MU_EPS = 1e-6  # clamp for mean intensities; an all-black prediction must
# not blow the ratio up to infinity.


@dataclass
class LossWeights:
    lambda_delta_e: float = DEFAULT_LAMBDA_DELTA_E
    lambda_fdm: float = DEFAULT_LAMBDA_FDM

    def __post_init__(self):
        for name in ("lambda_delta_e", "lambda_fdm"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class SampleStats:
    """Mean intensities and the resulting balance weight for one sample."""

    mu_pred: float
    mu_gt: float
    alpha: float


@dataclass
class SampleTerms:
    """The six fidelity terms plus alpha for one sample of a batch."""

    l1_rgb: float
    ssim_rgb: float
    edge_rgb: float
    l1_hvi: float
    ssim_hvi: float
    edge_hvi: float
    alpha: float


@dataclass
class LossReport:
    per_sample: list
    l_p: float
    l_delta_e: float
    l_fdm: float
    l_total: float
    weights: LossWeights

    def to_dict(self) -> dict:
        return {
            "per_sample": [vars(t).copy() for t in self.per_sample],
            "l_p": self.l_p,
            "l_delta_e": self.l_delta_e,
            "l_fdm": self.l_fdm,
            "l_total": self.l_total,
            "lambda_delta_e": self.weights.lambda_delta_e,
            "lambda_fdm": self.weights.lambda_fdm,
        }


@dataclass
class FdmExtractorConfig:
    """Default feature extractor: 32x32 bilinear thumbnail, flattened and
    passed through a fixed-seed Gaussian random projection.  A stored
    projection matrix (.npy) may be supplied instead to slot in externally
    produced features later."""

    seed: int = 0
    dim: int = 256
    matrix_path: str | None = None
    grid: int = 32

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"extractor dim must be >= 1, got {self.dim}")
        if self.grid < 1:
            raise ValidationError(f"extractor grid must be >= 1, got {self.grid}")


def _gradient_magnitude(img: np.ndarray) -> np.ndarray:
    out = np.empty_like(img)
    for i, chan in enumerate(img):
        gx = ndimage.correlate(chan, _SOBEL_X, mode="nearest")
        gy = ndimage.correlate(chan, _SOBEL_Y, mode="nearest")
        out[i] = np.hypot(gx, gy)
    return out


def edge_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """L1 gap between Sobel gradient magnitudes, replicate borders."""
    pred, gt = _check_pair(pred, gt)
    return float(np.mean(np.abs(_gradient_magnitude(pred) - _gradient_magnitude(gt))))


def alpha_coefficient(pred: np.ndarray, gt: np.ndarray) -> float:
    """Brightness-balance weight: the larger of the two mean ratios."""
    return sample_stats(pred, gt).alpha


def sample_stats(pred: np.ndarray, gt: np.ndarray) -> SampleStats:
    pred, gt = _check_pair(pred, gt)
    mu_pred = max(float(np.mean(pred)), _MU_EPS)
    mu_gt = max(float(np.mean(gt)), _MU_EPS)
    return SampleStats(mu_pred=mu_pred, mu_gt=mu_gt,
                       alpha=max(mu_gt / mu_pred, mu_pred / mu_gt))


def _hvi_planes(hvi) -> np.ndarray:
    if isinstance(hvi, HviImage):
        return hvi.planes()
    arr = np.asarray(hvi, dtype=float)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ShapeError(f"expected HviImage or (3, H, W) planes, got shape {arr.shape}")
    return arr


def _hvi_unit_range(planes: np.ndarray) -> np.ndarray:
    # Chroma planes live in [-1, 1]; SSIM's stabilisers assume unit range,
    # so shift them (intensity already is unit range).
    return np.stack([(planes[0] + 1.0) / 2.0, (planes[1] + 1.0) / 2.0, planes[2]])


def fidelity_terms(pred_rgb, gt_rgb, pred_hvi, gt_hvi) -> SampleTerms:
    """The six per-sample fidelity terms (and alpha) of one batch entry."""
    pred_rgb, gt_rgb = _check_pair(pred_rgb, gt_rgb)
    ph = _hvi_planes(pred_hvi)
    gh = _hvi_planes(gt_hvi)
    stats = sample_stats(pred_rgb, gt_rgb)
    return SampleTerms(
        l1_rgb=float(np.mean(np.abs(pred_rgb - gt_rgb))),
        ssim_rgb=ssim(pred_rgb, gt_rgb),
        edge_rgb=edge_loss(pred_rgb, gt_rgb),
        l1_hvi=float(np.mean(np.abs(ph - gh))),
        ssim_hvi=ssim(_hvi_unit_range(ph), _hvi_unit_range(gh)),
        edge_hvi=edge_loss(ph, gh),
        alpha=stats.alpha,
    )


def _compose_lp(terms: list) -> float:
    weighted = [
        t.alpha
        * (
            t.l1_rgb
            + (1.0 - t.ssim_rgb)
            + t.edge_rgb
            + t.l1_hvi
            + (1.0 - t.ssim_hvi)
            + t.edge_hvi
        )
        for t in terms
    ]
    return math.fsum(weighted) / len(weighted)


def reconstruction_loss(batch) -> tuple:
    """alpha-weighted mean of the six fidelity terms over a batch.

    batch: sequence of (pred_rgb, gt_rgb, pred_hvi, gt_hvi).
    Returns (l_p, [SampleStats per sample]).
    """
    batch = list(batch)
    if not batch:
        raise ValidationError("reconstruction_loss: empty batch")
    stats = [sample_stats(p, g) for p, g, _, _ in batch]
    terms = [fidelity_terms(*sample) for sample in batch]
    return _compose_lp(terms), stats


_PROJECTION_CACHE: dict = {}


def _projection_matrix(config: FdmExtractorConfig, n_in: int) -> np.ndarray:
    if config.matrix_path is not None:
        mat = np.load(config.matrix_path)
        if mat.shape != (config.dim, n_in):
            raise ShapeError(
                f"projection matrix {config.matrix_path} has shape {mat.shape}, "
                f"expected {(config.dim, n_in)}"
            )
        return mat
    key = (config.seed, config.dim, n_in)
    if key not in _PROJECTION_CACHE:
        rng = np.random.default_rng(config.seed)
        _PROJECTION_CACHE[key] = rng.standard_normal((config.dim, n_in)) / math.sqrt(n_in)
    return _PROJECTION_CACHE[key]


def _resize_bilinear(chan: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = chan.shape
    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[:, None]
    fx = sx - x0
    top = chan[y0][:, x0] * (1.0 - fx) + chan[y0][:, x1] * fx
    bot = chan[y1][:, x0] * (1.0 - fx) + chan[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


def extract_features(image: np.ndarray, config: FdmExtractorConfig) -> np.ndarray:
    """Project an image to a fixed-length feature vector (linear, seeded)."""
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        image = image[None]
    if image.ndim != 3:
        raise ShapeError(f"expected (C, H, W) image, got shape {image.shape}")
    thumbs = [_resize_bilinear(chan, config.grid, config.grid) for chan in image]
    flat = np.concatenate([t.ravel() for t in thumbs])
    return _projection_matrix(config, flat.size) @ flat


def fdm_loss(f_pred: np.ndarray, f_gt: np.ndarray) -> float:
    """Mean squared gap between rank-aligned feature values.

    Both vectors are stably sorted and compared position-wise, which is
    the tie-independent evaluation of matching each predicted value
    against the ground-truth value of equal rank.  Summation uses fsum,
    so the result is independent of term order.
    """
    f_pred = np.asarray(f_pred, dtype=float).ravel()
    f_gt = np.asarray(f_gt, dtype=float).ravel()
    if f_pred.size != f_gt.size:
        raise ShapeError(f"length mismatch: {f_pred.size} vs {f_gt.size}")
    if f_pred.size == 0:
        raise ValidationError("fdm_loss: empty feature vectors")
    if not (np.isfinite(f_pred).all() and np.isfinite(f_gt).all()):
        raise ValidationError("fdm_loss: non-finite feature values")
    ps = np.sort(f_pred, kind="stable")
    gs = np.sort(f_gt, kind="stable")
    gap = ps - gs
    return math.fsum(gap * gap) / f_pred.size


def total_loss(batch, weights: LossWeights, extractor_config: FdmExtractorConfig) -> LossReport:
    """Full objective over a batch; returns the populated report.

    batch: sequence of (pred_rgb, gt_rgb, pred_hvi, gt_hvi).
    """
    batch = list(batch)
    if not batch:
        raise ValidationError("total_loss: empty batch")
    terms = [fidelity_terms(*sample) for sample in batch]
    l_p = _compose_lp(terms)
    l_delta_e = math.fsum(delta_e_loss(p, g) for p, g, _, _ in batch) / len(batch)
    l_fdm = math.fsum(
        fdm_loss(
            extract_features(p, extractor_config), extract_features(g, extractor_config)
        )
        for p, g, _, _ in batch
    ) / len(batch)
    l_total = l_p + weights.lambda_delta_e * l_delta_e + weights.lambda_fdm * l_fdm
    return LossReport(
        per_sample=terms,
        l_p=l_p,
        l_delta_e=l_delta_e,
        l_fdm=l_fdm,
        l_total=l_total,
        weights=weights,
    )
