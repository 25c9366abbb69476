"""Forward-only reference network: packed raw in, full-resolution RGB out.

Layout: two stem convs lift the 4 packed planes to feature space, a 1x1
projection produces an RGB proxy, the proxy is decoupled into chroma and
intensity planes, and each group runs through a small U-Net whose down /
up sampling steps are the wavelet blocks (so every resolution change is
exactly invertible in principle).  The two branch bottlenecks exchange
information through a concat + 1x1 fuse.  A final wavelet up block
restores mosaic resolution.

Weights live in a self-describing file: an 8-byte little-endian header
length, a JSON header (config + ordered layer manifest with shapes and
byte offsets), then the flat little-endian float32 payload.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .color_hvi import HviImage, collapse, hvi_to_rgb, rgb_to_hvi
from .errors import ShapeError, ValidationError
from .raw_frontend import PackedRaw
from .wavelet import wavelet_down_block, wavelet_up_block

WEIGHTS_FORMAT = "nightisp-weights-v1"

LEAKY_SLOPE = 0.2

# Branch input widths: chroma planes (h, v) and the intensity plane.
_BRANCHES = (("hv", 2), ("i", 1))


@dataclass
class NetworkConfig:
    base_channels: int = 16
    depth: int = 3
    hvi_k: float = 1.0

    def __post_init__(self):
        if self.base_channels < 1:
            raise ValidationError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.depth < 1:
            raise ValidationError(f"depth must be >= 1, got {self.depth}")
        if self.hvi_k <= 0:
            raise ValidationError(f"hvi_k must be positive, got {self.hvi_k}")


@dataclass
class WeightBundle:
    """Named parameter tensors plus the config they were built for.

    Treated as immutable after load; safe to share across threads.
    """

    config: NetworkConfig
    tensors: dict


def leaky_relu(x: np.ndarray, slope: float = LEAKY_SLOPE) -> np.ndarray:
    return np.where(x >= 0, x, slope * x)


def conv2d_3x3(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """3x3 convolution, zero padding 1, fixed tap accumulation order."""
    if x.ndim != 3:
        raise ShapeError(f"conv input must be (C, H, W), got shape {x.shape}")
    cin, h, w = x.shape
    if weight.ndim != 4 or weight.shape[1:] != (cin, 3, 3):
        raise ShapeError(f"conv weight must be (C_out, {cin}, 3, 3), got {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"conv bias must be ({weight.shape[0]},), got {bias.shape}")
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((weight.shape[0], h, w), dtype=np.result_type(x, weight))
    for dy in range(3):
        for dx in range(3):
            out += np.tensordot(weight[:, :, dy, dx], xp[:, dy : dy + h, dx : dx + w],
                                axes=(1, 0))
    return out + bias[:, None, None]


def conv1x1(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if x.ndim != 3:
        raise ShapeError(f"conv input must be (C, H, W), got shape {x.shape}")
    if weight.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise ShapeError(f"1x1 weight must be (C_out, {x.shape[0]}), got {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"1x1 bias must be ({weight.shape[0]},), got {bias.shape}")
    return np.tensordot(weight, x, axes=(1, 0)) + bias[:, None, None]


def rggb_to_features(planes: np.ndarray, tensors: dict, activate: bool = True) -> np.ndarray:
    """Stem: two 3x3 convs (4 -> C -> C) with the nonlinearity between.

    ``activate=False`` makes the stem purely linear, which keeps analytic
    identity constructions exact in tests.
    """
    if planes.ndim != 3 or planes.shape[0] != 4:
        raise ShapeError(f"expected (4, H, W) packed planes, got shape {planes.shape}")
    x = conv2d_3x3(planes, tensors["rggb.conv1.weight"], tensors["rggb.conv1.bias"])
    if activate:
        x = leaky_relu(x)
    return conv2d_3x3(x, tensors["rggb.conv2.weight"], tensors["rggb.conv2.bias"])


def features_to_rgb_proxy(features: np.ndarray, tensors: dict) -> np.ndarray:
    """1x1 projection of the stem features to a clamped 3-channel image."""
    rgb = conv1x1(features, tensors["proxy.weight"], tensors["proxy.bias"])
    return np.clip(rgb, 0.0, 1.0)


def _unet_encode(x: np.ndarray, tensors: dict, depth: int, prefix: str):
    skips = []
    for level in range(depth):
        skips.append(x)
        x = wavelet_down_block(
            x, tensors[f"{prefix}down{level}.weight"], tensors[f"{prefix}down{level}.bias"]
        )
        x = leaky_relu(x)
    return x, skips


def _unet_decode(x: np.ndarray, skips: list, tensors: dict, depth: int, prefix: str):
    for level in range(depth - 1, -1, -1):
        x = wavelet_up_block(
            x, tensors[f"{prefix}up{level}.weight"], tensors[f"{prefix}up{level}.bias"]
        )
        x = np.concatenate([x, skips[level]])
        x = conv2d_3x3(
            x, tensors[f"{prefix}fuse{level}.weight"], tensors[f"{prefix}fuse{level}.bias"]
        )
        if level > 0:  # branch output layer stays linear
            x = leaky_relu(x)
    return x


def unet_branch_forward(
    features: np.ndarray, tensors: dict, depth: int, prefix: str = ""
) -> np.ndarray:
    """One branch U-Net: wavelet encoder, 3x3 bottleneck, wavelet decoder
    with skip concatenation.  Output matches the input shape."""
    if features.ndim != 3:
        raise ShapeError(f"expected (C, H, W) features, got shape {features.shape}")
    _, h, w = features.shape
    step = 1 << depth
    if h % step or w % step:
        raise ShapeError(f"spatial dims {h}x{w} must be divisible by 2^depth = {step}")
    x, skips = _unet_encode(features, tensors, depth, prefix)
    x = leaky_relu(
        conv2d_3x3(x, tensors[f"{prefix}bottleneck.weight"], tensors[f"{prefix}bottleneck.bias"])
    )
    return _unet_decode(x, skips, tensors, depth, prefix)


def render(raw: PackedRaw, bundle: WeightBundle) -> np.ndarray:
    """Full forward pass: (4, H, W) packed raw to (3, 2H, 2W) RGB in [0, 1]."""
    config = bundle.config
    tensors = bundle.tensors
    planes = np.asarray(raw.planes, dtype=float)
    if planes.ndim != 3 or planes.shape[0] != 4:
        raise ShapeError(f"expected (4, H, W) packed planes, got shape {planes.shape}")
    _, h, w = planes.shape
    step = 1 << config.depth
    if h % step or w % step:
        raise ShapeError(f"raw dims {h}x{w} must be divisible by 2^depth = {step}")

    feats = rggb_to_features(planes, tensors)
    proxy = features_to_rgb_proxy(feats, tensors)
    hvi = rgb_to_hvi(proxy, config.hvi_k)

    branch_in = {"hv": np.stack([hvi.h, hvi.v]), "i": hvi.intensity[None]}
    bottleneck = {}
    skips = {}
    for name, _ in _BRANCHES:
        x, sk = _unet_encode(branch_in[name], tensors, config.depth, f"{name}.")
        bottleneck[name] = leaky_relu(
            conv2d_3x3(x, tensors[f"{name}.bottleneck.weight"], tensors[f"{name}.bottleneck.bias"])
        )
        skips[name] = sk
    # bottleneck exchange: both branches see the concatenated state
    joint = np.concatenate([bottleneck["hv"], bottleneck["i"]])
    out = {}
    for name, _ in _BRANCHES:
        x = leaky_relu(
            conv1x1(joint, tensors[f"{name}.crossfuse.weight"], tensors[f"{name}.crossfuse.bias"])
        )
        out[name] = _unet_decode(x, skips[name], tensors, config.depth, f"{name}.")

    intensity = np.clip(out["i"][0], 0.0, 1.0)
    h_raw, v_raw = out["hv"][0], out["hv"][1]
    # project chroma back inside the collapse disc before inversion
    radius = collapse(intensity, config.hvi_k)
    chroma = np.hypot(h_raw, v_raw)
    scale = np.minimum(1.0, radius / np.where(chroma > 0, chroma, 1.0))
    restored = HviImage(h=h_raw * scale, v=v_raw * scale, intensity=intensity,
                        k=config.hvi_k)
    rgb = hvi_to_rgb(restored)

    full = wavelet_up_block(rgb, tensors["final_up.weight"], tensors["final_up.bias"])
    return np.clip(full, 0.0, 1.0)


def layer_manifest(config: NetworkConfig) -> list:
    """Ordered (name, shape) pairs of every tensor a bundle must provide."""
    c = config.base_channels
    entries = [
        ("rggb.conv1.weight", (c, 4, 3, 3)),
        ("rggb.conv1.bias", (c,)),
        ("rggb.conv2.weight", (c, c, 3, 3)),
        ("rggb.conv2.bias", (c,)),
        ("proxy.weight", (3, c)),
        ("proxy.bias", (3,)),
    ]
    cross_in = sum(c0 << config.depth for _, c0 in _BRANCHES)
    for name, c0 in _BRANCHES:
        cd = c0 << config.depth
        for level in range(config.depth):
            cin = c0 << level
            entries += [
                (f"{name}.down{level}.weight", (2 * cin, 4 * cin)),
                (f"{name}.down{level}.bias", (2 * cin,)),
            ]
        entries += [
            (f"{name}.bottleneck.weight", (cd, cd, 3, 3)),
            (f"{name}.bottleneck.bias", (cd,)),
            (f"{name}.crossfuse.weight", (cd, cross_in)),
            (f"{name}.crossfuse.bias", (cd,)),
        ]
        for level in range(config.depth - 1, -1, -1):
            cin = c0 << (level + 1)
            cup = c0 << level
            entries += [
                (f"{name}.up{level}.weight", (4 * cup, cin)),
                (f"{name}.up{level}.bias", (4 * cup,)),
                (f"{name}.fuse{level}.weight", (cup, 2 * cup, 3, 3)),
                (f"{name}.fuse{level}.bias", (cup,)),
            ]
    entries += [("final_up.weight", (12, 3)), ("final_up.bias", (12,))]
    return entries


def generate_weights(config: NetworkConfig, seed: int) -> WeightBundle:
    """Deterministic random bundle (He-style scaled normals).

    A few structural offsets keep the untrained operating point useful:
    the proxy and intensity-output biases sit at 0.5 (mid-grey) and the
    final up block starts near a plain 2x upsample, so random bundles
    produce non-degenerate images instead of clipping to black.
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in layer_manifest(config):
        if name.endswith(".bias"):
            base = 0.5 if name in ("proxy.bias", "i.fuse0.bias") else 0.0
            tensors[name] = np.full(shape, base, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            w = rng.standard_normal(shape) / np.sqrt(fan_in)
            if name == "final_up.weight":
                w = 0.1 * w
                w[:3, :] += 2.0 * np.eye(3)  # LL rows: near-exact 2x upsample
            tensors[name] = w.astype(np.float32)
    return WeightBundle(config=config, tensors=tensors)


def save_weights(bundle: WeightBundle, path: str) -> None:
    """Write a bundle atomically in the self-describing binary format."""
    layers = []
    blobs = []
    offset = 0
    for name, shape in layer_manifest(bundle.config):
        tensor = np.ascontiguousarray(bundle.tensors[name], dtype="<f4")
        if tensor.shape != shape:
            raise ShapeError(f"layer {name} has shape {tensor.shape}, expected {shape}")
        blob = tensor.tobytes()
        layers.append({"name": name, "shape": list(shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(
        {
            "format": WEIGHTS_FORMAT,
            "dtype": "<f4",
            "config": {
                "base_channels": bundle.config.base_channels,
                "depth": bundle.config.depth,
                "hvi_k": bundle.config.hvi_k,
            },
            "layers": layers,
        }
    ).encode("utf-8")
    payload = struct.pack("<Q", len(header)) + header + b"".join(blobs)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                               suffix=".weights.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_weights(path: str) -> WeightBundle:
    """Read and validate a weight file; every manifest layer must be
    present with the exact shape (ShapeError otherwise)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read weights file {path}: {exc}") from exc
    if len(raw) < 8:
        raise ValidationError(f"weights file {path} too short for header length")
    (header_len,) = struct.unpack("<Q", raw[:8])
    if len(raw) < 8 + header_len:
        raise ValidationError(f"weights file {path} truncated header")
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"weights file {path} has an invalid JSON header") from exc
    if header.get("format") != WEIGHTS_FORMAT:
        raise ValidationError(
            f"weights file {path} has format {header.get('format')!r}, "
            f"expected {WEIGHTS_FORMAT!r}"
        )
    cfg = header.get("config", {})
    for key in ("base_channels", "depth", "hvi_k"):
        if key not in cfg:
            raise ValidationError(f"weights header missing config key: {key}")
    config = NetworkConfig(
        base_channels=int(cfg["base_channels"]),
        depth=int(cfg["depth"]),
        hvi_k=float(cfg["hvi_k"]),
    )
    data = raw[8 + header_len :]
    tensors = {}
    for layer in header.get("layers", []):
        name = layer["name"]
        shape = tuple(int(v) for v in layer["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = int(layer["offset"])
        end = start + 4 * count
        if end > len(data):
            raise ValidationError(f"weights file {path}: layer {name} overruns payload")
        arr = np.frombuffer(data[start:end], dtype="<f4").reshape(shape)
        tensors[name] = arr
    expected = layer_manifest(config)
    for name, shape in expected:
        if name not in tensors:
            raise ShapeError(f"weights file {path} missing layer {name}")
        if tensors[name].shape != shape:
            raise ShapeError(
                f"weights file {path}: layer {name} has shape "
                f"{tensors[name].shape}, expected {shape}"
            )
    extra = set(tensors) - {name for name, _ in expected}
    if extra:
        raise ShapeError(f"weights file {path} has unexpected layers: {sorted(extra)}")
    return WeightBundle(config=config, tensors=tensors)
