import json
import struct

import numpy as np
import pytest

from nightisp import (
    NetworkConfig,
    PackedRaw,
    ShapeError,
    ValidationError,
    WeightBundle,
    features_to_rgb_proxy,
    generate_weights,
    layer_manifest,
    load_weights,
    render,
    rggb_to_features,
    save_weights,
    unet_branch_forward,
)
from nightisp.network import conv1x1, conv2d_3x3, leaky_relu

from oracles import naive_conv3x3


class TestConfig:
    def test_defaults(self):
        cfg = NetworkConfig()
        assert (cfg.base_channels, cfg.depth, cfg.hvi_k) == (16, 3, 1.0)

    @pytest.mark.parametrize("kw", [
        {"base_channels": 0}, {"depth": 0}, {"hvi_k": 0.0}, {"hvi_k": -1.0},
    ])
    def test_invalid_rejected(self, kw):
        with pytest.raises(ValidationError):
            NetworkConfig(**kw)


class TestPrimitives:
    def test_leaky_relu(self):
        x = np.array([-1.0, 0.0, 2.0])
        assert np.array_equal(leaky_relu(x), [-0.2, 0.0, 2.0])

    def test_conv3x3_matches_loop_oracle(self, rng):
        x = rng.normal(size=(3, 7, 9))
        w = rng.normal(size=(5, 3, 3, 3))
        b = rng.normal(size=5)
        got = conv2d_3x3(x, w, b)
        assert np.allclose(got, naive_conv3x3(x, w, b), atol=1e-12)

    def test_conv3x3_identity_kernel(self, rng):
        x = rng.normal(size=(2, 6, 6))
        w = np.zeros((2, 2, 3, 3))
        w[0, 0, 1, 1] = 1.0
        w[1, 1, 1, 1] = 1.0
        assert np.allclose(conv2d_3x3(x, w, np.zeros(2)), x, atol=1e-15)

    def test_conv3x3_shape_errors(self, rng):
        x = rng.normal(size=(3, 4, 4))
        with pytest.raises(ShapeError):
            conv2d_3x3(x, np.zeros((5, 2, 3, 3)), np.zeros(5))
        with pytest.raises(ShapeError):
            conv2d_3x3(x, np.zeros((5, 3, 3, 3)), np.zeros(4))

    def test_conv1x1_matches_einsum(self, rng):
        x = rng.normal(size=(4, 5, 6))
        w = rng.normal(size=(3, 4))
        b = rng.normal(size=3)
        want = np.einsum("oc,chw->ohw", w, x) + b[:, None, None]
        assert np.allclose(conv1x1(x, w, b), want, atol=1e-12)


class TestStem:
    def make_identity_stem(self):
        w1 = np.zeros((4, 4, 3, 3))
        w2 = np.zeros((4, 4, 3, 3))
        for i in range(4):
            w1[i, i, 1, 1] = 1.0
            w2[i, i, 1, 1] = 1.0
        return {
            "rggb.conv1.weight": w1, "rggb.conv1.bias": np.zeros(4),
            "rggb.conv2.weight": w2, "rggb.conv2.bias": np.zeros(4),
        }

    def test_identity_kernels_pass_through(self, rng):
        planes = rng.normal(size=(4, 8, 8))  # signed, so leaky would bend it
        out = rggb_to_features(planes, self.make_identity_stem(), activate=False)
        assert np.allclose(out, planes, atol=1e-15)

    def test_activation_bends_negatives(self, rng):
        planes = -np.abs(rng.normal(size=(4, 8, 8)))
        tensors = self.make_identity_stem()
        linear = rggb_to_features(planes, tensors, activate=False)
        active = rggb_to_features(planes, tensors, activate=True)
        assert np.allclose(active, 0.2 * linear, atol=1e-12)

    def test_requires_four_planes(self, rng):
        with pytest.raises(ShapeError):
            rggb_to_features(rng.normal(size=(3, 8, 8)), self.make_identity_stem())

    def test_proxy_clamps(self):
        feats = np.stack([np.full((4, 4), -3.0), np.full((4, 4), 5.0)])
        tensors = {"proxy.weight": np.eye(3, 2), "proxy.bias": np.zeros(3)}
        rgb = features_to_rgb_proxy(feats, tensors)
        assert np.all(rgb[0] == 0.0)
        assert np.all(rgb[1] == 1.0)
        assert rgb.shape == (3, 4, 4)


def branch_tensors(c_in, depth, fill=0.0, prefix=""):
    cfg_like = []
    for level in range(depth):
        cin = c_in << level
        cfg_like += [
            (f"{prefix}down{level}.weight", (2 * cin, 4 * cin)),
            (f"{prefix}down{level}.bias", (2 * cin,)),
        ]
    cd = c_in << depth
    cfg_like += [
        (f"{prefix}bottleneck.weight", (cd, cd, 3, 3)),
        (f"{prefix}bottleneck.bias", (cd,)),
    ]
    for level in range(depth - 1, -1, -1):
        cup = c_in << level
        cfg_like += [
            (f"{prefix}up{level}.weight", (4 * cup, 2 * cup)),
            (f"{prefix}up{level}.bias", (4 * cup,)),
            (f"{prefix}fuse{level}.weight", (cup, 2 * cup, 3, 3)),
            (f"{prefix}fuse{level}.bias", (cup,)),
        ]
    return {name: np.full(shape, fill) for name, shape in cfg_like}


class TestUnetBranch:
    def test_output_shape_matches_input(self, rng):
        tensors = {k: rng.normal(size=v.shape) * 0.1 for k, v in
                   branch_tensors(2, 2).items()}
        x = rng.normal(size=(2, 16, 16))
        out = unet_branch_forward(x, tensors, depth=2)
        assert out.shape == x.shape

    def test_zero_weights_zero_output(self, rng):
        tensors = branch_tensors(1, 2, fill=0.0)
        out = unet_branch_forward(rng.normal(size=(1, 8, 8)), tensors, depth=2)
        assert np.all(out == 0.0)

    def test_skip_selector_identity(self, rng):
        # zero everywhere except the level-0 fuse conv selecting the skip
        # half of its concatenated input: the branch reproduces its input
        # exactly because that layer is linear.
        tensors = branch_tensors(3, 1, fill=0.0)
        for i in range(3):
            tensors["fuse0.weight"][i, 3 + i, 1, 1] = 1.0
        x = rng.normal(size=(3, 12, 12))
        out = unet_branch_forward(x, tensors, depth=1)
        assert np.max(np.abs(out - x)) == 0.0

    def test_indivisible_dims_rejected(self, rng):
        tensors = branch_tensors(1, 2)
        with pytest.raises(ShapeError):
            unet_branch_forward(rng.normal(size=(1, 10, 8)), tensors, depth=2)


class TestManifest:
    def test_default_tensor_count(self):
        assert len(layer_manifest(NetworkConfig())) == 52

    def test_spot_shapes(self):
        shapes = dict(layer_manifest(NetworkConfig()))
        assert shapes["rggb.conv1.weight"] == (16, 4, 3, 3)
        assert shapes["proxy.weight"] == (3, 16)
        assert shapes["hv.down0.weight"] == (4, 8)
        assert shapes["i.down2.weight"] == (8, 16)
        assert shapes["hv.bottleneck.weight"] == (16, 16, 3, 3)
        # crossfuse consumes both branch bottlenecks: 16 + 8 channels
        assert shapes["hv.crossfuse.weight"] == (16, 24)
        assert shapes["i.crossfuse.weight"] == (8, 24)
        assert shapes["i.up0.weight"] == (4, 2)
        assert shapes["final_up.weight"] == (12, 3)

    def test_scales_with_depth(self):
        names = {n for n, _ in layer_manifest(NetworkConfig(depth=1))}
        assert "hv.down0.weight" in names
        assert "hv.down1.weight" not in names


class TestGenerateWeights:
    def test_covers_manifest_exactly(self):
        cfg = NetworkConfig(base_channels=4, depth=2)
        bundle = generate_weights(cfg, seed=0)
        want = layer_manifest(cfg)
        assert set(bundle.tensors) == {n for n, _ in want}
        for name, shape in want:
            assert bundle.tensors[name].shape == shape
            assert bundle.tensors[name].dtype == np.float32

    def test_deterministic_per_seed(self):
        cfg = NetworkConfig(base_channels=4, depth=1)
        a = generate_weights(cfg, seed=7)
        b = generate_weights(cfg, seed=7)
        c = generate_weights(cfg, seed=8)
        for name in a.tensors:
            assert np.array_equal(a.tensors[name], b.tensors[name])
        assert any(not np.array_equal(a.tensors[n], c.tensors[n]) for n in a.tensors)

    def test_operating_point_offsets(self):
        bundle = generate_weights(NetworkConfig(), seed=0)
        assert np.all(bundle.tensors["proxy.bias"] == 0.5)
        assert np.all(bundle.tensors["i.fuse0.bias"] == 0.5)
        assert np.all(bundle.tensors["hv.fuse0.bias"] == 0.0)


class TestRender:
    @pytest.fixture()
    def bundle(self):
        return generate_weights(NetworkConfig(base_channels=4, depth=2), seed=0)

    def test_output_shape_and_range(self, rng, bundle):
        raw = PackedRaw(planes=rng.random(size=(4, 16, 20)))
        rgb = render(raw, bundle)
        assert rgb.shape == (3, 32, 40)
        assert rgb.min() >= 0.0 and rgb.max() <= 1.0

    def test_repeat_runs_bitwise_equal(self, rng, bundle):
        raw = PackedRaw(planes=rng.random(size=(4, 16, 16)))
        a = render(raw, bundle)
        b = render(raw, bundle)
        assert np.array_equal(a, b)

    def test_not_degenerate(self, rng, bundle):
        raw = PackedRaw(planes=rng.random(size=(4, 16, 16)) * 0.5 + 0.25)
        rgb = render(raw, bundle)
        assert rgb.std() > 0.01  # random weights must not collapse to flat

    def test_indivisible_dims_rejected(self, rng, bundle):
        raw = PackedRaw(planes=rng.random(size=(4, 18, 16)))
        with pytest.raises(ShapeError):
            render(raw, bundle)


class TestWeightFile:
    @pytest.fixture()
    def bundle(self):
        return generate_weights(NetworkConfig(base_channels=2, depth=1, hvi_k=2.0), seed=3)

    def test_round_trip_exact(self, bundle, tmp_path):
        path = str(tmp_path / "w.weights")
        save_weights(bundle, path)
        loaded = load_weights(path)
        assert loaded.config == bundle.config
        assert set(loaded.tensors) == set(bundle.tensors)
        for name, tensor in bundle.tensors.items():
            assert np.array_equal(loaded.tensors[name], tensor)

    def test_loaded_tensors_read_only(self, bundle, tmp_path):
        path = str(tmp_path / "w.weights")
        save_weights(bundle, path)
        loaded = load_weights(path)
        with pytest.raises(ValueError):
            loaded.tensors["proxy.bias"][0] = 1.0

    def test_same_seed_same_bytes(self, tmp_path):
        cfg = NetworkConfig(base_channels=2, depth=1)
        p1, p2 = str(tmp_path / "a.weights"), str(tmp_path / "b.weights")
        save_weights(generate_weights(cfg, seed=11), p1)
        save_weights(generate_weights(cfg, seed=11), p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_truncated_rejected(self, bundle, tmp_path):
        path = str(tmp_path / "w.weights")
        save_weights(bundle, path)
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[:6])
        with pytest.raises(ValidationError):
            load_weights(path)

    def test_bad_format_marker_rejected(self, bundle, tmp_path):
        path = str(tmp_path / "w.weights")
        save_weights(bundle, path)
        self.rewrite_header(path, lambda h: h.update(format="other-v9"))
        with pytest.raises(ValidationError, match="format"):
            load_weights(path)

    def test_renamed_layer_rejected_as_shape_error(self, bundle, tmp_path):
        path = str(tmp_path / "w.weights")
        save_weights(bundle, path)

        def rename(h):
            h["layers"][0]["name"] = "rggb.conv1.weight_x"

        self.rewrite_header(path, rename)
        with pytest.raises(ShapeError, match="missing layer"):
            load_weights(path)

    def test_wrong_shape_rejected(self, bundle, tmp_path):
        path = str(tmp_path / "w.weights")
        save_weights(bundle, path)

        def reshape(h):
            # transpose the declared shape; element count is unchanged
            h["layers"][0]["shape"] = h["layers"][0]["shape"][::-1]

        self.rewrite_header(path, reshape)
        with pytest.raises(ShapeError, match="shape"):
            load_weights(path)

    def test_missing_config_key_rejected(self, bundle, tmp_path):
        path = str(tmp_path / "w.weights")
        save_weights(bundle, path)
        self.rewrite_header(path, lambda h: h["config"].pop("hvi_k"))
        with pytest.raises(ValidationError, match="hvi_k"):
            load_weights(path)

    def test_overrun_payload_rejected(self, bundle, tmp_path):
        path = str(tmp_path / "w.weights")
        save_weights(bundle, path)

        def overrun(h):
            h["layers"][-1]["offset"] = 10**9

        self.rewrite_header(path, overrun)
        with pytest.raises(ValidationError, match="overruns"):
            load_weights(path)

    @staticmethod
    def rewrite_header(path, mutate):
        blob = open(path, "rb").read()
        (hlen,) = struct.unpack("<Q", blob[:8])
        header = json.loads(blob[8 : 8 + hlen])
        mutate(header)
        new_header = json.dumps(header).encode()
        open(path, "wb").write(
            struct.pack("<Q", len(new_header)) + new_header + blob[8 + hlen :]
        )

    def test_save_rejects_missing_tensor(self, bundle, tmp_path):
        broken = WeightBundle(config=bundle.config, tensors=dict(bundle.tensors))
        del broken.tensors["proxy.bias"]
        with pytest.raises(KeyError):
            save_weights(broken, str(tmp_path / "w.weights"))
