"""Photo-consistency alpha, network graph fidelity, and the conv forward pass."""

import numpy as np
import pytest

from msikit.alpha import (
    INPUT_NAME,
    NetSpec,
    WeightStore,
    _conv3d,
    alpha_activation,
    forward,
    net_spec_table1,
    photoconsistency_alpha,
    shape_check,
)
from msikit.geometry import ErpGrid, Pose
from msikit.wssv import SweepRadii, Wssv, sweep_radii


def wssv_from_variance(variance: np.ndarray, colors: np.ndarray | None = None,
                       count: np.ndarray | None = None) -> Wssv:
    h, w, n = variance.shape
    if colors is None:
        colors = np.zeros((h, w, n, 3), dtype=np.float32)
    if count is None:
        count = np.full((h, w, n), 2, dtype=np.int32)
    return Wssv(
        color=colors.astype(np.float32),
        source_count=count,
        variance=variance.astype(np.float32),
        grid=ErpGrid(w, h),
        radii=sweep_radii(1.0, 10.0, n),
        center=Pose.identity(),
    )


class TestPhotoconsistencyAlpha:
    def test_zero_variance_layer_wins_at_high_beta(self):
        var = np.ones((4, 8, 5), dtype=np.float32)
        var[:, :, 2] = 0.0
        alpha = photoconsistency_alpha(wssv_from_variance(var), beta=200.0, support=0)
        np.testing.assert_allclose(alpha[..., 2, 0], 1.0, atol=1e-6)
        np.testing.assert_allclose(alpha[..., 0, 0], 0.0, atol=1e-6)
        np.testing.assert_allclose(alpha[..., 1, 0], 0.0, atol=1e-6)

    def test_uniform_variance_inversion_hand_computed(self):
        """Uniform scores -> w = 1/3 each -> alpha = (1/3, 1/2, 1)."""
        var = np.full((2, 4, 3), 0.25, dtype=np.float32)
        alpha = photoconsistency_alpha(wssv_from_variance(var), beta=50.0, support=0)
        np.testing.assert_allclose(alpha[..., 0, 0], 1.0 / 3.0, atol=1e-6)
        np.testing.assert_allclose(alpha[..., 1, 0], 0.5, atol=1e-6)
        np.testing.assert_allclose(alpha[..., 2, 0], 1.0, atol=1e-6)

    def test_variance_scaling_preserves_argmax(self):
        rng = np.random.default_rng(1)
        var = rng.random((4, 8, 6)).astype(np.float32)
        a1 = photoconsistency_alpha(wssv_from_variance(var), beta=40.0, support=0)
        a2 = photoconsistency_alpha(wssv_from_variance(var * 3.0), beta=40.0, support=0)
        np.testing.assert_array_equal(
            np.argmax(a1[..., 0] * np.cumprod(np.insert(1 - a1[..., 0], 0, 1.0, axis=2)[..., :-1], axis=2), axis=2),
            np.argmax(a2[..., 0] * np.cumprod(np.insert(1 - a2[..., 0], 0, 1.0, axis=2)[..., :-1], axis=2), axis=2),
        )

    def test_all_invalid_pixel_gets_zero_alpha(self):
        var = np.zeros((2, 4, 3), dtype=np.float32)
        count = np.full((2, 4, 3), 2, dtype=np.int32)
        count[0, 0, :] = 0
        alpha = photoconsistency_alpha(wssv_from_variance(var, count=count), beta=50.0)
        np.testing.assert_array_equal(alpha[0, 0, :, 0], 0.0)
        assert alpha[1, 1, :, 0].sum() > 0

    def test_visibility_weights_sum_to_one(self):
        """Recomposing w_i = a_i prod_{j<i}(1 - a_j) from the returned alphas
        must give back a partition of the visible mass."""
        rng = np.random.default_rng(2)
        var = rng.random((6, 12, 8)).astype(np.float32)
        alpha = photoconsistency_alpha(wssv_from_variance(var), beta=30.0, support=1)[..., 0]
        trans = np.cumprod(1.0 - alpha, axis=2)
        vis = np.concatenate([np.ones_like(alpha[..., :1]), trans[..., :-1]], axis=2)
        w = alpha * vis
        np.testing.assert_allclose(w.sum(axis=2), 1.0, atol=1e-9)

    def test_invalid_layers_excluded_from_weights(self):
        var = np.zeros((1, 2, 4), dtype=np.float32)
        count = np.broadcast_to(np.array([2, 0, 2, 2], dtype=np.int32), (1, 2, 4)).copy()
        alpha = photoconsistency_alpha(wssv_from_variance(var, count=count), beta=50.0, support=0)[0, 0, :, 0]
        assert alpha[1] == 0.0
        trans = np.cumprod(1.0 - alpha)
        w = alpha * np.concatenate([[1.0], trans[:-1]])
        np.testing.assert_allclose(w.sum(), 1.0, atol=1e-9)
        np.testing.assert_allclose(w[[0, 2, 3]], 1.0 / 3.0, atol=1e-9)

    def test_bad_parameters_rejected(self):
        var = np.zeros((2, 4, 3), dtype=np.float32)
        with pytest.raises(ValueError):
            photoconsistency_alpha(wssv_from_variance(var), beta=0.0)
        with pytest.raises(ValueError):
            photoconsistency_alpha(wssv_from_variance(var), support=-1)


class TestNetSpecTable1:
    def test_layer_count_is_21(self):
        assert len(net_spec_table1()) == 21

    def test_conv4_2_row(self):
        layer = net_spec_table1().layer("conv4_2")
        assert layer.stride == 1 and layer.dilation == 2 and layer.out_channels == 64

    def test_final_layer_single_channel(self):
        assert net_spec_table1().layer("conv7_3").out_channels == 1

    def test_downsampling_rows(self):
        spec = net_spec_table1()
        for name in ("conv1_2", "conv2_2", "conv3_3"):
            assert spec.layer(name).stride == 2

    def test_skip_concatenations(self):
        spec = net_spec_table1()
        assert spec.layer("nnup_5").inputs == ("conv3_3", "conv4_3")
        assert spec.layer("nnup_6").inputs == ("conv2_2", "conv5_3")
        assert spec.layer("nnup_7").inputs == ("conv1_2", "conv6_2")


# depth-column values for a 32-deep input, in table order
DEPTH_COLUMN_N32 = {
    "conv1_1": 32, "conv1_2": 16, "conv2_1": 16, "conv2_2": 8,
    "conv3_1": 8, "conv3_2": 8, "conv3_3": 4,
    "conv4_1": 4, "conv4_2": 4, "conv4_3": 4,
    "nnup_5": 8, "conv5_1": 8, "conv5_2": 8, "conv5_3": 8,
    "nnup_6": 16, "conv6_1": 16, "conv6_2": 16,
    "nnup_7": 32, "conv7_1": 32, "conv7_2": 32, "conv7_3": 32,
}


class TestShapeCheck:
    def test_depth_column_for_32_layers(self):
        shapes = shape_check(net_spec_table1(), (320, 640, 32, 3))
        for name, depth in DEPTH_COLUMN_N32.items():
            assert shapes[name][2] == depth, name

    def test_bottleneck_and_output_shapes(self):
        shapes = shape_check(net_spec_table1(), (320, 640, 32, 3))
        assert shapes["conv4_3"] == (40, 80, 4, 64)
        assert shapes["conv7_3"] == (320, 640, 32, 1)

    def test_alternate_config_400x200x64(self):
        shapes = shape_check(net_spec_table1(), (200, 400, 64, 3))
        assert shapes["conv7_3"] == (200, 400, 64, 1)

    def test_indivisible_depth_named(self):
        with pytest.raises(ValueError, match="N=30"):
            shape_check(net_spec_table1(), (320, 640, 30, 3))

    def test_indivisible_height_named(self):
        with pytest.raises(ValueError, match="H=100"):
            shape_check(net_spec_table1(), (100, 640, 32, 3))

    def test_skip_channel_accumulation(self):
        shapes = shape_check(net_spec_table1(), (320, 640, 32, 3))
        assert shapes["nnup_5"][3] == 128  # 64 + 64
        assert shapes["nnup_6"][3] == 64   # 32 + 32
        assert shapes["nnup_7"][3] == 32   # 16 + 16


def naive_conv3d(x, kernel, bias, stride, dilation):
    """Direct six-loop reference convolution (zero padding)."""
    h, w, n, cin = x.shape
    cout = kernel.shape[4]
    oh, ow, on = h // stride, w // stride, n // stride
    out = np.zeros((oh, ow, on, cout))
    for oz in range(oh):
        for oy in range(ow):
            for ox in range(on):
                acc = bias.astype(np.float64).copy()
                for kz in range(3):
                    for ky in range(3):
                        for kx in range(3):
                            iz = stride * oz + dilation * (kz - 1)
                            iy = stride * oy + dilation * (ky - 1)
                            ix = stride * ox + dilation * (kx - 1)
                            if 0 <= iz < h and 0 <= iy < w and 0 <= ix < n:
                                acc += x[iz, iy, ix] @ kernel[kz, ky, kx]
                out[oz, oy, ox] = acc
    return out


class TestConv3d:
    @pytest.mark.parametrize("stride,dilation", [(1, 1), (2, 1), (1, 2)])
    def test_matches_naive_loops(self, stride, dilation):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(6, 6, 6, 2))
        kernel = rng.normal(size=(3, 3, 3, 2, 4)).astype(np.float32)
        bias = rng.normal(size=4).astype(np.float32)
        fast = _conv3d(x, kernel, bias, stride, dilation)
        slow = naive_conv3d(x, kernel.astype(np.float64), bias, stride, dilation)
        np.testing.assert_allclose(fast, slow, atol=1e-10)


class TestForward:
    def test_zero_weights_give_constant_activation_of_zero(self):
        spec = net_spec_table1()
        weights = WeightStore.zeros(spec, input_channels=3)
        volume = np.random.default_rng(4).random((8, 16, 8, 3))
        out = forward(spec, weights, volume, activation="sigmoid")
        assert out.shape == (8, 16, 8, 1)
        np.testing.assert_allclose(out, 0.5, atol=1e-12)
        out = forward(spec, weights, volume, activation="reluclamp")
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_output_shape_matches_input_grid(self):
        spec = net_spec_table1()
        weights = WeightStore.random(spec, input_channels=3, seed=7)
        volume = np.random.default_rng(5).random((16, 32, 8, 3))
        out = forward(spec, weights, volume)
        assert out.shape == (16, 32, 8, 1)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_weight_channel_mismatch_rejected(self):
        spec = net_spec_table1()
        weights = WeightStore.random(spec, input_channels=4, seed=0)
        with pytest.raises(ValueError, match="conv1_1"):
            forward(spec, weights, np.zeros((8, 8, 8, 3)))

    def test_receptive_field_matches_influence_oracle(self):
        """All-ones kernels, impulse input: the nonzero support after the
        encoder equals the analytic influence set propagated per axis."""
        prefix = NetSpec(layers=net_spec_table1().layers[:10])  # through conv4_3
        assert prefix.layers[-1].name == "conv4_3"
        tensors = {}
        chans = {INPUT_NAME: 1}
        for layer in prefix.layers:
            cin = chans[layer.inputs[0]]
            tensors[layer.name] = (
                np.ones((3, 3, 3, cin, layer.out_channels), dtype=np.float32),
                np.zeros(layer.out_channels, dtype=np.float32),
            )
            chans[layer.name] = layer.out_channels
        weights = WeightStore(tensors)

        dims = (24, 24, 8)
        impulse = np.zeros(dims + (1,))
        src = (12, 12, 4)
        impulse[src] = 1.0

        x = impulse
        outputs = {INPUT_NAME: x}
        for layer in prefix.layers:
            kernel, bias = weights.tensors[layer.name]
            from msikit.alpha import _conv3d
            y = _conv3d(outputs[layer.inputs[0]], kernel, bias, layer.stride, layer.dilation)
            y = np.maximum(y, 0.0)
            outputs[layer.name] = y

        def influence(indices, dim, stride, dilation):
            out = set()
            for i in indices:
                for k in (-1, 0, 1):
                    num = i - dilation * k
                    if num % stride == 0:
                        o = num // stride
                        if 0 <= o < dim // stride:
                            out.add(o)
            return out

        sets = [({src[0]}, dims[0]), ({src[1]}, dims[1]), ({src[2]}, dims[2])]
        for layer in prefix.layers:
            sets = [
                (influence(s, d, layer.stride, layer.dilation), d // layer.stride)
                for s, d in sets
            ]

        response = outputs["conv4_3"][..., 0] > 0.0
        expected = np.zeros_like(response)
        zi = sorted(sets[0][0])
        yi = sorted(sets[1][0])
        xi = sorted(sets[2][0])
        expected[np.ix_(zi, yi, xi)] = True
        np.testing.assert_array_equal(response, expected)


class TestAlphaActivation:
    def test_zero_input(self):
        assert alpha_activation(np.array(0.0), "sigmoid") == pytest.approx(0.5)
        assert alpha_activation(np.array(0.0), "reluclamp") == 0.0

    def test_large_positive_saturates(self):
        assert alpha_activation(np.array(50.0), "sigmoid") == pytest.approx(1.0, abs=1e-6)
        assert alpha_activation(np.array(50.0), "reluclamp") == 1.0

    def test_monotone(self):
        x = np.linspace(-5, 5, 101)
        for mode in ("sigmoid", "reluclamp"):
            y = alpha_activation(x, mode)
            assert np.all(np.diff(y) >= 0.0)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            alpha_activation(np.zeros(1), "tanh")


class TestWeightStore:
    def test_save_load_bitexact(self, tmp_path):
        spec = net_spec_table1()
        ws = WeightStore.random(spec, input_channels=3, seed=11)
        path = tmp_path / "w.msiw"
        ws.save(path)
        back = WeightStore.load(path)
        assert set(back.tensors) == set(ws.tensors)
        for name in ws.tensors:
            np.testing.assert_array_equal(back.tensors[name][0], ws.tensors[name][0])
            np.testing.assert_array_equal(back.tensors[name][1], ws.tensors[name][1])

    def test_random_is_seed_deterministic(self):
        spec = net_spec_table1()
        a = WeightStore.random(spec, seed=3)
        b = WeightStore.random(spec, seed=3)
        for name in a.tensors:
            np.testing.assert_array_equal(a.tensors[name][0], b.tensors[name][0])

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.msiw"
        path.write_bytes(b"NOPE" + b"\0" * 16)
        with pytest.raises(ValueError):
            WeightStore.load(path)
