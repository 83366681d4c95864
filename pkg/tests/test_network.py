import numpy as np
import pytest

from infoplane.errors import ConfigError, ShapeError
from infoplane.layers import cross_entropy_loss
from infoplane.network import (
    LayerSpec,
    NetworkSpec,
    backward,
    forward,
    forward_with_trace,
    init_params,
)

rng = np.random.default_rng(77)


def conv_net(depth=3, width=6, kernel=3, input_shape=(8, 8, 1)):
    specs = [LayerSpec("conv", width=width, kernel=kernel, activation="tanh") for _ in range(depth)]
    specs += [LayerSpec("flatten"), LayerSpec("dense", width=10, activation="softmax")]
    return NetworkSpec(tuple(specs), input_shape)


class TestSpecs:
    def test_final_layer_must_be_softmax_dense(self):
        with pytest.raises(ConfigError):
            NetworkSpec((LayerSpec("dense", 10, activation="tanh"),), (4,))

    def test_final_width_must_match_class_count(self):
        with pytest.raises(ConfigError):
            NetworkSpec((LayerSpec("dense", 7, activation="softmax"),), (4,), class_count=10)

    def test_hidden_layers_must_use_tanh(self):
        with pytest.raises(ConfigError):
            NetworkSpec(
                (LayerSpec("dense", 5, activation="identity"),
                 LayerSpec("dense", 10, activation="softmax")),
                (4,),
            )

    def test_layer_shapes_same_padding(self):
        net = conv_net(depth=2, width=4, input_shape=(6, 6, 1))
        shapes = net.layer_shapes()
        assert shapes[0] == (6, 6, 4)
        assert shapes[1] == (6, 6, 4)
        assert shapes[2] == (36 * 4,)
        assert shapes[3] == (10,)

    def test_pooling_shape(self):
        net = NetworkSpec(
            (LayerSpec("conv", 4, 3, activation="tanh"), LayerSpec("maxpool", pool=2),
             LayerSpec("flatten"), LayerSpec("dense", 10, activation="softmax")),
            (6, 6, 1),
        )
        assert net.layer_shapes()[1] == (3, 3, 4)


class TestInitParams:
    def test_same_seed_bit_identical(self):
        net = conv_net()
        a, b = init_params(net, 5), init_params(net, 5)
        for pa, pb in zip(a, b):
            if pa is not None:
                assert np.array_equal(pa["w"], pb["w"])

    def test_different_seeds_differ(self):
        net = conv_net()
        a, b = init_params(net, 5), init_params(net, 6)
        assert not np.array_equal(a[0]["w"], b[0]["w"])

    def test_glorot_bounds_and_zero_biases(self):
        net = conv_net(width=4, kernel=3)
        params = init_params(net, 0)
        fan_in, fan_out = 9 * 1, 9 * 4
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.abs(params[0]["w"]).max() <= bound
        for p in params:
            if p is not None:
                assert not p["b"].any()


class TestForwardTrace:
    def test_depth3_trace_has_four_entries(self):
        net = conv_net(depth=3)
        params = init_params(net, 1)
        trace, probs = forward_with_trace(net, params, rng.uniform(0, 1, (2, 8, 8, 1)))
        assert len(trace) == 4  # 3 conv + 1 output dense
        assert probs.shape == (2, 10)

    def test_trace_shapes_match_spec_shapes(self):
        net = conv_net(depth=2, width=5)
        params = init_params(net, 1)
        trace, _ = forward_with_trace(net, params, rng.uniform(0, 1, (3, 8, 8, 1)))
        shapes = net.layer_shapes()
        recorded = net.recorded_layers()
        for t, li in zip(trace, recorded):
            assert t.shape == (3,) + shapes[li]

    def test_pool_and_flatten_not_traced(self):
        net = NetworkSpec(
            (LayerSpec("conv", 2, 3, activation="tanh"), LayerSpec("maxpool", pool=2),
             LayerSpec("flatten"), LayerSpec("dense", 10, activation="softmax")),
            (6, 6, 1),
        )
        params = init_params(net, 0)
        trace, _ = forward_with_trace(net, params, rng.uniform(0, 1, (2, 6, 6, 1)))
        assert len(trace) == 2

    def test_identical_batch_identical_trace(self):
        net = conv_net()
        params = init_params(net, 2)
        x = rng.uniform(0, 1, (4, 8, 8, 1))
        t1, p1 = forward_with_trace(net, params, x)
        t2, p2 = forward_with_trace(net, params, x)
        assert np.array_equal(p1, p2)
        for a, b in zip(t1, t2):
            assert np.array_equal(a, b)

    def test_batch_shape_mismatch(self):
        net = conv_net()
        with pytest.raises(ShapeError, match="input_shape"):
            forward_with_trace(net, init_params(net, 0), np.zeros((1, 9, 9, 1)))


class TestWholeNetGradients:
    @pytest.mark.parametrize("seed", range(3))
    def test_full_backprop_matches_finite_differences(self, seed):
        r = np.random.default_rng(seed)
        net = NetworkSpec(
            (LayerSpec("conv", 3, 3, activation="tanh"), LayerSpec("maxpool", pool=2),
             LayerSpec("conv", 2, 3, activation="tanh"), LayerSpec("flatten"),
             LayerSpec("dense", 5, activation="tanh"),
             LayerSpec("dense", 10, activation="softmax")),
            (6, 6, 1),
        )
        params = init_params(net, seed)
        x = r.uniform(-1, 1, (3, 6, 6, 1))
        y = r.integers(0, 10, 3)

        def loss_fn():
            _, probs, _ = forward(net, params, x)
            return cross_entropy_loss(probs, y)[0]

        _, probs, cache = forward(net, params, x, keep_cache=True)
        _, g = cross_entropy_loss(probs, y)
        grads = backward(net, params, cache, g)

        h, worst = 1e-5, 0.0
        for li, p in enumerate(params):
            if p is None:
                continue
            for key in p:
                arr = p[key]
                flat_idx = r.choice(arr.size, size=min(6, arr.size), replace=False)
                for fi in flat_idx:
                    idx = np.unravel_index(fi, arr.shape)
                    orig = arr[idx]
                    arr[idx] = orig + h
                    lp = loss_fn()
                    arr[idx] = orig - h
                    lm = loss_fn()
                    arr[idx] = orig
                    num = (lp - lm) / (2 * h)
                    ana = grads[li][key][idx]
                    worst = max(worst, abs(num - ana) / max(1e-8, abs(num), abs(ana)))
        assert worst < 1e-4
