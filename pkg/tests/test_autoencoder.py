import math

import numpy as np
import pytest

from canyonpl.autoencoder import (MINI_ARCHITECTURE, Architecture, AutoencoderModel, TrainConfig,
                                  load_autoencoder, masked_logcosh_loss, save_autoencoder,
                                  train_autoencoder)
from canyonpl.autoencoder.layers import (Conv1D, Dense, Flatten, MaxPool1D, ParallelAdd, Reshape,
                                         Sequential, ShapeError, UpSample1D)
from canyonpl.autoencoder.loss import log_cosh
from canyonpl.buildings import GridScaler

from oracles import central_diff, layer_grad_errors, rel_err


def built(layer, in_shape, seed=0):
    layer.build(in_shape, np.random.default_rng(seed))
    return layer


LAYER_CASES = {
    "conv_tanh": (lambda: Conv1D(4, 3, "tanh"), (5, 3)),
    "conv_linear_even_kernel": (lambda: Conv1D(2, 4, "linear"), (6, 2)),
    "conv_relu": (lambda: Conv1D(3, 3, "relu"), (5, 3)),
    "maxpool": (lambda: MaxPool1D(2), (6, 3)),
    "upsample": (lambda: UpSample1D(3), (4, 2)),
    "dense_tanh": (lambda: Dense(5, "tanh"), (7,)),
    "dense_relu": (lambda: Dense(4, "relu"), (6,)),
    "flatten": (lambda: Flatten(), (4, 3)),
    "reshape": (lambda: Reshape((3, 4)), (12,)),
    "parallel_add": (lambda: ParallelAdd([Conv1D(3, 3), MaxPool1D(2)], [Conv1D(3, 5), MaxPool1D(2)]), (6, 2)),
}


@pytest.mark.parametrize("name", sorted(LAYER_CASES))
def test_layer_gradients(name):
    make, shape = LAYER_CASES[name]
    rng = np.random.default_rng(11)
    layer = built(make(), shape)
    x = rng.normal(size=(2, *shape))
    errs = layer_grad_errors(layer, x, rng)
    assert max(errs.values()) < 1e-4, errs


class TestLayers:
    def test_maxpool_example(self):
        y, _ = MaxPool1D(2).forward(np.array([1.0, 3.0, 2.0, 0.0]).reshape(1, 4, 1))
        np.testing.assert_array_equal(y.ravel(), [3.0, 2.0])

    def test_upsample_repeats(self):
        y, _ = UpSample1D(2).forward(np.array([1.0, 2.0]).reshape(1, 2, 1))
        np.testing.assert_array_equal(y.ravel(), [1, 1, 2, 2])

    def test_conv_same_length(self):
        conv = built(Conv1D(6, 7), (500, 40))
        assert conv.forward(np.zeros((2, 500, 40)))[0].shape == (2, 500, 6)

    def test_conv_identity_kernel(self):
        conv = built(Conv1D(1, 3, "linear"), (5, 1))
        conv.params["W"][:] = 0
        conv.params["W"][1, 0, 0] = 1.0
        x = np.arange(5.0).reshape(1, 5, 1)
        np.testing.assert_array_equal(conv.forward(x)[0], x)

    def test_pool_rejects_indivisible(self):
        with pytest.raises(ShapeError):
            built(MaxPool1D(3), (10, 2))

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            Dense(3, "sigmoid")

    def test_parallel_branch_mismatch(self):
        with pytest.raises(ShapeError):
            built(ParallelAdd([MaxPool1D(2)], [MaxPool1D(5)]), (10, 2))


class TestLoss:
    def test_log_cosh_one(self):
        assert log_cosh(1.0) == pytest.approx(0.433780830483, abs=1e-9)
        assert log_cosh(1000.0) == pytest.approx(1000 - math.log(2))

    def test_zero_input(self):
        I = np.zeros((3, 4))
        Y = np.zeros((3, 4))
        Y[1, 2] = 1.0
        loss, _ = masked_logcosh_loss(Y, I)
        assert loss == pytest.approx(0.1 * 0.43378083048302 / 12, rel=1e-10)

    def test_perfect(self):
        I = np.random.default_rng(0).uniform(size=(5, 5))
        loss, grad = masked_logcosh_loss(I, I)
        assert loss == 0.0 and not grad.any()

    def test_mask_term(self):
        I = np.array([[0.5, 0.0]])
        Y = np.array([[1.5, 0.0]])
        loss, _ = masked_logcosh_loss(Y, I)
        assert loss == pytest.approx(1.1 * 0.43378083048302 / 2, rel=1e-10)

    def test_gradient(self):
        rng = np.random.default_rng(5)
        I = rng.uniform(size=(2, 6, 3)) * (rng.uniform(size=(2, 6, 3)) > 0.4)
        Y = rng.normal(size=I.shape)
        _, g = masked_logcosh_loss(Y, I)
        num = central_diff(lambda: masked_logcosh_loss(Y, I)[0], Y)
        assert rel_err(g, num) < 1e-4

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            masked_logcosh_loss(np.zeros((2, 3)), np.zeros((3, 2)))


def mini_patches(n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.2, 1.0, (n, 20, 4))
    lengths = rng.integers(5, 21, n)
    for k, L in enumerate(lengths):
        x[k, L:] = 0.0
    return x


def generic_mini_model(seed):
    """Mini network with non-zero biases.

    With all biases at zero the padded rows carry exact zeros and max-pool
    windows tie, which is a kink where finite differences do not apply.
    """
    m = AutoencoderModel.initialize(MINI_ARCHITECTURE, seed=seed)
    rng = np.random.default_rng([seed, 99])
    for name, p in m.parameters().items():
        if name.endswith(".b"):
            p[:] = rng.normal(0.0, 0.1, p.shape)
    return m


class TestModel:
    def test_full_shapes(self):
        m = AutoencoderModel.initialize(Architecture(), seed=0)
        z = m.encode(np.zeros((2, 500, 40)))
        assert z.shape == (2, 12)
        y = m.decode(z)
        assert y.shape == (2, 500, 40) and y.min() >= 0

    @pytest.mark.parametrize("variant", ["grouped", "single", "serial"])
    def test_variants_build(self, variant):
        m = AutoencoderModel.initialize(Architecture(variant=variant), seed=0)
        assert m.encode(np.zeros((1, 500, 40))).shape == (1, 12)

    def test_end_to_end_gradient_mini(self):
        m = generic_mini_model(seed=0)
        batch = mini_patches(3, seed=4)
        _, grads = m.forward_loss(batch)
        params = m.parameters()
        assert set(grads) == set(params)
        for name, p in params.items():
            num = central_diff(lambda: m.forward_loss(batch)[0], p, h=1e-3)
            assert rel_err(grads[name], num) < 1e-4, name

    def test_small_step_gradient_other_draws(self):
        # away from the fixed fixture a 1e-3 step may straddle a pooling tie; 1e-6 does not
        for seed in range(1, 4):
            m = generic_mini_model(seed)
            batch = mini_patches(3, seed=seed)
            _, grads = m.forward_loss(batch)
            for name, p in m.parameters().items():
                num = central_diff(lambda: m.forward_loss(batch)[0], p, h=1e-6)
                assert rel_err(grads[name], num) < 1e-4, (seed, name)

    def test_encode_rejects_unnormalized(self):
        m = AutoencoderModel.initialize(MINI_ARCHITECTURE, seed=0)
        with pytest.raises(ValueError):
            m.encode(np.full((1, 20, 4), 2.0))

    def test_wrong_patch_shape(self):
        m = AutoencoderModel.initialize(MINI_ARCHITECTURE, seed=0)
        with pytest.raises(ShapeError):
            m.encode(np.zeros((1, 21, 4)))

    def test_bad_architecture(self):
        with pytest.raises(ShapeError):
            AutoencoderModel.initialize(Architecture(length=30, channels=4, pools=(2, 5, 5)))

    def test_training_deterministic(self):
        x = mini_patches(40)
        cfg = TrainConfig(epochs=5)
        a = train_autoencoder(x, cfg, seed=9, arch=MINI_ARCHITECTURE)
        b = train_autoencoder(x, cfg, seed=9, arch=MINI_ARCHITECTURE)
        assert a.train_loss == b.train_loss
        for k, v in a.parameters().items():
            np.testing.assert_array_equal(v, b.parameters()[k])
        c = train_autoencoder(x, cfg, seed=10, arch=MINI_ARCHITECTURE)
        assert c.train_loss != a.train_loss

    def test_training_reduces_loss(self):
        x = mini_patches(48)
        m = train_autoencoder(x, TrainConfig(epochs=30, learning_rate=0.01), seed=0, arch=MINI_ARCHITECTURE)
        assert m.train_loss[-1] < 0.5 * m.train_loss[0]
        assert len(m.val_loss) == 30

    def test_too_few_patches(self):
        with pytest.raises(ValueError):
            train_autoencoder(mini_patches(10), TrainConfig(), arch=MINI_ARCHITECTURE)

    def test_persistence(self, tmp_path):
        x = mini_patches(20)
        scaler = GridScaler(np.zeros((20, 4)), np.ones((20, 4)))
        m = train_autoencoder(x, TrainConfig(epochs=2), seed=1, arch=MINI_ARCHITECTURE, scaler=scaler)
        save_autoencoder(tmp_path / "ae.bin", m)
        back = load_autoencoder(tmp_path / "ae.bin")
        np.testing.assert_array_equal(back.encode(x), m.encode(x))
        np.testing.assert_array_equal(back.scaler.cell_max, scaler.cell_max)
        assert back.train_loss == m.train_loss
