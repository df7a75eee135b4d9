import math

import numpy as np
import pytest

from knotrate import _kernels
from knotrate.featstore import FeatureSequence
from knotrate.tcn import (
    ArchConfig,
    Normalizer,
    NumericError,
    TrainConfig,
    WindowSample,
    forward,
    grad_check,
    init_model,
    load_model,
    loss_and_grads,
    padded_windows,
    predict_sequence,
    save_model,
    train,
)

SMALL = ArchConfig(input_dim=8, hidden_width=8, dilations=(1, 2))


def random_window(arch, seed=0):
    return np.random.default_rng(seed).standard_normal((arch.context_len, arch.input_dim))


class TestArch:
    def test_receptive_field(self):
        arch = ArchConfig(kernel_size=3, dilations=(1, 2, 4, 8))
        assert arch.receptive_field == 31
        assert arch.context_len == 31

    def test_small_receptive_field(self):
        assert SMALL.context_len == 7

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            ArchConfig(kernel_size=4)

    def test_bad_dilations_rejected(self):
        with pytest.raises(ValueError):
            ArchConfig(dilations=(1, 0))


class TestInit:
    def test_deterministic(self):
        m1, m2 = init_model(SMALL, 13), init_model(SMALL, 13)
        for p1, p2 in zip(m1.parameters(), m2.parameters()):
            assert np.array_equal(p1, p2)

    def test_seeds_differ(self):
        m1, m2 = init_model(SMALL, 0), init_model(SMALL, 2022)
        assert any(
            not np.array_equal(p1, p2)
            for p1, p2 in zip(m1.parameters(), m2.parameters())
        )


class TestForward:
    def test_softmax_normalized(self):
        model = init_model(SMALL, 1)
        _, probs = forward(model, random_window(SMALL))
        assert probs.min() >= 0
        assert abs(probs.sum() - 1.0) < 1e-6

    def test_logit_shift_invariance(self):
        model = init_model(SMALL, 1)
        logits, probs = forward(model, random_window(SMALL))
        from knotrate.tcn import softmax

        shifted = softmax(logits + 17.5)
        assert np.abs(shifted - probs).max() < 1e-6

    def test_zero_model_uniform(self):
        model = init_model(SMALL, 1)
        model.set_parameters([np.zeros_like(p) for p in model.parameters()])
        _, probs = forward(model, random_window(SMALL))
        assert np.abs(probs - 1 / 12).max() < 1e-12

    def test_shape_mismatch(self):
        model = init_model(SMALL, 1)
        with pytest.raises(ValueError):
            forward(model, np.zeros((5, SMALL.input_dim)))


class TestLoss:
    def test_uniform_loss_is_log12(self):
        model = init_model(SMALL, 1)
        model.set_parameters([np.zeros_like(p) for p in model.parameters()])
        loss, _ = loss_and_grads(model, [WindowSample(random_window(SMALL), 4)])
        assert abs(loss - math.log(12)) < 1e-9

    def test_empty_batch_rejected(self):
        model = init_model(SMALL, 1)
        with pytest.raises(ValueError):
            loss_and_grads(model, [])

    def test_grad_shapes_match(self):
        model = init_model(SMALL, 1)
        _, grads = loss_and_grads(model, [WindowSample(random_window(SMALL), 0)])
        for g, p in zip(grads, model.parameters()):
            assert g.shape == p.shape


class TestGradCheck:
    def test_fresh_model_passes(self):
        model = init_model(SMALL, 3)
        sample = WindowSample(random_window(SMALL, 3), 7)
        assert grad_check(model, sample, epsilon=1e-4, n_coords=200, seed=0) < 1e-3

    def test_epsilon_zero_rejected(self):
        model = init_model(SMALL, 3)
        with pytest.raises(ValueError):
            grad_check(model, WindowSample(random_window(SMALL), 0), epsilon=0)

    def test_zero_gradient_coordinate(self):
        # all-zero model: ReLU outputs are 0 with 0 pre-activation, so conv
        # weight gradients vanish analytically and numerically
        model = init_model(SMALL, 1)
        model.set_parameters([np.zeros_like(p) for p in model.parameters()])
        sample = WindowSample(np.zeros((SMALL.context_len, SMALL.input_dim)), 0)
        _, grads = loss_and_grads(model, [sample])
        assert np.all(grads[0] == 0.0)


class TestTrain:
    def test_zero_lr_keeps_parameters(self):
        model = init_model(SMALL, 5)
        before = [p.copy() for p in model.parameters()]
        data = [WindowSample(random_window(SMALL, i), i % 12) for i in range(8)]
        _, history = train(model, data, TrainConfig(learning_rate=0.0, epochs=3))
        assert len(history) == 3
        assert history[0] == pytest.approx(history[2])
        for p, b in zip(model.parameters(), before):
            assert np.array_equal(p, b)

    def test_memorize_single_sample(self):
        model = init_model(SMALL, 5)
        data = [WindowSample(random_window(SMALL, 1), 9)]
        _, history = train(
            model, data, TrainConfig(learning_rate=1e-2, epochs=200, weight_decay=0.0)
        )
        assert history[-1] < 0.01

    def test_deterministic_training(self):
        data = [WindowSample(random_window(SMALL, i), i % 12) for i in range(16)]
        cfg = TrainConfig(epochs=3, seed=7)
        m1, _ = train(init_model(SMALL, 2), list(data), cfg)
        m2, _ = train(init_model(SMALL, 2), list(data), cfg)
        for p1, p2 in zip(m1.parameters(), m2.parameters()):
            assert p1.tobytes() == p2.tobytes()

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train(init_model(SMALL, 0), [], TrainConfig())


class TestPredictSequence:
    def make_seq(self, t, seed=0):
        rng = np.random.default_rng(seed)
        return FeatureSequence(
            rng.standard_normal((t, SMALL.input_dim)).astype(np.float32),
            np.arange(t, dtype=np.int64) * 8 + 8,
        )

    def test_length_one(self):
        model = init_model(SMALL, 1)
        probs, labels = predict_sequence(model, self.make_seq(1), Normalizer.identity(8))
        assert probs.shape == (1, 12)
        assert labels.shape == (1,)

    def test_output_length_matches_input(self):
        model = init_model(SMALL, 1)
        for t in (1, 2, 7, 20):
            probs, _ = predict_sequence(model, self.make_seq(t), Normalizer.identity(8))
            assert probs.shape[0] == t
            assert np.abs(probs.sum(axis=1) - 1).max() < 1e-6

    def test_constant_sequence_constant_prediction(self):
        rng = np.random.default_rng(4)
        row = rng.standard_normal(SMALL.input_dim).astype(np.float32)
        seq = FeatureSequence(np.tile(row, (9, 1)), np.arange(9) * 8 + 8)
        model = init_model(SMALL, 1)
        probs, _ = predict_sequence(model, seq, Normalizer.identity(8))
        assert np.abs(probs - probs[0]).max() < 1e-12

    def test_interior_matches_raw_window(self):
        model = init_model(SMALL, 1)
        seq = self.make_seq(20, seed=9)
        norm = Normalizer.identity(8)
        probs, _ = predict_sequence(model, seq, norm)
        half = SMALL.context_len // 2
        for t in range(half, 20 - half):
            window = norm.apply(seq.vectors)[t - half : t + half + 1]
            _, expect = forward(model, window)
            assert np.abs(probs[t] - expect).max() < 1e-12

    def test_dim_mismatch(self):
        model = init_model(SMALL, 1)
        seq = FeatureSequence(np.zeros((5, 4), dtype=np.float32), np.arange(5) + 1)
        with pytest.raises(ValueError):
            predict_sequence(model, seq, Normalizer.identity(4))


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        model = init_model(SMALL, 77)
        norm = Normalizer(np.arange(8, dtype=float), np.arange(1, 9, dtype=float))
        path = tmp_path / "m.ktmc"
        save_model(model, norm, path)
        loaded, norm2 = load_model(path)
        for p1, p2 in zip(model.parameters(), loaded.parameters()):
            assert p1.tobytes() == p2.tobytes()
        assert np.array_equal(norm.mean, norm2.mean)
        assert np.array_equal(norm.std, norm2.std)
        # write again: byte-identical file
        path2 = tmp_path / "m2.ktmc"
        save_model(loaded, norm2, path2)
        assert path.read_bytes() == path2.read_bytes()


class TestBackends:
    def test_forward_backward_agree(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((4, 15, 6))
        w = rng.standard_normal((5, 6, 3))
        b = rng.standard_normal(5)
        for d in (1, 2, 4):
            y_np = _kernels._conv1d_forward_np(x, w, b, d)
            y = _kernels.conv1d_forward(x, w, b, d)
            assert np.abs(y - y_np).max() < 1e-10
            dy = rng.standard_normal(y.shape)
            g = _kernels.conv1d_backward(x, w, dy, d)
            g_np = _kernels._conv1d_backward_np(x, w, dy, d)
            for a, e in zip(g, g_np):
                assert np.abs(a - e).max() < 1e-10


class TestPaddedWindows:
    def test_shapes_and_replication(self):
        vecs = np.arange(10, dtype=float).reshape(5, 2)
        windows = padded_windows(vecs, 7)
        assert windows.shape == (5, 7, 2)
        # first window: first row replicated 3 times at the head
        assert np.array_equal(windows[0][:4], np.vstack([vecs[0]] * 3 + [vecs[0]]))
        assert np.array_equal(windows[-1][-3:], np.vstack([vecs[-1]] * 3))
