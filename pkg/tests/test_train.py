import json
import struct
from pathlib import Path

import numpy as np
import pytest

from shadownet.core import relu
from shadownet.errors import FormatError
from shadownet.train import (Dataset, MlpParams, SynthOptions, TrainConfig, TrainState, gen_blobs, label_agreement,
                             load_csv, load_idx, mlp_backward, mlp_forward, regularizer_grad, shadow_synthesize,
                             smooth3x3, split, train, train_epoch, write_idx)
from shadownet.train.mlp import cross_entropy

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_params():
    fx = json.loads((FIXTURES / "forward_table.json").read_text())
    return fx, MlpParams([np.array(fx[k], float) for k in ("W1", "W2", "W3")],
                         [np.array(fx[k], float) for k in ("b1", "b2", "b3")])


def kink_free_params(seed, d=5, w1=7, w2=6, c=3, n=8, margin=1e-3):
    """Random small net and batch whose hidden pre-activations all stay away from 0."""
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        p = MlpParams([rng.standard_normal((d, w1)), rng.standard_normal((w1, w2)), rng.standard_normal((w2, c))],
                      [rng.standard_normal(w1) * 0.1, rng.standard_normal(w2) * 0.1, rng.standard_normal(c) * 0.1])
        X = rng.standard_normal((n, d))
        a1 = X @ p.weights[0] + p.biases[0]
        a2 = relu(a1) @ p.weights[1] + p.biases[1]
        if np.abs(a1).min() > margin and np.abs(a2).min() > margin:
            return p, X, rng.integers(0, c, n)
    raise AssertionError("no kink-free point found")


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)


class TestForward:
    def test_hand_table(self):
        fx, p = fixture_params()
        h1, h2, logits = mlp_forward(p, np.array(fx["inputs"], float))
        np.testing.assert_allclose(h1, fx["h1"], atol=1e-15)
        np.testing.assert_allclose(h2, fx["h2"], atol=1e-15)
        np.testing.assert_allclose(logits, fx["logits"], atol=1e-15)

    def test_zero_net(self):
        p = MlpParams([np.zeros((3, 4)), np.zeros((4, 4)), np.zeros((4, 2))], [np.zeros(4), np.zeros(4), np.zeros(2)])
        assert np.all(mlp_forward(p, np.ones((2, 3)))[2] == 0)

    def test_single_unit_chain(self):
        p = MlpParams([np.array([[2.0]]), np.array([[-1.0]]), np.array([[3.0]])],
                      [np.array([-1.0]), np.array([4.0]), np.array([0.5])])
        for x in (-2.0, 0.0, 1.0, 3.0):
            h1 = max(2 * x - 1, 0)
            h2 = max(-h1 + 4, 0)
            assert mlp_forward(p, [x])[2][0, 0] == 3 * h2 + 0.5

    def test_masks_zero_units(self):
        _, p = fixture_params()
        m = (np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
        h1, h2, _ = mlp_forward(p, [[1.0, 1.0]], m)
        assert h1[0, 1] == 0 and h2[0, 0] == 0

    def test_shape_mismatch(self):
        _, p = fixture_params()
        with pytest.raises(ValueError):
            mlp_forward(p, np.ones((1, 3)))


class TestBackward:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_finite_differences(self, seed):
        p, X, y = kink_free_params(seed)
        g = mlp_backward(p, X, y)
        eps = 1e-5
        for arrs, grads in ((p.weights, g.weights), (p.biases, g.biases)):
            for A, G in zip(arrs, grads):
                fd = np.zeros_like(A)
                for idx in np.ndindex(A.shape):
                    old = A[idx]
                    A[idx] = old + eps
                    fp = mlp_backward(p, X, y).loss
                    A[idx] = old - eps
                    fm = mlp_backward(p, X, y).loss
                    A[idx] = old
                    fd[idx] = (fp - fm) / (2 * eps)
                assert rel_err(fd, G) <= 1e-4

    def test_saturated_prediction(self):
        p = MlpParams([np.eye(2), np.eye(2), 1e3 * np.array([[1.0, -1.0], [0.0, 0.0]])],
                      [np.zeros(2), np.zeros(2), np.zeros(2)])
        g = mlp_backward(p, [[1.0, 0.0]], [0])
        assert max(np.abs(a).max() for a in g.weights + g.biases) <= 1e-6

    def test_batch_is_mean(self):
        p, X, y = kink_free_params(4)
        g = mlp_backward(p, X, y)
        singles = [mlp_backward(p, X[i], y[i]) for i in range(len(y))]
        for j in range(3):
            np.testing.assert_allclose(g.weights[j], np.mean([s.weights[j] for s in singles], axis=0),
                                       rtol=0, atol=1e-12)
        assert g.loss == pytest.approx(np.mean([s.loss for s in singles]), abs=1e-12)

    def test_bad_label(self):
        _, p = fixture_params()
        with pytest.raises(ValueError):
            mlp_backward(p, [[1.0, 0.0]], [2])


class TestAgreement:
    def test_identical(self):
        _, p = fixture_params()
        X = np.random.default_rng(0).random((10, 2))
        assert label_agreement(p, X, X) == 1.0

    def test_tie_breaks_low_index(self):
        p = MlpParams([np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3))], [np.zeros(2), np.zeros(2), np.ones(3)])
        assert label_agreement(p, np.ones((4, 2)), -np.ones((4, 2))) == 1.0

    def test_mismatch(self):
        _, p = fixture_params()
        with pytest.raises(ValueError):
            label_agreement(p, np.ones((3, 2)), np.ones((2, 2)))


class TestSynthesis:
    def setup_method(self):
        self.p = MlpParams.init(6, 8, 5, 3, 1)

    def test_zero_source(self):
        assert np.all(shadow_synthesize(self.p, np.zeros(5), SynthOptions(), 1) == 0)

    def test_keep_one_matches_plain(self):
        h = np.abs(np.random.default_rng(2).standard_normal((4, 5)))
        a = shadow_synthesize(self.p, h, SynthOptions(sampling=True, sampling_keep=1.0), 7)
        np.testing.assert_array_equal(a, shadow_synthesize(self.p, h, SynthOptions(), 99))

    def test_nonnegative_and_sparser(self):
        h = np.abs(np.random.default_rng(3).standard_normal((400, 5)))
        x = shadow_synthesize(self.p, h, SynthOptions(sampling=True, sampling_keep=0.5, rescale=False), 3)
        assert np.all(x >= 0) and np.mean(x > 0) <= 0.5 + 0.03

    def test_tied_weights(self):
        h = np.ones(5)
        before = shadow_synthesize(self.p, h, SynthOptions(rescale=False), 1)
        self.p.weights[0] *= 2.0
        after = shadow_synthesize(self.p, h, SynthOptions(rescale=False), 1)
        np.testing.assert_allclose(after, 2 * before, rtol=1e-14)

    def test_plain_chain(self):
        h = np.array([1.0, 0, 2, 0, 1])
        W1, W2, _ = self.p.weights
        x = shadow_synthesize(self.p, h, SynthOptions(rescale=False), 1)
        np.testing.assert_allclose(x, relu(W1 @ relu(W2 @ h)), rtol=1e-14)

    def test_h3_source(self):
        x = shadow_synthesize(self.p, np.ones(3), SynthOptions(source_layer="h3"), 1)
        assert x.shape == (6,)

    def test_option_errors(self):
        with pytest.raises(ValueError):
            SynthOptions(smoothing=True)
        with pytest.raises(ValueError):
            SynthOptions(source_layer="h1")
        with pytest.raises(ValueError):
            shadow_synthesize(self.p, np.ones(4), SynthOptions(), 1)


class TestSmooth:
    def test_constant(self):
        img = np.full(4 * 3 * 2, 0.7)
        np.testing.assert_allclose(smooth3x3(img, (4, 3, 2)), img, rtol=1e-15)

    def test_single_pixel(self):
        img = np.zeros((5, 5, 1))
        img[2, 2, 0] = 9.0
        out = smooth3x3(img.ravel(), (5, 5, 1)).reshape(5, 5)
        expect = np.zeros((5, 5))
        expect[1:4, 1:4] = 1.0
        np.testing.assert_allclose(out, expect, atol=1e-15)

    def test_mean_preserved_for_interior_images(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            img = np.zeros((5, 5, 1))
            img[2, 2, 0] = rng.random()
            assert smooth3x3(img.ravel(), (5, 5, 1)).mean() == pytest.approx(img.mean(), rel=1e-14)

    def test_channels_independent(self):
        img = np.zeros((3, 3, 2))
        img[1, 1, 0] = 9.0
        out = smooth3x3(img.ravel(), (3, 3, 2)).reshape(3, 3, 2)
        assert np.all(out[..., 1] == 0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            smooth3x3(np.zeros(10), (3, 3, 1))


class TestRegularizer:
    def test_zero_hidden(self):
        W = np.random.default_rng(0).standard_normal((4, 3))
        assert np.all(regularizer_grad(W, np.zeros(3), np.ones(4)) == 0)

    def test_exact_fit_vanishes(self):
        rng = np.random.default_rng(1)
        W, h = rng.standard_normal((6, 3)), rng.random(3)
        assert np.all(regularizer_grad(W, h, relu(W @ h)) == 0)

    @pytest.mark.parametrize("subset", [None, [0, 2, 3]])
    def test_masked_is_half_gradient(self, subset):
        rng = np.random.default_rng(7)
        while True:
            W, h, x = rng.standard_normal((5, 4)), rng.random(4), rng.random(5)
            if np.abs(W @ h).min() > 1e-3:
                break
        sel = np.ones(5) if subset is None else np.isin(np.arange(5), subset).astype(float)

        def R(Wv):
            return float(np.sum((sel * (x - relu(Wv @ h))) ** 2))

        eps = 1e-6
        fd = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            Wp, Wm = W.copy(), W.copy()
            Wp[idx] += eps
            Wm[idx] -= eps
            fd[idx] = (R(Wp) - R(Wm)) / (2 * eps)
        got = regularizer_grad(W, h, x, masked_variant=True, subset_T=subset)
        assert rel_err(got, -0.5 * fd) <= 1e-4

    def test_printed_form(self):
        rng = np.random.default_rng(2)
        W, h, x = rng.standard_normal((4, 3)), rng.random(3), rng.random(4)
        z = W @ h
        np.testing.assert_allclose(regularizer_grad(W, h, x), np.outer(x - relu(z) * (z > 0), h), rtol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            regularizer_grad(np.zeros((4, 3)), np.zeros(2), np.zeros(4))


def blobs_fixture():
    data = gen_blobs(200, 3, 20, 0.3, 5)
    return split(data, 0.7, 6)


class TestTraining:
    def test_zero_lr_bit_exact(self):
        tr, _ = blobs_fixture()
        p = MlpParams.init(20, 16, 16, 3, 1)
        cfg = TrainConfig(learning_rate=0.0, shadow_weight=0.25, reg_lambdas=(0.1, 0.1), dropout_ratio=0.5)
        state, _ = train_epoch(TrainState(p), tr, cfg, 3)
        for a, b in zip(state.params.arrays(), p.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_flags_off_is_plain_sgd(self):
        tr, _ = blobs_fixture()
        p = MlpParams.init(20, 16, 16, 3, 1)
        cfg = TrainConfig(learning_rate=0.1, batch_size=32)
        state, _ = train_epoch(TrainState(p), tr, cfg, 4)
        # reference loop built from the same permutation
        from shadownet.core import make_rng
        q = p.copy()
        order = make_rng(4).permutation(len(tr))
        for s in range(0, len(tr), 32):
            idx = order[s: s + 32]
            g = mlp_backward(q, tr.inputs[idx], tr.labels[idx])
            for j in range(3):
                q.weights[j] -= 0.1 * g.weights[j]
                q.biases[j] -= 0.1 * g.biases[j]
        for a, b in zip(state.params.arrays(), q.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_deterministic(self):
        tr, va = blobs_fixture()
        cfg = TrainConfig(shadow_weight=0.25, dropout_ratio=0.2, reg_lambdas=(0.01, 0.01), epochs=2, batch_size=50)
        a, ha = train(cfg, tr, va, hidden=(32, 32))
        b, hb = train(cfg, tr, va, hidden=(32, 32))
        assert ha == hb
        for x, y in zip(a.params.arrays(), b.params.arrays()):
            np.testing.assert_array_equal(x, y)

    def test_blobs_loss_monotone(self):
        tr, va = blobs_fixture()
        cfg = TrainConfig(learning_rate=0.05, shadow_weight=0.25, batch_size=50, epochs=5)
        _, hist = train(cfg, tr, va)
        losses = [m["train_loss"] for m in hist]
        assert all(b <= a for a, b in zip(losses, losses[1:]))
        assert hist[-1]["val_error"] <= hist[0]["val_error"]

    def test_empty_data(self):
        empty = Dataset(np.zeros((0, 3)), np.zeros(0, int), 2)
        with pytest.raises(ValueError):
            train_epoch(TrainState(MlpParams.init(3, 4, 4, 2, 0)), empty, TrainConfig(), 0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=-1)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(dropout_ratio=1.0)


class TestData:
    def test_blobs_counts(self):
        d = gen_blobs(10, 3, 2, 0.1, 0)
        assert len(d) == 30 and set(d.labels.tolist()) == {0, 1, 2}

    def test_blob_means_unit_apart(self):
        d = gen_blobs(5000, 3, 5, 0.0, 0)
        means = np.array([d.inputs[d.labels == c].mean(axis=0) for c in range(3)])
        dists = [np.linalg.norm(means[i] - means[j]) for i in range(3) for j in range(i + 1, 3)]
        np.testing.assert_allclose(dists, 1.0, atol=1e-12)

    def test_split_sizes(self):
        a, b = split(gen_blobs(10, 2, 2, 0.1, 0), 0.7, 1)
        assert (len(a), len(b)) == (14, 6)

    def test_csv(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("1,0.5,0.25\n0,1,2\n")
        d = load_csv(f)
        assert d.labels.tolist() == [1, 0]
        np.testing.assert_array_equal(d.inputs[0], [0.5, 0.25])

    def test_csv_errors_carry_offset(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("1,0.5,0.25\n0,abc,2\n")
        with pytest.raises(FormatError) as e:
            load_csv(f)
        assert e.value.offset == len("1,0.5,0.25\n")
        f.write_text("1,0.5,0.25\n0,1\n")
        with pytest.raises(FormatError):
            load_csv(f)

    def test_idx_round_trip(self, tmp_path):
        imgs = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
        write_idx(imgs, [1, 0], tmp_path / "i", tmp_path / "l")
        raw = (tmp_path / "i").read_bytes()
        assert raw[:4] == bytes([0, 0, 8, 3])
        d = load_idx(tmp_path / "i", tmp_path / "l", scale=1.0)
        np.testing.assert_array_equal(d.inputs, imgs.reshape(2, -1))
        assert d.labels.tolist() == [1, 0]

    def test_idx_rejects_bad_magic_and_truncation(self, tmp_path):
        imgs = np.zeros((1, 2, 2), dtype=np.uint8)
        write_idx(imgs, [0], tmp_path / "i", tmp_path / "l")
        raw = (tmp_path / "i").read_bytes()
        (tmp_path / "i").write_bytes(bytes([0, 0, 8, 4]) + raw[4:])
        with pytest.raises(FormatError) as e:
            load_idx(tmp_path / "i", tmp_path / "l")
        assert e.value.offset == 0
        (tmp_path / "i").write_bytes(raw[:-1])
        with pytest.raises(FormatError):
            load_idx(tmp_path / "i", tmp_path / "l")
        (tmp_path / "i").write_bytes(raw + b"\x00")
        with pytest.raises(FormatError):
            load_idx(tmp_path / "i", tmp_path / "l")
        (tmp_path / "i").write_bytes(struct.pack(">I", 0x803))
        with pytest.raises(FormatError):
            load_idx(tmp_path / "i", tmp_path / "l")
