import numpy as np
import pytest

from reslearn.errors import BadConfig, CheckpointError, NonFiniteLoss, ShapeMismatch
from reslearn.models import KINDS, PredictorConfig, build_predictor
from reslearn.models.transformer import _softmax, positional_encoding


def small_config(kind, **overrides):
    base = dict(
        kind=kind,
        lookback=8,
        hidden_width=8,
        d_model=8,
        n_heads=2,
        n_layers=2,
        ffn_width=12,
        seed=1,
    )
    base.update(overrides)
    return PredictorConfig(**base)


def grad_fixture():
    # seed chosen so no ReLU pre-activation sits within the FD step of zero,
    # which would otherwise corrupt the finite-difference reference
    rng = np.random.default_rng(1)
    X = rng.uniform(0.1, 0.9, (4, 8))
    y = rng.uniform(0.1, 0.9, 4)
    return X, y


def max_relative_grad_error(model, X, y, eps=1e-4):
    _, grads = model.loss_and_grad(X, y)
    analytic = model.flat_grad(grads)
    flat = model.get_flat_params()
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += eps
        model.set_flat_params(bumped)
        up, _ = model.loss_and_grad(X, y)
        bumped[i] -= 2 * eps
        model.set_flat_params(bumped)
        down, _ = model.loss_and_grad(X, y)
        numeric[i] = (up - down) / (2 * eps)
    model.set_flat_params(flat)
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale))


class TestGradients:
    @pytest.mark.parametrize("kind", KINDS)
    def test_backward_matches_finite_differences(self, kind):
        model = build_predictor(small_config(kind))
        X, y = grad_fixture()
        assert max_relative_grad_error(model, X, y) < 1e-3


class TestConfig:
    def test_unknown_kind(self):
        with pytest.raises(BadConfig):
            PredictorConfig(kind="rnn")

    def test_heads_must_divide_d_model(self):
        with pytest.raises(BadConfig):
            PredictorConfig(kind="transformer", d_model=10, n_heads=3)

    def test_negative_lr(self):
        with pytest.raises(BadConfig):
            PredictorConfig(kind="fcnn", learning_rate=-1.0)


class TestDeterminism:
    @pytest.mark.parametrize("kind", KINDS)
    def test_same_seed_same_params_and_fit(self, kind):
        X, y = grad_fixture()
        a = build_predictor(small_config(kind, epochs=3))
        b = build_predictor(small_config(kind, epochs=3))
        for k in a.params:
            np.testing.assert_array_equal(a.params[k], b.params[k])
        ta = a.fit(X, y)
        tb = b.fit(X, y)
        assert ta.train_loss == tb.train_loss
        np.testing.assert_array_equal(a.get_flat_params(), b.get_flat_params())

    def test_different_seed_different_init(self):
        a = build_predictor(small_config("fcnn", seed=1))
        b = build_predictor(small_config("fcnn", seed=2))
        assert not np.array_equal(a.get_flat_params(), b.get_flat_params())


class TestTraining:
    @pytest.mark.parametrize("kind", KINDS)
    def test_fits_constant_series(self, kind):
        cfg = small_config(kind, lookback=8, epochs=200, learning_rate=1e-2,
                           hidden_width=16, d_model=16, ffn_width=16)
        model = build_predictor(cfg)
        X = np.full((40, 8), 0.5)
        y = np.full(40, 0.5)
        model.fit(X, y)
        pred = model.predict(X)
        assert np.mean((pred - y) ** 2) < 1e-6

    def test_fcnn_fits_window_mean(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(0, 1, (200, 8))
        y = X.mean(axis=1)
        cfg = small_config("fcnn", epochs=400, learning_rate=3e-3, hidden_width=32)
        model = build_predictor(cfg)
        model.fit(X, y)
        assert np.mean((model.predict(X) - y) ** 2) < 1e-5

    def test_zero_epochs_no_update(self):
        model = build_predictor(small_config("fcnn", epochs=0))
        before = model.get_flat_params().copy()
        X, y = grad_fixture()
        trace = model.fit(X, y)
        assert trace.epochs_run == 0
        np.testing.assert_array_equal(model.get_flat_params(), before)

    def test_early_stopping_with_unreachable_delta(self):
        # min_delta so large no epoch ever counts as an improvement after the
        # first, so training stops after exactly patience more epochs
        cfg = small_config("fcnn", epochs=100, early_stop_patience=3,
                           early_stop_min_delta=1e9)
        model = build_predictor(cfg)
        X, y = grad_fixture()
        trace = model.fit(X, y, X, y)
        assert trace.epochs_run == 4

    def test_best_val_params_restored(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(0, 1, (60, 8))
        y = X.mean(axis=1)
        Xv = rng.uniform(0, 1, (20, 8))
        yv = Xv.mean(axis=1)
        cfg = small_config("fcnn", epochs=40, learning_rate=1e-2)
        model = build_predictor(cfg)
        trace = model.fit(X, y, Xv, yv)
        final_val = float(np.mean((model.predict(Xv) - yv) ** 2))
        assert final_val == pytest.approx(trace.val_loss[trace.best_epoch], rel=1e-9)
        # improvements below min_delta are not recorded, so "best" may sit
        # within min_delta of the raw minimum but never worse than that
        assert trace.val_loss[trace.best_epoch] <= min(trace.val_loss) + cfg.early_stop_min_delta

    def test_divergence_raises(self):
        # learning rate large enough that squared errors overflow to inf
        cfg = small_config("fcnn", epochs=50, learning_rate=1e100)
        model = build_predictor(cfg)
        rng = np.random.default_rng(4)
        X = rng.uniform(0, 1, (32, 8)) * 1e6
        y = rng.uniform(0, 1, 32) * 1e6
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NonFiniteLoss):
                model.fit(X, y)

    def test_shape_mismatch(self):
        model = build_predictor(small_config("lstm"))
        with pytest.raises(ShapeMismatch):
            model.predict(np.zeros((4, 5)))
        with pytest.raises(ShapeMismatch):
            model.fit(np.zeros((4, 8)), np.zeros(3))


class TestArchitectures:
    def test_stacked_lstm_has_more_params_than_lstm(self):
        lstm = build_predictor(small_config("lstm"))
        stacked = build_predictor(small_config("stacked_lstm"))
        assert stacked.get_flat_params().size > lstm.get_flat_params().size

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(5)
        scores = rng.normal(0, 3, (2, 4, 6, 6))
        probs = _softmax(scores)
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-12)
        assert probs.min() >= 0

    def test_positional_encoding_shape_and_bounds(self):
        pe = positional_encoding(16, 8)
        assert pe.shape == (16, 8)
        assert np.abs(pe).max() <= 1.0
        # position 0 is sin(0)/cos(0) pairs
        np.testing.assert_allclose(pe[0, 0::2], 0.0, atol=1e-12)
        np.testing.assert_allclose(pe[0, 1::2], 1.0, atol=1e-12)

    def test_gate_activations_bounded(self):
        model = build_predictor(small_config("gru"))
        X, _ = grad_fixture()
        pred = model.predict(X * 100)
        assert np.all(np.isfinite(pred))


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        X, y = grad_fixture()
        model = build_predictor(small_config("transformer", epochs=2))
        model.fit(X, y)
        path = tmp_path / "model.npz"
        model.save(path)
        loaded = type(model).load(path)
        np.testing.assert_array_equal(loaded.get_flat_params(), model.get_flat_params())
        np.testing.assert_array_equal(loaded.predict(X), model.predict(X))

    def test_version_rejected(self, tmp_path):
        import json

        model = build_predictor(small_config("fcnn"))
        path = tmp_path / "model.npz"
        meta = {"version": 99, "config": {"kind": "fcnn"}}
        np.savez(path, __meta__=json.dumps(meta), **model.params)
        with pytest.raises(CheckpointError):
            type(model).load(path)

    def test_shape_mismatch_rejected(self, tmp_path):
        import json

        model = build_predictor(small_config("fcnn"))
        path = tmp_path / "model.npz"
        from dataclasses import asdict

        broken = {k: v for k, v in model.params.items()}
        first = sorted(broken)[0]
        broken[first] = np.zeros((2, 2))
        meta = {"version": 1, "config": asdict(model.config)}
        np.savez(path, __meta__=json.dumps(meta), **broken)
        with pytest.raises(CheckpointError):
            type(model).load(path)
