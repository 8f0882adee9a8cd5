import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cribra.classifiers.mlp import MlpConfig, MlpModel, init_params, loss_and_grads, predict_mlp, softmax, train_mlp
from cribra.classifiers.model_io import load_model, save_model
from cribra.classifiers.standardize import Standardizer
from cribra.errors import DimensionMismatch, NonFiniteLoss, SingleClassInput
from gradcheck import finite_difference_check
from oracles import mlp_forward, mlp_loss


def _blobs(rng, n=200):
    X = np.vstack([rng.normal((-2, -2), 0.7, size=(n // 2, 2)), rng.normal((2, 2), 0.7, size=(n // 2, 2))])
    y = np.r_[np.zeros(n // 2, int), np.ones(n // 2, int)]
    return X, y


def test_gradient_small_network():
    assert finite_difference_check([4, 7, 5, 2]) <= 1e-4


def test_loss_matches_oracle(rng):
    w, b = init_params([6, 16, 8, 2], rng)
    Z = rng.normal(size=(9, 6))
    y = rng.integers(0, 2, size=9)
    assert loss_and_grads(w, b, Z, y)[0] == pytest.approx(mlp_loss(w, b, Z, y), rel=1e-12)


def test_zero_weights_give_half():
    dims = [5, 512, 128, 2]
    m = MlpModel([np.zeros((a, c)) for a, c in zip(dims[:-1], dims[1:])], [np.zeros(c) for c in dims[1:]])
    p = predict_mlp(m, np.arange(5.0))
    assert p["probabilities"] == (0.5, 0.5)
    assert p["label"] == 0


def test_forward_matches_oracle(rng):
    X, y = _blobs(rng)
    m = train_mlp(X, y, MlpConfig(epochs=3, hidden=(32, 16)))
    Q = rng.normal(size=(100, 2)) * 3
    want = mlp_forward(m.weights, m.biases, (Q - m.standardizer.means) / m.standardizer.stds)
    got = m.predict_proba(Q)
    assert np.allclose(got, want, rtol=0, atol=1e-9)
    assert np.allclose(got.sum(axis=1), 1.0, atol=1e-9) and (got >= 0).all()


@settings(max_examples=60)
@given(arrays(np.float64, (4, 2), elements=st.floats(-50, 50)), st.floats(-1e3, 1e3))
def test_softmax_shift_invariance(logits, c):
    a = softmax(logits)
    assert np.allclose(a, softmax(logits + c), rtol=0, atol=1e-12)
    assert np.allclose(a.sum(axis=1), 1.0, atol=1e-12)


def test_untrained_balanced_accuracy_near_half():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(400, 6))
    y = np.r_[np.zeros(200, int), np.ones(200, int)]
    m = train_mlp(X, y, MlpConfig(epochs=0, seed=5))
    acc = float(np.mean(m.predict(X) == y))
    assert abs(acc - 0.5) <= 3 * 0.5 / np.sqrt(400)


def test_blobs_learned(rng):
    X, y = _blobs(rng)
    m = train_mlp(X, y, MlpConfig(epochs=500, hidden=(64, 32), seed=1))
    assert np.mean(m.predict(X) == y) >= 0.99


def test_full_batch_loss_non_increasing():
    rng = np.random.default_rng(2024)
    X, y = _blobs(rng, 40)
    m = train_mlp(X, y, MlpConfig(epochs=200, lr=1e-3, momentum=0.0, batch=40, hidden=(16, 8), seed=2024))
    h = np.array(m.loss_history)
    assert (np.diff(h) <= 0).all()


def test_nonfinite_loss_raises(rng):
    X, y = _blobs(rng)
    with pytest.raises(NonFiniteLoss, match="lower learning rate"):
        train_mlp(X, y, MlpConfig(epochs=50, lr=1e100, hidden=(16, 8)))


def test_snapshot_tracks_best_validation(rng):
    X, y = _blobs(rng)
    Xv, yv = _blobs(rng, 60)
    m = train_mlp(X, y, MlpConfig(epochs=30, hidden=(16, 8)), Xv, yv)
    snap = m.snapshot
    assert snap is not None
    acc = float(np.mean(snap.predict(Xv) == yv))
    assert acc == snap.info["val_accuracy"]
    assert 0 <= snap.info["epoch"] < 30
    assert len(snap.loss_history) == snap.info["epoch"] + 1


def test_errors(rng):
    with pytest.raises(SingleClassInput):
        train_mlp(rng.normal(size=(6, 3)), np.ones(6), MlpConfig(epochs=1))
    X, y = _blobs(rng)
    m = train_mlp(X, y, MlpConfig(epochs=1, hidden=(8, 4)))
    with pytest.raises(DimensionMismatch):
        predict_mlp(m, [1.0, 2.0, 3.0])


def test_deterministic(rng):
    X, y = _blobs(rng)
    cfg = MlpConfig(epochs=5, hidden=(16, 8), seed=9)
    a, b = train_mlp(X, y, cfg), train_mlp(X, y, cfg)
    assert all(p.tobytes() == q.tobytes() for p, q in zip(a.weights, b.weights))


def test_save_load_bit_identical(tmp_path, rng):
    X, y = _blobs(rng)
    m = train_mlp(X, y, MlpConfig(epochs=4, hidden=(16, 8)), *_blobs(rng, 20))
    save_model(m, tmp_path / "m.json", {"fused_width": 2})
    back = load_model(tmp_path / "m.json")
    Q = rng.normal(size=(50, 2))
    assert m.predict_proba(Q).tobytes() == back.predict_proba(Q).tobytes()
    assert m.snapshot.predict_proba(Q).tobytes() == back.snapshot.predict_proba(Q).tobytes()
    assert back.layer_dims == [2, 16, 8, 2]


def test_standardizer_flags_constant_columns():
    s = Standardizer.fit([[1.0, 5.0], [3.0, 5.0]])
    assert s.constant.tolist() == [False, True]
    assert s.stds.tolist() == [1.0, 1.0]
    assert s.transform([[2.0, 5.0]]).tolist() == [[0.0, 0.0]]
