import numpy as np
import pytest

from activegrasp.ml import (
    LDAClassifier,
    LogisticClassifier,
    QNetwork,
    gradient_check,
    height_map,
    load_model,
    pca_fit,
    pca_transform,
    save_model,
    state_vector,
)
from activegrasp.ml.features import STATE_DIM_FN
from activegrasp.sim import ExplorationSession
from activegrasp.viewsphere import SphericalPose


def test_state_dim():
    assert STATE_DIM_FN(5) == 52
    assert STATE_DIM_FN(3) == 20


def test_height_map_semantics():
    n, region = 5, 0.3
    # One tall point in the center column, one outside the region.
    pts = np.array([[0.0, 0.0, 0.07], [0.0, 0.0, 0.02], [1.0, 1.0, 0.5]])
    hm = height_map(pts, n, region)
    assert hm.shape == (n, n)
    assert hm.max() == pytest.approx(0.07)
    assert np.count_nonzero(hm) == 1


def test_state_vector_layout(cube_sim):
    sess = ExplorationSession(cube_sim)
    model = sess.state().model
    pose = SphericalPose(45.0, 120.0)
    s = state_vector(model, pose, n=5, region_m=0.3)
    assert s.shape == (52,)
    # Trailing entries carry the pose.
    assert s[-2] == pytest.approx(45.0)
    assert s[-1] == pytest.approx(120.0)
    # Leading block is the object height map, nonneg and bounded by object top.
    assert (s[:25] >= 0.0).all()
    assert s[:25].max() <= model.object_points[:, 2].max() + 1e-9


def test_pca_orthonormal_and_ordered():
    rng = np.random.default_rng(0)
    # Anisotropic Gaussian: variance concentrated in known directions.
    basis, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    scales = np.array([5.0, 3.0, 1.0, 0.5, 0.1, 0.01])
    X = rng.normal(size=(500, 6)) * scales @ basis.T
    model = pca_fit(X, 3)
    P = model.components
    assert P.shape == (3, 6)
    assert np.allclose(P @ P.T, np.eye(3), atol=1e-10)
    # First component aligns with the dominant input direction.
    assert abs(P[0] @ basis[:, 0]) > 0.99
    # Projection preserves more variance than any random 3-d projection.
    Z = pca_transform(model, X)
    explained = Z.var(axis=0).sum()
    for seed in range(5):
        Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(6, 3)))
        rand_var = ((X - X.mean(0)) @ Q).var(axis=0).sum()
        assert explained >= rand_var - 1e-9


def test_pca_transform_round_trip_shape():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 10))
    m = pca_fit(X, 4)
    Z = pca_transform(m, X)
    assert Z.shape == (40, 4)
    # Centered data reconstructs within the dropped-component error.
    recon = Z @ m.components + m.mean
    err = np.linalg.norm(X - recon)
    assert err < np.linalg.norm(X - X.mean(0))


def test_logistic_learns_separable_classes():
    rng = np.random.default_rng(2)
    centers = np.array([[2, 0], [-2, 0], [0, 2], [0, -2]], dtype=float)
    X = np.vstack([rng.normal(c, 0.3, size=(50, 2)) for c in centers])
    y = np.repeat(np.arange(4), 50)
    clf = LogisticClassifier(4).fit(X, y)
    assert (clf.predict(X) == y).mean() > 0.95
    proba = clf.predict_proba(X[:5])
    assert proba.shape == (5, 4)
    assert np.allclose(proba.sum(axis=1), 1.0)


def test_lda_learns_separable_classes():
    rng = np.random.default_rng(3)
    centers = np.array([[3, 0], [-3, 0], [0, 3]], dtype=float)
    X = np.vstack([rng.normal(c, 0.4, size=(40, 2)) for c in centers])
    y = np.repeat(np.arange(3), 40)
    clf = LDAClassifier(3).fit(X, y)
    assert (clf.predict(X) == y).mean() > 0.95


def test_qnetwork_shapes_and_seeding():
    net = QNetwork([52, 128, 128, 128, 128, 8], seed=7)
    assert [w.shape for w in net.W] == [(52, 128), (128, 128), (128, 128), (128, 128), (128, 8)]
    out = net.forward(np.zeros((3, 52)))
    assert out.shape == (3, 8)
    # Same seed, same weights; different seed, different weights.
    net2 = QNetwork([52, 128, 128, 128, 128, 8], seed=7)
    assert all(np.array_equal(a, b) for a, b in zip(net.W, net2.W))
    net3 = QNetwork([52, 128, 128, 128, 128, 8], seed=8)
    assert not np.array_equal(net.W[0], net3.W[0])


def test_gradient_check_small_net():
    rng = np.random.default_rng(4)
    net = QNetwork([6, 16, 16, 4], seed=1)
    X = rng.normal(size=(32, 6))
    actions = rng.integers(0, 4, size=32)
    targets = rng.normal(size=32)
    assert gradient_check(net, X, actions, targets, n_samples=150) < 1e-4


def test_train_step_reduces_loss():
    rng = np.random.default_rng(5)
    net = QNetwork([4, 32, 2], seed=2)
    X = rng.normal(size=(64, 4))
    actions = rng.integers(0, 2, size=64)
    targets = (X[:, 0] * 2 - 1)[np.arange(64)]
    before = net.loss(X, actions, targets)
    for _ in range(200):
        net.train_step(X, actions, targets, lr=1e-2)
    after = net.loss(X, actions, targets)
    assert after < before * 0.5


def test_model_io_round_trip(tmp_path):
    path = tmp_path / "m.bin"
    arrays = {
        "W0": np.arange(12, dtype=float).reshape(3, 4),
        "b": np.array([1.5, -2.5]),
    }
    meta = {"kind_detail": "test", "objects": ["prism_6x6x6"], "n": 5}
    save_model(path, "qnet", arrays, meta)
    kind, got, gmeta = load_model(path)
    assert kind == "qnet"
    assert gmeta == meta
    assert set(got) == set(arrays)
    for k in arrays:
        assert np.array_equal(got[k], arrays[k])
        assert got[k].dtype == arrays[k].dtype


def test_model_io_byte_stable(tmp_path):
    arrays = {"a": np.linspace(0, 1, 7)}
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_model(p1, "classifier", arrays, {"x": 1})
    save_model(p2, "classifier", arrays, {"x": 1})
    assert p1.read_bytes() == p2.read_bytes()


def test_load_model_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"not a model file at all")
    with pytest.raises(ValueError):
        load_model(p)
