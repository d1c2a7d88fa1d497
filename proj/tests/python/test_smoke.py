import numpy as np
import pytest

import hyrsm


def test_metric_known_values():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    y = np.array([[1.0, 0.0]])
    assert hyrsm.metric_value("Hausdorff", x, y) == pytest.approx(1.0, abs=1e-12)
    assert hyrsm.metric_value("DirectedMHM", x, y) == pytest.approx(0.5, abs=1e-12)
    assert hyrsm.metric_value("BiMHM", x, y) == pytest.approx(0.5, abs=1e-12)


def test_metric_permutation_sensitivity():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    y_same = x.copy()
    y_swapped = x[::-1].copy()
    assert hyrsm.metric_value("Diagonal", x, y_same) == pytest.approx(0.0, abs=1e-12)
    assert hyrsm.metric_value("Diagonal", x, y_swapped) == pytest.approx(1.0, abs=1e-12)
    assert hyrsm.metric_value("BiMHM", x, y_swapped) == pytest.approx(0.0, abs=1e-12)


def test_directed_mhm_direction_flag():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    y = np.array([[1.0, 0.0]])
    fwd = hyrsm.metric_value("DirectedMHM", x, y, direction="forward")
    bwd = hyrsm.metric_value("DirectedMHM", x, y, direction="backward")
    assert fwd == pytest.approx(0.5, abs=1e-12)
    assert bwd == pytest.approx(0.0, abs=1e-12)
    assert hyrsm.metric_value("DirectedMHM:backward", x, y) == bwd


def test_cosine_distance():
    assert hyrsm.cosine_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)
    assert hyrsm.cosine_distance(np.array([2.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(0.0)


def test_bad_shapes_raise():
    with pytest.raises(ValueError):
        hyrsm.metric_value("BiMHM", np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        hyrsm.metric_value("NoSuchMetric", np.zeros((2, 3)), np.zeros((2, 3)))


def test_store_roundtrip(tmp_path):
    store = hyrsm.generate_store(classes=3, videos_per_class=4, frames=5, channels=6, seed=7)
    assert len(store) == 12
    assert store.channels == 6
    assert store.num_classes == 3
    assert store.class_names == ["class_0", "class_1", "class_2"]
    path = str(tmp_path / "store.bin")
    store.save(path)
    loaded = hyrsm.load_store(path)
    assert len(loaded) == len(store)
    # the file stores 32-bit floats, so a roundtrip is exact at that precision
    for i in range(len(store)):
        assert loaded.label(i) == store.label(i)
        np.testing.assert_array_equal(
            loaded.features(i), store.features(i).astype(np.float32).astype(np.float64)
        )


def test_unknown_spec_key_rejected():
    with pytest.raises(ValueError, match="unknown keys"):
        hyrsm.generate_store(classes=3, vids=4)


def test_train_eval_and_checkpoint(tmp_path):
    store = hyrsm.generate_store(classes=5, videos_per_class=6, frames=4, channels=8, seed=3)
    params, log = hyrsm.train(store, way=3, queries=2, heads=2, train_episodes=20, seed=1)
    assert len(log) == 20
    assert all(row["total_loss"] > 0 for row in log)

    result = hyrsm.evaluate(store, params, episodes=50, threads=2, way=3, queries=2, heads=2, seed=1)
    assert result["way"] == 3
    assert result["episodes"] == 50
    assert 0.0 <= result["accuracy"] <= 1.0

    path = str(tmp_path / "params.bin")
    params.save(path)
    reloaded = hyrsm.load_params(path, frames=4, channels=8, way=3, queries=2, heads=2, seed=1)
    again = hyrsm.evaluate(store, reloaded, episodes=50, threads=1, way=3, queries=2, heads=2, seed=1)
    assert again == result


def test_evaluate_deterministic_across_threads():
    store = hyrsm.generate_store(classes=5, videos_per_class=5, frames=4, channels=8, seed=11)
    a = hyrsm.evaluate(store, episodes=40, threads=1, way=3, queries=2, heads=2, seed=9)
    b = hyrsm.evaluate(store, episodes=40, threads=4, way=3, queries=2, heads=2, seed=9)
    assert a == b


def test_bench_metrics_rows():
    store = hyrsm.generate_store(classes=5, videos_per_class=5, frames=4, channels=8, seed=2)
    rows = hyrsm.bench_metrics(store, metrics=["Diagonal", "BiMHM"], episodes=30, way=3, seed=4)
    assert [r["metric"] for r in rows] == ["Diagonal", "BiMHM"]
    for r in rows:
        assert r["episodes"] == 30
        assert 0.0 <= r["accuracy"] <= 1.0


def test_grad_check_small():
    errs = hyrsm.grad_check(seed=1, points=2)
    assert errs
    assert all(err < 1e-4 for err in errs.values())


def test_disjoint_class_check():
    a = hyrsm.generate_store(classes=2, videos_per_class=2, frames=3, channels=4, seed=1)
    b = hyrsm.generate_store(classes=2, videos_per_class=2, frames=3, channels=4, seed=2,
                             class_offset=2)
    hyrsm.require_disjoint_classes(a, b)
    with pytest.raises(ValueError, match="share classes"):
        hyrsm.require_disjoint_classes(a, a)
