import numpy as np
import pytest

from paqplan import data
from paqplan.executor import Engine, partitioned_gradient
from paqplan.space import Configuration
from paqplan.train import batched_gradient, make_model


@pytest.fixture(scope="module")
def split():
    return data.split(data.synth(800, 6, seed=41, noise_rate=0.1), seed=41)


def models_with(etas, split, extra=None):
    out = []
    for i, eta in enumerate(etas):
        values = {"lr": eta}
        values.update(extra or {})
        out.append(make_model(Configuration(None, values), split.train.dim,
                              model_id=i))
    return out


def test_batch_engine_task_accounting(split):
    engine = Engine(sched_delay=0.2)
    engine.train_models(models_with([1e-4] * 10, split), split, 10, batching=True)
    assert engine.tasks_launched == 10
    assert engine.model_iterations == 100
    assert engine.sim_overhead_seconds == pytest.approx(2.0)
    assert engine.per_model_iteration_overhead() == pytest.approx(0.020)


def test_sequential_engine_task_accounting(split):
    engine = Engine(sched_delay=0.2)
    engine.train_models(models_with([1e-4] * 10, split), split, 10, batching=False)
    assert engine.tasks_launched == 100
    assert engine.per_model_iteration_overhead() == pytest.approx(0.200)


def test_engine_groups_by_feature_signature(split):
    engine = Engine()
    mixed = (models_with([1e-4] * 3, split) +
             models_with([1e-4] * 2, split, extra={"proj": 2.0, "noise": 0.5}))
    engine.train_models(mixed, split, 5, batching=True)
    # two incompatible feature spaces -> two task groups of 5 iterations each
    assert engine.tasks_launched == 10
    assert engine.model_iterations == 25


def test_batch_and_sequential_weights_identical(split):
    etas = list(np.geomspace(1e-5, 1e-3, 6))
    a = models_with(etas, split)
    b = models_with(etas, split)
    Engine().train_models(a, split, 20, batching=True)
    Engine().train_models(b, split, 20, batching=False)
    for ma, mb in zip(a, b):
        assert np.max(np.abs(ma.weights - mb.weights)) <= 1e-10


def test_engine_rejects_negative_delay():
    with pytest.raises(ValueError):
        Engine(sched_delay=-1.0)


def test_partitioned_gradient_single_shard_reduces_to_batched():
    rng = np.random.default_rng(42)
    ds = data.Dataset(rng.normal(size=(120, 7)), rng.integers(0, 2, 120))
    W = rng.normal(size=(7, 4))
    got = partitioned_gradient([ds], W, lam=0.3)
    want = batched_gradient(W, ds.X, ds.y.astype(float), 0.3)
    np.testing.assert_array_equal(got, want)


def test_partitioned_gradient_four_shards_close_to_one(split):
    rng = np.random.default_rng(43)
    ds = data.Dataset(rng.normal(size=(400, 9)), rng.integers(0, 2, 400))
    W = rng.normal(size=(9, 5))
    whole = partitioned_gradient([ds], W, lam=0.7)
    sharded = partitioned_gradient(ds.with_partitions(4).shards(), W, lam=0.7)
    assert np.max(np.abs(whole - sharded)) <= 1e-10
    assert sharded.shape == (9, 5)


def test_partitioned_gradient_is_deterministic():
    rng = np.random.default_rng(44)
    ds = data.Dataset(rng.normal(size=(300, 5)), rng.integers(0, 2, 300))
    shards = ds.with_partitions(3).shards()
    W = rng.normal(size=(5, 2))
    a = partitioned_gradient(shards, W, lam=0.1)
    b = partitioned_gradient(shards, W, lam=0.1)
    np.testing.assert_array_equal(a, b)


def test_partitioned_gradient_hinge_family():
    rng = np.random.default_rng(45)
    ds = data.Dataset(rng.normal(size=(200, 4)), rng.integers(0, 2, 200))
    W = rng.normal(size=(4, 3))
    whole = partitioned_gradient([ds], W, family="linear_svm")
    sharded = partitioned_gradient(ds.with_partitions(5).shards(), W,
                                   family="linear_svm")
    assert np.max(np.abs(whole - sharded)) <= 1e-10


def test_partitioned_gradient_rejects_empty_and_vector():
    with pytest.raises(ValueError):
        partitioned_gradient([], np.zeros((3, 1)))
    ds = data.synth(20, 3, seed=0)
    with pytest.raises(ValueError):
        partitioned_gradient([ds], np.zeros(3))
