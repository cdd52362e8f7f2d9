"""Smoke tests for the python bindings."""

import numpy as np
import pytest

import mega


@pytest.fixture(scope="module")
def moons():
    ds = mega.gen_synthetic("two_moons", 400, 0.15, seed=9)
    return mega.split(ds, 0.2, 0.0, seed=9)


@pytest.fixture(scope="module")
def parents(moons):
    spec = mega.ModelSpec([2, 8, 2])
    genomes = []
    for seed in (56, 57):
        cfg = mega.TrainConfig()
        cfg.epochs = 8
        cfg.batch_size = 64
        cfg.seed = seed
        genomes.append(mega.train(spec, moons, cfg))
    return genomes


def test_dataset_shapes(moons):
    assert moons.n == 400
    assert moons.dim == 2
    assert moons.num_classes == 2
    assert moons.X.shape == (400, 2)
    assert moons.partition_sizes == (320, 80, 0)
    counts = np.bincount(moons.y)
    assert counts.tolist() == [200, 200]


def test_training_is_deterministic(moons):
    spec = mega.ModelSpec([2, 6, 2])
    cfg = mega.TrainConfig()
    cfg.epochs = 3
    cfg.batch_size = 64
    cfg.seed = 4
    a = mega.train(spec, moons, cfg)
    b = mega.train(spec, moons, cfg)
    assert np.array_equal(a.values, b.values)
    assert a.layer_shapes == [(2, 6), (6, 2)]
    assert len(a) == spec.parameter_count


def test_merge_dominates_parents(moons, parents):
    g1, g2 = parents
    cfg = mega.GaConfig()
    cfg.generations = 5
    cfg.population_size = 10
    cfg.seed = 3
    best, history = mega.merge(g1, g2, cfg, moons)

    f1 = mega.accuracy(g1, moons, "val")
    f2 = mega.accuracy(g2, moons, "val")
    fb = mega.accuracy(best, moons, "val")
    assert fb >= max(f1, f2)

    assert len(history) == 5
    fitness = [rec.best_fitness for rec in history]
    assert fitness == sorted(fitness)  # non-decreasing under elitism
    assert fb == fitness[-1]


def test_merge_tree_reports(moons, parents):
    import json

    g1, g2 = parents
    cfg = mega.GaConfig()
    cfg.generations = 3
    cfg.population_size = 8
    cfg.parents_per_generation = 2
    cfg.tournament_size = 2
    cfg.seed = 11
    final, report_json = mega.merge_tree([g1, g2, g1, g2], cfg, moons)
    report = json.loads(report_json)
    assert len(report["nodes"]) == 3
    best_leaf = max(l["val_accuracy"] for l in report["leaves"])
    assert report["final"]["val_accuracy"] >= best_leaf
    assert mega.accuracy(final, moons, "val") == report["final"]["val_accuracy"]


def test_checkpoint_roundtrip(tmp_path, parents):
    g1, _ = parents
    path = tmp_path / "model.ckpt"
    mega.save_checkpoint(g1, path)
    back = mega.load_checkpoint(path)
    # checkpoints store 32-bit floats
    expected = g1.values.astype(np.float32).astype(np.float64)
    assert np.array_equal(back.values, expected)
    assert back.layer_shapes == g1.layer_shapes


def test_weight_average():
    a = mega.Genome(np.array([0.0, 2.0]), [(1, 1)])
    b = mega.Genome(np.array([4.0, 6.0]), [(1, 1)])
    avg = mega.weight_average([a, b])
    assert avg.values.tolist() == [2.0, 4.0]


def test_errors_are_typed(tmp_path):
    with pytest.raises(ValueError):
        mega.gen_synthetic("spiral", 100, 0.1, seed=1)
    with pytest.raises(RuntimeError):
        mega.load_checkpoint(tmp_path / "missing.ckpt")
