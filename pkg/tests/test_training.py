import csv
import json
import math

import numpy as np
import pytest

from hvkit import deephv, training
from hvkit.deephv import NetworkWeights, forward, forward_batch, init_weights
from hvkit.hypervolume import exact_hv, non_dominated_sort
from hvkit.training import (
    Adam,
    Dataset,
    DatasetError,
    TrainConfig,
    TrainingDiverged,
    TrainingRecord,
    evaluate,
    gen_dataset,
    gen_solution_set,
    mape,
    pad_dataset,
    read_dataset,
    split_indices,
    train,
    write_dataset,
)


@pytest.fixture(scope="module")
def small_ds():
    return gen_dataset(3, 120, seed=5)


class TestGenSolutionSet:
    def test_postconditions(self):
        rec = gen_solution_set(3, np.random.default_rng(0))
        assert 1 <= rec.n <= 100
        assert rec.values.shape == (3, rec.n)
        assert rec.values.min() >= 0 and rec.values.max() <= 1
        assert len(non_dominated_sort(rec.values)) == 1
        rec.check()

    def test_hv_is_recomputable(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            rec = gen_solution_set(4, rng)
            assert rec.hv == exact_hv(rec.values, np.zeros(4))
            assert rec.hv == pytest.approx(exact_hv(rec.values, method="sweep"), rel=1e-9)

    def test_single_point_record(self):
        rec = gen_solution_set(2, np.random.default_rng(2), n=1)
        assert rec.n == 1
        assert rec.hv == pytest.approx(rec.values[0, 0] * rec.values[1, 0], rel=1e-15)

    def test_large_n_needs_resampling_but_terminates(self):
        rec = gen_solution_set(2, np.random.default_rng(3), n=40)
        assert rec.n == 40
        rec.check()

    def test_dimension_range(self):
        with pytest.raises(ValueError):
            gen_solution_set(1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            gen_solution_set(11, np.random.default_rng(0))


class TestDatasetFiles:
    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.dhvd", tmp_path / "b.dhvd"
        write_dataset(gen_dataset(3, 1000, 42), a, {"seed": 42})
        write_dataset(gen_dataset(3, 1000, 42), b, {"seed": 42})
        assert a.read_bytes() == b.read_bytes()
        meta = json.loads(training.manifest_path(a).read_text())
        assert meta["seed"] == 42 and meta["count"] == 1000 and meta["M"] == 3
        assert meta["generator_version"] == training.GENERATOR_VERSION

    def test_worker_count_does_not_change_output(self):
        one = gen_dataset(3, 40, 7, workers=1)
        two = gen_dataset(3, 40, 7, workers=2)
        np.testing.assert_array_equal(one.values, two.values)
        np.testing.assert_array_equal(one.hv, two.hv)

    def test_records_are_valid(self, small_ds):
        for rec in small_ds:
            rec.check()

    def test_round_trip(self, small_ds, tmp_path):
        path = tmp_path / "d.dhvd"
        write_dataset(small_ds, path)
        back = read_dataset(path)
        assert back.m_dim == 3 and len(back) == len(small_ds)
        assert back.values.tobytes() == small_ds.values.tobytes()
        assert back.hv.tobytes() == small_ds.hv.tobytes()

    def test_layout(self, tmp_path):
        rec = TrainingRecord(np.array([[0.25, 0.5], [0.75, 0.5]]), 0.3125)
        path = tmp_path / "d.dhvd"
        write_dataset(Dataset.from_records([rec]), path)
        data = path.read_bytes()
        assert data[:4] == b"DHVD"
        assert np.frombuffer(data, "<u4", 2, 4).tolist() == [1, 2]
        assert np.frombuffer(data, "<u8", 1, 12)[0] == 1
        assert np.frombuffer(data, "<u4", 1, 20)[0] == 2
        # column-major: solution by solution
        np.testing.assert_array_equal(np.frombuffer(data, "<f8", 4, 24), [0.25, 0.75, 0.5, 0.5])
        assert np.frombuffer(data, "<f8", 1, 56)[0] == 0.3125

    def test_corrupt_files(self, small_ds, tmp_path):
        path = tmp_path / "d.dhvd"
        write_dataset(small_ds, path)
        good = path.read_bytes()
        path.write_bytes(good[:-3])
        with pytest.raises(DatasetError, match="truncated"):
            read_dataset(path)
        path.write_bytes(b"NOPE" + good[4:])
        with pytest.raises(DatasetError):
            read_dataset(path)
        path.write_bytes(good + b"x")
        with pytest.raises(DatasetError, match="trailing"):
            read_dataset(path)

    def test_write_failure_names_path(self, small_ds, tmp_path):
        target = tmp_path / "missing" / "d.dhvd"
        with pytest.raises(OSError, match="missing"):
            write_dataset(small_ds, target)

    def test_subset_and_batch(self, small_ds):
        idx = [5, 0, 17]
        sub = small_ds.subset(idx)
        for k, i in enumerate(idx):
            np.testing.assert_array_equal(sub.record(k).values, small_ds.record(i).values)
        packed, targets = small_ds.batch(idx)
        np.testing.assert_array_equal(targets, small_ds.hv[idx])
        assert packed.unit.shape[1] == small_ds.counts[idx].sum()


class TestPadding:
    def test_pad_to_ten(self, small_ds):
        ds10 = pad_dataset([small_ds.subset(range(10))])
        assert ds10.m_dim == 10
        for rec in ds10:
            assert exact_hv(rec.values) == pytest.approx(rec.hv, rel=1e-12)

    def test_ten_unchanged_and_sizes_add(self, small_ds):
        other = gen_dataset(10, 5, 1)
        mixed = pad_dataset([small_ds, other])
        assert len(mixed) == len(small_ds) + len(other)
        np.testing.assert_array_equal(mixed.record(len(small_ds)).values, other.record(0).values)

    def test_rejects_out_of_range(self):
        ds = Dataset(2, np.array([[1.5], [0.5]]), [1], [0.75])
        with pytest.raises(ValueError):
            pad_dataset([ds])


class TestMape:
    def test_examples(self):
        assert mape([1, 2], [2, 2]) == 0.25
        assert mape([0.3, 0.4], [0.3, 0.4]) == 0.0
        assert mape([0.0], [0.5]) == 1.0

    def test_rejects_non_positive_targets(self):
        with pytest.raises(ValueError):
            mape([1.0], [0.0])


def test_adam_first_step_moves_by_learning_rate():
    p = np.array([1.0, -2.0, 3.0])
    opt = Adam([p], lr=0.1)
    opt.step([np.array([4.0, -0.5, 0.0])])
    np.testing.assert_allclose(p, [0.9, -1.9, 3.0], rtol=1e-6)


def test_split_indices():
    tr, va, te = split_indices(1000, 3)
    assert (len(tr), len(va), len(te)) == (800, 100, 100)
    assert sorted(np.concatenate([tr, va, te]).tolist()) == list(range(1000))
    np.testing.assert_array_equal(tr, split_indices(1000, 3)[0])


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(compute_dtype="float16")
    with pytest.raises(ValueError):
        TrainConfig(lr_schedule="step")
    assert TrainConfig().lr_schedule == "constant"
    assert TrainConfig().learning_rate == 1e-5
    assert TrainConfig().betas == (0.9, 0.999) and TrainConfig().adam_eps == 1e-8


class TestTrain:
    def test_one_epoch_smoke(self, small_ds, tmp_path):
        data = small_ds.subset(range(10))
        log = tmp_path / "m.csv"
        res = train(TrainConfig(channels=4, epochs=1, batch_size=4), data, data, metrics_path=log)
        assert len(res.history) == 1 and math.isfinite(res.history[0]["train_mape"])
        rows = list(csv.reader(log.open()))
        assert rows[0] == ["epoch", "train_mape", "val_mape", "wall_seconds"]
        assert len(rows) == 2 and math.isfinite(float(rows[1][1]))

    def test_loss_decreases_on_small_subset(self, small_ds):
        data = small_ds.subset(range(100))
        cfg = TrainConfig(channels=16, learning_rate=1e-2, epochs=50, batch_size=32, seed=1)
        res = train(cfg, data, data)
        first, last = res.history[0]["train_mape"], res.history[-1]["train_mape"]
        assert last < first

    def test_best_epoch_selection(self, small_ds, monkeypatch):
        seen = []
        scores = iter([0.5, 0.3, 0.4])

        def fake_eval(weights, data, batch_size=512):
            seen.append(weights.copy())
            return next(scores)

        monkeypatch.setattr(training, "evaluate", fake_eval)
        data = small_ds.subset(range(8))
        res = train(TrainConfig(channels=3, epochs=3, batch_size=4, learning_rate=1e-2), data, data)
        assert res.best_epoch == 2
        for a, b in zip(res.weights.params(), seen[1].params()):
            np.testing.assert_array_equal(a, b)

    def test_divergence_aborts(self, small_ds, monkeypatch):
        def bad(batch, targets, weights):
            return float("nan"), NetworkWeights.zeros(weights.channels), np.zeros(len(targets))

        monkeypatch.setattr(deephv, "loss_and_grad", bad)
        with pytest.raises(TrainingDiverged):
            train(TrainConfig(channels=2, epochs=1), small_ds.subset(range(4)), small_ds.subset(range(4)))

    def test_deterministic_given_seed(self, small_ds):
        data = small_ds.subset(range(30))
        cfg = TrainConfig(channels=4, epochs=2, batch_size=8, learning_rate=1e-3, seed=9)
        a, b = train(cfg, data), train(cfg, data)
        for x, y in zip(a.weights.params(), b.weights.params()):
            np.testing.assert_array_equal(x, y)

    def test_float32_compute_tracks_float64(self, small_ds):
        data = small_ds.subset(range(40))
        cfg = dict(channels=4, epochs=2, batch_size=8, learning_rate=1e-3, seed=2)
        a = train(TrainConfig(**cfg), data, data)
        b = train(TrainConfig(compute_dtype="float32", **cfg), data, data)
        assert b.history[-1]["train_mape"] == pytest.approx(a.history[-1]["train_mape"], rel=1e-3)

    def test_cosine_schedule_anneals_to_zero(self, small_ds, monkeypatch):
        rates = []

        class Recording(Adam):
            def step(self, grads):
                rates.append(self.lr)
                super().step(grads)

        monkeypatch.setattr(training, "Adam", Recording)
        data = small_ds.subset(range(20))
        train(TrainConfig(channels=2, epochs=3, batch_size=8, learning_rate=0.1, lr_schedule="cosine"), data, data)
        assert len(rates) == 9
        assert rates[0] == 0.1
        assert all(b < a for a, b in zip(rates, rates[1:]))
        assert rates[-1] == pytest.approx(0.05 * (1 + np.cos(np.pi * 8 / 9)))

    def test_rejects_empty_data(self):
        empty = Dataset(3, np.zeros((3, 0)), np.zeros(0, dtype=int), np.zeros(0))
        with pytest.raises(ValueError):
            train(TrainConfig(channels=2, epochs=1), empty)


class TestEvaluate:
    def test_matches_independent_recomposition(self, small_ds):
        W = init_weights(6, 3)
        data = small_ds.subset(range(50))
        preds = forward_batch([r.values for r in data], W)
        assert evaluate(W, data) == pytest.approx(mape(preds, data.hv), rel=1e-12)
        assert evaluate(W, data) == pytest.approx(
            np.mean([abs(forward(r.values, W) - r.hv) / r.hv for r in data]), rel=1e-12
        )

    def test_zero_network_on_matching_record(self):
        Y = np.array([[0.5, 1.0], [1.0, 0.4]])
        rec = TrainingRecord(Y, 0.5 * float(np.prod(Y.max(axis=1))))
        assert evaluate(NetworkWeights.zeros(3), Dataset.from_records([rec])) == 0.0
