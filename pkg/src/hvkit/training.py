"""Training data generation, dataset files, MAPE and the Adam training loop."""

from __future__ import annotations

import csv
import json
import logging
import math
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from hvkit import deephv
from hvkit.hypervolume import exact_hv, front_ranks, pad_to_dim

log = logging.getLogger(__name__)

DATASET_MAGIC = b"DHVD"
DATASET_VERSION = 1
GENERATOR_VERSION = "hvkit-gen-1"
POOL_SIZE = 1000
MAX_POINTS = 100


class DatasetError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainingRecord:
    """A mutually non-dominated set in ``[0, 1]^M`` with its exact hypervolume."""

    values: np.ndarray
    hv: float

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def m_dim(self) -> int:
        return self.values.shape[0]

    def check(self) -> None:
        """Raise ``AssertionError`` unless the record meets its invariants."""
        Y = self.values
        assert 1 <= self.n <= MAX_POINTS, f"n={self.n} outside [1, {MAX_POINTS}]"
        assert Y.min() >= 0.0 and Y.max() <= 1.0, "values outside [0, 1]"
        assert 0.0 < self.hv <= 1.0, f"hv={self.hv} outside (0, 1]"
        assert np.all(front_ranks(Y) == 0), "columns are not mutually non-dominated"


def gen_solution_set(m_dim: int, rng: np.random.Generator, n: int | None = None) -> TrainingRecord:
    """Draw one training set.

    Picks a size ``n`` uniformly in ``[1, 100]``, samples 1000 uniform points,
    ranks them into fronts, redraws the points until some front has at least
    ``n`` members, then takes ``n`` members of a uniformly chosen qualifying
    front.  ``n`` can be forced for tests.
    """
    if not 2 <= m_dim <= 10:
        raise ValueError(f"M must be in [2, 10], got {m_dim}")
    if n is None:
        n = int(rng.integers(1, MAX_POINTS + 1))
    rounds = 0
    while True:
        pool = rng.random((m_dim, POOL_SIZE))
        ranks = front_ranks(pool)
        sizes = np.bincount(ranks)
        qualifying = np.flatnonzero(sizes >= n)
        if qualifying.size:
            break
        rounds += 1
        if rounds == 100:
            log.warning("gen_solution_set: %d redraws for n=%d at M=%d", rounds, n, m_dim)
    front = int(rng.choice(qualifying))
    members = np.flatnonzero(ranks == front)
    chosen = np.sort(rng.choice(members, size=n, replace=False))
    Y = pool[:, chosen]
    return TrainingRecord(Y, exact_hv(Y))


@dataclass
class Dataset:
    """Records stored column-concatenated: ``values`` is ``(M, sum n)``."""

    m_dim: int
    values: np.ndarray
    counts: np.ndarray
    hv: np.ndarray
    starts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.hv = np.asarray(self.hv, dtype=np.float64)
        self.starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]]).astype(np.int64)
        if self.values.shape != (self.m_dim, int(self.counts.sum())):
            raise DatasetError("values do not match record counts")

    @classmethod
    def from_records(cls, records: Sequence[TrainingRecord]) -> Dataset:
        if not records:
            raise DatasetError("no records")
        m_dim = records[0].m_dim
        return cls(
            m_dim,
            np.hstack([r.values for r in records]),
            [r.n for r in records],
            [r.hv for r in records],
        )

    def __len__(self) -> int:
        return self.counts.size

    def record(self, i: int) -> TrainingRecord:
        st = self.starts[i]
        return TrainingRecord(self.values[:, st : st + self.counts[i]].copy(), float(self.hv[i]))

    def __iter__(self):
        return (self.record(i) for i in range(len(self)))

    def _columns(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        counts = self.counts[idx]
        offs = np.repeat(self.starts[idx] - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
        return np.arange(int(counts.sum())) + offs

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.m_dim, self.values[:, self._columns(idx)], self.counts[idx], self.hv[idx])

    def batch(self, idx) -> tuple[deephv.PackedBatch, np.ndarray]:
        idx = np.asarray(idx, dtype=np.int64)
        packed = deephv.PackedBatch.from_packed(self.values[:, self._columns(idx)], self.counts[idx])
        return packed, self.hv[idx]


def _gen_chunk(args) -> list[TrainingRecord]:
    m_dim, seeds = args
    return [gen_solution_set(m_dim, np.random.default_rng(s)) for s in seeds]


def gen_dataset(m_dim: int, count: int, seed: int, workers: int = 1) -> Dataset:
    """Generate ``count`` independent records.

    Record ``i`` draws from its own stream spawned from ``seed``, so the output
    does not depend on ``workers``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    seeds = np.random.SeedSequence(seed).spawn(count)
    if workers <= 1:
        records = _gen_chunk((m_dim, seeds))
    else:
        size = max(1, math.ceil(count / (workers * 8)))
        chunks = [(m_dim, seeds[i : i + size]) for i in range(0, count, size)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = [r for part in ex.map(_gen_chunk, chunks) for r in part]
    return Dataset.from_records(records)


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest")


def write_dataset(ds: Dataset, path, manifest: dict | None = None) -> None:
    """Write the binary ``DHVD`` file plus a JSON text manifest next to it."""
    path = Path(path)
    parts = [DATASET_MAGIC, struct.pack("<IIQ", DATASET_VERSION, ds.m_dim, len(ds))]
    for i in range(len(ds)):
        st, n = ds.starts[i], ds.counts[i]
        parts.append(struct.pack("<I", n))
        # column-major: the M values of each solution are contiguous
        parts.append(np.ascontiguousarray(ds.values[:, st : st + n].T, dtype="<f8").tobytes())
        parts.append(struct.pack("<d", ds.hv[i]))
    try:
        path.write_bytes(b"".join(parts))
        info = {"generator_version": GENERATOR_VERSION, "M": ds.m_dim, "count": len(ds)}
        info.update(manifest or {})
        manifest_path(path).write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"writing dataset {path}: {exc}") from exc


def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"reading dataset {path}: {exc}") from exc
    if len(data) < 20 or data[:4] != DATASET_MAGIC:
        raise DatasetError(f"{path}: not a DHVD dataset")
    version, m_dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != DATASET_VERSION:
        raise DatasetError(f"{path}: unsupported dataset version {version}")
    pos = 20
    blocks, counts, hv = [], [], []
    for i in range(count):
        if pos + 4 > len(data):
            raise DatasetError(f"{path}: truncated at record {i}")
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        size = 8 * n * m_dim
        if pos + size + 8 > len(data):
            raise DatasetError(f"{path}: truncated at record {i}")
        blocks.append(np.frombuffer(data, dtype="<f8", count=n * m_dim, offset=pos).reshape(n, m_dim).T)
        pos += size
        hv.append(struct.unpack_from("<d", data, pos)[0])
        pos += 8
        counts.append(n)
    if pos != len(data):
        raise DatasetError(f"{path}: {len(data) - pos} trailing bytes")
    values = np.hstack(blocks).astype(np.float64) if blocks else np.zeros((m_dim, 0))
    return Dataset(m_dim, values, counts, hv)


def pad_dataset(datasets: Sequence[Dataset], target_m: int = 10) -> Dataset:
    """Pad every dataset to ``target_m`` objectives with ones and concatenate."""
    padded = [
        Dataset(target_m, pad_to_dim(ds.values, target_m), ds.counts, ds.hv) for ds in datasets
    ]
    return Dataset(
        target_m,
        np.hstack([d.values for d in padded]),
        np.concatenate([d.counts for d in padded]),
        np.concatenate([d.hv for d in padded]),
    )


def mape(pred, target) -> float:
    """Mean of ``|pred - target| / target``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if np.any(target <= 0):
        raise ValueError("MAPE needs strictly positive targets")
    return float(np.mean(np.abs(pred - target) / target))


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-5,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    channels: int = 64
    learning_rate: float = 1e-5
    batch_size: int = 64
    epochs: int = 200
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    #: Dtype of the forward/backward pass; Adam keeps float64 master weights.
    compute_dtype: str = "float64"
    #: Fractions for the train/validation split; the rest is the test split.
    split: tuple[float, float] = (0.8, 0.1)
    #: "constant", or "cosine" to anneal the step size to zero over all steps.
    lr_schedule: str = "constant"

    def __post_init__(self):
        if self.channels < 1 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("channels, batch_size and epochs must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.compute_dtype not in ("float64", "float32"):
            raise ValueError(f"compute_dtype must be float64 or float32, got {self.compute_dtype!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"lr_schedule must be constant or cosine, got {self.lr_schedule!r}")


#: The full-scale reference regime (800K records, 200 epochs); far beyond desk budgets.
FULL_PROFILE = TrainConfig(channels=64, learning_rate=1e-5, batch_size=64, epochs=200)


def _cast(weights: deephv.NetworkWeights, dtype) -> deephv.NetworkWeights:
    layers = [deephv.LayerWeights(l.w.astype(dtype), l.bias.astype(dtype)) for l in weights.layers]
    return deephv.NetworkWeights(weights.channels, layers, weights.leak)


def split_indices(count: int, seed: int, fractions=(0.8, 0.1)) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle, then cut into train / validation / test."""
    order = np.random.default_rng(seed).permutation(count)
    n_train = int(round(fractions[0] * count))
    n_val = int(round(fractions[1] * count))
    return order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]


def evaluate(weights: deephv.NetworkWeights, data: Dataset, batch_size: int = 512) -> float:
    """MAPE of the model's predictions over ``data``."""
    preds = predict(weights, data, batch_size)
    return mape(preds, data.hv)


def predict(weights: deephv.NetworkWeights, data: Dataset, batch_size: int = 512) -> np.ndarray:
    out = np.empty(len(data))
    for st in range(0, len(data), batch_size):
        idx = np.arange(st, min(st + batch_size, len(data)))
        packed, _ = data.batch(idx)
        out[idx] = deephv.predict_packed(packed, weights)
    return out


@dataclass
class TrainResult:
    weights: deephv.NetworkWeights
    best_epoch: int
    history: list[dict] = field(default_factory=list)


def train(config: TrainConfig, data: Dataset, val: Dataset | None = None,
          weights: deephv.NetworkWeights | None = None,
          metrics_path=None, progress: bool = False) -> TrainResult:
    """Mini-batch Adam on the MAPE loss.

    ``data`` is the training split; if ``val`` is None, ``data`` is itself
    split by :func:`split_indices`.  The weights from the epoch with the lowest
    validation MAPE are returned.
    """
    if len(data) == 0:
        raise ValueError("empty training set")
    if val is None:
        tr, va, _ = split_indices(len(data), config.seed, config.split)
        data, val = data.subset(tr), data.subset(va)
    weights = weights.copy() if weights is not None else deephv.init_weights(config.channels, config.seed)
    opt = Adam(weights.params(), config.learning_rate, config.betas, config.adam_eps)
    rng = np.random.default_rng(config.seed + 1)
    total_steps = config.epochs * -(-len(data) // config.batch_size)
    step = 0
    dtype = np.dtype(config.compute_dtype)
    best_val, best_epoch, best = math.inf, 0, weights.copy()
    history: list[dict] = []
    t0 = time.perf_counter()
    writer = None
    fh = None
    if metrics_path is not None:
        fh = open(metrics_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mape", "val_mape", "wall_seconds"])
    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(len(data))
            total = 0.0
            for st in range(0, len(order), config.batch_size):
                idx = order[st : st + config.batch_size]
                packed, targets = data.batch(idx)
                step_weights = weights
                if dtype != np.float64:
                    packed.unit = packed.unit.astype(dtype)
                    packed.scale_prod = packed.scale_prod.astype(dtype)
                    step_weights = _cast(weights, dtype)
                loss, grads, _ = deephv.loss_and_grad(packed, targets, step_weights)
                if not math.isfinite(loss):
                    raise TrainingDiverged(f"loss became {loss} in epoch {epoch}")
                if config.lr_schedule == "cosine":
                    opt.lr = 0.5 * config.learning_rate * (1.0 + math.cos(math.pi * step / total_steps))
                opt.step(grads.params())
                step += 1
                total += loss * idx.size
            train_mape = total / len(data)
            val_mape = evaluate(weights, val) if len(val) else train_mape
            if not math.isfinite(val_mape):
                raise TrainingDiverged(f"validation MAPE became {val_mape} in epoch {epoch}")
            row = {"epoch": epoch, "train_mape": train_mape, "val_mape": val_mape,
                   "wall_seconds": time.perf_counter() - t0}
            history.append(row)
            if writer is not None:
                writer.writerow([epoch, f"{train_mape:.8g}", f"{val_mape:.8g}", f"{row['wall_seconds']:.3f}"])
                fh.flush()
            if progress:
                log.info("epoch %d train %.5f val %.5f", epoch, train_mape, val_mape)
            if val_mape < best_val:
                best_val, best_epoch, best = val_mape, epoch, weights.copy()
    finally:
        if fh is not None:
            fh.close()
    return TrainResult(best, best_epoch, history)


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
