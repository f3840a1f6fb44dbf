"""Exemplar-parallel training.

Each epoch is shuffled and cut into consecutive worker batches.  A merge round
hands up to ``workers`` batches to the pool, every worker runs plain SGD over
its batch on a private copy of the same master snapshot, and the coordinator
merges the returned net deltas and applies them to the master before the next
round starts.  Workers never see shared mutable state: the snapshot and the
dataset are read-only, deltas come back as return values.
"""

from __future__ import annotations

import dataclasses
import logging
import multiprocessing as mp
import os
import time
from collections.abc import Callable, Sequence
from concurrent.futures import Executor, Future, ProcessPoolExecutor, ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Any

import numpy as np

from .connectome import (
    UPDATE_RULES,
    Connectome,
    WeightDelta,
    apply_delta,
    backward_arrays,
    forward_arrays,
    predict_batch,
)
from .dataio import Dataset, Example
from .errors import ConfigError, DataFormatError, DivergenceError, NnxpError, ShapeError, TrainingError

log = logging.getLogger(__name__)

EXECUTORS = ("serial", "thread", "process")
SOFTMAX_GRADIENTS = ("full", "diagonal")
EVALUATION_CHUNK = 10_000


class MergeMode(str, Enum):
    AVERAGE_SYNC = "avg"
    SUM_SYNC = "sum"


# ---------------------------------------------------------------------------
# configuration and records
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TrainerConfig:
    eta: float = 0.8
    lam: float = 1e-7
    elu_alpha: float = 0.5
    worker_batch: int = 100
    workers: int = 1
    epochs: int = 1
    seed: int = 1
    merge_mode: MergeMode = MergeMode.AVERAGE_SYNC
    deterministic_order: bool = True
    executor: str = "process"
    softmax_gradient: str = "full"
    update_rule: str = "unscaled"
    save_every_rounds: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "merge_mode", MergeMode(self.merge_mode))
        if not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not self.elu_alpha > 0:
            raise ConfigError(f"elu_alpha must be > 0, got {self.elu_alpha}")
        if self.worker_batch < 1:
            raise ConfigError(f"worker_batch must be >= 1, got {self.worker_batch}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.executor not in EXECUTORS:
            raise ConfigError(f"executor must be one of {', '.join(EXECUTORS)}, got '{self.executor}'")
        if self.softmax_gradient not in SOFTMAX_GRADIENTS:
            raise ConfigError(f"softmax_gradient must be full or diagonal, got '{self.softmax_gradient}'")
        if self.update_rule not in UPDATE_RULES:
            raise ConfigError(f"update_rule must be unscaled or exact, got '{self.update_rule}'")
        if self.save_every_rounds is not None and self.save_every_rounds < 1:
            raise ConfigError(f"save_every_rounds must be >= 1, got {self.save_every_rounds}")

    def replace(self, **changes: Any) -> TrainerConfig:
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        data["merge_mode"] = self.merge_mode.value
        return data


@dataclass(frozen=True)
class EpochRecord:
    worker_count: int
    epoch: int
    duration_seconds: float
    train_accuracy: float
    test_accuracy: float
    rep: int = 0
    train_loss: float = float("nan")


@dataclass(frozen=True)
class EpochStats:
    examples: int
    rounds: int
    duration_seconds: float
    mean_loss: float


@dataclass
class TrainReport:
    connectome: Connectome
    records: list[EpochRecord] = field(default_factory=list)


# ---------------------------------------------------------------------------
# shuffling and merging
# ---------------------------------------------------------------------------
def shuffle_epoch(dataset: Sequence | Dataset, seed: int, epoch: int) -> np.ndarray:
    """Permutation of ``range(len(dataset))`` determined by ``(seed, epoch)``."""
    n = len(dataset)
    if n == 0:
        raise DataFormatError("empty dataset")
    return np.random.default_rng([int(seed), int(epoch)]).permutation(n)


def merge_deltas(deltas: Sequence[WeightDelta], mode: MergeMode | str = MergeMode.AVERAGE_SYNC) -> WeightDelta:
    """Combine worker deltas component-wise, summing in list order."""
    if not deltas:
        raise ShapeError("cannot merge an empty list of deltas")
    shapes = deltas[0].shapes
    for index, delta in enumerate(deltas[1:], start=1):
        if delta.shapes != shapes:
            raise ShapeError(f"delta {index} has shapes {delta.shapes}, expected {shapes}")
    totals = [np.array(v) for v in deltas[0].values]
    for delta in deltas[1:]:
        for total, values in zip(totals, delta.values):
            total += values
    if MergeMode(mode) is MergeMode.AVERAGE_SYNC:
        totals = [total / len(deltas) for total in totals]
    return WeightDelta(tuple(totals))


# ---------------------------------------------------------------------------
# worker side
# ---------------------------------------------------------------------------
_WORKER_DATASET: Dataset | None = None


def _install_dataset(dataset: Dataset) -> None:
    global _WORKER_DATASET
    _WORKER_DATASET = dataset


def _worker_ready() -> int:
    return os.getpid()


def _sgd_over(
    layer_sizes: Sequence[int],
    snapshot: Sequence[np.ndarray],
    elu_alpha: float,
    inputs: np.ndarray,
    targets: np.ndarray,
    eta: float,
    lam: float,
    softmax_gradient: str,
    update_rule: str,
) -> tuple[list[np.ndarray], float]:
    """Sequential SGD over rows of ``inputs`` on a private copy of ``snapshot``.

    Returns ``snapshot - final`` per weight array and the summed data loss of
    each example measured before its own update.
    """
    private = [np.array(w) for w in snapshot]
    loss = 0.0
    try:
        for x, t in zip(inputs, targets):
            pres, acts = forward_arrays(layer_sizes, private, elu_alpha, x)
            diff = t - acts[-1]
            loss += 0.5 * float(np.dot(diff, diff))
            deltas = backward_arrays(
                layer_sizes, private, elu_alpha, pres, acts, t, eta, lam, softmax_gradient, update_rule
            )
            for weights, delta in zip(private, deltas):
                weights -= delta
    except ShapeError as exc:
        if not all(np.all(np.isfinite(w)) for w in private):
            raise DivergenceError("weights diverged") from exc
        raise
    if not all(np.all(np.isfinite(w)) for w in private):
        raise DivergenceError("weights diverged")
    return [w0 - w for w0, w in zip(snapshot, private)], loss


def _run_batch(
    layer_sizes: tuple[int, ...],
    snapshot: tuple[np.ndarray, ...],
    elu_alpha: float,
    indices: np.ndarray,
    eta: float,
    lam: float,
    softmax_gradient: str,
    update_rule: str,
    dataset: Dataset | None = None,
) -> tuple[list[np.ndarray], float]:
    data = dataset if dataset is not None else _WORKER_DATASET
    if data is None:
        raise TrainingError("worker has no dataset installed")
    return _sgd_over(
        layer_sizes,
        snapshot,
        elu_alpha,
        data.pixels[indices],
        data.targets[indices],
        eta,
        lam,
        softmax_gradient,
        update_rule,
    )


def worker_run(snapshot: Connectome, batch: Sequence[Example], config: TrainerConfig) -> WeightDelta:
    """Net delta of sequential SGD over ``batch``, in ``apply_delta``'s convention."""
    if not batch:
        raise ShapeError("worker batch is empty")
    if len(batch) > config.worker_batch:
        raise ShapeError(f"worker batch has {len(batch)} examples, limit is {config.worker_batch}")
    inputs = np.stack([np.asarray(example.pixels, dtype=np.float64) for example in batch])
    targets = np.stack([np.asarray(example.target, dtype=np.float64) for example in batch])
    if inputs.shape[1] != snapshot.input_size or targets.shape[1] != snapshot.output_size:
        raise ShapeError("batch examples do not match the connectome's input/output sizes")
    net, _ = _sgd_over(
        snapshot.layer_sizes,
        snapshot.weights,
        snapshot.elu_alpha,
        inputs,
        targets,
        config.eta,
        config.lam,
        config.softmax_gradient,
        config.update_rule,
    )
    return WeightDelta(tuple(net))


# ---------------------------------------------------------------------------
# coordinator side
# ---------------------------------------------------------------------------
def _mp_context():
    # fork shares the read-only dataset with the children without pickling it
    if "fork" in mp.get_all_start_methods():
        return mp.get_context("fork")
    return mp.get_context()


@dataclass(frozen=True)
class BatchResult:
    batch_index: int
    delta: list[np.ndarray]
    loss: float
    examples: int


class WorkerPool:
    """Runs one merge round at a time on a serial loop, threads or processes."""

    def __init__(self, dataset: Dataset, config: TrainerConfig):
        self.dataset = dataset
        self.workers = config.workers
        self.kind = "serial" if config.workers == 1 else config.executor
        self._executor: Executor | None = None
        if self.kind == "process":
            self._executor = ProcessPoolExecutor(
                max_workers=config.workers,
                mp_context=_mp_context(),
                initializer=_install_dataset,
                initargs=(dataset,),
            )
        elif self.kind == "thread":
            self._executor = ThreadPoolExecutor(max_workers=config.workers, thread_name_prefix="nnxp-worker")
        if self._executor is not None:
            # start every worker now so process startup stays out of the epoch timings
            for future in [self._executor.submit(_worker_ready) for _ in range(self.workers)]:
                future.result()

    def __enter__(self) -> WorkerPool:
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True, cancel_futures=True)
            self._executor = None

    def run_round(
        self,
        snapshot: Connectome,
        batches: Sequence[tuple[int, np.ndarray]],
        config: TrainerConfig,
    ) -> list[BatchResult]:
        """Train every batch against ``snapshot``.

        Results come back in batch-index order when ``deterministic_order`` is
        set, otherwise in completion order.
        """
        args = (snapshot.layer_sizes, snapshot.weights, snapshot.elu_alpha)
        hyper = (config.eta, config.lam, config.softmax_gradient, config.update_rule)
        if self._executor is None:
            return [
                self._collect(batch_index, indices, partial(_run_batch, *args, indices, *hyper, self.dataset))
                for batch_index, indices in batches
            ]

        dataset = self.dataset if self.kind == "thread" else None
        futures: dict[Future, tuple[int, np.ndarray]] = {}
        for batch_index, indices in batches:
            future = self._executor.submit(_run_batch, *args, indices, *hyper, dataset)
            futures[future] = (batch_index, indices)
        ordered = list(futures) if config.deterministic_order else as_completed(futures)
        results = []
        for future in ordered:
            batch_index, indices = futures[future]
            results.append(self._collect(batch_index, indices, future.result))
        return results

    @staticmethod
    def _collect(
        batch_index: int,
        indices: np.ndarray,
        fetch: Callable[[], tuple[list[np.ndarray], float]],
    ) -> BatchResult:
        try:
            delta, loss = fetch()
        except Exception as exc:
            raise TrainingError(f"worker failed on batch {batch_index}: {exc}") from exc
        return BatchResult(batch_index, delta, loss, len(indices))


def _check_dataset(master: Connectome, dataset: Dataset) -> None:
    if len(dataset) == 0:
        raise DataFormatError("empty dataset")
    if dataset.input_size != master.input_size:
        raise ShapeError(f"dataset inputs have length {dataset.input_size}, network expects {master.input_size}")
    if dataset.targets.shape[1] != master.output_size:
        raise ShapeError(f"dataset has {dataset.targets.shape[1]} classes, network outputs {master.output_size}")


def epoch_batches(dataset: Dataset, config: TrainerConfig, epoch: int) -> list[np.ndarray]:
    """Consecutive worker batches of the shuffled epoch; the last may be short."""
    order = shuffle_epoch(dataset, config.seed, epoch)
    return [order[start : start + config.worker_batch] for start in range(0, len(order), config.worker_batch)]


def train_epoch(
    master: Connectome,
    dataset: Dataset,
    config: TrainerConfig,
    epoch: int,
    pool: WorkerPool | None = None,
    checkpoint: Callable[[Connectome, int, int], None] | None = None,
) -> tuple[Connectome, EpochStats]:
    _check_dataset(master, dataset)
    own_pool = pool is None
    if own_pool:
        pool = WorkerPool(dataset, config)
    try:
        start = time.perf_counter()
        batches = list(enumerate(epoch_batches(dataset, config, epoch)))
        rounds = examples = 0
        loss = 0.0
        for offset in range(0, len(batches), config.workers):
            results = pool.run_round(master, batches[offset : offset + config.workers], config)
            merged = merge_deltas([WeightDelta(tuple(result.delta)) for result in results], config.merge_mode)
            master = apply_delta(master, merged)
            rounds += 1
            examples += sum(result.examples for result in results)
            loss += sum(result.loss for result in results)
            log.debug("epoch %d round %d merged %d deltas", epoch, rounds, len(results))
            if checkpoint is not None and config.save_every_rounds and rounds % config.save_every_rounds == 0:
                checkpoint(master, epoch, rounds)
        duration = time.perf_counter() - start
    finally:
        if own_pool:
            pool.close()
    return master, EpochStats(examples, rounds, duration, loss / examples)


def evaluate(c: Connectome, dataset: Dataset) -> float:
    """Fraction of examples whose predicted class equals the label."""
    if len(dataset) == 0:
        raise DataFormatError("empty dataset")
    correct = 0
    for start in range(0, len(dataset), EVALUATION_CHUNK):
        stop = start + EVALUATION_CHUNK
        correct += int(np.sum(predict_batch(c, dataset.pixels[start:stop]) == dataset.labels[start:stop]))
    return correct / len(dataset)


def train(
    master: Connectome,
    train_set: Dataset,
    test_set: Dataset,
    config: TrainerConfig,
    on_epoch: Callable[[EpochRecord, Connectome], None] | None = None,
    checkpoint: Callable[[Connectome, int, int], None] | None = None,
    rep: int = 0,
) -> TrainReport:
    report = TrainReport(master)
    if config.epochs == 0:
        return report
    _check_dataset(master, train_set)
    _check_dataset(master, test_set)

    with WorkerPool(train_set, config) as pool:
        for epoch in range(config.epochs):
            try:
                master, stats = train_epoch(master, train_set, config, epoch, pool=pool, checkpoint=checkpoint)
            except NnxpError:
                log.error("epoch %d failed", epoch)
                raise
            record = EpochRecord(
                worker_count=config.workers,
                epoch=epoch,
                duration_seconds=stats.duration_seconds,
                train_accuracy=evaluate(master, train_set),
                test_accuracy=evaluate(master, test_set),
                rep=rep,
                train_loss=stats.mean_loss,
            )
            log.info(
                "epoch %d: %d rounds, %.2fs, train %.4f, test %.4f",
                epoch,
                stats.rounds,
                record.duration_seconds,
                record.train_accuracy,
                record.test_accuracy,
            )
            report.records.append(record)
            report.connectome = master
            if on_epoch is not None:
                on_epoch(record, master)
    return report
