"""Benchmark harness: epoch timing across worker counts, speedups, CSV output."""

from __future__ import annotations

import csv
import logging
import statistics
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .connectome import init_connectome
from .dataio import CLASSES, Dataset
from .errors import ConfigError, SweepError
from .trainer import EpochRecord, TrainerConfig, train

log = logging.getLogger(__name__)

BASELINE_WORKERS = 1
DEFAULT_REPETITIONS = 3
DEFAULT_HIDDEN = 100
MILESTONES = (0.90, 0.95, 0.99)
CSV_HEADER = ("workers", "epoch", "rep", "duration_seconds", "train_accuracy", "test_accuracy")


@dataclass(frozen=True)
class SweepResult:
    records: tuple[EpochRecord, ...]
    baseline_median_seconds: float

    @classmethod
    def from_records(cls, records: Iterable[EpochRecord]) -> SweepResult:
        records = tuple(records)
        baseline = [r.duration_seconds for r in records if r.worker_count == BASELINE_WORKERS]
        if not baseline:
            raise SweepError("baseline worker count missing")
        return cls(records, statistics.median(baseline))

    @property
    def worker_counts(self) -> list[int]:
        return sorted({r.worker_count for r in self.records})

    def group(self, worker_count: int) -> list[EpochRecord]:
        return [r for r in self.records if r.worker_count == worker_count]

    def median_seconds(self, worker_count: int) -> float:
        durations = [r.duration_seconds for r in self.group(worker_count)]
        if not durations:
            raise SweepError(f"unknown worker count {worker_count}")
        return statistics.median(durations)


@dataclass(frozen=True)
class Milestone:
    threshold: float
    epochs: int
    seconds: float


def run_sweep(
    train_set: Dataset,
    test_set: Dataset,
    config: TrainerConfig,
    worker_counts: Sequence[int],
    repetitions: int = DEFAULT_REPETITIONS,
    hidden: int = DEFAULT_HIDDEN,
    on_record: Callable[[EpochRecord], None] | None = None,
) -> SweepResult:
    """Train ``repetitions`` times per worker count from identical seeds.

    Merge order follows worker completion (``deterministic_order`` is forced
    off), so only timings and accuracies, not bits, are comparable across runs.
    """
    counts = list(dict.fromkeys(int(w) for w in worker_counts))
    if not counts:
        raise ConfigError("worker_counts must not be empty")
    if min(counts) < 1:
        raise ConfigError(f"worker counts must be >= 1, got {counts}")
    if BASELINE_WORKERS not in counts:
        raise SweepError("baseline worker count missing")
    if repetitions < 1:
        raise ConfigError(f"repetitions must be >= 1, got {repetitions}")

    layer_sizes = (train_set.input_size, hidden, CLASSES)
    records: list[EpochRecord] = []
    for workers in counts:
        run_config = config.replace(workers=workers, deterministic_order=False)
        for rep in range(repetitions):
            log.info("sweep: workers=%d rep=%d", workers, rep)
            master = init_connectome(layer_sizes, config.elu_alpha, config.seed)
            report = train(master, train_set, test_set, run_config, on_epoch=_forward(on_record), rep=rep)
            records.extend(report.records)
    return SweepResult.from_records(records)


def _forward(on_record: Callable[[EpochRecord], None] | None):
    if on_record is None:
        return None
    return lambda record, _connectome: on_record(record)


def speedup(result: SweepResult, worker_count: int) -> float:
    """Median baseline epoch time over median epoch time at ``worker_count``."""
    return result.baseline_median_seconds / result.median_seconds(worker_count)


def accuracy_milestones(
    records: Iterable[EpochRecord],
    thresholds: Sequence[float] = MILESTONES,
) -> dict[float, Milestone | None]:
    """First epoch of one training run whose test accuracy reaches each threshold."""
    ordered = sorted(records, key=lambda r: r.epoch)
    reached: dict[float, Milestone | None] = {}
    for threshold in thresholds:
        elapsed = 0.0
        reached[threshold] = None
        for record in ordered:
            elapsed += record.duration_seconds
            if record.test_accuracy >= threshold:
                reached[threshold] = Milestone(threshold, record.epoch + 1, elapsed)
                break
    return reached


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------
def csv_row(record: EpochRecord) -> list[str]:
    return [
        str(record.worker_count),
        str(record.epoch),
        str(record.rep),
        f"{record.duration_seconds:.2f}",
        f"{record.train_accuracy:.4f}",
        f"{record.test_accuracy:.4f}",
    ]


def write_records(records: Iterable[EpochRecord], path: str | Path) -> Path:
    out_path = Path(path)
    rows = sorted(records, key=lambda r: (r.worker_count, r.rep, r.epoch))
    try:
        with out_path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for record in rows:
                writer.writerow(csv_row(record))
    except OSError as exc:
        raise SweepError(f"cannot write CSV to {out_path}: {exc}") from exc
    return out_path


def emit_csv(result: SweepResult, path: str | Path) -> Path:
    return write_records(result.records, path)


def format_summary(result: SweepResult) -> str:
    lines = [f"{'workers':>7}  {'median_s':>9}  {'speedup':>7}  {'test_acc':>8}  milestones (rep 0)"]
    for workers in result.worker_counts:
        group = result.group(workers)
        last_epoch = max(r.epoch for r in group)
        final_acc = statistics.median(r.test_accuracy for r in group if r.epoch == last_epoch)
        milestones = accuracy_milestones([r for r in group if r.rep == 0])
        reached = ", ".join(
            f">={m.threshold:.0%} after {m.epochs} ep / {m.seconds:.1f}s" for m in milestones.values() if m is not None
        )
        lines.append(
            f"{workers:>7}  {result.median_seconds(workers):>9.2f}  {speedup(result, workers):>7.2f}  "
            f"{final_acc:>8.4f}  {reached or '-'}"
        )
    return "\n".join(lines)
