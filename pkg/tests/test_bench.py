import pytest

from servers.nnxp.bench import (
    CSV_HEADER,
    SweepResult,
    accuracy_milestones,
    emit_csv,
    format_summary,
    run_sweep,
    speedup,
    write_records,
)
from servers.nnxp.errors import SweepError
from servers.nnxp.trainer import EpochRecord, TrainerConfig


def _record(workers, seconds, epoch=0, rep=0, train_acc=0.9, test_acc=0.9):
    return EpochRecord(workers, epoch, seconds, train_acc, test_acc, rep=rep)


def test_speedup_examples():
    result = SweepResult.from_records([_record(1, 1005.80), _record(16, 201.82), _record(4, 56.49)])
    assert round(speedup(result, 16), 2) == 4.98
    assert speedup(result, 1) == 1.0
    other = SweepResult.from_records([_record(1, 142.33), _record(4, 56.49)])
    assert round(speedup(other, 4), 2) == 2.52


def test_speedup_uses_medians():
    records = [_record(1, s, rep=i) for i, s in enumerate((10.0, 30.0, 12.0))]
    records += [_record(2, s, rep=i) for i, s in enumerate((6.0, 5.0, 100.0))]
    result = SweepResult.from_records(records)
    assert result.baseline_median_seconds == 12.0
    assert speedup(result, 2) == pytest.approx(2.0)
    assert result.worker_counts == [1, 2]


def test_missing_groups():
    with pytest.raises(SweepError, match="baseline worker count missing"):
        SweepResult.from_records([_record(2, 1.0)])
    result = SweepResult.from_records([_record(1, 1.0)])
    with pytest.raises(SweepError, match="unknown worker count 8"):
        speedup(result, 8)


def test_csv_format(tmp_path):
    result = SweepResult.from_records([_record(4, 56.49, train_acc=0.951, test_acc=0.9402), _record(1, 100.0)])
    path = emit_csv(result, tmp_path / "sweep.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) == "workers,epoch,rep,duration_seconds,train_accuracy,test_accuracy"
    assert lines[1] == "1,0,0,100.00,0.9000,0.9000"
    assert lines[2] == "4,0,0,56.49,0.9510,0.9402"


def test_csv_single_record_and_determinism(tmp_path):
    result = SweepResult.from_records([_record(1, 3.14159)])
    first = emit_csv(result, tmp_path / "a.csv").read_bytes()
    assert first.decode().count("\n") == 2
    assert emit_csv(result, tmp_path / "b.csv").read_bytes() == first


def test_csv_rows_sorted_by_workers_rep_epoch(tmp_path):
    records = [_record(2, 1.0, epoch=1, rep=0), _record(1, 1.0, epoch=0, rep=1), _record(2, 1.0, epoch=0, rep=0)]
    rows = write_records(records, tmp_path / "r.csv").read_text().splitlines()[1:]
    assert [row.split(",")[:3] for row in rows] == [["1", "0", "1"], ["2", "0", "0"], ["2", "1", "0"]]


def test_csv_unwritable(tmp_path):
    result = SweepResult.from_records([_record(1, 1.0)])
    with pytest.raises(SweepError):
        emit_csv(result, tmp_path / "no" / "such" / "dir.csv")


def test_accuracy_milestones():
    records = [
        _record(1, 10.0, epoch=0, test_acc=0.91),
        _record(1, 12.0, epoch=1, test_acc=0.96),
        _record(1, 11.0, epoch=2, test_acc=0.97),
    ]
    reached = accuracy_milestones(records)
    assert (reached[0.90].epochs, reached[0.90].seconds) == (1, 10.0)
    assert (reached[0.95].epochs, reached[0.95].seconds) == (2, 22.0)
    assert reached[0.99] is None


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------
def test_single_run_sweep(train_set, test_set):
    result = run_sweep(train_set, test_set, TrainerConfig(epochs=1), [1], repetitions=1, hidden=8)
    assert len(result.records) == 1
    assert speedup(result, 1) == 1.0


def test_sweep_record_count(train_set, test_set):
    seen = []
    config = TrainerConfig(epochs=2, worker_batch=50, executor="thread")
    result = run_sweep(train_set, test_set, config, [1, 2, 4], repetitions=3, hidden=4, on_record=seen.append)
    assert len(result.records) == 18 == len(seen)
    assert {r.worker_count for r in result.records} == {1, 2, 4}
    assert sorted({r.rep for r in result.group(4)}) == [0, 1, 2]
    assert "workers" in format_summary(result)


def test_sweep_needs_baseline(train_set, test_set):
    with pytest.raises(SweepError, match="baseline worker count missing"):
        run_sweep(train_set, test_set, TrainerConfig(), [2], repetitions=1)
