"""End-to-end checks against the real MNIST files.

Run with ``NNXP_MNIST_DIR=/path/to/mnist pytest -m slow``.
"""

import os

import numpy as np
import pytest

from servers.nnxp.bench import run_sweep, speedup
from servers.nnxp.connectome import apply_delta, init_connectome
from servers.nnxp.dataio import load_mnist
from servers.nnxp.trainer import TrainerConfig, epoch_batches, merge_deltas, train, train_epoch, worker_run

MNIST_DIR = os.environ.get("NNXP_MNIST_DIR")

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not MNIST_DIR, reason="NNXP_MNIST_DIR not set"),
]


@pytest.fixture(scope="module")
def mnist():
    return load_mnist(MNIST_DIR)


def _fresh():
    return init_connectome((784, 100, 10), 0.5, 1)


def test_official_counts(mnist):
    train_set, test_set = mnist
    assert (len(train_set), train_set.input_size) == (60000, 784)
    assert len(test_set) == 10000


def test_parallel_subset_matches_round_simulator(mnist):
    subset = mnist[0].head(1000)
    config = TrainerConfig(workers=4, deterministic_order=True)
    master, _ = train_epoch(_fresh(), subset, config, epoch=0)

    oracle = _fresh()
    batches = epoch_batches(subset, config, 0)
    for offset in range(0, len(batches), config.workers):
        deltas = [worker_run(oracle, [subset[int(i)] for i in b], config) for b in batches[offset : offset + 4]]
        oracle = apply_delta(oracle, merge_deltas(deltas, config.merge_mode))
    assert max(float(np.max(np.abs(a - b))) for a, b in zip(master.weights, oracle.weights)) <= 1e-12


def test_single_worker_accuracy(mnist):
    report = train(_fresh(), *mnist, TrainerConfig(epochs=2))
    assert report.records[0].test_accuracy >= 0.91
    assert report.records[1].test_accuracy >= 0.93


def test_sixteen_workers_do_not_collapse(mnist):
    report = train(_fresh(), *mnist, TrainerConfig(epochs=2, workers=16))
    assert report.records[-1].test_accuracy >= 0.88


def test_four_workers_lose_little_accuracy(mnist):
    one = train(_fresh(), *mnist, TrainerConfig(epochs=2, workers=1))
    four = train(_fresh(), *mnist, TrainerConfig(epochs=2, workers=4))
    assert abs(four.records[-1].test_accuracy - one.records[-1].test_accuracy) <= 0.05


def test_seeded_runs_are_identical(mnist):
    subset = mnist[0].head(6000), mnist[1]
    for workers in (1, 4):
        config = TrainerConfig(epochs=1, workers=workers)
        first = train(_fresh(), *subset, config)
        second = train(_fresh(), *subset, config)
        assert first.connectome.same_weights(second.connectome)
        assert first.records[0].test_accuracy == second.records[0].test_accuracy


@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs at least 4 cores")
def test_four_workers_speed_up(mnist):
    subset = mnist[0].head(6000), mnist[1].head(1000)
    result = run_sweep(*subset, TrainerConfig(epochs=1), [1, 2, 4], repetitions=3)
    assert speedup(result, 4) >= 1.5
