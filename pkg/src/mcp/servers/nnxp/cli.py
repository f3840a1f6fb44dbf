"""Command-line entry point: ``train``, ``eval``, ``bench`` and ``serve``.

Result lines go to stdout as ``key=value`` pairs; diagnostics and logs go to
stderr.  The exit status is 0 exactly when no error was reported.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from .bench import DEFAULT_REPETITIONS, emit_csv, format_summary, run_sweep, write_records
from .connectome import UPDATE_RULES, Connectome, init_connectome
from .dataio import CLASSES, Dataset, load_mnist, load_split
from .errors import ConfigError, NnxpError
from .persistence import load_connectome, save_connectome
from .trainer import EXECUTORS, EpochRecord, MergeMode, TrainerConfig, evaluate, train

__all__ = ["RunConfig", "execute", "load_connectome", "main", "parse_args", "run", "save_connectome"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    data_dir: Path | None = None
    data_format: str = "idx"
    workers: tuple[int, ...] = (1,)
    epochs: int = 1
    worker_batch: int = 100
    eta: float = 0.8
    lam: float = 1e-7
    elu_alpha: float = 0.5
    hidden: int = 100
    seed: int = 1
    merge: str = "avg"
    deterministic: bool = True
    save: Path | None = None
    load: Path | None = None
    metrics: Path | None = None
    repetitions: int = DEFAULT_REPETITIONS
    executor: str = "process"
    softmax_grad: str = "full"
    update_rule: str = "unscaled"
    save_every_rounds: int | None = None
    limit: int | None = None
    test_limit: int | None = None
    log_level: str = "WARNING"

    def trainer_config(self, workers: int | None = None) -> TrainerConfig:
        return TrainerConfig(
            eta=self.eta,
            lam=self.lam,
            elu_alpha=self.elu_alpha,
            worker_batch=self.worker_batch,
            workers=self.workers[0] if workers is None else workers,
            epochs=self.epochs,
            seed=self.seed,
            merge_mode=MergeMode(self.merge),
            deterministic_order=self.deterministic,
            executor=self.executor,
            softmax_gradient=self.softmax_grad,
            update_rule=self.update_rule,
            save_every_rounds=self.save_every_rounds,
        )


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------
def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def _nonnegative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {value}")
    return value


def _worker_counts(text: str) -> tuple[int, ...]:
    return tuple(_positive_int(part.strip()) for part in text.split(","))


def _boolean(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in {"true", "1", "yes", "on"}:
        return True
    if lowered in {"false", "0", "no", "off"}:
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got '{text}'")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-dir", type=Path, help="directory holding the MNIST files")
    common.add_argument("--format", dest="data_format", choices=("idx", "csv"), default="idx")
    common.add_argument("--workers", type=_worker_counts, default=(1,), help="worker count; bench takes a comma list")
    common.add_argument("--epochs", type=_nonnegative_int, default=1)
    common.add_argument("--worker-batch", type=_positive_int, default=100)
    common.add_argument("--eta", type=float, default=0.8, help="learning rate")
    common.add_argument("--lambda", dest="lam", type=float, default=1e-7, help="elastic-net strength")
    common.add_argument("--elu-alpha", type=float, default=0.5)
    common.add_argument("--hidden", type=_positive_int, default=100, help="hidden layer size")
    common.add_argument("--seed", type=_nonnegative_int, default=1)
    common.add_argument("--merge", choices=[mode.value for mode in MergeMode], default="avg")
    common.add_argument("--deterministic", type=_boolean, default=True)
    common.add_argument("--save", type=Path, help="write the model here after every epoch")
    common.add_argument("--load", type=Path, help="start from (or evaluate) this model file")
    common.add_argument("--metrics", type=Path, help="write epoch records as CSV")
    common.add_argument("--repetitions", type=_positive_int, default=DEFAULT_REPETITIONS)
    common.add_argument("--executor", choices=EXECUTORS, default="process")
    common.add_argument("--softmax-grad", choices=("full", "diagonal"), default="full")
    common.add_argument("--update-rule", choices=UPDATE_RULES, default="unscaled", help="per-layer delta scaling")
    common.add_argument("--save-every-rounds", type=_positive_int, help="also save every N merge rounds")
    common.add_argument("--limit", type=_positive_int, help="use only the first N training examples")
    common.add_argument("--test-limit", type=_positive_int, help="use only the first N test examples")
    common.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"), default="WARNING")

    parser = argparse.ArgumentParser(prog="nnxp", description="Exemplar-parallel MNIST training engine")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    subparsers.add_parser("train", parents=[common], help="train a 784-hidden-10 network")
    subparsers.add_parser("eval", parents=[common], help="evaluate a saved model on the test split")
    subparsers.add_parser("bench", parents=[common], help="time epochs across worker counts")
    subparsers.add_parser("serve", parents=[common], help="run the MCP server on stdio")
    return parser


def parse_args(argv: Sequence[str] | None = None) -> RunConfig:
    """Parse ``argv``; usage errors exit with status 2 after printing usage."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    config = RunConfig(**vars(args))

    if config.subcommand != "bench" and len(config.workers) != 1:
        parser.error("--workers takes a single count except for bench")
    if config.subcommand in {"train", "eval", "bench"} and config.data_dir is None:
        parser.error(f"{config.subcommand} requires --data-dir")
    if config.subcommand == "eval" and config.load is None:
        parser.error("eval requires --load")
    if config.subcommand == "bench" and config.metrics is None:
        parser.error("bench requires --metrics")
    try:
        config.trainer_config()
    except ConfigError as exc:
        parser.error(str(exc))
    return config


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------
def _datasets(config: RunConfig) -> tuple[Dataset, Dataset]:
    train_set, test_set = load_mnist(config.data_dir, config.data_format)
    if config.limit:
        train_set = train_set.head(config.limit)
    if config.test_limit:
        test_set = test_set.head(config.test_limit)
    return train_set, test_set


def _initial_connectome(config: RunConfig, input_size: int) -> Connectome:
    if config.load is not None:
        return load_connectome(config.load)
    return init_connectome((input_size, config.hidden, CLASSES), config.elu_alpha, config.seed)


def _train(config: RunConfig) -> int:
    trainer_config = config.trainer_config()
    if trainer_config.epochs == 0:
        return 0
    train_set, test_set = _datasets(config)
    master = _initial_connectome(config, train_set.input_size)

    def on_epoch(record: EpochRecord, connectome: Connectome) -> None:
        accuracy = f"train_accuracy={record.train_accuracy:.4f} test_accuracy={record.test_accuracy:.4f}"
        print(f"epoch={record.epoch} {accuracy}")
        print(f"epoch={record.epoch} workers={record.worker_count} duration_seconds={record.duration_seconds:.2f}")
        sys.stdout.flush()
        if config.save is not None:
            save_connectome(connectome, config.save)

    def checkpoint(connectome: Connectome, epoch: int, rounds: int) -> None:
        if config.save is not None:
            log.info("checkpoint after epoch %d round %d", epoch, rounds)
            save_connectome(connectome, config.save)

    report = train(master, train_set, test_set, trainer_config, on_epoch=on_epoch, checkpoint=checkpoint)
    if config.metrics is not None:
        write_records(report.records, config.metrics)
    return 0


def _eval(config: RunConfig) -> int:
    connectome = load_connectome(config.load)
    test_set = load_split(config.data_dir, "test", config.data_format)
    if config.test_limit:
        test_set = test_set.head(config.test_limit)
    print(f"test_accuracy={evaluate(connectome, test_set):.4f}")
    return 0


def _bench(config: RunConfig) -> int:
    train_set, test_set = _datasets(config)
    result = run_sweep(
        train_set,
        test_set,
        config.trainer_config(workers=1),
        config.workers,
        repetitions=config.repetitions,
        hidden=config.hidden,
    )
    emit_csv(result, config.metrics)
    print(format_summary(result))
    return 0


def _serve(config: RunConfig) -> int:
    from .server import mcp

    mcp.run()
    return 0


COMMANDS = {"train": _train, "eval": _eval, "bench": _bench, "serve": _serve}


def execute(config: RunConfig) -> int:
    try:
        return COMMANDS[config.subcommand](config)
    except (NnxpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(
        level=config.log_level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return execute(config)


def run() -> None:
    raise SystemExit(main())
