"""Command-line surface.

Subcommands: generate-xor, prepare, train, eval, inspect, oracle-check.
Runs are driven by a flat key = value config file so they stay diffable;
the COTM_SEED environment variable overrides the config seed. Exit
codes: 0 ok, 1 usage/configuration, 2 data or format problem, 3 oracle
divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import _kernels, data as data_mod, evaluation, learn
from .errors import ConfigError, CotmError, DivergenceError, FormatError, ShapeError
from .model import (
    Config,
    init_coalesced,
    init_vanilla,
    load_model,
    render_clause,
    save_model,
    vote_matrix,
)
from .oracle import equivalence_check
from .rng import RandomSource

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3


@dataclasses.dataclass
class RunConfig:
    """Flat, strictly-parsed run description (model + training + paths)."""

    n_outputs: int = 2
    n_clauses: int = 128
    n_inputs: int = 16
    memory_depth: int = 64
    voting_margin: int = 100
    specificity: float = 5.0
    multiclass_scalar: float = 1.0
    boost_true_positive: bool = True
    seed: int = 0
    empty_clause_output: str = "one"
    train_path: str = ""
    test_path: str = ""
    epochs: int = 10
    trials: int = 10
    tail: int = 25
    shuffle: bool = True
    scoring: str = "argmax"
    vanilla: bool = False
    threads: int = 0
    model_out: str = "model.cotm"
    report_out: str = "report.csv"

    def to_model_config(self) -> Config:
        return Config(
            n_outputs=self.n_outputs,
            n_clauses=self.n_clauses,
            n_inputs=self.n_inputs,
            memory_depth=self.memory_depth,
            voting_margin=self.voting_margin,
            specificity=self.specificity,
            multiclass_scalar=self.multiclass_scalar,
            boost_true_positive=self.boost_true_positive,
            seed=self.seed,
            empty_clause_output=self.empty_clause_output,
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for f in dataclasses.fields(self):
                value = getattr(self, f.name)
                if isinstance(value, bool):
                    value = "true" if value else "false"
                fh.write(f"{f.name} = {value}\n")

    @classmethod
    def load(cls, path) -> "RunConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, raw = line.partition("=")
                key = key.strip()
                raw = raw.strip()
                if key not in fields:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                if key in values:
                    raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
                values[key] = _parse_value(fields[key].type, raw, f"{path}:{lineno}")
        config = cls(**values)
        env_seed = os.environ.get("COTM_SEED")
        if env_seed is not None:
            config.seed = int(env_seed)
        return config


def _parse_value(type_name, raw, where):
    if type_name == "bool":
        lowered = raw.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ConfigError(f"{where}: expected a boolean, got {raw!r}")
    if type_name == "int":
        try:
            return int(raw)
        except ValueError as err:
            raise ConfigError(f"{where}: expected an integer, got {raw!r}") from err
    if type_name == "float":
        try:
            return float(raw)
        except ValueError as err:
            raise ConfigError(f"{where}: expected a number, got {raw!r}") from err
    return raw


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cotm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-xor", help="write the synthetic 4x4 patch datasets")
    gen.add_argument("--train", required=True, help="output path for the training set")
    gen.add_argument("--test", required=True, help="output path for the test set")
    gen.add_argument("--n-train", type=int, default=2500)
    gen.add_argument("--n-test", type=int, default=10000)
    gen.add_argument("--noise", type=float, default=0.4,
                     help="fraction of training labels flipped")
    gen.add_argument("--seed", type=int, default=0)

    prep = sub.add_parser("prepare", help="binarize images or vectorize text")
    prep.add_argument("--images", help="IDX file of grayscale images")
    prep.add_argument("--labels", help="IDX file of integer labels")
    prep.add_argument("--corpus", help="text file with 'label<TAB>text' lines")
    prep.add_argument("--out", required=True, help="output dataset path")
    prep.add_argument("--window", type=int, default=11)
    prep.add_argument("--threshold", type=float, default=2.0)
    prep.add_argument("--max-vocab", type=int, default=5000)
    prep.add_argument("--vocab-out", help="where to write the vocabulary (text path)")

    train = sub.add_parser("train", help="train a model from a run config file")
    train.add_argument("--config", required=True)
    train.add_argument("--vanilla", action="store_true",
                       help="frozen per-output weights instead of shared clauses")
    train.add_argument("--threads", type=int, default=None)

    evl = sub.add_parser("eval", help="score a model file on a dataset")
    evl.add_argument("--model", required=True)
    evl.add_argument("--data", required=True)
    evl.add_argument("--out", help="also write the metrics JSON to this path")

    insp = sub.add_parser("inspect", help="print clauses sorted by weight impact")
    insp.add_argument("--model", required=True)
    insp.add_argument("--names", help="vocabulary file supplying feature names")
    insp.add_argument("--top", type=int, default=20)

    chk = sub.add_parser("oracle-check", help="fuzz the engine against the oracle")
    chk.add_argument("--instances", type=int, default=1000)
    chk.add_argument("--steps", type=int, default=20)
    chk.add_argument("--seed", type=int, default=0)

    return parser


def _cmd_generate_xor(args) -> int:
    train, test = data_mod.generate_noisy_xor(
        n_train=args.n_train, n_test=args.n_test, label_noise=args.noise,
        seed=args.seed,
    )
    data_mod.save_dataset(train, args.train)
    data_mod.save_dataset(test, args.test)
    print(f"wrote {train.count} train examples -> {args.train}")
    print(f"wrote {test.count} test examples -> {args.test}")
    return EXIT_OK


def _cmd_prepare(args) -> int:
    if args.corpus and (args.images or args.labels):
        raise ConfigError("--corpus cannot be combined with --images/--labels")
    if args.images:
        if not args.labels:
            raise ConfigError("--images requires --labels")
        images = data_mod.load_idx(args.images)
        labels = data_mod.load_idx(args.labels)
        if images.ndim != 3:
            raise FormatError(
                f"expected a 3-D image tensor, got shape {images.shape}"
            )
        if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
            raise FormatError(
                f"label count {labels.shape} does not match {images.shape[0]} images"
            )
        binary = data_mod.binarize_adaptive_gaussian(
            images, window=args.window, threshold=args.threshold
        )
        X = binary.reshape(binary.shape[0], -1)
        n_classes = int(labels.max()) + 1 if labels.size else 1
        Y = np.zeros((labels.shape[0], n_classes), dtype=np.uint8)
        Y[np.arange(labels.shape[0]), labels.astype(np.int64)] = 1
        dataset = data_mod.Dataset.from_arrays(X, Y)
    elif args.corpus:
        texts, labels = _read_labeled_corpus(args.corpus)
        vocab = data_mod.build_vocabulary(texts, args.max_vocab)
        if args.vocab_out:
            vocab.save(args.vocab_out)
        class_names = sorted(set(labels))
        class_index = {name: pos for pos, name in enumerate(class_names)}
        X = np.stack([data_mod.sow_vectorize(text, vocab) for text in texts])
        Y = np.zeros((len(texts), len(class_names)), dtype=np.uint8)
        for row, label in enumerate(labels):
            Y[row, class_index[label]] = 1
        dataset = data_mod.Dataset.from_arrays(
            X, Y, feature_names=vocab.tokens, class_names=class_names
        )
    else:
        raise ConfigError("prepare needs --images/--labels or --corpus")
    data_mod.save_dataset(dataset, args.out)
    print(
        f"wrote {dataset.count} examples "
        f"(o={dataset.n_inputs}, m={dataset.n_outputs}) -> {args.out}"
    )
    return EXIT_OK


def _read_labeled_corpus(path):
    texts, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'label<TAB>text'")
            label, _, text = line.partition("\t")
            labels.append(label.strip())
            texts.append(text)
    if not texts:
        raise ShapeError(f"{path}: corpus is empty")
    return texts, labels


def _set_threads(threads):
    if threads and _kernels.NUMBA_AVAILABLE:
        import numba

        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


def _cmd_train(args) -> int:
    run = RunConfig.load(args.config)
    if args.vanilla:
        run.vanilla = True
    if args.threads is not None:
        run.threads = args.threads
    _set_threads(run.threads)
    if not run.train_path:
        raise ConfigError("config is missing train_path")
    train = data_mod.load_dataset(run.train_path)
    test = data_mod.load_dataset(run.test_path) if run.test_path else None
    config = run.to_model_config()
    if train.n_inputs != config.n_inputs or train.n_outputs != config.n_outputs:
        raise ShapeError(
            f"dataset is (o={train.n_inputs}, m={train.n_outputs}) but the config "
            f"says (o={config.n_inputs}, m={config.n_outputs})"
        )
    model = init_vanilla(config) if run.vanilla else init_coalesced(config)
    rng = RandomSource(config.seed)
    report = evaluation.TrialReport(seed=config.seed)
    for epoch in range(run.epochs):
        t0 = time.perf_counter()
        learn.fit_epoch(model, train, rng, epoch=epoch, shuffle=run.shuffle)
        t1 = time.perf_counter()
        report.train_accuracy.append(evaluation.score_model(model, train, run.scoring))
        if test is not None:
            report.test_accuracy.append(
                evaluation.score_model(model, test, run.scoring)
            )
        t2 = time.perf_counter()
        report.train_seconds.append(t1 - t0)
        report.eval_seconds.append(t2 - t1)
        line = f"epoch {epoch}: train_acc={report.train_accuracy[-1]:.4f}"
        if test is not None:
            line += f" test_acc={report.test_accuracy[-1]:.4f}"
        print(line)
    save_model(model, run.model_out)
    if not report.test_accuracy:
        report.test_accuracy = report.train_accuracy
        report.eval_seconds = report.eval_seconds or [0.0] * run.epochs
    evaluation.write_reports_csv([report], run.report_out)
    print(f"wrote model -> {run.model_out}")
    print(f"wrote per-epoch report -> {run.report_out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    dataset = data_mod.load_dataset(args.data)
    if dataset.count == 0:
        raise ShapeError("dataset is empty")
    if dataset.n_inputs != model.config.n_inputs or (
        dataset.n_outputs != model.config.n_outputs
    ):
        raise ShapeError(
            f"dataset is (o={dataset.n_inputs}, m={dataset.n_outputs}) but the model "
            f"expects (o={model.config.n_inputs}, m={model.config.n_outputs})"
        )
    votes = vote_matrix(model, dataset)
    truth = dataset.y_array()
    pred_labels = np.argmax(votes, axis=1)
    truth_labels = dataset.labels()
    metrics = {
        "count": dataset.count,
        "accuracy_argmax": evaluation.accuracy(votes, truth, "argmax"),
        "accuracy_per_output": evaluation.accuracy(
            (votes >= 0).astype(np.uint8), truth, "per_output"
        ),
        "f1_per_class": [
            evaluation.per_class_f1(pred_labels, truth_labels, cls)
            for cls in range(model.config.n_outputs)
        ],
    }
    text = json.dumps(metrics, sort_keys=True, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    model = load_model(args.model)
    names = None
    if args.names:
        if not os.path.exists(args.names):
            raise ConfigError(f"vocabulary file not found: {args.names}")
        names = data_mod.Vocabulary.load(args.names).tokens
    impact = np.max(np.abs(model.weights), axis=0)
    order = np.argsort(-impact, kind="stable")
    for j in order[: args.top]:
        print(f"clause {int(j):4d}: {render_clause(model, int(j), names, with_weights=True)}")
    return EXIT_OK


def _cmd_oracle_check(args) -> int:
    if args.instances == 0:
        print("warning: 0 instances requested; vacuous pass")
        return EXIT_OK
    checked = equivalence_check(
        n_instances=args.instances, n_steps=args.steps, seed=args.seed
    )
    print(f"oracle check passed: {checked} instances x {args.steps} steps")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate-xor": _cmd_generate_xor,
        "prepare": _cmd_prepare,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "inspect": _cmd_inspect,
        "oracle-check": _cmd_oracle_check,
    }
    try:
        return handlers[args.command](args)
    except DivergenceError as err:
        print(f"DIVERGENCE: {err}", file=sys.stderr)
        for key, value in err.detail.items():
            print(f"  {key}: {value}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ShapeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except CotmError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
