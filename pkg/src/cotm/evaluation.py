"""Metrics and the repeated-trials experimental protocol.

A trial trains a fresh model for a fixed number of epochs, recording
per-epoch train/test accuracy and wall-clock. The summary averages the
last `tail` epochs of each trial, reports the 95th percentile of the
per-trial tail means and the peak single-epoch accuracy, plus per-class
F1 at the final epoch.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .learn import fit_epoch
from .model import Config, Model, init_coalesced, init_vanilla, vote_matrix
from .rng import RandomSource


def accuracy(pred, truth, mode: str = "argmax") -> float:
    """Fraction correct.

    argmax mode scores each row by its largest entry (lowest index wins
    ties), so `pred` may be a vote matrix or a bit matrix; per_output
    mode scores every output bit independently.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction {pred.shape} and truth {truth.shape} differ")
    if pred.size == 0:
        raise ShapeError("cannot score an empty matrix")
    if mode == "argmax":
        return float(np.mean(np.argmax(pred, axis=1) == np.argmax(truth, axis=1)))
    if mode == "per_output":
        return float(np.mean((pred > 0).astype(np.uint8) == truth.astype(np.uint8)))
    raise ConfigError(f"mode must be 'argmax' or 'per_output', got {mode!r}")


def per_class_f1(pred_labels, truth_labels, class_index: int) -> float:
    """F1 = 2PR / (P + R); 0.0 when precision + recall is 0."""
    pred_labels = np.asarray(pred_labels)
    truth_labels = np.asarray(truth_labels)
    if pred_labels.shape != truth_labels.shape:
        raise ShapeError("label vectors differ in shape")
    tp = int(np.sum((pred_labels == class_index) & (truth_labels == class_index)))
    fp = int(np.sum((pred_labels == class_index) & (truth_labels != class_index)))
    fn = int(np.sum((pred_labels != class_index) & (truth_labels == class_index)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def score_model(model: Model, dataset, mode: str = "argmax", backend=None) -> float:
    """Accuracy of a model on a dataset under the given scoring mode."""
    votes = vote_matrix(model, dataset, backend=backend)
    truth = dataset.y_array()
    if mode == "argmax":
        return accuracy(votes, truth, "argmax")
    return accuracy((votes >= 0).astype(np.uint8), truth, "per_output")


@dataclass
class TrialReport:
    seed: int
    train_accuracy: list = field(default_factory=list)
    test_accuracy: list = field(default_factory=list)
    train_seconds: list = field(default_factory=list)
    eval_seconds: list = field(default_factory=list)
    final_f1: list = field(default_factory=list)


def run_trials(
    config: Config,
    train,
    test,
    n_trials: int = 10,
    n_epochs: int = 100,
    tail: int = 25,
    scoring: str = "argmax",
    shuffle: bool = True,
    vanilla: bool = False,
    record_train: bool = True,
    backend=None,
):
    """Repeat training from fresh seeds; returns (summary dict, reports).

    Trial r uses seed config.seed + r for both initialization and the
    training stream, so a rerun with the same config is reproducible.
    """
    if n_trials < 1 or n_epochs < 1:
        raise ConfigError("n_trials and n_epochs must be positive")
    if not 1 <= tail <= n_epochs:
        raise ConfigError(f"tail must be in [1, n_epochs], got {tail}")
    reports = []
    for trial in range(n_trials):
        cfg = config.with_seed(config.seed + trial)
        model = init_vanilla(cfg) if vanilla else init_coalesced(cfg)
        rng = RandomSource(cfg.seed)
        report = TrialReport(seed=cfg.seed)
        for epoch in range(n_epochs):
            t0 = time.perf_counter()
            fit_epoch(model, train, rng, epoch=epoch, shuffle=shuffle, backend=backend)
            t1 = time.perf_counter()
            if record_train:
                report.train_accuracy.append(
                    score_model(model, train, scoring, backend=backend)
                )
            report.test_accuracy.append(
                score_model(model, test, scoring, backend=backend)
            )
            t2 = time.perf_counter()
            report.train_seconds.append(t1 - t0)
            report.eval_seconds.append(t2 - t1)
        votes = vote_matrix(model, test, backend=backend)
        pred_labels = np.argmax(votes, axis=1)
        truth_labels = test.labels()
        report.final_f1 = [
            per_class_f1(pred_labels, truth_labels, cls)
            for cls in range(config.n_outputs)
        ]
        reports.append(report)
    return summarize(reports, tail), reports


def summarize(reports, tail: int) -> dict:
    """Aggregate trial reports over the last `tail` epochs of each trial."""
    tail_means = [float(np.mean(r.test_accuracy[-tail:])) for r in reports]
    all_epochs = np.concatenate([r.test_accuracy for r in reports])
    f1 = np.mean([r.final_f1 for r in reports], axis=0)
    return {
        "n_trials": len(reports),
        "n_epochs": len(reports[0].test_accuracy),
        "tail": tail,
        "mean_accuracy": float(np.mean(tail_means)),
        "p95_accuracy": float(np.percentile(tail_means, 95)),
        "peak_accuracy": float(np.max(all_epochs)),
        "per_trial_tail_mean": tail_means,
        "final_f1_mean": [float(v) for v in f1],
        "train_seconds_per_epoch": float(
            np.mean([np.mean(r.train_seconds) for r in reports if r.train_seconds])
        ) if any(r.train_seconds for r in reports) else 0.0,
        "eval_seconds_per_epoch": float(
            np.mean([np.mean(r.eval_seconds) for r in reports if r.eval_seconds])
        ) if any(r.eval_seconds for r in reports) else 0.0,
    }


def write_reports_csv(reports, path) -> None:
    """One row per (trial, epoch); accuracies use repr so reloads are exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["trial", "epoch", "train_accuracy", "test_accuracy",
             "train_seconds", "eval_seconds"]
        )
        for trial, report in enumerate(reports):
            for epoch in range(len(report.test_accuracy)):
                train_acc = (
                    repr(report.train_accuracy[epoch])
                    if epoch < len(report.train_accuracy)
                    else ""
                )
                writer.writerow(
                    [
                        trial,
                        epoch,
                        train_acc,
                        repr(report.test_accuracy[epoch]),
                        f"{report.train_seconds[epoch]:.6f}",
                        f"{report.eval_seconds[epoch]:.6f}",
                    ]
                )
