"""Whole-pipeline run on real images: IDX files -> binarize -> train ->
eval -> inspect, all through the CLI."""

import json

import numpy as np
import pytest

from cotm.cli import RunConfig, main
from cotm.data import load_dataset, save_idx


@pytest.fixture(scope="module")
def digits_idx(tmp_path_factory):
    sklearn_datasets = pytest.importorskip("sklearn.datasets")
    root = tmp_path_factory.mktemp("digits")
    bunch = sklearn_datasets.load_digits()
    images = (bunch.images * (255 / 16)).astype(np.uint8)
    labels = bunch.target.astype(np.uint8)
    save_idx(root / "train-images.idx", images[:1400])
    save_idx(root / "train-labels.idx", labels[:1400])
    save_idx(root / "test-images.idx", images[1400:])
    save_idx(root / "test-labels.idx", labels[1400:])
    return root


def test_image_pipeline_learns(digits_idx, tmp_path, capsys):
    train_out = tmp_path / "train.cotd"
    test_out = tmp_path / "test.cotd"
    for split, out in (("train", train_out), ("test", test_out)):
        code = main([
            "prepare",
            "--images", str(digits_idx / f"{split}-images.idx"),
            "--labels", str(digits_idx / f"{split}-labels.idx"),
            "--out", str(out), "--window", "5", "--threshold", "2",
        ])
        assert code == 0
    dataset = load_dataset(train_out)
    assert (dataset.n_inputs, dataset.n_outputs) == (64, 10)

    run = RunConfig(
        n_outputs=10, n_clauses=400, n_inputs=64, memory_depth=64,
        voting_margin=250, specificity=10.0, multiclass_scalar=1.0, seed=11,
        train_path=str(train_out), test_path=str(test_out), epochs=8,
        model_out=str(tmp_path / "digits.cotm"),
        report_out=str(tmp_path / "digits.csv"),
    )
    cfg_path = tmp_path / "digits.cfg"
    run.save(cfg_path)
    assert main(["train", "--config", str(cfg_path)]) == 0
    capsys.readouterr()

    assert main(["eval", "--model", run.model_out, "--data", str(test_out)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    # ten-class handwritten digits from 8x8 thumbnails: well above chance
    assert metrics["accuracy_argmax"] > 0.7
    assert len(metrics["f1_per_class"]) == 10

    assert main(["inspect", "--model", run.model_out, "--top", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and all("clause" in line for line in lines)


def test_trained_xor_model_surfaces_patch_clauses():
    """After training on the clean patch task, the highest-impact clauses
    condition on patch-position literals."""
    from cotm.data import XOR_PATCH_PIXELS, generate_noisy_xor
    from cotm.learn import fit_epoch
    from cotm.model import Config, action_map, init_coalesced
    from cotm.rng import RandomSource

    train, _ = generate_noisy_xor(800, 10, label_noise=0.0, seed=12)
    config = Config(
        n_outputs=2, n_clauses=64, n_inputs=16, memory_depth=32,
        voting_margin=32, specificity=5.0, seed=6,
    )
    model = init_coalesced(config)
    rng = RandomSource(config.seed)
    for epoch in range(15):
        fit_epoch(model, train, rng, epoch=epoch)
    impact = np.max(np.abs(model.weights), axis=0)
    top = np.argsort(-impact)[:5]
    actions = action_map(model.memory, config.memory_depth)
    patch_literals = set(XOR_PATCH_PIXELS) | {16 + p for p in XOR_PATCH_PIXELS}
    for j in top:
        included = set(np.nonzero(actions[j])[0])
        assert included & patch_literals, (
            f"top clause {j} (impact {impact[j]}) has no patch literal: {included}"
        )
