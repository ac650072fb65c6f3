"""Training: resource allocation, feedback selection and state updates.

One training step works from a single example (x, y). Vote sums are
compared against the per-output margin to produce update probabilities,
clause/output pairs are selected for Type I feedback (reinforce the
observed output) or Type II feedback (discriminate against it), the
per-output feedback matrices accumulate into a single memory delta that
is clipped once, and weights step by +/-1 toward or away from zero.

Everything is computed from the pre-update state and applied at the end
of the step; all randomness comes from coordinate-keyed draws, so the
numba kernel and this module's numpy path give bit-identical models.
"""

from __future__ import annotations

import numpy as np

from . import _kernels, bits
from .errors import ConfigError, ShapeError
from .model import Model, action_map, clause_outputs, literalize, vote_sums
from .rng import (
    SITE_TYPE_I,
    SITE_TYPE_IA,
    SITE_TYPE_IB,
    SITE_TYPE_II,
    RandomSource,
)


def margins(y: np.ndarray, voting_margin: int) -> np.ndarray:
    """Per-output vote targets: +t where y is 1, -t where y is 0."""
    y = np.asarray(y).astype(np.int64)
    return y * voting_margin - (1 - y) * voting_margin


def update_probabilities(votes, q, voting_margin: int) -> np.ndarray:
    """Distance from the clipped vote sum to the margin, scaled to [0, 1]."""
    if voting_margin == 0:
        raise ConfigError("voting_margin must be nonzero")
    votes = np.asarray(votes, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    if votes.shape != q.shape:
        raise ShapeError(f"votes {votes.shape} and margins {q.shape} differ")
    clipped = np.clip(votes, -voting_margin, voting_margin)
    return np.abs(q - clipped) / (2.0 * voting_margin)


def _detached(weights, frozen):
    """Frozen zero weights mark clause/output pairs that are structurally
    disconnected (the per-output baseline mode): they cast no votes and
    receive no feedback. Transient zeros of learned weights still count
    as positive sign."""
    if frozen is None:
        return np.zeros_like(weights, dtype=bool)
    return (np.asarray(frozen) == 1) & (np.asarray(weights) == 0)


def select_type_i(weights, y, d, rng: RandomSource, epoch=0, idx=0, frozen=None) -> np.ndarray:
    """Type I selection: output and weight sign agree (XNOR), gated by d_i."""
    weights = np.asarray(weights)
    y = np.asarray(y).astype(np.uint8)
    m, n = weights.shape
    eligible = ((y[:, None] == 1) == (weights >= 0)) & ~_detached(weights, frozen)
    u = rng.uniform_array(
        epoch, idx, SITE_TYPE_I, np.arange(m)[:, None], np.arange(n)[None, :], 0
    )
    return (eligible & (u < np.asarray(d)[:, None])).astype(np.uint8)


def select_type_ii(weights, y, d, scale, rng: RandomSource, epoch=0, idx=0, frozen=None) -> np.ndarray:
    """Type II selection: output and weight sign disagree (XOR), gated by d_i * e."""
    if not 0.0 < scale <= 1.0:
        raise ConfigError(f"multiclass scalar must be in (0, 1], got {scale!r}")
    weights = np.asarray(weights)
    y = np.asarray(y).astype(np.uint8)
    m, n = weights.shape
    eligible = ((y[:, None] == 1) != (weights >= 0)) & ~_detached(weights, frozen)
    u = rng.uniform_array(
        epoch, idx, SITE_TYPE_II, np.arange(m)[:, None], np.arange(n)[None, :], 0
    )
    return (eligible & (u < np.asarray(d)[:, None] * scale)).astype(np.uint8)


def feedback_type_ia(
    clause_out, literals, boost: bool, specificity: float, rng: RandomSource,
    epoch=0, idx=0, output=0,
) -> np.ndarray:
    """Memorize: +1 where the clause fires and the literal is true.

    With boosting the increment is certain; otherwise each entry is
    gated with probability (s-1)/s.
    """
    c = np.asarray(clause_out, dtype=np.uint8)
    lits = np.asarray(literals, dtype=np.uint8)
    fb = np.outer(c, lits).astype(np.int32)
    if not boost:
        gate = (specificity - 1.0) / specificity
        u = rng.uniform_array(
            epoch, idx, SITE_TYPE_IA, output,
            np.arange(c.shape[0])[:, None], np.arange(lits.shape[0])[None, :],
        )
        fb *= u < gate
    return fb


def feedback_type_ib(
    clause_out, literals, specificity: float, rng: RandomSource,
    epoch=0, idx=0, output=0,
) -> np.ndarray:
    """Forget: -1 candidates wherever the clause misses or the literal is false.

    Each eligible entry decrements independently with probability 1/s.
    """
    c = np.asarray(clause_out, dtype=np.uint8)
    lits = np.asarray(literals, dtype=np.uint8)
    eligible = (c[:, None] == 0) | (lits[None, :] == 0)
    u = rng.uniform_array(
        epoch, idx, SITE_TYPE_IB, output,
        np.arange(c.shape[0])[:, None], np.arange(lits.shape[0])[None, :],
    )
    return (eligible & (u < 1.0 / specificity)).astype(np.int32)


def feedback_type_ii(clause_out, literals, actions) -> np.ndarray:
    """Invalidate: +1 where the clause fires on a false, excluded literal."""
    c = np.asarray(clause_out, dtype=np.uint8)
    lits = np.asarray(literals, dtype=np.uint8)
    actions = np.asarray(actions, dtype=np.uint8)
    if actions.shape != (c.shape[0], lits.shape[0]):
        raise ShapeError(
            f"action matrix {actions.shape} does not match clauses x literals"
        )
    return ((c[:, None] == 1) & (lits[None, :] == 0) & (actions == 0)).astype(np.int32)


def apply_memory_update(memory, delta, depth: int) -> np.ndarray:
    """Add the accumulated delta and clip states into [1, 2N]."""
    memory = np.asarray(memory, dtype=np.int32)
    return np.clip(memory + np.asarray(delta, dtype=np.int32), 1, 2 * depth).astype(
        np.int32
    )


def apply_weight_update(weights, frozen, r1, r2, clause_out, y) -> np.ndarray:
    """Step selected weights by +/-1; the sign follows the example output.

    Only firing clauses move their weights, and frozen entries never
    change.
    """
    weights = np.asarray(weights, dtype=np.int32)
    direction = 2 * np.asarray(y, dtype=np.int32) - 1
    delta = (
        (np.asarray(r1, dtype=np.int32) + np.asarray(r2, dtype=np.int32))
        * np.asarray(clause_out, dtype=np.int32)[None, :]
        * direction[:, None]
    )
    return np.where(np.asarray(frozen) == 1, weights, weights + delta).astype(np.int32)


def _check_example(model: Model, x, y):
    cfg = model.config
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != (cfg.n_inputs,):
        raise ShapeError(f"input shape {x.shape} != ({cfg.n_inputs},)")
    if y.shape != (cfg.n_outputs,):
        raise ShapeError(f"output shape {y.shape} != ({cfg.n_outputs},)")
    return x.astype(np.uint8), y.astype(np.uint8)


def _fit_example_numpy(model: Model, x, y, rng: RandomSource, epoch: int, idx: int):
    cfg = model.config
    lits = literalize(x)
    actions = action_map(model.memory, cfg.memory_depth)
    c = clause_outputs(actions, lits)
    v = vote_sums(model.weights, c)
    q = margins(y, cfg.voting_margin)
    d = update_probabilities(v, q, cfg.voting_margin)
    r1 = select_type_i(model.weights, y, d, rng, epoch, idx, frozen=model.frozen)
    r2 = select_type_ii(
        model.weights, y, d, cfg.multiclass_scalar, rng, epoch, idx, frozen=model.frozen
    )

    delta = np.zeros((cfg.n_clauses, cfg.n_literals), dtype=np.int32)
    fb_ii = feedback_type_ii(c, lits, actions) if r2.any() else None
    for i in range(cfg.n_outputs):
        if r1[i].any():
            fb_ia = feedback_type_ia(
                c, lits, cfg.boost_true_positive, cfg.specificity, rng, epoch, idx, i
            )
            fb_ib = feedback_type_ib(c, lits, cfg.specificity, rng, epoch, idx, i)
            delta += r1[i][:, None] * (fb_ia - fb_ib)
        if fb_ii is not None and r2[i].any():
            delta += r2[i][:, None] * fb_ii
    model.weights = apply_weight_update(model.weights, model.frozen, r1, r2, c, y)
    model.memory = apply_memory_update(model.memory, delta, cfg.memory_depth)
    return model


def _fit_batch_numba(model: Model, lit_words, y_rows, visit, keys, epoch, rng):
    cfg = model.config
    actions = action_map(model.memory, cfg.memory_depth)
    include_words = bits.pack_bits(actions)
    _kernels.fit_batch(
        model.memory,
        model.weights,
        model.frozen,
        actions,
        include_words,
        lit_words,
        y_rows,
        visit,
        keys,
        epoch,
        np.uint64(rng.base_key),
        cfg.memory_depth,
        cfg.voting_margin,
        1.0 / cfg.specificity,
        (cfg.specificity - 1.0) / cfg.specificity,
        cfg.boost_true_positive,
        cfg.multiclass_scalar,
    )
    return model


def fit_example(
    model: Model, x, y, rng: RandomSource | None = None,
    epoch: int = 0, idx: int = 0, backend: str | None = None,
) -> Model:
    """Run one training step in place and return the model."""
    x, y = _check_example(model, x, y)
    rng = rng or RandomSource(model.config.seed)
    backend = _kernels.resolve_backend(backend)
    if backend == "numpy":
        return _fit_example_numpy(model, x, y, rng, epoch, idx)
    lit_words = bits.pack_bits(literalize(x))[None, :]
    y_rows = y[None, :]
    visit = np.zeros(1, dtype=np.int64)
    keys = np.asarray([idx], dtype=np.int64)
    return _fit_batch_numba(model, lit_words, y_rows, visit, keys, epoch, rng)


def fit_epoch(
    model: Model, dataset, rng: RandomSource | None = None,
    epoch: int = 0, shuffle: bool = True, backend: str | None = None,
) -> Model:
    """Train on every example once; the visit order is seed-deterministic.

    Draws are keyed by each example's dataset index, so the stream an
    example sees does not depend on where the permutation placed it.
    """
    cfg = model.config
    if dataset.count == 0:
        raise ShapeError("dataset is empty")
    if dataset.n_inputs != cfg.n_inputs or dataset.n_outputs != cfg.n_outputs:
        raise ShapeError(
            f"dataset shape (o={dataset.n_inputs}, m={dataset.n_outputs}) does not "
            f"match config (o={cfg.n_inputs}, m={cfg.n_outputs})"
        )
    rng = rng or RandomSource(cfg.seed)
    order = rng.permutation(epoch, dataset.count) if shuffle else np.arange(
        dataset.count, dtype=np.int64
    )
    backend = _kernels.resolve_backend(backend)
    if backend == "numba":
        return _fit_batch_numba(
            model, dataset.literal_words(), dataset.y_array(), order, order, epoch, rng
        )
    X = dataset.x_array()
    Y = dataset.y_array()
    for i in order:
        _fit_example_numpy(model, X[i], Y[i], rng, epoch, int(i))
    return model
