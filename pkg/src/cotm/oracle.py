"""Reference oracle: a deliberately naive, dense transcription.

Every intermediate matrix of the training step is materialized in full
(action map, imply matrix, selection matrices, the per-output random
gate matrix, all three feedback matrices and the row-broadcast masks),
summed over outputs, clipped once, with no packing, masking shortcuts or
parallelism. The optimized engine must match this bit for bit; the
equivalence harness below fuzzes that claim and reports the first
diverging entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError
from .model import Config, Model, init_vanilla, predict
from .rng import (
    SITE_TYPE_I,
    SITE_TYPE_IA,
    SITE_TYPE_IB,
    SITE_TYPE_II,
    RandomSource,
)

# The oracle is for small instances only; refuse anything big.
MAX_CELLS = 10**6


@dataclass
class StepTrace:
    """Every intermediate of one training step, for tests and diagnostics."""

    literals: np.ndarray
    actions: np.ndarray
    clause_out: np.ndarray
    votes: np.ndarray
    q: np.ndarray
    d: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    per_output_delta: list
    memory_delta: np.ndarray
    weight_delta: np.ndarray


def _guard_size(config: Config):
    if config.n_clauses * config.n_inputs > MAX_CELLS:
        raise ConfigError(
            "oracle refuses instances with n_clauses * n_inputs > 1e6; "
            "use the optimized engine"
        )


def oracle_predict(model: Model, x) -> np.ndarray:
    """Dense prediction: unit step of W @ And(Imply(G(C), literals))."""
    cfg = model.config
    _guard_size(cfg)
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (cfg.n_inputs,):
        raise ShapeError(f"input shape {x.shape} != ({cfg.n_inputs},)")
    lits = np.concatenate([x, 1 - x]).astype(np.uint8)
    actions = (model.memory > cfg.memory_depth).astype(np.uint8)
    imply = np.where(actions == 0, 1, lits[None, :]).astype(np.uint8)
    c = np.ones(cfg.n_clauses, dtype=np.uint8)
    for k in range(cfg.n_literals):
        c = c & imply[:, k]
    if cfg.empty_clause_output == "zero":
        c = c & (actions.sum(axis=1) > 0).astype(np.uint8)
    v = model.weights.astype(np.int64) @ c.astype(np.int64)
    return (v >= 0).astype(np.uint8)


def oracle_fit_example(model: Model, x, y, rng: RandomSource, epoch=0, idx=0):
    """One training step, fully materialized. Returns (new model, trace)."""
    cfg = model.config
    _guard_size(cfg)
    m, n, two_o = cfg.n_outputs, cfg.n_clauses, cfg.n_literals
    t = cfg.voting_margin
    s = cfg.specificity
    x = np.asarray(x, dtype=np.uint8)
    y = np.asarray(y, dtype=np.uint8)
    if x.shape != (cfg.n_inputs,) or y.shape != (m,):
        raise ShapeError("example does not match the model configuration")

    lits = np.concatenate([x, 1 - x]).astype(np.uint8)
    actions = (model.memory > cfg.memory_depth).astype(np.uint8)
    imply = np.where(actions == 0, 1, lits[None, :]).astype(np.uint8)
    c = imply.min(axis=1).astype(np.uint8)
    votes = model.weights.astype(np.int64) @ c.astype(np.int64)

    q = (y.astype(np.int64) * t) - ((1 - y.astype(np.int64)) * t)
    clipped = np.clip(votes, -t, t)
    d = np.abs(q - clipped) / (2.0 * t)

    sign_grid = (model.weights >= 0).astype(np.uint8)
    attached = ((model.frozen == 0) | (model.weights != 0)).astype(np.uint8)
    xnor = (y[:, None] == sign_grid).astype(np.uint8) * attached
    xor = (y[:, None] != sign_grid).astype(np.uint8) * attached
    rows = np.arange(m)[:, None]
    cols = np.arange(n)[None, :]
    pi_1 = rng.uniform_array(epoch, idx, SITE_TYPE_I, rows, cols, 0)
    pi_2 = rng.uniform_array(epoch, idx, SITE_TYPE_II, rows, cols, 0)
    r1 = (xnor & (pi_1 < d[:, None])).astype(np.uint8)
    r2 = (xor & (pi_2 < d[:, None] * cfg.multiclass_scalar)).astype(np.uint8)

    clause_grid = np.repeat(c[:, None], two_o, axis=1).astype(np.int64)
    lit_grid = np.repeat(lits[None, :], n, axis=0).astype(np.int64)
    jj = np.arange(n)[:, None]
    kk = np.arange(two_o)[None, :]

    f_ii = clause_grid * (1 - lit_grid) * (1 - actions.astype(np.int64))

    total = np.zeros((n, two_o), dtype=np.int64)
    per_output = []
    for i in range(m):
        if cfg.boost_true_positive:
            f_ia = clause_grid * lit_grid
        else:
            gate = rng.uniform_array(epoch, idx, SITE_TYPE_IA, i, jj, kk)
            f_ia = clause_grid * lit_grid * (gate < (s - 1.0) / s)
        b_i = (
            rng.uniform_array(epoch, idx, SITE_TYPE_IB, i, jj, kk) < 1.0 / s
        ).astype(np.int64)
        f_ib = b_i * ((1 - lit_grid) | (1 - clause_grid))
        q1_i = np.repeat(r1[i][:, None], two_o, axis=1).astype(np.int64)
        q2_i = np.repeat(r2[i][:, None], two_o, axis=1).astype(np.int64)
        contribution = q2_i * f_ii + q1_i * f_ia - q1_i * f_ib
        per_output.append(contribution)
        total += contribution

    new_memory = np.clip(model.memory.astype(np.int64) + total, 1, cfg.max_state)
    y_signed = (2 * y.astype(np.int64) - 1)[:, None]
    weight_delta = (r1.astype(np.int64) + r2.astype(np.int64)) * c[None, :] * y_signed
    new_weights = np.where(
        model.frozen == 1, model.weights.astype(np.int64),
        model.weights.astype(np.int64) + weight_delta,
    )

    trace = StepTrace(
        literals=lits,
        actions=actions,
        clause_out=c,
        votes=votes,
        q=q,
        d=d,
        r1=r1,
        r2=r2,
        per_output_delta=per_output,
        memory_delta=total,
        weight_delta=weight_delta,
    )
    updated = Model(
        cfg, new_memory.astype(np.int32), new_weights.astype(np.int32),
        model.frozen.copy(),
    )
    return updated, trace


def random_instance(gen: np.random.Generator):
    """Sample a small random config + example stream for equivalence fuzzing."""
    m = int(gen.integers(1, 5))
    o = int(gen.integers(1, 7))
    vanilla = bool(gen.integers(0, 2))
    if vanilla:
        n = int(gen.integers(1, 5)) * 2 * m
    else:
        n = int(gen.integers(1, 9))
    scalar = 1.0 if m == 1 or gen.integers(0, 2) else 1.0 / (m - 1)
    config = Config(
        n_outputs=m,
        n_clauses=n,
        n_inputs=o,
        memory_depth=int(gen.integers(1, 5)),
        voting_margin=int(gen.integers(1, 9)),
        specificity=float(gen.choice([1.0, 2.0, 4.0])),
        multiclass_scalar=scalar,
        boost_true_positive=bool(gen.integers(0, 2)),
        seed=int(gen.integers(0, 2**63)),
    )
    return config, vanilla


def _first_difference(a, b):
    where = np.argwhere(np.asarray(a) != np.asarray(b))
    return tuple(int(v) for v in where[0])


def equivalence_check(
    n_instances: int = 1000, n_steps: int = 20, seed: int = 0,
    n_seeds: int = 50, backend: str | None = None, progress=None,
) -> int:
    """Fuzz the optimized engine against the oracle, step by step.

    Instances are spread over `n_seeds` instance-generator seeds. Raises
    DivergenceError at the first mismatch; returns the number of
    instances checked.
    """
    from . import learn
    from .model import init_coalesced

    if n_instances < 0:
        raise ConfigError("instance count must be nonnegative")
    if n_seeds < 1:
        raise ConfigError("need at least one generator seed")
    checked = 0
    per_seed = [n_instances // n_seeds] * n_seeds
    for extra in range(n_instances - sum(per_seed)):
        per_seed[extra % n_seeds] += 1
    for seed_index, count in enumerate(per_seed):
        gen = np.random.default_rng(seed + seed_index)
        for instance in range(count):
            config, vanilla = random_instance(gen)
            engine = init_vanilla(config) if vanilla else init_coalesced(config)
            reference = engine.clone()
            rng = RandomSource(config.seed)
            for step in range(n_steps):
                x = gen.integers(0, 2, size=config.n_inputs).astype(np.uint8)
                y = gen.integers(0, 2, size=config.n_outputs).astype(np.uint8)
                learn.fit_example(
                    engine, x, y, rng, epoch=0, idx=step, backend=backend
                )
                reference, _ = oracle_fit_example(reference, x, y, rng, 0, step)
                detail = {
                    "generator_seed": seed + seed_index,
                    "instance": instance,
                    "step": step,
                    "config": config,
                }
                if not np.array_equal(engine.memory, reference.memory):
                    detail["matrix"] = "memory"
                    detail["index"] = _first_difference(engine.memory, reference.memory)
                    raise DivergenceError(
                        f"memory diverged at step {step}, entry {detail['index']}",
                        detail,
                    )
                if not np.array_equal(engine.weights, reference.weights):
                    detail["matrix"] = "weights"
                    detail["index"] = _first_difference(
                        engine.weights, reference.weights
                    )
                    raise DivergenceError(
                        f"weights diverged at step {step}, entry {detail['index']}",
                        detail,
                    )
                engine_pred = predict(engine, x)
                oracle_pred = oracle_predict(reference, x)
                if not np.array_equal(engine_pred, oracle_pred):
                    detail["matrix"] = "prediction"
                    detail["index"] = _first_difference(engine_pred, oracle_pred)
                    raise DivergenceError(
                        f"prediction diverged at step {step}", detail
                    )
            checked += 1
            if progress is not None:
                progress(checked)
    return checked
