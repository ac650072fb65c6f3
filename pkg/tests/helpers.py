"""Shared test fixtures: hand-built machines and small random instances."""

import numpy as np

from cotm.model import Config, Model


def xor_and_or_model() -> Model:
    """Four one-pattern clauses wired so the outputs compute XOR, AND, OR.

    Memory depth 4; column order x1, x2, NOT x1, NOT x2. Clause rows:
    x1 AND NOT x2 / NOT x1 AND x2 / x1 AND x2 / NOT x1 AND NOT x2.
    """
    memory = np.array(
        [
            [8, 1, 2, 7],
            [1, 7, 8, 2],
            [8, 7, 1, 2],
            [2, 1, 7, 8],
        ],
        dtype=np.int32,
    )
    weights = np.array(
        [
            [1, 1, -1, -1],   # XOR
            [-1, -1, 1, -1],  # AND
            [1, 1, 1, -1],    # OR
        ],
        dtype=np.int32,
    )
    config = Config(
        n_outputs=3, n_clauses=4, n_inputs=2, memory_depth=4,
        voting_margin=4, specificity=2.0,
    )
    return Model(config, memory, weights, np.zeros((3, 4), dtype=np.uint8))


def random_small_model(gen: np.random.Generator, **overrides):
    """Random well-formed model on a small instance, for fuzzing."""
    params = dict(
        n_outputs=int(gen.integers(1, 5)),
        n_clauses=int(gen.integers(1, 9)),
        n_inputs=int(gen.integers(1, 7)),
        memory_depth=int(gen.integers(1, 5)),
        voting_margin=int(gen.integers(1, 9)),
        specificity=float(gen.choice([1.0, 2.0, 4.0])),
        boost_true_positive=bool(gen.integers(0, 2)),
        seed=int(gen.integers(0, 2**63)),
    )
    params.update(overrides)
    config = Config(**params)
    memory = gen.integers(
        1, config.max_state + 1, size=(config.n_clauses, config.n_literals)
    ).astype(np.int32)
    weights = gen.integers(
        -4, 5, size=(config.n_outputs, config.n_clauses)
    ).astype(np.int32)
    frozen = np.zeros((config.n_outputs, config.n_clauses), dtype=np.uint8)
    return Model(config, memory, weights, frozen)
