"""Coalesced Tsetlin Machine: multi-output propositional rule learning.

A shared pool of conjunctive clauses is related to every output through
learned integer weights; clause composition and weights train together
from per-output voting-margin feedback. Includes a frozen-weight
per-output baseline mode, dataset tooling, an evaluation harness and a
dense reference oracle for bit-exact correctness checks.
"""

from .data import (
    Dataset,
    Vocabulary,
    binarize_adaptive_gaussian,
    build_vocabulary,
    generate_noisy_xor,
    load_dataset,
    load_idx,
    save_dataset,
    save_idx,
    sow_vectorize,
    subsample_geometric,
    subsample_remove_fraction,
)
from .errors import (
    ConfigError,
    CotmError,
    DivergenceError,
    FormatError,
    InvariantError,
    ShapeError,
)
from .evaluation import accuracy, per_class_f1, run_trials, score_model
from .learn import fit_epoch, fit_example
from .model import (
    Config,
    Model,
    init_coalesced,
    init_vanilla,
    load_model,
    predict,
    predict_batch,
    render_clause,
    save_model,
    vote_matrix,
)
from .oracle import equivalence_check, oracle_fit_example, oracle_predict
from .rng import RandomSource

__version__ = "0.1.0"
