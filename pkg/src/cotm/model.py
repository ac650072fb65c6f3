"""Model representation and the prediction pipeline.

A model is a clause memory matrix (n clauses x 2o literal columns of
automaton states in [1, 2N]), a signed integer weight matrix relating
every clause to every output, and a freeze mask that pins weights in
place for the classic per-output machine emulation.

Prediction: threshold the memory into include/exclude actions, evaluate
each clause as the conjunction of its included literals, weight the
firing clauses into per-output vote sums, and apply a unit step (votes
>= 0 predict 1).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, replace

import numpy as np

from . import bits
from .errors import ConfigError, FormatError, InvariantError, ShapeError
from .rng import SITE_WEIGHT_INIT, RandomSource

MODEL_MAGIC = b"COTM"
MODEL_VERSION = 1

# How an all-exclude clause scores at inference time: "one" keeps the
# vacuous conjunction true (matches the learning dynamics), "zero"
# suppresses it. Learning always treats the empty clause as firing.
EMPTY_CLAUSE_MODES = ("one", "zero")


@dataclass(frozen=True)
class Config:
    n_outputs: int
    n_clauses: int
    n_inputs: int
    memory_depth: int
    voting_margin: int
    specificity: float
    multiclass_scalar: float = 1.0
    boost_true_positive: bool = True
    seed: int = 0
    empty_clause_output: str = "one"

    def __post_init__(self):
        for name in ("n_outputs", "n_clauses", "n_inputs", "memory_depth", "voting_margin"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not self.specificity >= 1.0:
            raise ConfigError(f"specificity must be >= 1, got {self.specificity!r}")
        if not 0.0 < self.multiclass_scalar <= 1.0:
            raise ConfigError(
                f"multiclass_scalar must be in (0, 1], got {self.multiclass_scalar!r}"
            )
        if not 0 <= int(self.seed) < 1 << 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.empty_clause_output not in EMPTY_CLAUSE_MODES:
            raise ConfigError(
                f"empty_clause_output must be one of {EMPTY_CLAUSE_MODES}, "
                f"got {self.empty_clause_output!r}"
            )

    @property
    def n_literals(self) -> int:
        return 2 * self.n_inputs

    @property
    def max_state(self) -> int:
        return 2 * self.memory_depth

    def with_seed(self, seed: int) -> "Config":
        return replace(self, seed=seed)


@dataclass
class Model:
    config: Config
    memory: np.ndarray        # (n_clauses, 2*n_inputs) int32, states in [1, 2N]
    weights: np.ndarray       # (n_outputs, n_clauses) int32
    frozen: np.ndarray        # (n_outputs, n_clauses) uint8; 1 = weight immutable

    def clone(self) -> "Model":
        return Model(self.config, self.memory.copy(), self.weights.copy(), self.frozen.copy())

    def state_equals(self, other: "Model") -> bool:
        return (
            np.array_equal(self.memory, other.memory)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.frozen, other.frozen)
        )


def literalize(x: np.ndarray) -> np.ndarray:
    """Expand an input bit vector into [x_1..x_o, NOT x_1..NOT x_o]."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ShapeError(f"input must be a 1-D bit vector, got shape {x.shape}")
    x = x.astype(np.uint8)
    return np.concatenate([x, 1 - x])


def action_map(memory: np.ndarray, depth: int) -> np.ndarray:
    """Threshold automaton states into exclude (0) / include (1) actions."""
    memory = np.asarray(memory)
    if memory.size and (memory.min() < 1 or memory.max() > 2 * depth):
        bad = np.unravel_index(
            np.argmax((memory < 1) | (memory > 2 * depth)), memory.shape
        )
        raise InvariantError(
            f"memory state {memory[bad]} at {bad} outside [1, {2 * depth}]"
        )
    return (memory > depth).astype(np.uint8)


def clause_outputs(actions: np.ndarray, literals: np.ndarray) -> np.ndarray:
    """Evaluate every clause row: 1 unless some included literal is 0."""
    actions = np.asarray(actions, dtype=np.uint8)
    literals = np.asarray(literals, dtype=np.uint8)
    if actions.ndim != 2 or literals.ndim != 1 or actions.shape[1] != literals.shape[0]:
        raise ShapeError(
            f"action matrix {actions.shape} does not match literal vector "
            f"{literals.shape}"
        )
    falsified = np.any(actions > literals[None, :], axis=1)
    return (~falsified).astype(np.uint8)


def vote_sums(weights: np.ndarray, clause_out: np.ndarray) -> np.ndarray:
    """Per-output vote sums: weight matrix times the clause output vector."""
    weights = np.asarray(weights)
    clause_out = np.asarray(clause_out)
    if weights.ndim != 2 or weights.shape[1] != clause_out.shape[0]:
        raise ShapeError(
            f"weight matrix {weights.shape} does not match clause vector "
            f"{clause_out.shape}"
        )
    return weights.astype(np.int64) @ clause_out.astype(np.int64)


def _check_input(model: Model, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (model.config.n_inputs,):
        raise ShapeError(
            f"input length {x.shape} does not match n_inputs={model.config.n_inputs}"
        )
    return x


def predict(model: Model, x: np.ndarray) -> np.ndarray:
    """Predict the full output vector for one input (unit step on votes)."""
    x = _check_input(model, x)
    lits = literalize(x)
    actions = action_map(model.memory, model.config.memory_depth)
    c = clause_outputs(actions, lits)
    if model.config.empty_clause_output == "zero":
        c = c & actions.any(axis=1).astype(np.uint8)
    v = vote_sums(model.weights, c)
    return (v >= 0).astype(np.uint8)


def vote_matrix(model: Model, data, backend: str | None = None) -> np.ndarray:
    """Vote sums for a batch: (examples, n_outputs) int64.

    `data` is a Dataset or an unpacked (examples, n_inputs) bit matrix.
    """
    from . import _kernels  # local import: keeps numba optional at import time

    cfg = model.config
    if hasattr(data, "literal_words"):
        if data.n_inputs != cfg.n_inputs:
            raise ShapeError(
                f"dataset has n_inputs={data.n_inputs}, model expects {cfg.n_inputs}"
            )
        lit_words = data.literal_words()
    else:
        X = np.asarray(data, dtype=np.uint8)
        if X.ndim != 2 or X.shape[1] != cfg.n_inputs:
            raise ShapeError(
                f"input matrix {X.shape} does not match n_inputs={cfg.n_inputs}"
            )
        lit_words = bits.pack_bits(np.concatenate([X, 1 - X], axis=1))
    actions = action_map(model.memory, cfg.memory_depth)
    include_words = bits.pack_bits(actions)
    nonempty = actions.any(axis=1).astype(np.uint8)
    zero_empty = cfg.empty_clause_output == "zero"
    backend = _kernels.resolve_backend(backend)
    if backend == "numba":
        out = np.empty((lit_words.shape[0], cfg.n_outputs), dtype=np.int64)
        _kernels.votes_batch(include_words, nonempty, model.weights, lit_words, zero_empty, out)
        return out
    return _votes_numpy(include_words, nonempty, model.weights, lit_words, zero_empty)


def _votes_numpy(include_words, nonempty, weights, lit_words, zero_empty, chunk=256):
    count = lit_words.shape[0]
    out = np.empty((count, weights.shape[0]), dtype=np.int64)
    w64 = weights.astype(np.int64)
    for start in range(0, count, chunk):
        block = lit_words[start : start + chunk]
        falsified = np.any(include_words[None, :, :] & ~block[:, None, :], axis=2)
        c = (~falsified).astype(np.int64)
        if zero_empty:
            c *= nonempty[None, :]
        out[start : start + chunk] = c @ w64.T
    return out


def predict_batch(model: Model, data, backend: str | None = None) -> np.ndarray:
    """Unit-step predictions for a batch: (examples, n_outputs) uint8."""
    return (vote_matrix(model, data, backend=backend) >= 0).astype(np.uint8)


def init_coalesced(config: Config, rng: RandomSource | None = None) -> Model:
    """Fresh model with shared clauses: weights i.i.d. +/-1, nothing frozen.

    Memory starts at N everywhere: every clause begins empty (all
    exclude) and one increment away from including any literal.
    """
    rng = rng or RandomSource(config.seed)
    m, n = config.n_outputs, config.n_clauses
    u = rng.uniform_array(
        0, 0, SITE_WEIGHT_INIT, np.arange(m)[:, None], np.arange(n)[None, :], 0
    )
    weights = np.where(u < 0.5, 1, -1).astype(np.int32)
    memory = np.full((n, config.n_literals), config.memory_depth, dtype=np.int32)
    frozen = np.zeros((m, n), dtype=np.uint8)
    return Model(config, memory, weights, frozen)


def init_vanilla(config: Config, rng: RandomSource | None = None) -> Model:
    """Per-output machine emulation: clauses partitioned across outputs.

    Partition p serves output p, half its clauses at weight +1 and half
    at -1; every other weight is 0. All weights are frozen, so training
    only shapes the clause memory.
    """
    m, n = config.n_outputs, config.n_clauses
    if n % m != 0:
        raise ConfigError(f"n_clauses={n} is not divisible by n_outputs={m}")
    size = n // m
    if size % 2 != 0:
        raise ConfigError(f"partition size {size} must be even (half +1, half -1)")
    weights = np.zeros((m, n), dtype=np.int32)
    for p in range(m):
        start = p * size
        weights[p, start : start + size // 2] = 1
        weights[p, start + size // 2 : start + size] = -1
    memory = np.full((n, config.n_literals), config.memory_depth, dtype=np.int32)
    frozen = np.ones((m, n), dtype=np.uint8)
    return Model(config, memory, weights, frozen)


def render_clause(model: Model, j: int, names=None, with_weights: bool = False) -> str:
    """Render clause j as a conjunction of its included literals.

    An all-exclude row renders as "TRUE". With `with_weights`, the
    per-output weights are appended.
    """
    cfg = model.config
    if not 0 <= j < cfg.n_clauses:
        raise IndexError(f"clause index {j} out of range [0, {cfg.n_clauses})")
    if names is not None and len(names) != cfg.n_inputs:
        raise ShapeError(
            f"got {len(names)} feature names for n_inputs={cfg.n_inputs}"
        )
    actions = action_map(model.memory[j : j + 1], cfg.memory_depth)[0]
    parts = []
    for k in range(cfg.n_literals):
        if not actions[k]:
            continue
        base = k if k < cfg.n_inputs else k - cfg.n_inputs
        name = names[base] if names is not None else f"x{base + 1}"
        parts.append(name if k < cfg.n_inputs else f"NOT {name}")
    text = " AND ".join(parts) if parts else "TRUE"
    if with_weights:
        weights = " ".join(f"{int(w):+d}" for w in model.weights[:, j])
        text = f"{text}  [{weights}]"
    return text


def save_model(model: Model, path) -> None:
    """Write the bit-exact model container (magic, config, C, W, mask, CRC)."""
    cfg = model.config
    blob = bytearray()
    blob += MODEL_MAGIC
    blob += struct.pack("<H", MODEL_VERSION)
    blob += struct.pack(
        "<5I",
        cfg.n_outputs,
        cfg.n_clauses,
        cfg.n_inputs,
        cfg.memory_depth,
        cfg.voting_margin,
    )
    blob += struct.pack("<2d", cfg.specificity, cfg.multiclass_scalar)
    blob += struct.pack("<B", 1 if cfg.boost_true_positive else 0)
    blob += struct.pack("<Q", cfg.seed)
    blob += model.memory.astype("<u4").tobytes()
    blob += model.weights.astype("<i4").tobytes()
    blob += np.packbits(model.frozen.reshape(-1), bitorder="little").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MODEL_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {MODEL_MAGIC!r}", offset=0)
    if len(raw) < 51:
        raise FormatError(f"model header truncated: {len(raw)} bytes", offset=len(raw))
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}", offset=4)
    m, n, o, depth, margin = struct.unpack_from("<5I", raw, 6)
    specificity, scalar = struct.unpack_from("<2d", raw, 26)
    (boost,) = struct.unpack_from("<B", raw, 42)
    (seed,) = struct.unpack_from("<Q", raw, 43)
    offset = 51
    mem_bytes = n * 2 * o * 4
    w_bytes = m * n * 4
    mask_bytes = (m * n + 7) // 8
    expected = offset + mem_bytes + w_bytes + mask_bytes + 4
    if len(raw) != expected:
        raise FormatError(
            f"model payload has {len(raw)} bytes, expected {expected}", offset=len(raw)
        )
    (stored_crc,) = struct.unpack_from("<I", raw, expected - 4)
    actual_crc = zlib.crc32(raw[: expected - 4])
    if stored_crc != actual_crc:
        raise FormatError(
            f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}",
            offset=expected - 4,
        )
    config = Config(
        n_outputs=m,
        n_clauses=n,
        n_inputs=o,
        memory_depth=depth,
        voting_margin=margin,
        specificity=specificity,
        multiclass_scalar=scalar,
        boost_true_positive=bool(boost),
        seed=seed,
    )
    memory = (
        np.frombuffer(raw, dtype="<u4", count=n * 2 * o, offset=offset)
        .reshape(n, 2 * o)
        .astype(np.int32)
    )
    offset += mem_bytes
    weights = (
        np.frombuffer(raw, dtype="<i4", count=m * n, offset=offset)
        .reshape(m, n)
        .astype(np.int32)
    )
    offset += w_bytes
    mask_buf = np.frombuffer(raw, dtype=np.uint8, count=mask_bytes, offset=offset)
    frozen = np.unpackbits(mask_buf, bitorder="little")[: m * n].reshape(m, n)
    if memory.size and (memory.min() < 1 or memory.max() > 2 * depth):
        raise FormatError("memory states outside [1, 2N]", offset=51)
    return Model(config, memory, weights, frozen.astype(np.uint8))
