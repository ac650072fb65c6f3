"""Dataset tooling: synthesis, ingestion, binarization and imbalance.

Datasets hold packed input and output bit matrices. The 2D noisy XOR
generator builds 4x4 binary images whose upper-right 2x2 patch encodes
the class (diagonal line = class 1, horizontal/vertical line = class 0)
with every other pixel uniform noise and an exact fraction of training
labels flipped. Grayscale images are binarized by comparing each pixel
against its Gaussian-window mean minus a threshold, and text becomes
set-of-words presence bits over a document-frequency-ranked vocabulary.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import bits
from .errors import ConfigError, FormatError, ShapeError
from .rng import (
    SITE_SUBSAMPLE,
    SITE_XOR_CLASS,
    SITE_XOR_FLIP,
    SITE_XOR_PATTERN,
    SITE_XOR_PIXEL,
    RandomSource,
)

DATASET_MAGIC = b"COTD"
DATASET_VERSION = 1

IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}

# Upper-right 2x2 patch of a 4x4 image, row-major pixel order.
XOR_PATCH_PIXELS = (2, 3, 6, 7)
XOR_CLASS1_PATCHES = ((1, 0, 0, 1), (0, 1, 1, 0))
XOR_CLASS0_PATCHES = ((1, 1, 0, 0), (0, 0, 1, 1), (1, 0, 1, 0), (0, 1, 0, 1))

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(eq=False)
class Dataset:
    """Packed binary examples: inputs (count x o bits), outputs (count x m bits)."""

    x_words: np.ndarray
    y_words: np.ndarray
    n_inputs: int
    n_outputs: int
    feature_names: list | None = None
    class_names: list | None = None
    _lit_words: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.x_words.shape[0] != self.y_words.shape[0]:
            raise ShapeError(
                f"input rows ({self.x_words.shape[0]}) != output rows "
                f"({self.y_words.shape[0]})"
            )

    @property
    def count(self) -> int:
        return self.x_words.shape[0]

    @classmethod
    def from_arrays(cls, X, Y, feature_names=None, class_names=None) -> "Dataset":
        X = np.asarray(X, dtype=np.uint8)
        Y = np.asarray(Y, dtype=np.uint8)
        if X.ndim != 2 or Y.ndim != 2:
            raise ShapeError("X and Y must be 2-D bit matrices")
        if X.shape[0] != Y.shape[0]:
            raise ShapeError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
        return cls(
            bits.pack_bits(X), bits.pack_bits(Y), X.shape[1], Y.shape[1],
            feature_names, class_names,
        )

    def x_array(self) -> np.ndarray:
        return bits.unpack_bits(self.x_words, self.n_inputs)

    def y_array(self) -> np.ndarray:
        return bits.unpack_bits(self.y_words, self.n_outputs)

    def literal_words(self) -> np.ndarray:
        """Packed [x, NOT x] rows for the engine; cached (datasets are immutable)."""
        if self._lit_words is None:
            X = self.x_array()
            self._lit_words = bits.pack_bits(np.concatenate([X, 1 - X], axis=1))
        return self._lit_words

    def labels(self) -> np.ndarray:
        """Row labels as argmax over output bits (first max wins)."""
        return np.argmax(self.y_array(), axis=1)

    def select(self, mask) -> "Dataset":
        mask = np.asarray(mask, dtype=bool)
        return Dataset(
            self.x_words[mask], self.y_words[mask], self.n_inputs, self.n_outputs,
            self.feature_names, self.class_names,
        )


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<H", DATASET_VERSION))
        fh.write(struct.pack("<Q", dataset.count))
        fh.write(struct.pack("<2I", dataset.n_inputs, dataset.n_outputs))
        fh.write(bits.pack_rows_to_bytes(dataset.x_array()))
        fh.write(bits.pack_rows_to_bytes(dataset.y_array()))


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != DATASET_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {DATASET_MAGIC!r}", offset=0)
    if len(raw) < 22:
        raise FormatError("dataset header truncated", offset=len(raw))
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {version}", offset=4)
    (count,) = struct.unpack_from("<Q", raw, 6)
    o, m = struct.unpack_from("<2I", raw, 14)
    x_bytes = count * ((o + 7) // 8)
    y_bytes = count * ((m + 7) // 8)
    expected = 22 + x_bytes + y_bytes
    if len(raw) != expected:
        raise FormatError(
            f"dataset payload has {len(raw)} bytes, expected {expected}",
            offset=min(len(raw), expected),
        )
    X = bits.unpack_rows_from_bytes(raw[22 : 22 + x_bytes], count, o)
    Y = bits.unpack_rows_from_bytes(raw[22 + x_bytes :], count, m)
    return Dataset.from_arrays(X, Y)


def generate_noisy_xor(
    n_train: int = 2500, n_test: int = 10000, label_noise: float = 0.4, seed: int = 0,
):
    """Build the synthetic 4x4 patch-class datasets (train noisy, test clean)."""
    if n_train < 1 or n_test < 1:
        raise ConfigError("n_train and n_test must be positive")
    if not 0.0 <= label_noise <= 1.0:
        raise ConfigError(f"label_noise must be in [0, 1], got {label_noise!r}")
    rng = RandomSource(seed)
    train = _xor_split(rng, split=0, count=n_train)
    test = _xor_split(rng, split=1, count=n_test)
    n_flip = round(label_noise * n_train)
    if n_flip:
        scores = rng.uniform_array(2, np.arange(n_train), SITE_XOR_FLIP, 0, 0, 0)
        flip = np.argsort(scores, kind="stable")[:n_flip]
        Y = train.y_array()
        Y[flip] = Y[flip, ::-1]
        train = Dataset.from_arrays(train.x_array(), Y, class_names=train.class_names)
    return train, test


def _xor_split(rng: RandomSource, split: int, count: int) -> Dataset:
    rows = np.arange(count)
    classes = (
        rng.uniform_array(split, rows, SITE_XOR_CLASS, 0, 0, 0) < 0.5
    ).astype(np.uint8)
    u_pattern = rng.uniform_array(split, rows, SITE_XOR_PATTERN, 0, 0, 0)
    X = (
        rng.uniform_array(split, rows[:, None], SITE_XOR_PIXEL, 0, np.arange(16)[None, :], 0)
        < 0.5
    ).astype(np.uint8)
    for cls, patches in ((0, XOR_CLASS0_PATCHES), (1, XOR_CLASS1_PATCHES)):
        member = classes == cls
        choice = np.minimum(
            (u_pattern[member] * len(patches)).astype(np.int64), len(patches) - 1
        )
        patch = np.asarray(patches, dtype=np.uint8)[choice]
        X[np.ix_(member, XOR_PATCH_PIXELS)] = patch
    Y = np.zeros((count, 2), dtype=np.uint8)
    Y[rows, classes] = 1
    return Dataset.from_arrays(X, Y, class_names=["0", "1"])


def load_idx(path) -> np.ndarray:
    """Read an IDX container (big-endian header, row-major payload)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise FormatError("IDX header truncated", offset=len(raw))
    if raw[0] != 0 or raw[1] != 0:
        raise FormatError(f"bad IDX magic {raw[:4].hex()}", offset=0)
    type_code, n_dims = raw[2], raw[3]
    if type_code not in IDX_DTYPES:
        raise FormatError(f"unknown IDX type code {type_code:#04x}", offset=2)
    header_size = 4 + 4 * n_dims
    if len(raw) < header_size:
        raise FormatError(
            f"IDX header needs {header_size} bytes, file has {len(raw)}",
            offset=len(raw),
        )
    dims = struct.unpack_from(f">{n_dims}I", raw, 4) if n_dims else ()
    dtype = IDX_DTYPES[type_code]
    expected = header_size + int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"IDX payload has {len(raw)} bytes, expected {expected}",
            offset=min(len(raw), expected),
        )
    data = np.frombuffer(raw, dtype=dtype, offset=header_size)
    return data.reshape(dims).astype(dtype.newbyteorder("="))


def save_idx(path, array) -> None:
    array = np.asarray(array)
    code = next(
        (c for c, dt in IDX_DTYPES.items() if dt.base == array.dtype.newbyteorder(">")),
        None,
    )
    if code is None:
        raise ConfigError(f"IDX cannot store dtype {array.dtype}")
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, code, array.ndim]))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.astype(IDX_DTYPES[code]).tobytes())


def gaussian_window_weights(window: int) -> np.ndarray:
    """Normalized 1-D Gaussian taps; sigma follows the window size."""
    if window % 2 == 0 or window < 1:
        raise ConfigError(f"window must be a positive odd integer, got {window}")
    sigma = 0.3 * ((window - 1) * 0.5 - 1.0) + 0.8
    xs = np.arange(window, dtype=np.float64) - (window - 1) / 2.0
    k = np.exp(-(xs**2) / (2.0 * sigma**2))
    return k / k.sum()


def binarize_adaptive_gaussian(image, window: int = 11, threshold: float = 2.0):
    """1 where the pixel exceeds its Gaussian-window mean minus `threshold`.

    Borders replicate edge pixels. Works on one image (2-D) or a stack
    (first axis = images).
    """
    image = np.asarray(image)
    if image.size == 0:
        raise ShapeError("image is empty")
    weights = gaussian_window_weights(window)
    smoothed = image.astype(np.float64)
    for axis in (-2, -1):
        smoothed = ndimage.correlate1d(smoothed, weights, axis=axis, mode="nearest")
    return (image.astype(np.float64) > smoothed - threshold).astype(np.uint8)


def tokenize(text: str) -> list:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    tokens: list

    def __post_init__(self):
        self.index = {token: pos for pos, token in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ConfigError("vocabulary contains duplicate tokens")

    def __len__(self):
        return len(self.tokens)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.tokens) + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls([line.rstrip("\n") for line in fh if line.strip()])


def build_vocabulary(texts, max_size: int) -> Vocabulary:
    """Top tokens by document frequency; ties break lexicographically."""
    if max_size < 1:
        raise ConfigError(f"max_size must be >= 1, got {max_size}")
    texts = list(texts)
    if not texts:
        raise ShapeError("corpus is empty")
    doc_freq: dict = {}
    for text in texts:
        for token in set(tokenize(text)):
            doc_freq[token] = doc_freq.get(token, 0) + 1
    if not doc_freq:
        raise ShapeError("corpus contains no tokens")
    ranked = sorted(doc_freq, key=lambda tok: (-doc_freq[tok], tok))
    return Vocabulary(ranked[:max_size])


def sow_vectorize(text: str, vocab: Vocabulary) -> np.ndarray:
    """Presence bits over the vocabulary; out-of-vocabulary tokens are ignored."""
    out = np.zeros(len(vocab), dtype=np.uint8)
    for token in tokenize(text):
        pos = vocab.index.get(token)
        if pos is not None:
            out[pos] = 1
    return out


def subsample_remove_fraction(
    dataset: Dataset, class_index: int, fraction: float, seed: int = 0,
) -> Dataset:
    """Drop round(fraction * count) members of one class uniformly at random.

    Membership is by the class's output bit; every other example is kept
    untouched, in the original order.
    """
    if not 0 <= class_index < dataset.n_outputs:
        raise ConfigError(
            f"class index {class_index} out of range [0, {dataset.n_outputs})"
        )
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"fraction must be in [0, 1], got {fraction!r}")
    member = dataset.y_array()[:, class_index] == 1
    n_remove = round(fraction * int(member.sum()))
    keep = np.ones(dataset.count, dtype=bool)
    if n_remove:
        rng = RandomSource(seed)
        rows = np.nonzero(member)[0]
        scores = rng.uniform_array(0, rows, SITE_SUBSAMPLE, class_index, 0, 0)
        keep[rows[np.argsort(scores, kind="stable")[:n_remove]]] = False
    return dataset.select(keep)


def subsample_geometric(dataset: Dataset, ranking, seed: int = 0) -> Dataset:
    """Keep floor(0.5**r * count) examples of the class ranked r.

    `ranking` lists class indices from most to least represented;
    classes not listed are untouched.
    """
    ranking = list(ranking)
    if len(set(ranking)) != len(ranking):
        raise ConfigError("ranking contains duplicate classes")
    for cls in ranking:
        if not 0 <= cls < dataset.n_outputs:
            raise ConfigError(f"unknown class {cls} in ranking")
    Y = dataset.y_array()
    rng = RandomSource(seed)
    keep = np.ones(dataset.count, dtype=bool)
    for rank, cls in enumerate(ranking):
        rows = np.nonzero(Y[:, cls] == 1)[0]
        n_keep = int(np.floor(0.5**rank * rows.size))
        scores = rng.uniform_array(0, rows, SITE_SUBSAMPLE, cls, 0, 0)
        keep[rows] = False
        keep[rows[np.argsort(scores, kind="stable")[:n_keep]]] = True
    return dataset.select(keep)
