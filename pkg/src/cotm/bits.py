"""Packing bit vectors and matrices into 64-bit words.

Bit b of a row lives in word b // 64 at position b % 64 (LSB first).
Padding bits beyond the row length are zero.
"""

from __future__ import annotations

import numpy as np


def words_needed(n_bits: int) -> int:
    return (n_bits + 63) // 64


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (rows, n_bits) or (n_bits,) 0/1 array into uint64 words."""
    bits = np.asarray(bits)
    squeeze = bits.ndim == 1
    if squeeze:
        bits = bits[None, :]
    rows, n_bits = bits.shape
    n_words = words_needed(n_bits)
    padded = np.zeros((rows, n_words * 64), dtype=np.uint64)
    padded[:, :n_bits] = bits.astype(np.uint64)
    shifts = np.arange(64, dtype=np.uint64)
    words = np.bitwise_or.reduce(padded.reshape(rows, n_words, 64) << shifts, axis=2)
    return words[0] if squeeze else words


def unpack_bits(words: np.ndarray, n_bits: int) -> np.ndarray:
    """Inverse of pack_bits; returns a uint8 0/1 array."""
    words = np.asarray(words, dtype=np.uint64)
    squeeze = words.ndim == 1
    if squeeze:
        words = words[None, :]
    shifts = np.arange(64, dtype=np.uint64)
    bits = (words[:, :, None] >> shifts) & np.uint64(1)
    bits = bits.reshape(words.shape[0], words.shape[1] * 64)[:, :n_bits].astype(np.uint8)
    return bits[0] if squeeze else bits


def pack_rows_to_bytes(bits: np.ndarray) -> bytes:
    """Serialize a (rows, n_bits) 0/1 array, each row padded to whole bytes."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 2:
        raise ValueError("expected a 2-D bit matrix")
    return np.packbits(bits, axis=1, bitorder="little").tobytes()


def unpack_rows_from_bytes(raw: bytes, rows: int, n_bits: int) -> np.ndarray:
    """Inverse of pack_rows_to_bytes; returns a (rows, n_bits) uint8 array."""
    row_bytes = (n_bits + 7) // 8
    buf = np.frombuffer(raw, dtype=np.uint8, count=rows * row_bytes)
    bits = np.unpackbits(buf.reshape(rows, row_bytes), axis=1, bitorder="little")
    return bits[:, :n_bits]
