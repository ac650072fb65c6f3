"""Word-packing round trips and layout pins."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from cotm.bits import (
    pack_bits,
    pack_rows_to_bytes,
    unpack_bits,
    unpack_rows_from_bytes,
    words_needed,
)


def test_layout_lsb_first():
    words = pack_bits(np.array([1, 0, 1, 1]))
    assert words.tolist() == [0b1101]
    assert pack_bits(np.zeros(65, dtype=np.uint8)).shape == (2,)


def test_bit_position_past_word_boundary():
    bits = np.zeros(70, dtype=np.uint8)
    bits[64] = 1
    words = pack_bits(bits)
    assert words.tolist() == [0, 1]


@given(st.integers(1, 200), st.integers(0, 2**32), st.integers(1, 5))
@settings(max_examples=60, deadline=None)
def test_word_round_trip(n_bits, seed, rows):
    gen = np.random.default_rng(seed)
    bits = gen.integers(0, 2, size=(rows, n_bits)).astype(np.uint8)
    assert np.array_equal(unpack_bits(pack_bits(bits), n_bits), bits)
    assert pack_bits(bits).shape == (rows, words_needed(n_bits))


@given(st.integers(1, 40), st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_byte_round_trip(n_bits, seed):
    gen = np.random.default_rng(seed)
    bits = gen.integers(0, 2, size=(7, n_bits)).astype(np.uint8)
    raw = pack_rows_to_bytes(bits)
    assert len(raw) == 7 * ((n_bits + 7) // 8)
    assert np.array_equal(unpack_rows_from_bytes(raw, 7, n_bits), bits)
