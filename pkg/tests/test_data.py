"""Dataset synthesis, file formats, binarization, text features, subsampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotm.data import (
    XOR_CLASS0_PATCHES,
    XOR_CLASS1_PATCHES,
    XOR_PATCH_PIXELS,
    Dataset,
    Vocabulary,
    binarize_adaptive_gaussian,
    build_vocabulary,
    gaussian_window_weights,
    generate_noisy_xor,
    load_dataset,
    load_idx,
    save_dataset,
    save_idx,
    sow_vectorize,
    subsample_geometric,
    subsample_remove_fraction,
)
from cotm.errors import ConfigError, FormatError, ShapeError


class TestNoisyXor:
    def test_default_sizes(self):
        train, test = generate_noisy_xor(seed=0)
        assert (train.count, test.count) == (2500, 10000)
        assert (train.n_inputs, train.n_outputs) == (16, 2)

    def test_clean_labels_match_patch_class(self):
        train, test = generate_noisy_xor(400, 400, label_noise=0.0, seed=4)
        for ds in (train, test):
            X, labels = ds.x_array(), ds.labels()
            patches = [tuple(row) for row in X[:, XOR_PATCH_PIXELS]]
            for patch, label in zip(patches, labels):
                expected = 1 if patch in XOR_CLASS1_PATCHES else 0
                assert patch in (XOR_CLASS1_PATCHES if expected else XOR_CLASS0_PATCHES)
                assert label == expected

    def test_noise_flips_exact_count_train_only(self):
        noisy, test_noisy = generate_noisy_xor(2500, 500, label_noise=0.4, seed=7)
        clean, test_clean = generate_noisy_xor(2500, 500, label_noise=0.0, seed=7)
        assert np.array_equal(noisy.x_array(), clean.x_array())
        flipped = np.any(noisy.y_array() != clean.y_array(), axis=1)
        assert flipped.sum() == 1000
        assert np.array_equal(test_noisy.y_array(), test_clean.y_array())

    def test_class_balance(self):
        train, _ = generate_noisy_xor(10000, 10, label_noise=0.0, seed=2)
        ones = train.labels().sum()
        sigma = 0.5 * np.sqrt(10000)
        assert abs(ones - 5000) < 3 * sigma

    def test_every_patch_is_a_line(self):
        train, _ = generate_noisy_xor(2000, 10, label_noise=0.0, seed=3)
        valid = set(XOR_CLASS0_PATCHES) | set(XOR_CLASS1_PATCHES)
        for row in train.x_array()[:, XOR_PATCH_PIXELS]:
            assert tuple(row) in valid

    def test_validation(self):
        with pytest.raises(ConfigError):
            generate_noisy_xor(0, 10)
        with pytest.raises(ConfigError):
            generate_noisy_xor(10, 10, label_noise=1.5)

    def test_deterministic(self):
        a, _ = generate_noisy_xor(100, 10, seed=5)
        b, _ = generate_noisy_xor(100, 10, seed=5)
        assert np.array_equal(a.x_words, b.x_words)
        assert np.array_equal(a.y_words, b.y_words)


class TestDatasetContainer:
    def test_round_trip_bytes(self, tmp_path):
        train, _ = generate_noisy_xor(50, 10, seed=1)
        p1, p2 = tmp_path / "a.cotd", tmp_path / "b.cotd"
        save_dataset(train, p1)
        reloaded = load_dataset(p1)
        assert np.array_equal(reloaded.x_array(), train.x_array())
        assert np.array_equal(reloaded.y_array(), train.y_array())
        save_dataset(reloaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_and_truncation(self, tmp_path):
        path = tmp_path / "bad.cotd"
        path.write_bytes(b"WHAT" + b"\x00" * 30)
        with pytest.raises(FormatError) as err:
            load_dataset(path)
        assert err.value.offset == 0
        train, _ = generate_noisy_xor(50, 10, seed=1)
        good = tmp_path / "good.cotd"
        save_dataset(train, good)
        (tmp_path / "cut.cotd").write_bytes(good.read_bytes()[:-3])
        with pytest.raises(FormatError):
            load_dataset(tmp_path / "cut.cotd")

    def test_odd_widths_round_trip(self, tmp_path):
        gen = np.random.default_rng(0)
        ds = Dataset.from_arrays(
            gen.integers(0, 2, size=(13, 9)).astype(np.uint8),
            gen.integers(0, 2, size=(13, 3)).astype(np.uint8),
        )
        save_dataset(ds, tmp_path / "odd.cotd")
        back = load_dataset(tmp_path / "odd.cotd")
        assert np.array_equal(back.x_array(), ds.x_array())
        assert np.array_equal(back.y_array(), ds.y_array())


class TestIdx:
    def test_round_trip(self, tmp_path):
        gen = np.random.default_rng(6)
        tensor = gen.integers(0, 256, size=(3, 28, 28)).astype(np.uint8)
        save_idx(tmp_path / "t.idx", tensor)
        assert np.array_equal(load_idx(tmp_path / "t.idx"), tensor)

    def test_zero_items(self, tmp_path):
        save_idx(tmp_path / "z.idx", np.zeros((0, 4, 4), dtype=np.uint8))
        assert load_idx(tmp_path / "z.idx").shape == (0, 4, 4)

    def test_truncated_names_counts(self, tmp_path):
        save_idx(tmp_path / "t.idx", np.arange(20, dtype=np.uint8).reshape(4, 5))
        raw = (tmp_path / "t.idx").read_bytes()
        (tmp_path / "cut.idx").write_bytes(raw[:-4])
        with pytest.raises(FormatError, match="expected 32"):
            load_idx(tmp_path / "cut.idx")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.idx").write_bytes(b"\x01\x02\x03\x04")
        with pytest.raises(FormatError) as err:
            load_idx(tmp_path / "bad.idx")
        assert err.value.offset == 0

    def test_label_file_shape(self, tmp_path):
        save_idx(tmp_path / "y.idx", np.array([3, 1, 4], dtype=np.uint8))
        assert load_idx(tmp_path / "y.idx").tolist() == [3, 1, 4]


class TestBinarize:
    def test_constant_image_all_ones(self):
        image = np.full((9, 9), 137, dtype=np.uint8)
        assert binarize_adaptive_gaussian(image, 11, 2).all()

    def test_single_bright_pixel(self):
        image = np.zeros((15, 15), dtype=np.uint8)
        image[7, 7] = 255
        out = binarize_adaptive_gaussian(image, 11, 2)
        assert out[7, 7] == 1

    def test_one_bit_per_pixel(self):
        gen = np.random.default_rng(1)
        image = gen.integers(0, 256, size=(12, 10)).astype(np.uint8)
        out = binarize_adaptive_gaussian(image)
        assert out.shape == image.shape
        assert set(np.unique(out)) <= {0, 1}

    def test_even_window_rejected(self):
        with pytest.raises(ConfigError):
            binarize_adaptive_gaussian(np.zeros((5, 5)), window=10)
        with pytest.raises(ShapeError):
            binarize_adaptive_gaussian(np.zeros((0, 5)))

    def test_matches_windowed_bruteforce(self):
        # independent oracle: direct weighted sum over the replicated-edge
        # neighborhood for every pixel
        gen = np.random.default_rng(9)
        image = gen.integers(0, 256, size=(8, 7)).astype(np.uint8)
        window, threshold = 5, 2.0
        weights = gaussian_window_weights(window)
        kernel2d = np.outer(weights, weights)
        half = window // 2
        padded = np.pad(image.astype(np.float64), half, mode="edge")
        expected = np.empty_like(image)
        for r in range(image.shape[0]):
            for c in range(image.shape[1]):
                mean = (padded[r : r + window, c : c + window] * kernel2d).sum()
                expected[r, c] = image[r, c] > mean - threshold
        got = binarize_adaptive_gaussian(image, window, threshold)
        assert np.array_equal(got, expected)

    def test_locality(self):
        gen = np.random.default_rng(3)
        image = gen.integers(0, 256, size=(20, 20)).astype(np.uint8)
        window = 5
        out = binarize_adaptive_gaussian(image, window, 2)
        far = image.copy()
        far[0, 0] = 255 - far[0, 0]
        out2 = binarize_adaptive_gaussian(far, window, 2)
        assert np.array_equal(out[10:, 10:], out2[10:, 10:])

    def test_stack(self):
        gen = np.random.default_rng(4)
        stack = gen.integers(0, 256, size=(5, 9, 9)).astype(np.uint8)
        out = binarize_adaptive_gaussian(stack, 5, 2)
        single = binarize_adaptive_gaussian(stack[2], 5, 2)
        assert np.array_equal(out[2], single)


class TestVocabulary:
    def test_df_ranking_with_lexicographic_ties(self):
        vocab = build_vocabulary(["a b", "b c"], max_size=2)
        assert vocab.tokens == ["b", "a"]

    def test_max_size_larger_than_distinct(self):
        vocab = build_vocabulary(["x y", "z"], max_size=10)
        assert sorted(vocab.tokens) == ["x", "y", "z"]

    def test_duplicate_documents_do_not_reorder(self):
        a = build_vocabulary(["red blue", "blue"], 5)
        b = build_vocabulary(["red blue", "blue"] * 3, 5)
        assert a.tokens == b.tokens

    def test_validation(self):
        with pytest.raises(ConfigError):
            build_vocabulary(["a"], 0)
        with pytest.raises(ShapeError):
            build_vocabulary([], 5)
        with pytest.raises(ShapeError):
            build_vocabulary(["...", "!!"], 5)

    def test_save_load(self, tmp_path):
        vocab = build_vocabulary(["good movie", "bad movie"], 3)
        vocab.save(tmp_path / "v.txt")
        assert Vocabulary.load(tmp_path / "v.txt").tokens == vocab.tokens


class TestSowVectorize:
    def test_review_example(self):
        vocab = Vocabulary(["the", "movie", "was", "good", "and", "i", "had",
                            "popcorn", "bad"])
        bits = sow_vectorize("The movie was good, and I had popcorn", vocab)
        assert bits.tolist() == [1, 1, 1, 1, 1, 1, 1, 1, 0]

    def test_empty_and_repeats(self):
        vocab = Vocabulary(["a", "b"])
        assert sow_vectorize("", vocab).tolist() == [0, 0]
        assert sow_vectorize("a a a", vocab).tolist() == [1, 0]

    def test_oov_ignored(self):
        vocab = Vocabulary(["a"])
        assert sow_vectorize("zebra", vocab).tolist() == [0]

    @given(st.text(max_size=40), st.text(max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_monotone(self, base, extra):
        vocab = Vocabulary(["cat", "dog", "bird"])
        before = sow_vectorize(base, vocab)
        after = sow_vectorize(base + " " + extra, vocab)
        assert np.all(after >= before)


def one_hot_dataset(labels, n_classes):
    labels = np.asarray(labels)
    gen = np.random.default_rng(0)
    X = gen.integers(0, 2, size=(len(labels), 4)).astype(np.uint8)
    Y = np.zeros((len(labels), n_classes), dtype=np.uint8)
    Y[np.arange(len(labels)), labels] = 1
    return Dataset.from_arrays(X, Y)


class TestSubsample:
    def test_remove_zero_keeps_everything(self):
        ds = one_hot_dataset([0, 1, 0, 1, 1], 2)
        out = subsample_remove_fraction(ds, 1, 0.0, seed=1)
        assert np.array_equal(out.x_words, ds.x_words)

    def test_remove_ninety_percent(self):
        ds = one_hot_dataset([1] * 1000 + [0] * 500, 2)
        out = subsample_remove_fraction(ds, 1, 0.9, seed=1)
        labels = out.labels()
        assert (labels == 1).sum() == 100
        assert (labels == 0).sum() == 500
        # untouched class is preserved as an exact multiset, in order
        kept_zero = out.x_array()[labels == 0]
        orig_zero = ds.x_array()[ds.labels() == 0]
        assert np.array_equal(kept_zero, orig_zero)

    def test_geometric_counts(self):
        ds = one_hot_dataset(
            sum(([cls] * 5000 for cls in range(4)), []), 4
        )
        out = subsample_geometric(ds, ranking=[0, 1, 2, 3], seed=2)
        counts = [(out.labels() == cls).sum() for cls in range(4)]
        assert counts == [5000, 2500, 1250, 625]

    def test_unknown_class_rejected(self):
        ds = one_hot_dataset([0, 1], 2)
        with pytest.raises(ConfigError):
            subsample_remove_fraction(ds, 5, 0.5)
        with pytest.raises(ConfigError):
            subsample_geometric(ds, [0, 0])

    def test_deterministic(self):
        ds = one_hot_dataset([1] * 100 + [0] * 100, 2)
        a = subsample_remove_fraction(ds, 1, 0.5, seed=9)
        b = subsample_remove_fraction(ds, 1, 0.5, seed=9)
        assert np.array_equal(a.x_words, b.x_words)
