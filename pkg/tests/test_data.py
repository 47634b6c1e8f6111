"""Encoding and IDX container tests: seeded reproducibility, statistical
sanity of the Bernoulli trains, and the parser's error taxonomy."""

import struct

import numpy as np
import pytest

from spikegrad.data import (
    BadMagicError,
    CountMismatchError,
    IdxError,
    LabeledImages,
    TruncatedPayloadError,
    bernoulli_train,
    class_target_train,
    decode_spike_count,
    load_idx,
    make_rng,
    rate_encode_image,
    save_idx,
)
from spikegrad.neurons import SpikeTrain


# -- random trains ------------------------------------------------------------


def test_same_seed_same_train():
    a = bernoulli_train(20, 50, 0.3, make_rng(9))
    b = bernoulli_train(20, 50, 0.3, make_rng(9))
    assert np.array_equal(a.data, b.data)


def test_neighbouring_seeds_differ():
    a = bernoulli_train(20, 50, 0.3, make_rng(9))
    b = bernoulli_train(20, 50, 0.3, make_rng(10))
    assert not np.array_equal(a.data, b.data)


def test_train_rate_tracks_probability():
    train = bernoulli_train(100, 200, 0.1, make_rng(0))
    assert abs(train.data.mean() - 0.1) < 0.01


def test_degenerate_probabilities():
    assert not bernoulli_train(5, 5, 0.0, make_rng(1)).data.any()
    assert bernoulli_train(5, 5, 1.0, make_rng(1)).data.all()
    with pytest.raises(ValueError):
        bernoulli_train(5, 5, 1.5, make_rng(1))


def test_rate_encoding_scales_with_intensity():
    rng = make_rng(4)
    pixels = np.array([0, 128, 255], dtype=np.uint8)
    train = rate_encode_image(np.tile(pixels, 200), 40, 0.5, rng)
    rates = train.data.reshape(200, 3, 40).mean(axis=(0, 2))
    assert rates[0] == 0.0
    assert abs(rates[1] - 0.5 * 128 / 255) < 0.02
    assert abs(rates[2] - 0.5) < 0.02
    with pytest.raises(ValueError):
        rate_encode_image(pixels, 10, 0.0, rng)


def test_class_target_structure():
    target = class_target_train(2, 4, 12, period=5)
    assert target.data.shape == (4, 12)
    assert np.array_equal(np.flatnonzero(target.data[2]), [4, 9])
    assert not target.data[[0, 1, 3]].any()
    with pytest.raises(ValueError):
        class_target_train(4, 4, 12, 5)
    with pytest.raises(ValueError):
        class_target_train(0, 4, 12, 0)


def test_decode_picks_busiest_row_lowest_tie():
    train = SpikeTrain(np.array([[1, 0, 1], [1, 1, 1], [0, 0, 0]], dtype=np.uint8))
    assert decode_spike_count(train) == 1
    tie = SpikeTrain(np.array([[1, 0], [0, 1]], dtype=np.uint8))
    assert decode_spike_count(tie) == 0


# -- labeled image container --------------------------------------------------


def test_labeled_images_validation():
    with pytest.raises(ValueError):
        LabeledImages(np.zeros((2, 2, 2), dtype=np.uint8), np.zeros(2, dtype=np.uint8))
    with pytest.raises(CountMismatchError):
        LabeledImages(np.zeros((3, 4), dtype=np.uint8), np.zeros(2, dtype=np.uint8))
    with pytest.raises(ValueError):
        LabeledImages(np.zeros((1, 4), dtype=np.uint8), np.array([11], dtype=np.uint8))


def test_subset_slices_rows():
    images = LabeledImages(
        np.arange(12, dtype=np.uint8).reshape(4, 3),
        np.array([0, 1, 2, 3], dtype=np.uint8),
    )
    part = images.subset(1, 3)
    assert len(part) == 2
    assert np.array_equal(part.labels, [1, 2])
    assert np.array_equal(part.pixels[0], [3, 4, 5])


# -- IDX files ----------------------------------------------------------------


def write_pair(tmp_path, img_bytes, lbl_bytes):
    ip = tmp_path / "images.idx"
    lp = tmp_path / "labels.idx"
    ip.write_bytes(img_bytes)
    lp.write_bytes(lbl_bytes)
    return ip, lp


def good_pair_bytes(n=3, rows=2, cols=2):
    rng = make_rng(12)
    pixels = rng.integers(0, 256, size=(n, rows * cols), dtype=np.uint8)
    labels = rng.integers(0, 10, size=n, dtype=np.uint8)
    img = struct.pack(">IIII", 0x00000803, n, rows, cols) + pixels.tobytes()
    lbl = struct.pack(">II", 0x00000801, n) + labels.tobytes()
    return img, lbl, pixels, labels


def test_idx_round_trip_in_memory(tmp_path):
    img, lbl, pixels, labels = good_pair_bytes()
    ip, lp = write_pair(tmp_path, img, lbl)
    data = load_idx(ip, lp)
    assert np.array_equal(data.pixels, pixels)
    assert np.array_equal(data.labels, labels)


def test_save_then_load_is_identity(tmp_path):
    _, _, pixels, labels = good_pair_bytes(n=5)
    original = LabeledImages(pixels, labels)
    ip = tmp_path / "out-images.idx"
    lp = tmp_path / "out-labels.idx"
    save_idx(ip, lp, original, 2, 2)
    again = load_idx(ip, lp)
    assert np.array_equal(again.pixels, original.pixels)
    assert np.array_equal(again.labels, original.labels)
    with pytest.raises(ValueError):
        save_idx(ip, lp, original, 3, 3)


def test_idx_rejects_wrong_magic(tmp_path):
    img, lbl, _, _ = good_pair_bytes()
    bad_img = struct.pack(">I", 0x12345678) + img[4:]
    ip, lp = write_pair(tmp_path, bad_img, lbl)
    with pytest.raises(BadMagicError):
        load_idx(ip, lp)
    bad_lbl = struct.pack(">I", 0x00000803) + lbl[4:]
    ip, lp = write_pair(tmp_path, img, bad_lbl)
    with pytest.raises(BadMagicError):
        load_idx(ip, lp)


def test_idx_rejects_truncated_payload(tmp_path):
    img, lbl, _, _ = good_pair_bytes()
    ip, lp = write_pair(tmp_path, img[:-1], lbl)
    with pytest.raises(TruncatedPayloadError):
        load_idx(ip, lp)
    ip, lp = write_pair(tmp_path, img[:10], lbl)
    with pytest.raises(TruncatedPayloadError):
        load_idx(ip, lp)
    ip, lp = write_pair(tmp_path, img, lbl[:-1])
    with pytest.raises(TruncatedPayloadError):
        load_idx(ip, lp)


def test_idx_errors_share_a_base_class(tmp_path):
    # callers can catch the whole parsing family at once
    img, lbl, _, _ = good_pair_bytes()
    ip, lp = write_pair(tmp_path, img[:4], lbl)
    with pytest.raises(IdxError):
        load_idx(ip, lp)


def test_idx_rejects_count_mismatch(tmp_path):
    img, _, _, _ = good_pair_bytes(n=3)
    _, lbl, _, _ = good_pair_bytes(n=2)
    ip, lp = write_pair(tmp_path, img, lbl)
    with pytest.raises(CountMismatchError):
        load_idx(ip, lp)


def test_digits_fixture_is_mnist_shaped(digits_dataset):
    assert digits_dataset.pixels.shape == (1797, 784)
    assert digits_dataset.pixels.dtype == np.uint8
    assert digits_dataset.pixels.max() == 255
    assert set(np.unique(digits_dataset.labels)) == set(range(10))
