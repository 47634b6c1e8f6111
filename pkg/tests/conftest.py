"""Shared fixtures: a desk-scale digit dataset in IDX form.

The classifier tests need MNIST-shaped input (28x28 grayscale, labels 0-9)
but must run offline, so we upsample scikit-learn's bundled 8x8 digits to
28x28 and write them through the package's own IDX writer.  One session-wide
copy is enough; everything downstream slices subsets from it.
"""

import numpy as np
import pytest
from scipy.ndimage import zoom
from sklearn.datasets import load_digits

from spikegrad.data import LabeledImages, load_idx, save_idx


def build_digit_images() -> LabeledImages:
    digits = load_digits()
    big = np.stack([zoom(image, 3.5, order=1) for image in digits.images])
    pixels = np.clip(np.round(big * (255.0 / 16.0)), 0, 255).astype(np.uint8)
    return LabeledImages(pixels.reshape(len(pixels), -1), digits.target.astype(np.uint8))


@pytest.fixture(scope="session")
def digits_idx(tmp_path_factory):
    """Paths of an IDX image/label pair with 1797 28x28 digit images."""
    outdir = tmp_path_factory.mktemp("digits")
    images_path = outdir / "digits-images.idx"
    labels_path = outdir / "digits-labels.idx"
    save_idx(images_path, labels_path, build_digit_images(), 28, 28)
    return images_path, labels_path


@pytest.fixture(scope="session")
def digits_dataset(digits_idx) -> LabeledImages:
    images_path, labels_path = digits_idx
    return load_idx(images_path, labels_path)
