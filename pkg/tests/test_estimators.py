"""Estimator-surface tests: sklearn parameter plumbing, validation behavior,
and end-to-end learning on a small digit subset."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from spikegrad.estimators import RateEncoder, SpikingClassifier


# -- rate encoder -------------------------------------------------------------


def test_encoder_shapes_and_dtype(digits_dataset):
    X = digits_dataset.pixels[:8].astype(np.float64)
    enc = RateEncoder(n_steps=12).fit(X)
    out = enc.transform(X)
    assert out.shape == (8, 784, 12)
    assert out.dtype == np.uint8
    assert set(np.unique(out)) <= {0, 1}


def test_encoder_rate_scales_with_pixel_value():
    X = np.full((40, 3), [0.0, 127.0, 255.0])
    out = RateEncoder(n_steps=50, p_max=0.5).fit(X).transform(X)
    rates = out.mean(axis=(0, 2))
    assert rates[0] == 0.0
    assert abs(rates[1] - 0.25) < 0.03
    assert abs(rates[2] - 0.5) < 0.03


def test_encoder_is_deterministic():
    X = np.full((5, 4), 200.0)
    enc = RateEncoder(n_steps=10, random_state=3).fit(X)
    assert np.array_equal(enc.transform(X), enc.transform(X))


def test_encoder_requires_fit_and_consistent_width():
    enc = RateEncoder()
    with pytest.raises(NotFittedError):
        enc.transform(np.zeros((2, 4)))
    enc.fit(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        enc.transform(np.zeros((2, 5)))


def test_encoder_param_round_trip():
    enc = RateEncoder(n_steps=7, p_max=0.25, random_state=9)
    params = enc.get_params()
    assert params == {"n_steps": 7, "p_max": 0.25, "random_state": 9}
    again = clone(enc)
    assert again.get_params() == params


# -- spiking classifier -------------------------------------------------------


@pytest.fixture(scope="module")
def small_fit(digits_dataset):
    """One trained classifier on a 3-class slice, shared across tests."""
    mask = np.isin(digits_dataset.labels, (0, 1, 2))
    X = digits_dataset.pixels[mask][:90].astype(np.float64)
    y = digits_dataset.labels[mask][:90]
    clf = SpikingClassifier(hidden_units=20, n_steps=15, epochs=4, lr=0.02, random_state=0)
    return clf.fit(X, y), X, y


def test_classifier_param_round_trip():
    clf = SpikingClassifier(hidden_units=30, lr=0.01, with_reset_term=False)
    params = clf.get_params()
    assert params["hidden_units"] == 30
    assert params["lr"] == 0.01
    assert params["with_reset_term"] is False
    assert clone(clf).get_params() == params


def test_classifier_learns_small_digit_slice(small_fit):
    clf, X, y = small_fit
    assert np.array_equal(clf.classes_, [0, 1, 2])
    assert clf.n_features_in_ == 784
    assert len(clf.weights_) == 2
    assert clf.weights_[0].shape == (20, 784)
    assert clf.weights_[1].shape == (3, 20)
    assert clf.score(X, y) > 0.5


def test_classifier_predictions_use_original_labels(digits_dataset):
    # classes_ maps neuron indices back to whatever labels came in
    mask = np.isin(digits_dataset.labels, (3, 7))
    X = digits_dataset.pixels[mask][:60].astype(np.float64)
    y = digits_dataset.labels[mask][:60]
    clf = SpikingClassifier(hidden_units=15, n_steps=12, epochs=3, lr=0.02).fit(X, y)
    preds = clf.predict(X)
    assert set(np.unique(preds)) <= {3, 7}


def test_classifier_predict_is_deterministic(small_fit):
    clf, X, _ = small_fit
    assert np.array_equal(clf.predict(X[:20]), clf.predict(X[:20]))


def test_classifier_guards(small_fit):
    clf, X, y = small_fit
    with pytest.raises(NotFittedError):
        SpikingClassifier().predict(X[:2])
    with pytest.raises(ValueError):
        clf.predict(X[:2, :100])
    with pytest.raises(ValueError):
        SpikingClassifier(epochs=1).fit(X[:10], np.zeros(10))


def test_classifier_works_in_a_pipeline(digits_dataset):
    mask = np.isin(digits_dataset.labels, (0, 1))
    X = digits_dataset.pixels[mask][:40].astype(np.float64)
    y = digits_dataset.labels[mask][:40]
    pipe = Pipeline(
        [("clf", SpikingClassifier(hidden_units=10, n_steps=10, epochs=2, lr=0.02))]
    )
    pipe.fit(X, y)
    assert pipe.predict(X[:5]).shape == (5,)
