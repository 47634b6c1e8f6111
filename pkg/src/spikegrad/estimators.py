"""scikit-learn adapters: a rate-coding transformer and a spiking classifier
wrapping the dense training loop behind the usual fit/predict surface.

Estimators store constructor arguments verbatim (so get_params/set_params and
clone behave) and validate inputs with the standard sklearn helpers.  All
randomness flows from random_state through one PCG64 generator per call, so
fit and predict are deterministic given the same data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .backprop import GradConfig
from .data import decode_spike_count, make_rng, rate_encode_image
from .neurons import DenseLifLayer, LifParams, filter_spike_train
from .training import _simulate, fit_classifier

__all__ = ["RateEncoder", "SpikingClassifier"]


class RateEncoder(TransformerMixin, BaseEstimator):
    """Turn pixel rows (values 0..255) into Bernoulli spike trains.

    transform returns a (n_samples, n_features, n_steps) uint8 array; each
    pixel fires independently per step with probability value/255 * p_max.
    """

    def __init__(self, n_steps: int = 30, p_max: float = 0.5, random_state: int = 0):
        self.n_steps = n_steps
        self.p_max = p_max
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        rng = make_rng(self.random_state)
        out = np.empty((X.shape[0], X.shape[1], self.n_steps), dtype=np.uint8)
        for i, row in enumerate(X):
            out[i] = rate_encode_image(row, self.n_steps, self.p_max, rng).data
        return out


class SpikingClassifier(ClassifierMixin, BaseEstimator):
    """Dense leaky integrate-and-fire network trained with surrogate-gradient
    backprop through time.

    fit rate-encodes X (pixel values 0..255), trains input -> hidden_units ->
    n_classes weights by mini-batch SGD on the filtered-train loss, and keeps
    them in weights_.  predict re-encodes with a fresh generator seeded from
    random_state and picks the output neuron with the most spikes.
    """

    def __init__(
        self,
        hidden_units: int = 100,
        n_steps: int = 30,
        epochs: int = 10,
        lr: float = 0.005,
        batch_size: int = 32,
        tau_m: float = 6.0,
        tau_s: float = 2.0,
        theta: float = 1.0,
        temp: float = 0.3,
        with_reset_term: bool = True,
        p_max: float = 0.5,
        target_period: int = 5,
        random_state: int = 0,
    ):
        self.hidden_units = hidden_units
        self.n_steps = n_steps
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.tau_m = tau_m
        self.tau_s = tau_s
        self.theta = theta
        self.temp = temp
        self.with_reset_term = with_reset_term
        self.p_max = p_max
        self.target_period = target_period
        self.random_state = random_state

    def _lif(self) -> LifParams:
        return LifParams(
            tau_m=self.tau_m, tau_s=self.tau_s, theta=self.theta, temp=self.temp
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.n_features_in_ = X.shape[1]
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("needs at least two classes")
        empty = np.empty((0, X.shape[1]))
        result = fit_classifier(
            X,
            y_idx,
            empty,
            np.empty((0,), dtype=np.int64),
            n_classes=len(self.classes_),
            hidden_sizes=(self.hidden_units,),
            lif=self._lif(),
            grad=GradConfig(with_reset_term=self.with_reset_term, temp=self.temp),
            lr=self.lr,
            epochs=self.epochs,
            batch_size=self.batch_size,
            n_steps=self.n_steps,
            p_max=self.p_max,
            target_period=self.target_period,
            seed=self.random_state,
            record_accuracy=False,
        )
        self.weights_ = result.final_weights
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "weights_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        layers = [DenseLifLayer(w, self._lif()) for w in self.weights_]
        rng = make_rng(self.random_state)
        preds = np.empty(X.shape[0], dtype=self.classes_.dtype)
        for i, row in enumerate(X):
            train = rate_encode_image(row, self.n_steps, self.p_max, rng)
            filtered = filter_spike_train(train, self.tau_s)
            traces = _simulate(layers, filtered)
            preds[i] = self.classes_[decode_spike_count(traces[-1].s)]
        return preds
