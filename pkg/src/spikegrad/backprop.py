"""Spike-train loss and the hand-derived backward pass through time.

The loss is the squared distance between low-pass filtered output and target
spike trains, summed over every step.  The backward pass walks each layer from
the last step to the first, combining

* a spatial route: loss flows from the filtered trace into the potential
  through the surrogate derivative of the spike nonlinearity, and
* a temporal route: loss flows from one step's potential into the previous
  step's potential through the leak and the multiplicative reset.

The reset carries its own derivative contribution: a potential sitting near
threshold can flip the reset, so the step-to-step Jacobian gains the term
``-u * sigmoid_t_deriv(u - theta)`` on top of the plain ``(1 - s)`` leak mask.
``GradConfig.with_reset_term`` switches that contribution on or off; off
reproduces the gradient used by earlier surrogate-gradient training schemes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .neurons import LifParams, Network, LayerTrace, SpikeTrain, filter_spike_train

__all__ = [
    "GradConfig",
    "LossValue",
    "GradientReport",
    "sigmoid_t",
    "sigmoid_t_deriv",
    "van_rossum_loss",
    "loss_grad_filtered",
    "temporal_jacobian",
    "bptt",
]


@dataclass(frozen=True)
class GradConfig:
    """Backward-pass switches: whether the reset term enters the temporal
    Jacobian, and the surrogate temperature."""

    with_reset_term: bool = True
    temp: float = 0.3

    def __post_init__(self) -> None:
        if not self.temp > 0:
            raise ValueError(f"temp must be > 0, got {self.temp}")


@dataclass(frozen=True, eq=False)
class LossValue:
    """Total loss plus its per-step breakdown (total == per_step.sum())."""

    total: float
    per_step: np.ndarray


@dataclass(eq=False)
class GradientReport:
    """Weight gradients for every layer plus the four diagnostic traces of the
    output layer, each shaped (n_out, n_steps):

    * ``phase_a`` -- filtered output minus filtered target, per step.
    * ``phase_b`` -- loss gradient at the filtered-trace level after the
      trace recurrence has smeared each step's error backward in time.
    * ``phase_c`` -- potential gradient from the spatial route alone.
    * ``phase_d`` -- full potential gradient with the temporal recursion added.

    Gradients are of the loss; descent steps subtract them.
    """

    weight_grads: list[np.ndarray]
    phase_a: np.ndarray
    phase_b: np.ndarray
    phase_c: np.ndarray
    phase_d: np.ndarray


def sigmoid_t(x, temp: float):
    """Temperature-scaled logistic sigmoid, saturation-safe at extreme inputs."""
    if not temp > 0:
        raise ValueError(f"temp must be > 0, got {temp}")
    return expit(np.asarray(x, dtype=np.float64) / temp)


def sigmoid_t_deriv(x, temp: float):
    """Derivative of sigmoid_t: (1/temp) * s * (1 - s), peaking at 1/(4 temp)."""
    s = sigmoid_t(x, temp)
    return s * (1.0 - s) / temp


def van_rossum_loss(out_filtered: np.ndarray, target_filtered: np.ndarray) -> LossValue:
    """Squared distance between two filtered spike trains, summed over steps.

    per_step[k] = 0.5 * sum_i (target[i, k] - out[i, k])**2
    """
    out_filtered = np.asarray(out_filtered, dtype=np.float64)
    target_filtered = np.asarray(target_filtered, dtype=np.float64)
    if out_filtered.shape != target_filtered.shape:
        raise ValueError(
            f"shape mismatch: output {out_filtered.shape} vs target {target_filtered.shape}"
        )
    per_step = 0.5 * ((target_filtered - out_filtered) ** 2).sum(axis=0)
    return LossValue(total=float(per_step.sum()), per_step=per_step)


def loss_grad_filtered(out_filtered: np.ndarray, target_filtered: np.ndarray) -> np.ndarray:
    """Elementwise loss gradient at the filtered-output level: out - target."""
    out_filtered = np.asarray(out_filtered, dtype=np.float64)
    target_filtered = np.asarray(target_filtered, dtype=np.float64)
    if out_filtered.shape != target_filtered.shape:
        raise ValueError(
            f"shape mismatch: output {out_filtered.shape} vs target {target_filtered.shape}"
        )
    return out_filtered - target_filtered


def temporal_jacobian(u, s, params: LifParams, cfg: GradConfig):
    """Step-to-step potential Jacobian d u[t+1] / d u[t].  Elementwise.

    With the reset term: decay_m * ((1 - s) - u * sigmoid_t_deriv(u - theta)).
    Without: decay_m * (1 - s), the leak-and-reset mask alone.
    """
    u = np.asarray(u, dtype=np.float64)
    base = 1.0 - np.asarray(s, dtype=np.float64)
    if cfg.with_reset_term:
        base = base - u * sigmoid_t_deriv(u - params.theta, cfg.temp)
    return params.decay_m * base


def bptt(
    net: Network,
    traces: list[LayerTrace],
    input_filtered: np.ndarray,
    target: SpikeTrain,
    cfg: GradConfig,
) -> GradientReport:
    """Backward pass over a simulated run; returns weight gradients and the
    output layer's diagnostic phase traces.

    ``traces`` must come from simulate_network on ``net`` and
    ``input_filtered`` must be the filtered input the first layer consumed.
    The target is filtered with the output layer's tau_s before comparison,
    so it lives on the same scale as the output trace.
    """
    _check_consistent(net, traces, input_filtered, target)
    out_layer = net.layers[-1]
    out_filtered = traces[-1].a
    target_filtered = filter_spike_train(target, out_layer.params.tau_s)
    seed = loss_grad_filtered(out_filtered, target_filtered)
    return _backward_from_seed(net, traces, input_filtered, seed, cfg)


def _backward_from_seed(
    net: Network,
    traces: list[LayerTrace],
    input_filtered: np.ndarray,
    seed: np.ndarray,
    cfg: GradConfig,
) -> GradientReport:
    """Core backward recursion, linear in the filtered-output seed."""
    n_layers = len(net.layers)
    n_steps = input_filtered.shape[1]
    layer_inputs = [np.asarray(input_filtered, dtype=np.float64)] + [
        tr.a for tr in traces[:-1]
    ]

    weight_grads: list[np.ndarray] = [np.empty(0)] * n_layers
    phase_a = phase_b = phase_c = phase_d = None
    above_du: np.ndarray | None = None
    above_w: np.ndarray | None = None

    for l in range(n_layers - 1, -1, -1):
        layer = net.layers[l]
        p = layer.params
        tr = traces[l]
        s = tr.s.data.astype(np.float64)
        spike_deriv = sigmoid_t_deriv(tr.u - p.theta, cfg.temp)
        jac = temporal_jacobian(tr.u, s, p, cfg)
        is_output = l == n_layers - 1

        da = np.zeros((layer.n_out, n_steps))
        du = np.zeros((layer.n_out, n_steps))
        for t in range(n_steps - 1, -1, -1):
            acc = seed[:, t].copy() if is_output else np.zeros(layer.n_out)
            if t + 1 < n_steps:
                acc += p.decay_s * da[:, t + 1]
                if above_du is not None:
                    acc += above_w.T @ above_du[:, t + 1]
            da[:, t] = acc
            du_t = da[:, t] * spike_deriv[:, t] / p.tau_s
            if t + 1 < n_steps:
                du_t = du_t + du[:, t + 1] * jac[:, t]
            du[:, t] = du_t

        # u[t+1] integrates W @ a_in[:, t], so the weight gradient pairs each
        # potential gradient with the input trace one step earlier.
        weight_grads[l] = du[:, 1:] @ layer_inputs[l][:, :-1].T

        if is_output:
            phase_a = seed.copy()
            phase_b = da
            phase_c = da * spike_deriv / p.tau_s
            phase_d = du
        above_du = du
        above_w = layer.weights

    return GradientReport(
        weight_grads=weight_grads,
        phase_a=phase_a,
        phase_b=phase_b,
        phase_c=phase_c,
        phase_d=phase_d,
    )


def _check_consistent(
    net: Network,
    traces: list[LayerTrace],
    input_filtered: np.ndarray,
    target: SpikeTrain,
) -> None:
    if len(traces) != len(net.layers):
        raise ValueError(
            f"got {len(traces)} traces for a {len(net.layers)}-layer network"
        )
    input_filtered = np.asarray(input_filtered)
    if input_filtered.ndim != 2 or input_filtered.shape[0] != net.n_in:
        raise ValueError(
            f"filtered input has shape {input_filtered.shape}, expected ({net.n_in}, n_steps)"
        )
    n_steps = input_filtered.shape[1]
    for l, (layer, tr) in enumerate(zip(net.layers, traces)):
        if tr.u.shape != (layer.n_out, n_steps):
            raise ValueError(
                f"trace {l} has shape {tr.u.shape}, expected ({layer.n_out}, {n_steps})"
            )
    if target.data.shape != (net.n_out, n_steps):
        raise ValueError(
            f"target has shape {target.data.shape}, expected ({net.n_out}, {n_steps})"
        )
