"""Discrete-time leaky integrate-and-fire neurons and dense multi-layer simulation.

State per neuron and time-step:

* ``u`` -- membrane potential.  Decays geometrically by ``1 - 1/tau_m``, is
  multiplicatively reset to zero on the step after a spike, and integrates the
  weighted synaptic traces of the previous layer with a one-step delay.
* ``s`` -- binary spike, 1 exactly when ``u`` exceeds the threshold ``theta``
  (a potential sitting exactly at threshold does not fire).
* ``a`` -- synaptic trace, a low-pass filter of the spike train with time
  constant ``tau_s`` and unit DC gain.  It is the signal passed between layers.

All state starts at zero, all arithmetic is float64, and every function here is
pure: traces and networks are never mutated after construction, so they are
safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LifParams",
    "SpikeTrain",
    "LayerTrace",
    "DenseLifLayer",
    "Network",
    "heaviside",
    "lif_step",
    "filter_step",
    "filter_spike_train",
    "simulate_layer",
    "simulate_network",
]


@dataclass(frozen=True)
class LifParams:
    """Neuron constants: membrane/synaptic time constants (in time-steps),
    firing threshold, and the surrogate-sigmoid temperature used for gradients.
    """

    tau_m: float = 6.0
    tau_s: float = 2.0
    theta: float = 1.0
    temp: float = 0.3

    def __post_init__(self) -> None:
        if not self.tau_m > 1:
            raise ValueError(f"tau_m must be > 1, got {self.tau_m}")
        if not self.tau_s > 1:
            raise ValueError(f"tau_s must be > 1, got {self.tau_s}")
        if not self.theta > 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")
        if not self.temp > 0:
            raise ValueError(f"temp must be > 0, got {self.temp}")

    @property
    def decay_m(self) -> float:
        """Per-step membrane decay factor, strictly in (0, 1)."""
        return 1.0 - 1.0 / self.tau_m

    @property
    def decay_s(self) -> float:
        """Per-step synaptic-trace decay factor, strictly in (0, 1)."""
        return 1.0 - 1.0 / self.tau_s


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    """Binary spike events for a population, shape (n_neurons, n_steps)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"spike train must be a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("spike train entries must all be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def n_neurons(self) -> int:
        return self.data.shape[0]

    @property
    def n_steps(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class LayerTrace:
    """Full time series retained for one layer: potentials ``u`` and synaptic
    traces ``a`` as (n_neurons, n_steps) float64 matrices, spikes ``s`` as a
    SpikeTrain of the same shape.
    """

    u: np.ndarray
    s: SpikeTrain
    a: np.ndarray


@dataclass(eq=False)
class DenseLifLayer:
    """Fully connected LIF layer: weight matrix (n_out, n_in) plus neuron constants."""

    weights: np.ndarray
    params: LifParams = field(default_factory=LifParams)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D (n_out, n_in), got shape {w.shape}")
        if not np.isfinite(w).all():
            raise ValueError("weights must be finite (no NaN/Inf)")
        self.weights = w

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass(eq=False)
class Network:
    """Ordered stack of dense LIF layers with compatible shapes."""

    layers: list[DenseLifLayer]

    def __post_init__(self) -> None:
        if len(self.layers) == 0:
            raise ValueError("network needs at least one layer")
        for i in range(len(self.layers) - 1):
            if self.layers[i].n_out != self.layers[i + 1].n_in:
                raise ValueError(
                    f"layer {i} has {self.layers[i].n_out} outputs but layer "
                    f"{i + 1} expects {self.layers[i + 1].n_in} inputs"
                )

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out


def heaviside(x):
    """Unit step with the convention H(0) = 0: returns 1 where x > 0, else 0.

    Works elementwise on arrays; scalars return a float.
    """
    return np.heaviside(x, 0.0)


def lif_step(u_prev, s_prev, drive, params: LifParams):
    """One membrane update: decay the previous potential, annihilate it if the
    neuron just spiked, then add the incoming drive.  Elementwise on arrays.
    """
    return u_prev * params.decay_m * (1.0 - s_prev) + drive


def filter_step(a_prev, s_next, tau_s: float):
    """One synaptic-trace update: decay by 1 - 1/tau_s and inject 1/tau_s per
    spike.  Keeps the trace in [0, 1] for binary spikes.  Elementwise on arrays.
    """
    return a_prev * (1.0 - 1.0 / tau_s) + s_next / tau_s


def filter_spike_train(train: SpikeTrain, tau_s: float) -> np.ndarray:
    """Causal low-pass filter of a whole spike train, row by row, starting from
    zero state: out[:, 0] = s[:, 0] / tau_s, then the filter_step recurrence.

    Returns a float64 matrix with the train's shape.
    """
    s = train.data.astype(np.float64)
    out = np.empty_like(s)
    out[:, 0] = s[:, 0] / tau_s
    for t in range(1, s.shape[1]):
        out[:, t] = filter_step(out[:, t - 1], s[:, t], tau_s)
    return out


def simulate_layer(layer: DenseLifLayer, a_in: np.ndarray) -> LayerTrace:
    """Run one layer over a filtered input, returning the full trace.

    ``a_in`` has shape (n_in, n_steps).  State starts at zero and the input at
    step t drives the potential at step t+1 (one-step synaptic delay):

        u[t+1] = decay_m * (1 - s[t]) * u[t] + W @ a_in[:, t]
        s[t+1] = heaviside(u[t+1] - theta)
        a[t+1] = filter_step(a[t], s[t+1], tau_s)
    """
    a_in = np.asarray(a_in, dtype=np.float64)
    if a_in.ndim != 2 or a_in.shape[0] != layer.n_in:
        raise ValueError(
            f"filtered input has shape {a_in.shape}, expected ({layer.n_in}, n_steps)"
        )
    p = layer.params
    n_out, n_steps = layer.n_out, a_in.shape[1]
    u = np.zeros((n_out, n_steps))
    s = np.zeros((n_out, n_steps))
    a = np.zeros((n_out, n_steps))
    for t in range(n_steps - 1):
        u[:, t + 1] = lif_step(u[:, t], s[:, t], layer.weights @ a_in[:, t], p)
        s[:, t + 1] = heaviside(u[:, t + 1] - p.theta)
        a[:, t + 1] = filter_step(a[:, t], s[:, t + 1], p.tau_s)
    return LayerTrace(u=u, s=SpikeTrain(s), a=a)


def simulate_network(net: Network, inp: SpikeTrain) -> list[LayerTrace]:
    """Simulate all layers in order and return their traces.

    The first layer consumes the low-pass filtered input train; every further
    layer consumes the synaptic trace of the layer below it.
    """
    if inp.n_neurons != net.n_in:
        raise ValueError(
            f"input train has {inp.n_neurons} neurons, network expects {net.n_in}"
        )
    a_in = filter_spike_train(inp, net.layers[0].params.tau_s)
    traces: list[LayerTrace] = []
    for layer in net.layers:
        trace = simulate_layer(layer, a_in)
        traces.append(trace)
        a_in = trace.a
    return traces
