"""Plain-SGD training loops: the 50-input single-neuron study, multi-seed
aggregation, learning-rate sweeps, and a dense spiking digit classifier.

Every run is fully determined by its config: one PCG64 generator per trial,
consumed in a fixed order (inputs, targets, weight init, then per-epoch
shuffles), so the with/without-reset-term variants of the same seed see
identical data and initialization and differ only after the first update.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .backprop import GradConfig, GradientReport, bptt, van_rossum_loss
from .data import (
    LabeledImages,
    bernoulli_train,
    class_target_train,
    decode_spike_count,
    make_rng,
    rate_encode_image,
)
from .neurons import (
    DenseLifLayer,
    LifParams,
    Network,
    SpikeTrain,
    filter_spike_train,
    simulate_layer,
)

__all__ = [
    "TOY_N_INPUTS",
    "TOY_N_STEPS",
    "TOY_INPUT_P",
    "TOY_TARGET_P",
    "TrainConfig",
    "TrialResult",
    "SweepCell",
    "SweepResult",
    "ClassifierResult",
    "sgd_step",
    "init_uniform_drive",
    "init_gaussian_fanin",
    "run_toy_trial",
    "run_trials",
    "lr_sweep",
    "fit_classifier",
    "train_classifier",
    "save_checkpoint",
    "load_checkpoint",
]

# Single-neuron study: 50 Bernoulli inputs at p=1/10 feeding one output neuron
# for 100 steps, trained toward a fixed Bernoulli target drawn at p=1/20.
TOY_N_INPUTS = 50
TOY_N_STEPS = 100
TOY_INPUT_P = 1.0 / 10.0
TOY_TARGET_P = 1.0 / 20.0


@dataclass(frozen=True)
class TrainConfig:
    """One trial's hyperparameters.  weight_init picks the scheme
    ("uniform_drive" or "gaussian_fanin"); weight_scale overrides the scheme's
    derived scale when set."""

    lr: float = 0.005
    iterations: int = 200
    lif: LifParams = field(default_factory=LifParams)
    grad: GradConfig = field(default_factory=GradConfig)
    seed: int = 0
    weight_init: str = "uniform_drive"
    weight_scale: float | None = None

    def __post_init__(self) -> None:
        if not self.lr >= 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.weight_init not in ("uniform_drive", "gaussian_fanin"):
            raise ValueError(f"unknown weight_init scheme {self.weight_init!r}")


@dataclass(eq=False)
class TrialResult:
    """Loss per iteration, the first iteration whose output train matched the
    target exactly (None if never), the trained weights, and the last
    iteration's gradient report for phase inspection."""

    losses: np.ndarray
    converged_at: int | None
    final_weights: list[np.ndarray]
    final_report: GradientReport


@dataclass(frozen=True, eq=False)
class SweepCell:
    mean_loss: np.ndarray
    std_loss: np.ndarray


@dataclass(eq=False)
class SweepResult:
    """Mean/std loss curves per (lr, with_reset_term) cell, all cells sharing
    the same seed list so on/off comparisons are paired."""

    lrs: list[float]
    seeds: list[int]
    iterations: int
    cells: dict[tuple[float, bool], SweepCell]


@dataclass(eq=False)
class ClassifierResult:
    """Accuracy per epoch (index 0 is the untrained network) and the trained
    weights."""

    train_acc: np.ndarray
    test_acc: np.ndarray
    final_weights: list[np.ndarray]


def sgd_step(weights, grads, lr: float):
    """One plain gradient-descent update: w - lr * g, elementwise."""
    weights = np.asarray(weights, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if weights.shape != grads.shape:
        raise ValueError(f"shape mismatch: weights {weights.shape} vs grads {grads.shape}")
    return weights - lr * grads


def init_uniform_drive(
    n_out: int,
    n_in: int,
    p_in: float,
    params: LifParams,
    rng: np.random.Generator,
    scale: float | None = None,
) -> np.ndarray:
    """Uniform weights in [0, 2*theta / (n_in * p_in * tau_m)].

    The filtered input traces average p_in each, so the mean steady-state
    potential lands right at threshold and an untrained neuron already fires.
    """
    if scale is None:
        scale = 2.0 * params.theta / (n_in * p_in * params.tau_m)
    return rng.uniform(0.0, scale, size=(n_out, n_in))


def init_gaussian_fanin(
    n_out: int, n_in: int, rng: np.random.Generator, std: float | None = None
) -> np.ndarray:
    """Zero-mean Gaussian weights with std 1/sqrt(n_in)."""
    if std is None:
        std = 1.0 / np.sqrt(n_in)
    return rng.normal(0.0, std, size=(n_out, n_in))


def _toy_weights(cfg: TrainConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.weight_init == "uniform_drive":
        return init_uniform_drive(
            1, TOY_N_INPUTS, TOY_INPUT_P, cfg.lif, rng, scale=cfg.weight_scale
        )
    return init_gaussian_fanin(1, TOY_N_INPUTS, rng, std=cfg.weight_scale)


def run_toy_trial(cfg: TrainConfig) -> TrialResult:
    """Train the single neuron on one fixed random input/target pair.

    Input train, target train and initial weights are drawn once from
    cfg.seed (in that order) and held fixed; each iteration simulates,
    backpropagates with cfg.grad, and takes one SGD step.  The recorded loss
    and the exact-match convergence check both refer to the forward pass
    before that iteration's update.
    """
    rng = make_rng(cfg.seed)
    inp = bernoulli_train(TOY_N_INPUTS, TOY_N_STEPS, TOY_INPUT_P, rng)
    target = bernoulli_train(1, TOY_N_STEPS, TOY_TARGET_P, rng)
    weights = _toy_weights(cfg, rng)

    input_filtered = filter_spike_train(inp, cfg.lif.tau_s)
    target_filtered = filter_spike_train(target, cfg.lif.tau_s)

    losses = np.empty(cfg.iterations)
    converged_at: int | None = None
    report = None
    for it in range(cfg.iterations):
        net = Network([DenseLifLayer(weights, cfg.lif)])
        trace = simulate_layer(net.layers[0], input_filtered)
        report = bptt(net, [trace], input_filtered, target, cfg.grad)
        losses[it] = van_rossum_loss(trace.a, target_filtered).total
        if converged_at is None and np.array_equal(trace.s.data, target.data):
            converged_at = it
        weights = sgd_step(weights, report.weight_grads[0], cfg.lr)

    return TrialResult(
        losses=losses,
        converged_at=converged_at,
        final_weights=[weights],
        final_report=report,
    )


def run_trials(cfg: TrainConfig, seeds) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population std of the loss curve across seeds."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    curves = np.stack([run_toy_trial(replace(cfg, seed=s)).losses for s in seeds])
    return curves.mean(axis=0), curves.std(axis=0)


def lr_sweep(lrs, seeds, cfg: TrainConfig = TrainConfig()) -> SweepResult:
    """Full cross of learning rates x reset-term on/off x seeds.

    Each (lr, variant) cell reuses the same seed list, so the on/off cells of
    one learning rate share data and initialization pair by pair.
    """
    lrs = [float(lr) for lr in lrs]
    seeds = [int(s) for s in seeds]
    if not lrs or not seeds:
        raise ValueError("need at least one learning rate and one seed")
    cells: dict[tuple[float, bool], SweepCell] = {}
    for lr in lrs:
        for with_reset in (True, False):
            variant_cfg = replace(
                cfg, lr=lr, grad=replace(cfg.grad, with_reset_term=with_reset)
            )
            mean, std = run_trials(variant_cfg, seeds)
            cells[(lr, with_reset)] = SweepCell(mean_loss=mean, std_loss=std)
    return SweepResult(lrs=lrs, seeds=seeds, iterations=cfg.iterations, cells=cells)


def _simulate(layers: list[DenseLifLayer], input_filtered: np.ndarray):
    traces = []
    a_in = input_filtered
    for layer in layers:
        tr = simulate_layer(layer, a_in)
        traces.append(tr)
        a_in = tr.a
    return traces


def _accuracy(
    layers: list[DenseLifLayer], filtered: list[np.ndarray], labels: np.ndarray
) -> float:
    correct = 0
    for sample, label in zip(filtered, labels):
        traces = _simulate(layers, sample)
        if decode_spike_count(traces[-1].s) == label:
            correct += 1
    return correct / len(labels)


def fit_classifier(
    train_pixels: np.ndarray,
    train_labels: np.ndarray,
    test_pixels: np.ndarray,
    test_labels: np.ndarray,
    n_classes: int,
    hidden_sizes=(100,),
    lif: LifParams = LifParams(),
    grad: GradConfig = GradConfig(),
    lr: float = 0.005,
    epochs: int = 10,
    batch_size: int = 32,
    n_steps: int = 30,
    p_max: float = 0.5,
    target_period: int = 5,
    seed: int = 0,
    record_accuracy: bool = True,
) -> ClassifierResult:
    """Train a dense spiking classifier with mini-batch SGD.

    Images are rate-encoded once up front and those trains are reused across
    epochs (fixed input noise, as in the single-neuron study).  Per-sample
    gradients of the filtered-train loss against the label's periodic target
    are averaged over each mini-batch; prediction takes the output neuron with
    the most spikes.  Accuracy is recorded before training (epoch 0) and after
    every epoch unless record_accuracy is False (then both curves come back
    empty, which skips the evaluation passes).
    """
    rng = make_rng(seed)
    train_trains = [
        rate_encode_image(px, n_steps, p_max, rng) for px in np.asarray(train_pixels)
    ]
    test_trains = [
        rate_encode_image(px, n_steps, p_max, rng) for px in np.asarray(test_pixels)
    ]
    n_in = np.asarray(train_pixels).shape[1]
    sizes = [n_in, *hidden_sizes, n_classes]
    weights = [
        init_gaussian_fanin(sizes[i + 1], sizes[i], rng) for i in range(len(sizes) - 1)
    ]

    targets = [class_target_train(c, n_classes, n_steps, target_period) for c in range(n_classes)]
    train_filtered = [filter_spike_train(tr, lif.tau_s) for tr in train_trains]
    test_filtered = [filter_spike_train(tr, lif.tau_s) for tr in test_trains]
    train_labels = np.asarray(train_labels)
    test_labels = np.asarray(test_labels)

    def layers() -> list[DenseLifLayer]:
        return [DenseLifLayer(w, lif) for w in weights]

    train_acc: list[float] = []
    test_acc: list[float] = []
    if record_accuracy:
        train_acc.append(_accuracy(layers(), train_filtered, train_labels))
        test_acc.append(_accuracy(layers(), test_filtered, test_labels))

    for _ in range(epochs):
        order = rng.permutation(len(train_trains))
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            grad_sums = [np.zeros_like(w) for w in weights]
            current = layers()
            net = Network(current)
            for idx in batch:
                filt = train_filtered[idx]
                traces = _simulate(current, filt)
                report = bptt(net, traces, filt, targets[train_labels[idx]], grad)
                for g_sum, g in zip(grad_sums, report.weight_grads):
                    g_sum += g
            weights = [
                sgd_step(w, g_sum / len(batch), lr)
                for w, g_sum in zip(weights, grad_sums)
            ]
        if record_accuracy:
            train_acc.append(_accuracy(layers(), train_filtered, train_labels))
            test_acc.append(_accuracy(layers(), test_filtered, test_labels))

    return ClassifierResult(
        train_acc=np.array(train_acc),
        test_acc=np.array(test_acc),
        final_weights=weights,
    )


def train_classifier(
    train: LabeledImages,
    test: LabeledImages,
    hidden_sizes=(100,),
    cfg: TrainConfig = TrainConfig(),
    epochs: int = 10,
    batch_size: int = 32,
    n_steps: int = 30,
    p_max: float = 0.5,
    target_period: int = 5,
) -> dict[str, ClassifierResult]:
    """Run the digit classifier once per reset-term variant with paired seeds.

    Both variants start from cfg.seed, so they share encodings, targets,
    initialization and shuffles; returns {"reset_on": ..., "reset_off": ...}.
    """
    if set(np.unique(train.labels)) - set(range(10)):
        raise ValueError("expected digit labels 0-9")
    results = {}
    for name, with_reset in (("reset_on", True), ("reset_off", False)):
        results[name] = fit_classifier(
            train.pixels,
            train.labels,
            test.pixels,
            test.labels,
            n_classes=10,
            hidden_sizes=hidden_sizes,
            lif=cfg.lif,
            grad=replace(cfg.grad, with_reset_term=with_reset),
            lr=cfg.lr,
            epochs=epochs,
            batch_size=batch_size,
            n_steps=n_steps,
            p_max=p_max,
            target_period=target_period,
            seed=cfg.seed,
        )
    return results


CHECKPOINT_HEADER = "spikegrad-checkpoint v1"


def save_checkpoint(path, weights: list[np.ndarray], meta: dict[str, str]) -> None:
    """Write weights as a versioned text document: header, config echo lines,
    then per-layer shape lines followed by row-major values in full
    round-trip decimal form."""
    lines = [CHECKPOINT_HEADER]
    for key, value in meta.items():
        lines.append(f"config {key} {value}")
    for w in weights:
        w = np.asarray(w, dtype=np.float64)
        lines.append(f"layer {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(repr(float(x)) for x in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[list[np.ndarray], dict[str, str]]:
    """Inverse of save_checkpoint; weights round-trip bit-exactly."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise ValueError(f"{path}: not a {CHECKPOINT_HEADER!r} file")
    meta: dict[str, str] = {}
    weights: list[np.ndarray] = []
    i = 1
    while i < len(lines):
        line = lines[i]
        if line.startswith("config "):
            _, key, value = line.split(" ", 2)
            meta[key] = value
            i += 1
        elif line.startswith("layer "):
            _, rows_s, cols_s = line.split(" ")
            rows, cols = int(rows_s), int(cols_s)
            block = [
                [float(x) for x in lines[i + 1 + r].split()] for r in range(rows)
            ]
            w = np.array(block, dtype=np.float64).reshape(rows, cols)
            weights.append(w)
            i += 1 + rows
        elif not line.strip():
            i += 1
        else:
            raise ValueError(f"{path}: unexpected line {i + 1}: {line!r}")
    return weights, meta
