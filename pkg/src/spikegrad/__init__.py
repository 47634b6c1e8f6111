"""Training engine for discrete-time leaky integrate-and-fire networks with
surrogate-gradient backpropagation through time.

The temporal gradient can carry or drop the contribution of the
spike-triggered reset, switchable per run, so the two variants can be
compared on otherwise identical trials.
"""

from .backprop import (
    GradConfig,
    GradientReport,
    LossValue,
    bptt,
    loss_grad_filtered,
    sigmoid_t,
    sigmoid_t_deriv,
    temporal_jacobian,
    van_rossum_loss,
)
from .data import (
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
from .estimators import RateEncoder, SpikingClassifier
from .gradcheck import (
    CheckReport,
    SoftTrace,
    central_fd,
    check_instance,
    compare,
    has_reset_sensitive_step,
    random_instance,
    run_suite,
    soft_bptt,
    soft_forward,
)
from .neurons import (
    DenseLifLayer,
    LayerTrace,
    LifParams,
    Network,
    SpikeTrain,
    filter_spike_train,
    filter_step,
    heaviside,
    lif_step,
    simulate_layer,
    simulate_network,
)
from .training import (
    ClassifierResult,
    SweepCell,
    SweepResult,
    TrainConfig,
    TrialResult,
    fit_classifier,
    init_gaussian_fanin,
    init_uniform_drive,
    load_checkpoint,
    lr_sweep,
    run_toy_trial,
    run_trials,
    save_checkpoint,
    sgd_step,
    train_classifier,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BadMagicError",
    "CheckReport",
    "ClassifierResult",
    "CountMismatchError",
    "DenseLifLayer",
    "GradConfig",
    "GradientReport",
    "IdxError",
    "LabeledImages",
    "LayerTrace",
    "LifParams",
    "LossValue",
    "Network",
    "RateEncoder",
    "SoftTrace",
    "SpikeTrain",
    "SpikingClassifier",
    "SweepCell",
    "SweepResult",
    "TrainConfig",
    "TrialResult",
    "TruncatedPayloadError",
    "bernoulli_train",
    "bptt",
    "central_fd",
    "check_instance",
    "class_target_train",
    "compare",
    "decode_spike_count",
    "filter_spike_train",
    "filter_step",
    "fit_classifier",
    "has_reset_sensitive_step",
    "heaviside",
    "init_gaussian_fanin",
    "init_uniform_drive",
    "lif_step",
    "load_checkpoint",
    "load_idx",
    "loss_grad_filtered",
    "lr_sweep",
    "make_rng",
    "random_instance",
    "rate_encode_image",
    "run_suite",
    "run_toy_trial",
    "run_trials",
    "save_checkpoint",
    "save_idx",
    "sgd_step",
    "sigmoid_t",
    "sigmoid_t_deriv",
    "simulate_layer",
    "simulate_network",
    "soft_bptt",
    "soft_forward",
    "temporal_jacobian",
    "train_classifier",
    "van_rossum_loss",
]
