"""
Optical neural network simulation with electro-optic activations.

This package provides unitary interferometer meshes, the electro-optic
activation, feedforward networks with Wirtinger-adjoint training, the XOR and
MNIST Fourier datasets, and a hardware figure-of-merit model.
"""

from .mesh import DimensionMismatchError, mesh_apply, mesh_backward, mesh_init_random, mesh_unitary, mzi_transfer_matrix
from .activation import (
    activation_curve,
    activation_threshold,
    activation_wirtinger,
    bias_phase,
    eo_activation,
    general_activation,
    identity_conditioner,
    phase_gain,
    power_transmission,
    self_phase,
    threshold_phase,
)
from .network import (
    DegenerateIntensityError,
    ForwardTrace,
    cross_entropy_cotangent,
    cross_entropy_loss,
    forward,
    init_model,
    load_model,
    mse_cotangent,
    mse_loss,
    output_intensities,
    predict,
    save_model,
    softmaxless_probs,
)
from .training import (
    AdamState,
    GradientSet,
    TraceMismatchError,
    TrainingDivergedError,
    TrainResult,
    adam_step,
    backward,
    evaluate,
    train,
    xor_gain_sweep,
)
from .data import (
    Dataset,
    IDXCountMismatchError,
    IDXFormatError,
    IDXMagicError,
    IDXTruncatedError,
    fourier_features,
    fourier_features_batch,
    load_mnist_idx,
    mnist_dataset,
    xor_dataset,
)
from .perf import gamma_eo, gamma_kerr, layer_dimensions, perf_report, threshold_contour

__all__ = [
    "DimensionMismatchError",
    "mesh_apply",
    "mesh_backward",
    "mesh_init_random",
    "mesh_unitary",
    "mzi_transfer_matrix",
    "activation_curve",
    "activation_threshold",
    "activation_wirtinger",
    "bias_phase",
    "eo_activation",
    "general_activation",
    "identity_conditioner",
    "phase_gain",
    "power_transmission",
    "self_phase",
    "threshold_phase",
    "DegenerateIntensityError",
    "ForwardTrace",
    "cross_entropy_cotangent",
    "cross_entropy_loss",
    "forward",
    "init_model",
    "load_model",
    "mse_cotangent",
    "mse_loss",
    "output_intensities",
    "predict",
    "save_model",
    "softmaxless_probs",
    "AdamState",
    "GradientSet",
    "TraceMismatchError",
    "TrainingDivergedError",
    "TrainResult",
    "adam_step",
    "backward",
    "evaluate",
    "train",
    "xor_gain_sweep",
    "Dataset",
    "IDXCountMismatchError",
    "IDXFormatError",
    "IDXMagicError",
    "IDXTruncatedError",
    "fourier_features",
    "fourier_features_batch",
    "load_mnist_idx",
    "mnist_dataset",
    "xor_dataset",
    "gamma_eo",
    "gamma_kerr",
    "layer_dimensions",
    "perf_report",
    "threshold_contour",
]
