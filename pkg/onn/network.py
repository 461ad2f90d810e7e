"""
Feedforward optical neural network: x_i = f_i(W_i · x_{i-1}).
"""

from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from models import EOActivationConfig, ONNLayer, ONNModel
from .activation import eo_activation
from .mesh import DimensionMismatchError, mesh_apply, mesh_init_random

logger = logging.getLogger(__name__)

# Probability floor in the cross-entropy
PROBABILITY_FLOOR = 1e-12


class DegenerateIntensityError(ValueError):
    """Raised when every output intensity is zero and no distribution can be formed."""


@dataclass
class ForwardTrace:
    """Fields recorded during a forward pass, batch axis first when batched."""

    # Network input x_0
    inputs: NDArray[np.complex128]

    # Mesh outputs z_i, one per layer
    pre_activations: List[NDArray[np.complex128]] = field(default_factory=list)

    # Layer outputs x_i, one per layer
    post_activations: List[NDArray[np.complex128]] = field(default_factory=list)

    @property
    def outputs(self) -> NDArray[np.complex128]:
        return self.post_activations[-1]


def init_model(
    n: int,
    n_layers: int,
    activation: Optional[EOActivationConfig],
    keep_outputs: int,
    seed: int,
) -> ONNModel:
    """
    Build a network with uniformly random mesh phases.

    Args:
        n: Mesh dimension
        n_layers: Number of layers
        activation: Activation used after every mesh, or None for a linear network
        keep_outputs: Drop-mask size
        seed: Model seed; each layer receives its own spawned seed

    Returns:
        A freshly initialized model
    """
    children = np.random.SeedSequence(seed).spawn(n_layers)
    layers = [
        ONNLayer(mesh=mesh_init_random(n, int(child.generate_state(1)[0])), activation=activation)
        for child in children
    ]
    return ONNModel(layers=layers, keep_outputs=keep_outputs)


def forward(model: ONNModel, x0) -> ForwardTrace:
    """
    Run the network on one input vector or a batch of them.

    Args:
        model: The network
        x0: Complex array whose last axis has length N

    Returns:
        Trace holding every pre- and post-activation field

    Raises:
        DimensionMismatchError: If the input dimension differs from N
    """
    x = np.asarray(x0, dtype=np.complex128)
    if x.ndim == 0 or x.shape[-1] != model.n:
        raise DimensionMismatchError(f"model expects inputs of dimension {model.n}, got shape {x.shape}")
    trace = ForwardTrace(inputs=x)
    for layer in model.layers:
        z = mesh_apply(layer.mesh, x)
        x = eo_activation(layer.activation, z) if layer.activation is not None else z
        trace.pre_activations.append(z)
        trace.post_activations.append(x)
    return trace


def output_intensities(trace: ForwardTrace, keep: int) -> NDArray[np.float64]:
    """Un-normalized powers |x_L[j]|² of the first `keep` output ports."""
    out = trace.outputs
    if keep > out.shape[-1]:
        raise ValueError(f"cannot keep {keep} outputs of a {out.shape[-1]}-port network")
    return np.abs(out[..., :keep]) ** 2


def softmaxless_probs(intensities) -> NDArray[np.float64]:
    """
    Normalize intensities by their sum along the last axis.

    Raises:
        DegenerateIntensityError: If any row of intensities sums to zero
    """
    values = np.asarray(intensities, dtype=np.float64)
    total = np.sum(values, axis=-1, keepdims=True)
    if np.any(total <= 0.0):
        raise DegenerateIntensityError("all output intensities are zero; no probability distribution exists")
    return values / total


def mse_loss(outputs, targets) -> float:
    """Mean of squared differences over every entry."""
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if outputs.shape != targets.shape:
        raise ValueError(f"outputs {outputs.shape} and targets {targets.shape} differ in shape")
    return float(np.mean((outputs - targets) ** 2))


def cross_entropy_loss(probs, labels) -> float:
    """
    Mean of -log p_label over a batch.

    Args:
        probs: Probabilities, shape (K,) or (B, K)
        labels: Integer label per row (or a one-hot array of the same shape as probs)

    Returns:
        Batch-averaged cross-entropy, with probabilities floored at 1e-12
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels)
    if labels.shape == probs.shape:
        labels = np.argmax(labels, axis=-1)
    labels = np.atleast_1d(labels).astype(np.intp)
    if labels.shape[0] != probs.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {probs.shape[0]} probability rows")
    picked = probs[np.arange(probs.shape[0]), labels]
    return float(np.mean(-np.log(np.maximum(picked, PROBABILITY_FLOOR))))


def mse_cotangent(trace: ForwardTrace, keep: int, targets) -> Tuple[float, NDArray[np.complex128]]:
    """
    MSE between kept output powers and targets, and its cotangent at x_L.

    Returns:
        Tuple of (loss, ∂L/∂Re(x_L) + i·∂L/∂Im(x_L))
    """
    intensities = output_intensities(trace, keep)
    targets = np.asarray(targets, dtype=np.float64).reshape(intensities.shape)
    loss = mse_loss(intensities, targets)
    d_intensity = 2.0 * (intensities - targets) / intensities.size
    delta = np.zeros_like(trace.outputs)
    # ∂|x|²/∂Re x + i·∂|x|²/∂Im x = 2x
    delta[..., :keep] = 2.0 * d_intensity * trace.outputs[..., :keep]
    return loss, delta


def cross_entropy_cotangent(trace: ForwardTrace, keep: int, labels) -> Tuple[float, NDArray[np.complex128]]:
    """
    Cross-entropy of the normalized kept intensities, and its cotangent at x_L.

    Returns:
        Tuple of (loss, ∂L/∂Re(x_L) + i·∂L/∂Im(x_L))
    """
    intensities = np.atleast_2d(output_intensities(trace, keep))
    probs = softmaxless_probs(intensities)
    labels = np.atleast_1d(np.asarray(labels)).astype(np.intp)
    loss = cross_entropy_loss(probs, labels)

    batch = intensities.shape[0]
    rows = np.arange(batch)
    total = np.sum(intensities, axis=-1, keepdims=True)
    active = probs[rows, labels] > PROBABILITY_FLOOR
    d_intensity = np.where(active[:, None], 1.0 / total, 0.0) * np.ones_like(intensities)
    d_intensity[rows, labels] -= np.where(active, 1.0 / np.maximum(intensities[rows, labels], 1e-300), 0.0)
    d_intensity /= batch

    outputs = np.atleast_2d(trace.outputs)
    delta = np.zeros_like(outputs)
    delta[:, :keep] = 2.0 * d_intensity * outputs[:, :keep]
    return loss, delta.reshape(trace.outputs.shape)


def predict(model: ONNModel, inputs) -> NDArray[np.intp]:
    """Predicted class per input: argmax of the kept output intensities."""
    intensities = output_intensities(forward(model, inputs), model.keep_outputs)
    return np.argmax(intensities, axis=-1)


def save_model(model: ONNModel, path) -> None:
    """Write the model as a single JSON document."""
    Path(path).write_text(model.model_dump_json(indent=2))
    logger.info("saved %d-layer model (N=%d) to %s", len(model.layers), model.n, path)


def load_model(path) -> ONNModel:
    """Read a model written by save_model."""
    model = ONNModel.model_validate_json(Path(path).read_text())
    logger.info("loaded %d-layer model (N=%d) from %s", len(model.layers), model.n, path)
    return model
