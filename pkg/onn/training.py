"""
Reverse-mode gradients through meshes and activations, Adam, and training loops.

Cotangents travel as complex arrays δ = ∂L/∂Re(x) + i·∂L/∂Im(x). A linear mesh
maps them back with U†; an activation maps them back with its Wirtinger pair,
δ_z = conj(δ_f)·∂f/∂z̄ + δ_f·conj(∂f/∂z).
"""

import csv
from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from tqdm import tqdm

from models import EOActivationConfig, EpochRecord, MeshParams, ONNLayer, ONNModel, SweepPoint, TrainConfig
from .activation import activation_wirtinger
from .data import Dataset, xor_dataset
from .mesh import DimensionMismatchError, mesh_backward, mesh_init_random
from .network import (
    ForwardTrace,
    cross_entropy_cotangent,
    forward,
    init_model,
    mse_cotangent,
    output_intensities,
    softmaxless_probs,
)

logger = logging.getLogger(__name__)

Params = Dict[str, NDArray[np.float64]]

# Rows pushed through the network at once during evaluation
EVAL_CHUNK = 10000

# Fractions of the epoch budget at which screening cuts the candidate pool
SCREEN_FRACTIONS = (0.05, 0.2, 0.5)
SCREEN_KEEP = 4


class TraceMismatchError(ValueError):
    """Raised when a forward trace was not produced by the model being differentiated."""


class TrainingDivergedError(RuntimeError):
    """Raised when the loss becomes non-finite."""


@dataclass
class LayerGradients:
    """Loss gradients of one layer's trainable parameters."""

    theta: NDArray[np.float64]
    phi: NDArray[np.float64]
    output_phases: NDArray[np.float64]
    g_phi: Optional[float] = None
    phi_b: Optional[float] = None


@dataclass
class GradientSet:
    """Per-layer gradients, shaped like the model."""

    layers: List[LayerGradients]

    def as_dict(self) -> Params:
        """Flatten to the same keys as model_parameters."""
        flat: Params = {}
        for i, layer in enumerate(self.layers):
            flat[f"{i}.theta"] = layer.theta
            flat[f"{i}.phi"] = layer.phi
            flat[f"{i}.output_phases"] = layer.output_phases
            if layer.g_phi is not None:
                flat[f"{i}.g_phi"] = np.array([layer.g_phi])
            if layer.phi_b is not None:
                flat[f"{i}.phi_b"] = np.array([layer.phi_b])
        return flat


@dataclass
class AdamState:
    """Moment estimates and step counter of Adam."""

    t: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)


@dataclass
class TrainResult:
    """Trained model and its per-epoch history."""

    model: ONNModel
    history: List[EpochRecord]
    best_epoch: int

    # Optimizer steps taken by the returned run
    steps: int = 0


def backward(
    model: ONNModel,
    trace: ForwardTrace,
    upstream,
    include_gain: bool = False,
    include_bias: bool = False,
) -> GradientSet:
    """
    Gradients of a real loss with respect to every trainable parameter.

    Args:
        model: The network that produced the trace
        trace: Forward trace of the network
        upstream: Cotangent ∂L/∂Re(x_L) + i·∂L/∂Im(x_L)
        include_gain: Also return ∂L/∂g_φ for layers with an activation
        include_bias: Also return ∂L/∂φ_b for layers with an activation

    Returns:
        Gradients summed over the batch

    Raises:
        TraceMismatchError: If the trace does not belong to the model
    """
    if len(trace.pre_activations) != len(model.layers):
        raise TraceMismatchError(
            f"trace has {len(trace.pre_activations)} layers, model has {len(model.layers)}"
        )
    delta = np.asarray(upstream, dtype=np.complex128)
    if delta.shape != trace.outputs.shape:
        raise TraceMismatchError(f"cotangent shape {delta.shape} differs from output shape {trace.outputs.shape}")

    grads: List[LayerGradients] = []
    for layer, z in zip(reversed(model.layers), reversed(trace.pre_activations)):
        if z.shape[-1] != layer.mesh.n:
            raise TraceMismatchError(f"trace field dimension {z.shape[-1]} differs from mesh dimension {layer.mesh.n}")
        g_phi = phi_b = None
        if layer.activation is not None:
            df_dz, df_dzbar, df_dg, df_dpb = activation_wirtinger(layer.activation, z)
            if include_gain:
                g_phi = float(np.sum(np.real(np.conj(delta) * df_dg)))
            if include_bias:
                phi_b = float(np.sum(np.real(np.conj(delta) * df_dpb)))
            delta = np.conj(delta) * df_dzbar + delta * np.conj(df_dz)
        delta, g_theta, g_phi_mzi, g_omega = mesh_backward(layer.mesh, z, delta)
        grads.append(LayerGradients(theta=g_theta, phi=g_phi_mzi, output_phases=g_omega, g_phi=g_phi, phi_b=phi_b))

    grads.reverse()
    return GradientSet(layers=grads)


def model_parameters(model: ONNModel, train_gain: bool = False, train_bias: bool = False) -> Params:
    """Flat dict of the trainable parameters of a model."""
    params: Params = {}
    for i, layer in enumerate(model.layers):
        params[f"{i}.theta"] = layer.mesh.theta.copy()
        params[f"{i}.phi"] = layer.mesh.phi.copy()
        params[f"{i}.output_phases"] = layer.mesh.omega.copy()
        if layer.activation is not None:
            if train_gain:
                params[f"{i}.g_phi"] = np.array([layer.activation.g_phi])
            if train_bias:
                params[f"{i}.phi_b"] = np.array([layer.activation.phi_b])
    return params


def apply_parameters(model: ONNModel, params: Params) -> ONNModel:
    """Return a copy of the model with its trainable parameters replaced."""
    layers = []
    for i, layer in enumerate(model.layers):
        mesh = MeshParams.from_arrays(
            layer.mesh.n, params[f"{i}.theta"], params[f"{i}.phi"], params[f"{i}.output_phases"]
        )
        activation = layer.activation
        gain_key, bias_key = f"{i}.g_phi", f"{i}.phi_b"
        if activation is not None and (gain_key in params or bias_key in params):
            activation = EOActivationConfig(
                alpha=activation.alpha,
                g_phi=float(params[gain_key][0]) if gain_key in params else activation.g_phi,
                phi_b=float(params[bias_key][0]) if bias_key in params else activation.phi_b,
            )
        layers.append(ONNLayer(mesh=mesh, activation=activation))
    return ONNModel(layers=layers, keep_outputs=model.keep_outputs)


def adam_step(
    params: Params,
    grads: Params,
    state: AdamState,
    cfg: TrainConfig,
    learning_rate: Optional[float] = None,
) -> Tuple[Params, AdamState]:
    """
    One bias-corrected Adam update.

    Args:
        params: Current parameters
        grads: Loss gradients, same keys and shapes as params
        state: Moment estimates from the previous step
        cfg: Optimizer hyperparameters
        learning_rate: Step size of this update, cfg.learning_rate when omitted

    Returns:
        Tuple of (updated parameters, updated state); inputs are left untouched
    """
    lr = cfg.learning_rate if learning_rate is None else learning_rate
    t = state.t + 1
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    new_params: Params = {}
    new_m: Params = {}
    new_v: Params = {}
    for key, value in params.items():
        g = grads[key]
        if g.shape != value.shape:
            raise ValueError(f"gradient {key} has shape {g.shape}, parameter has {value.shape}")
        m = cfg.beta1 * state.m.get(key, np.zeros_like(value)) + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v.get(key, np.zeros_like(value)) + (1.0 - cfg.beta2) * (g * g)
        new_params[key] = value - lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)
        new_m[key] = m
        new_v[key] = v

    # Phase gain is a physical magnitude
    for key in new_params:
        if key.endswith(".g_phi"):
            new_params[key] = np.maximum(new_params[key], 0.0)
    return new_params, AdamState(t=t, m=new_m, v=new_v)


def _loss_and_cotangent(model: ONNModel, trace: ForwardTrace, targets, kind: str):
    if kind == "mse":
        return mse_cotangent(trace, model.keep_outputs, targets)
    return cross_entropy_cotangent(trace, model.keep_outputs, targets)


def _regression_accuracy(powers: NDArray[np.float64], targets: NDArray[np.float64]) -> float:
    # Outputs are read as high when nearer the high target
    threshold = 0.5 * (np.max(targets) + np.min(targets))
    return float(np.mean((powers > threshold) == (targets > threshold)))


def dataset_metrics(model: ONNModel, dataset: Dataset, kind: str) -> Tuple[float, float]:
    """Loss and accuracy of a model over a whole dataset."""
    losses, weights, correct = [], [], 0.0
    for start in range(0, len(dataset), EVAL_CHUNK):
        chunk = dataset.subset(slice(start, start + EVAL_CHUNK))
        trace = forward(model, chunk.inputs)
        loss, _ = _loss_and_cotangent(model, trace, chunk.targets, kind)
        losses.append(loss)
        weights.append(len(chunk))
        intensities = output_intensities(trace, model.keep_outputs)
        if dataset.kind == "classification":
            correct += float(np.sum(np.argmax(intensities, axis=-1) == chunk.targets))
        else:
            correct += _regression_accuracy(intensities[:, 0], chunk.targets) * len(chunk)
    return float(np.average(losses, weights=weights)), correct / len(dataset)


def scheduled_learning_rate(cfg: TrainConfig, epoch: int) -> float:
    """Adam step size used during a given 1-based epoch."""
    if cfg.lr_schedule == "constant":
        return cfg.learning_rate
    floor = cfg.learning_rate * cfg.final_lr_fraction
    progress = (epoch - 1) / max(cfg.epochs - 1, 1)
    return floor + 0.5 * (cfg.learning_rate - floor) * (1.0 + math.cos(math.pi * progress))


def screening_epochs(epochs: int) -> List[int]:
    """Epochs after which the candidate pool is cut to its best quarter."""
    stops = sorted({max(1, round(fraction * epochs)) for fraction in SCREEN_FRACTIONS})
    return [stop for stop in stops if stop < epochs]


def _redraw_meshes(model: ONNModel, seed) -> ONNModel:
    """Same architecture and activations, fresh uniformly random mesh phases."""
    children = np.random.SeedSequence(seed).spawn(len(model.layers))
    layers = [
        ONNLayer(mesh=mesh_init_random(layer.mesh.n, int(child.generate_state(1)[0])), activation=layer.activation)
        for layer, child in zip(model.layers, children)
    ]
    return ONNModel(layers=layers, keep_outputs=model.keep_outputs)


@dataclass
class _Run:
    """One candidate's model, optimizer state and history."""

    index: int
    model: ONNModel
    params: Params
    rng: np.random.Generator
    state: AdamState = field(default_factory=AdamState)
    history: List[EpochRecord] = field(default_factory=list)
    best_model: Optional[ONNModel] = None
    best_epoch: int = 0
    best_acc: float = -math.inf

    @property
    def loss(self) -> float:
        return self.history[-1].loss if self.history else math.inf


def _start_run(model: ONNModel, index: int, cfg: TrainConfig) -> _Run:
    if index == 0:
        rng = np.random.default_rng(cfg.seed)
    else:
        model = _redraw_meshes(model, [cfg.seed, index])
        rng = np.random.default_rng([cfg.seed, index])
    params = model_parameters(model, cfg.train_activation_gain, cfg.train_activation_bias)
    return _Run(index=index, model=model, params=params, rng=rng, best_model=model)


def _run_epochs(
    run: _Run,
    dataset: Dataset,
    cfg: TrainConfig,
    test_dataset: Optional[Dataset],
    first: int,
    last: int,
    desc: str,
) -> None:
    epochs = tqdm(range(first, last + 1), desc=desc, disable=not cfg.show_progress)
    for epoch in epochs:
        lr = scheduled_learning_rate(cfg, epoch)
        order = run.rng.permutation(len(dataset))
        for batch_index, start in enumerate(range(0, len(dataset), cfg.batch_size)):
            batch = dataset.subset(order[start : start + cfg.batch_size])
            trace = forward(run.model, batch.inputs)
            loss, delta = _loss_and_cotangent(run.model, trace, batch.targets, cfg.loss)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss {loss} at epoch {epoch}, batch {batch_index}")
            grads = backward(run.model, trace, delta, cfg.train_activation_gain, cfg.train_activation_bias)
            run.params, run.state = adam_step(run.params, grads.as_dict(), run.state, cfg, learning_rate=lr)
            run.model = apply_parameters(run.model, run.params)

        loss, train_acc = dataset_metrics(run.model, dataset, cfg.loss)
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"non-finite training loss {loss} after epoch {epoch}")
        test_acc = dataset_metrics(run.model, test_dataset, cfg.loss)[1] if test_dataset is not None else None
        run.history.append(EpochRecord(epoch=epoch, loss=loss, train_acc=train_acc, test_acc=test_acc))
        logger.debug("run %d epoch %d: loss=%.6g train_acc=%.4f test_acc=%s", run.index, epoch, loss, train_acc, test_acc)
        if cfg.show_progress:
            epochs.set_postfix(loss=f"{loss:.3g}", acc=f"{train_acc:.3f}")

        score = test_acc if test_acc is not None else train_acc
        if score > run.best_acc:
            run.best_model, run.best_epoch, run.best_acc = run.model, epoch, score


def train(
    model: ONNModel,
    dataset: Dataset,
    cfg: TrainConfig,
    test_dataset: Optional[Dataset] = None,
) -> TrainResult:
    """
    Train mesh phases (and optionally activation gains and biases) with Adam.

    Each epoch shuffles the training set, takes one optimizer step per
    mini-batch on the batch-mean gradient, then records the loss and accuracy
    over the full training set and the accuracy over the test set.

    With cfg.restarts > 1 the given model competes with freshly drawn meshes.
    All candidates train on the same epoch axis and learning-rate schedule;
    at each screening epoch only the quarter with the lowest training loss
    continues, and the lowest final loss wins.

    Args:
        model: Initial network
        dataset: Training data
        cfg: Optimizer and loop settings
        test_dataset: Optional held-out data for test accuracy

    Returns:
        The final model (or the best-test-accuracy one when cfg.checkpoint_best)
        together with the per-epoch history of the winning candidate

    Raises:
        DimensionMismatchError: If the data dimension differs from the model's
        TrainingDivergedError: If a batch loss is not finite
    """
    for data in (dataset, test_dataset):
        if data is not None and data.dimension != model.n:
            raise DimensionMismatchError(f"dataset dimension {data.dimension} differs from model dimension {model.n}")

    runs = [_start_run(model, index, cfg) for index in range(cfg.restarts)]
    first = 1
    if len(runs) > 1:
        for stop in screening_epochs(cfg.epochs):
            for run in runs:
                _run_epochs(run, dataset, cfg, test_dataset, first, stop, f"Screening run {run.index}")
            runs = sorted(runs, key=lambda r: r.loss)[: math.ceil(len(runs) / SCREEN_KEEP)]
            logger.info("after epoch %d keeping runs %s (best loss %.3g)", stop, [r.index for r in runs], runs[0].loss)
            first = stop + 1
    for run in runs:
        _run_epochs(run, dataset, cfg, test_dataset, first, cfg.epochs, "Training epochs")
    winner = min(runs, key=lambda r: r.loss)

    if cfg.checkpoint_best:
        logger.info("returning checkpoint from epoch %d (accuracy %.4f)", winner.best_epoch, winner.best_acc)
        return TrainResult(model=winner.best_model, history=winner.history, best_epoch=winner.best_epoch, steps=winner.state.t)
    return TrainResult(model=winner.model, history=winner.history, best_epoch=cfg.epochs, steps=winner.state.t)


def evaluate(model: ONNModel, dataset: Dataset) -> Tuple[float, NDArray[np.float64]]:
    """
    Classification accuracy and confusion matrix.

    Predictions are the argmax of the normalized kept intensities. Row i of the
    confusion matrix holds the percentage of class-i samples predicted as each
    class; rows of classes absent from the dataset are zero.

    Returns:
        Tuple of (accuracy, keep_outputs × keep_outputs confusion matrix in percent)
    """
    if dataset.kind != "classification":
        raise ValueError("evaluate needs a classification dataset")
    classes = model.keep_outputs
    counts = np.zeros((classes, classes), dtype=np.float64)
    for start in range(0, len(dataset), EVAL_CHUNK):
        chunk = dataset.subset(slice(start, start + EVAL_CHUNK))
        probs = softmaxless_probs(output_intensities(forward(model, chunk.inputs), classes))
        predicted = np.argmax(probs, axis=-1)
        np.add.at(counts, (chunk.targets, predicted), 1.0)
    accuracy = float(np.trace(counts) / len(dataset))
    totals = counts.sum(axis=1, keepdims=True)
    confusion = np.divide(100.0 * counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return accuracy, confusion


def xor_gain_sweep(
    gains: Sequence[float],
    biases: Sequence[float],
    seeds: Sequence[int],
    n: int = 4,
    n_layers: int = 2,
    alpha: float = 0.1,
    train_cfg: Optional[TrainConfig] = None,
) -> List[SweepPoint]:
    """
    Final XOR MSE across activation gains and biases, over independent seeded runs.

    Args:
        gains: Phase gains g_φ
        biases: Bias phases φ_b
        seeds: One training run per seed (model initialization and shuffling)
        n: Number of XOR inputs
        n_layers: Network depth
        alpha: Activation tap ratio
        train_cfg: Optimizer settings shared by every run; the seed, batch size
            and loss are set per run

    Returns:
        One point per (bias, gain) pair, biases outermost
    """
    dataset = xor_dataset(n)
    base = train_cfg or TrainConfig()
    points: List[SweepPoint] = []
    for phi_b in biases:
        for g_phi in gains:
            activation = EOActivationConfig(alpha=alpha, g_phi=g_phi, phi_b=phi_b)
            finals = []
            for seed in seeds:
                model = init_model(n, n_layers, activation, keep_outputs=1, seed=seed)
                cfg = base.model_copy(update={"seed": seed, "batch_size": len(dataset), "loss": "mse", "show_progress": False})
                finals.append(train(model, dataset, cfg).history[-1].loss)
            point = SweepPoint(
                phi_b=phi_b,
                g_phi=g_phi,
                mean_mse=float(np.mean(finals)),
                min_mse=float(np.min(finals)),
                max_mse=float(np.max(finals)),
            )
            logger.info("sweep φ_b=%.4f g_φ=%.4f: mean MSE %.3g", phi_b, g_phi, point.mean_mse)
            points.append(point)
    return points


def write_history_csv(history: Sequence[EpochRecord], path) -> None:
    """Write epoch,loss,train_acc,test_acc rows."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss", "train_acc", "test_acc"])
        for record in history:
            writer.writerow(
                [record.epoch, repr(record.loss), repr(record.train_acc), "" if record.test_acc is None else repr(record.test_acc)]
            )


def write_confusion_csv(confusion: NDArray[np.float64], path) -> None:
    """Write a confusion matrix with a header of predicted classes."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["true"] + [f"pred_{j}" for j in range(confusion.shape[1])])
        for i, row in enumerate(confusion):
            writer.writerow([i] + [f"{value:.2f}" for value in row])
