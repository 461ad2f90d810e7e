import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_serializer, model_validator

TWO_PI = 2.0 * math.pi


def rectangular_layout(n: int) -> List[Tuple[int, int]]:
    """Return the (column, top-row) placements of a rectangular N-mode mesh.

    Column c holds MZIs on rows r with r ≡ c (mod 2) and r + 1 < N, for
    c = 0 … N-1, which tiles N(N-1)/2 MZIs.
    """
    return [(col, row) for col in range(n) for row in range(col % 2, n - 1, 2)]


class MZIPhases(BaseModel):
    """Phase settings of a single Mach-Zehnder interferometer."""

    model_config = ConfigDict(frozen=True)

    # Internal phase between the two couplers
    theta: float = Field(..., description="Internal phase in radians, canonicalized into [0, 2π)")

    # External phase on the top input arm
    phi: float = Field(..., description="External phase in radians, canonicalized into [0, 2π)")

    @field_validator("theta", "phi")
    @classmethod
    def _canonical(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("phase must be finite")
        return value % TWO_PI


class MZIPlacement(BaseModel):
    """An MZI sitting in a mesh column, coupling rows `row` and `row + 1`."""

    model_config = ConfigDict(frozen=True)

    # Column index, counted from the input side
    column: int = Field(..., ge=0, description="Column index of the MZI")

    # Upper of the two coupled waveguides
    row: int = Field(..., ge=0, description="Top row coupled by the MZI")

    # Phase-shifter settings
    phases: MZIPhases = Field(..., description="Phase settings of the MZI")

    @model_validator(mode="before")
    @classmethod
    def _from_row_list(cls, data):
        # JSON layout is [col, row, theta, phi]
        if isinstance(data, (list, tuple)):
            if len(data) != 4:
                raise ValueError("MZI entry must be [column, row, theta, phi]")
            col, row, theta, phi = data
            return {"column": col, "row": row, "phases": {"theta": theta, "phi": phi}}
        return data

    @model_serializer
    def _to_row_list(self) -> list:
        return [self.column, self.row, self.phases.theta, self.phases.phi]


class MeshParams(BaseModel):
    """Phase-shifter settings parameterizing one N×N unitary mesh."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Number of waveguide modes
    n: int = Field(..., ge=1, description="Mesh dimension N")

    # MZIs in column-major order
    mzis: List[MZIPlacement] = Field(..., description="MZI placements in the rectangular arrangement")

    # Phase shifters on every output waveguide
    output_phases: List[float] = Field(..., description="N output phase shifts in radians")

    _theta = PrivateAttr()
    _phi = PrivateAttr()
    _omega = PrivateAttr()

    @field_validator("output_phases")
    @classmethod
    def _canonical_outputs(cls, values: List[float]) -> List[float]:
        if not all(math.isfinite(v) for v in values):
            raise ValueError("output phases must be finite")
        return [v % TWO_PI for v in values]

    @model_validator(mode="after")
    def _check_tiling(self) -> "MeshParams":
        if len(self.output_phases) != self.n:
            raise ValueError(f"expected {self.n} output phases, got {len(self.output_phases)}")
        placed = [(m.column, m.row) for m in self.mzis]
        if placed != rectangular_layout(self.n):
            raise ValueError(
                f"MZI placements do not tile the rectangular {self.n}-mode layout "
                f"({len(placed)} given, {self.n * (self.n - 1) // 2} expected)"
            )
        return self

    def model_post_init(self, __context) -> None:
        # numpy is imported lazily so the schema module stays light
        import numpy as np

        self._theta = np.array([m.phases.theta for m in self.mzis], dtype=np.float64)
        self._phi = np.array([m.phases.phi for m in self.mzis], dtype=np.float64)
        self._omega = np.array(self.output_phases, dtype=np.float64)

    @property
    def theta(self):
        """Internal phases as a read-only array, in placement order."""
        return self._theta

    @property
    def phi(self):
        """External phases as a read-only array, in placement order."""
        return self._phi

    @property
    def omega(self):
        """Output phases as a read-only array."""
        return self._omega

    @property
    def num_parameters(self) -> int:
        return 2 * len(self.mzis) + self.n

    @classmethod
    def from_arrays(cls, n: int, theta, phi, output_phases) -> "MeshParams":
        """Build mesh parameters from flat phase arrays in placement order."""
        layout = rectangular_layout(n)
        if len(theta) != len(layout) or len(phi) != len(layout):
            raise ValueError(f"expected {len(layout)} MZI phases for N={n}")
        return cls(
            n=n,
            mzis=[
                MZIPlacement(column=col, row=row, phases=MZIPhases(theta=float(t), phi=float(p)))
                for (col, row), t, p in zip(layout, theta, phi)
            ],
            output_phases=[float(w) for w in output_phases],
        )


class PhysicalActivationParams(BaseModel):
    """Device quantities from which the activation's phase gain and bias derive."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Transimpedance gain of the receiver amplifier
    G: float = Field(..., gt=0, description="Transimpedance gain in V/A")

    # Photodetector responsivity
    R: float = Field(..., gt=0, description="Photodetector responsivity in A/W")

    # Modulator half-wave voltage
    V_pi: float = Field(..., gt=0, description="Voltage producing a π phase shift, in volts")

    # Static bias voltage on the modulator
    V_b: float = Field(0.0, description="Bias voltage in volts")


class EOActivationConfig(BaseModel):
    """Configuration of the electro-optic nonlinear activation."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Fraction of optical power tapped to the photodetector
    alpha: float = Field(0.1, gt=0, lt=1, description="Power tap ratio α")

    # Nonlinear phase per unit optical power
    g_phi: float = Field(..., ge=0, description="Phase gain g_φ in radians per unit optical power")

    # Phase contributed by the bias voltage
    phi_b: float = Field(math.pi, description="Bias phase φ_b in radians")

    # Optional physical quadruple consistent with g_phi and phi_b
    physical: Optional[PhysicalActivationParams] = Field(None, description="Physical device quantities")

    @field_validator("g_phi", "phi_b")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("activation parameters must be finite")
        return value

    @model_validator(mode="after")
    def _check_physical(self) -> "EOActivationConfig":
        if self.physical is None:
            return self
        p = self.physical
        g_expected = math.pi * self.alpha * p.G * p.R / p.V_pi
        phi_expected = math.pi * p.V_b / p.V_pi
        if not math.isclose(self.g_phi, g_expected, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(f"g_phi={self.g_phi} inconsistent with physical parameters ({g_expected})")
        if not math.isclose(self.phi_b, phi_expected, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError(f"phi_b={self.phi_b} inconsistent with physical parameters ({phi_expected})")
        return self

    @classmethod
    def from_physical(cls, alpha: float, G: float, R: float, V_pi: float, V_b: float = 0.0) -> "EOActivationConfig":
        """Derive g_φ and φ_b from the device quantities."""
        return cls(
            alpha=alpha,
            g_phi=math.pi * alpha * G * R / V_pi,
            phi_b=math.pi * V_b / V_pi,
            physical=PhysicalActivationParams(G=G, R=R, V_pi=V_pi, V_b=V_b),
        )


class ONNLayer(BaseModel):
    """One network layer: a unitary mesh optionally followed by activations."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Linear part of the layer
    mesh: MeshParams = Field(..., description="Mesh parameters of the layer")

    # Elementwise nonlinearity, absent for a purely linear layer
    activation: Optional[EOActivationConfig] = Field(None, description="Activation applied to every mesh output")


class ONNModel(BaseModel):
    """A feedforward optical neural network with an output drop-mask."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Layers applied in order
    layers: List[ONNLayer] = Field(..., min_length=1, description="Ordered network layers")

    # Number of leading output ports kept for readout
    keep_outputs: int = Field(..., ge=1, description="Drop-mask size K")

    @property
    def n(self) -> int:
        return self.layers[0].mesh.n

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ONNModel":
        dims = {layer.mesh.n for layer in self.layers}
        if len(dims) != 1:
            raise ValueError(f"all meshes must share one dimension, got {sorted(dims)}")
        if self.keep_outputs > self.n:
            raise ValueError(f"keep_outputs={self.keep_outputs} exceeds mesh dimension {self.n}")
        return self


class HardwareParams(BaseModel):
    """Device and system constants for the performance model."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Modulator and detector rate
    mod_det_rate: float = Field(10e9, gt=0, description="Modulator/detector rate in Hz")

    # Photodetector responsivity
    responsivity: float = Field(1.0, gt=0, description="Photodetector responsivity in A/W")

    # Optical-to-electrical circuit power per activation
    oe_power: float = Field(0.1, gt=0, description="O/E circuit power consumption per activation in W")

    # Delays in the electrical pathway
    tau_oe: float = Field(100e-12, gt=0, description="O/E circuit group delay in s")
    tau_rc: float = Field(20e-12, gt=0, description="Phase modulator RC delay in s")
    tau_nl: float = Field(0.0, ge=0, description="Nonlinear signal conditioner delay in s")

    # Mesh MZI geometry
    D_mzi: float = Field(100e-6, gt=0, description="MZI length in m")
    H_mzi: float = Field(60e-6, gt=0, description="MZI height in m")

    # Waveguide effective index
    n_eff: float = Field(3.5, gt=0, description="Waveguide effective index")

    # Activation electrical parameters
    V_pi: float = Field(10.0, gt=0, description="Activation modulator V_π in volts")
    alpha: float = Field(0.1, gt=0, lt=1, description="Activation power tap ratio")
    G: float = Field(5e5, gt=0, description="Transimpedance gain in V/A")
    V_pi_L: float = Field(20e-3, gt=0, description="Phase modulator V_π·L in V·m")

    # Kerr comparison
    n2: float = Field(4.5e-18, gt=0, description="Nonlinear refractive index in m²/W")
    mode_area: float = Field(0.05e-12, gt=0, description="Effective mode area in m²")
    lambda0: float = Field(1.55e-6, gt=0, description="Free-space wavelength in m")

    # Delay-line length laid out per activation, as rounded for the footprint estimate
    activation_length: float = Field(1e-2, gt=0, description="Activation delay-line length D_f in m")


class PerfBreakdown(BaseModel):
    """A figure of merit split between the mesh and the activations."""

    # Interferometer mesh share
    mesh: float = Field(..., description="Mesh contribution")

    # Activation function share
    activation: float = Field(..., description="Activation contribution")

    @property
    def total(self) -> float:
        return self.mesh + self.activation


class PerfReport(BaseModel):
    """Per-network figures of merit."""

    # Network shape
    N: int = Field(..., ge=1, description="Mesh dimension")
    L: int = Field(..., ge=1, description="Number of layers")

    power: PerfBreakdown = Field(..., description="Power consumption in W")
    latency: PerfBreakdown = Field(..., description="Latency in s")
    footprint: PerfBreakdown = Field(..., description="Footprint in m²")
    speed: PerfBreakdown = Field(..., description="Throughput in MAC/s")
    efficiency: PerfBreakdown = Field(..., description="Energy per MAC in J")

    # Length of the delay line that matches the electrical pathway
    delay_line_length: float = Field(..., description="(τ_oe+τ_nl+τ_rc)·c₀/n_eff in m")

    # Optical power the source must supply, N·P_th
    optical_source_power: Optional[float] = Field(None, description="Optical input power in W")


class ContourResult(BaseModel):
    """Points (G, V_π) sharing one activation threshold."""

    # Threshold power in W
    target: float

    # (G in V/A, V_π in V) pairs inside the gain window
    points: List[Tuple[float, float]] = Field(default_factory=list)

    # V_π values whose required gain falls outside the window
    unreachable: List[float] = Field(default_factory=list)


LossKind = Literal["mse", "cross_entropy"]


class TrainConfig(BaseModel):
    """Optimizer and loop settings for training."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Adam hyperparameters
    learning_rate: float = Field(0.01, gt=0, description="Adam step size")
    beta1: float = Field(0.9, ge=0, lt=1, description="Adam first-moment decay")
    beta2: float = Field(0.999, ge=0, lt=1, description="Adam second-moment decay")
    epsilon: float = Field(1e-8, gt=0, description="Adam denominator floor")

    # Loop shape
    batch_size: int = Field(16, ge=1, description="Mini-batch size")
    epochs: int = Field(5000, ge=1, description="Number of epochs")
    seed: int = Field(0, description="Seed for shuffling")

    # Which activation parameters are trainable
    train_activation_gain: bool = Field(False, description="Also train every layer's g_φ")
    train_activation_bias: bool = Field(False, description="Also train every layer's φ_b")

    # Objective
    loss: LossKind = Field("mse", description="Loss kind")

    # Keep the model with the best test accuracy
    checkpoint_best: bool = Field(False, description="Return the best-test-accuracy model")

    # Step-size schedule over the epochs
    lr_schedule: Literal["constant", "cosine"] = Field("constant", description="Learning-rate schedule")

    # Floor of the cosine schedule as a fraction of learning_rate
    final_lr_fraction: float = Field(0.01, gt=0, le=1, description="Final learning rate over initial")

    # Initializations screened by successive halving, the given model first
    restarts: int = Field(1, ge=1, description="Number of candidate initializations")

    # tqdm bar over epochs
    show_progress: bool = Field(False, description="Show a progress bar")


class EpochRecord(BaseModel):
    """Metrics recorded after one training epoch."""

    epoch: int
    loss: float
    train_acc: float
    test_acc: Optional[float] = None


class SweepPoint(BaseModel):
    """Final-MSE statistics of one (bias, gain) point over independent runs."""

    phi_b: float
    g_phi: float
    mean_mse: float
    min_mse: float
    max_mse: float


class RunConfig(BaseModel):
    """Settings shared by every subcommand."""

    model_config = ConfigDict(extra="forbid")

    # Seed of every random stream in the run
    seed: int = Field(0, description="Run seed")

    # Directory that receives every artifact
    out_dir: str = Field("runs", description="Output directory")


class XorRunConfig(RunConfig):
    """Settings of the multi-input XOR experiment."""

    n: int = Field(4, ge=1, le=16, description="Number of XOR inputs and mesh dimension")
    layers: int = Field(2, ge=1, description="Number of layers")
    g_phi: float = Field(1.75 * math.pi, ge=0, description="Activation phase gain")
    phi_b: float = Field(math.pi, description="Activation bias phase")
    alpha: float = Field(0.1, gt=0, lt=1, description="Activation tap ratio")
    linear: bool = Field(False, description="Drop all activations")
    epochs: int = Field(5000, ge=1, description="Training epochs")
    learning_rate: float = Field(0.01, gt=0, description="Adam step size")
    high_target: float = Field(0.2, description="Output power for odd parity")

    # Optimizer search: cosine annealing plus successive halving over initializations
    lr_schedule: Literal["constant", "cosine"] = Field("cosine", description="Learning-rate schedule")
    final_lr_fraction: float = Field(0.01, gt=0, le=1, description="Final learning rate over initial")
    restarts: int = Field(32, ge=1, description="Candidate initializations per training run")

    # Sweep mode
    sweep: bool = Field(False, description="Run the gain × bias × seed sweep")
    sweep_gains: List[float] = Field(
        default_factory=lambda: [k * 0.25 * math.pi for k in range(0, 9)],
        description="Phase gains of the sweep",
    )
    sweep_biases: List[float] = Field(
        default_factory=lambda: [0.0, 0.5 * math.pi, 0.85 * math.pi, math.pi],
        description="Bias phases of the sweep",
    )
    sweep_seeds: int = Field(20, ge=1, description="Independent runs per sweep point")
    sweep_restarts: int = Field(8, ge=1, description="Candidate initializations per sweep run")


class MnistRunConfig(RunConfig):
    """Settings of the MNIST Fourier-feature classification experiment."""

    train_images: str = Field("data/train-images-idx3-ubyte", description="Training images IDX path")
    train_labels: str = Field("data/train-labels-idx1-ubyte", description="Training labels IDX path")
    test_images: str = Field("data/t10k-images-idx3-ubyte", description="Test images IDX path")
    test_labels: str = Field("data/t10k-labels-idx1-ubyte", description="Test labels IDX path")
    feature_cache: Optional[str] = Field(None, description="Directory for cached Fourier features")
    n: int = Field(16, ge=10, le=784, description="Fourier coefficients and mesh dimension")
    layers: int = Field(2, ge=1, description="Number of layers")
    g_phi: float = Field(0.05 * math.pi, ge=0, description="Activation phase gain")
    phi_b: float = Field(math.pi, description="Activation bias phase")
    alpha: float = Field(0.1, gt=0, lt=1, description="Activation tap ratio")
    linear: bool = Field(False, description="Drop all activations")
    train_gain: bool = Field(False, description="Train every layer's g_φ")
    epochs: int = Field(100, ge=1, description="Training epochs")
    batch_size: int = Field(500, ge=1, description="Mini-batch size")
    learning_rate: float = Field(0.001, gt=0, description="Adam step size")
    sweep: bool = Field(False, description="Run the layers × configuration accuracy grid")
    sweep_layers: List[int] = Field(default_factory=lambda: [1, 2, 3], description="Layer counts of the grid")


class ActivationCurveConfig(RunConfig):
    """Settings of the activation response export."""

    alpha: float = Field(0.1, gt=0, lt=1, description="Activation tap ratio")
    g_phi: float = Field(math.pi, gt=0, description="Phase gain used to de-normalize the axes")
    biases: List[float] = Field(
        default_factory=lambda: [math.pi, 0.85 * math.pi, 0.0, 0.5 * math.pi],
        description="Bias phases to export",
    )
    z_max: float = Field(2.0, gt=0, description="Largest normalized input amplitude")
    points: int = Field(201, ge=2, description="Samples per curve")


class PerfTableConfig(RunConfig):
    """Settings of the performance table export."""

    sizes: List[int] = Field(default_factory=lambda: [4, 10, 100], description="Mesh dimensions")
    layers: int = Field(1, ge=1, description="Number of layers")
    hardware: HardwareParams = Field(default_factory=HardwareParams, description="Hardware constants")


class ThresholdContourConfig(RunConfig):
    """Settings of the iso-threshold contour export."""

    targets: List[float] = Field(default_factory=lambda: [1e-4, 1e-3, 1e-2], description="Thresholds in W")
    g_min: float = Field(1e2, gt=0, description="Smallest gain in V/A")
    g_max: float = Field(1e7, gt=0, description="Largest gain in V/A")
    v_pi_min: float = Field(1.0, gt=0, description="Smallest V_π in volts")
    v_pi_max: float = Field(20.0, gt=0, description="Largest V_π in volts")
    points: int = Field(50, ge=2, description="V_π samples per contour")
    hardware: HardwareParams = Field(default_factory=HardwareParams, description="Hardware constants")


class KerrCompareConfig(RunConfig):
    """Settings of the Kerr comparison export."""

    alphas: List[float] = Field(default_factory=lambda: [0.5, 0.1, 0.01], description="Tap ratios")
    g_min: float = Field(1.0, gt=0, description="Smallest gain in V/A")
    g_max: float = Field(1e4, gt=0, description="Largest gain in V/A")
    v_pi_l_min: float = Field(1e-3, gt=0, description="Smallest V_π·L in V·m")
    v_pi_l_max: float = Field(1e-1, gt=0, description="Largest V_π·L in V·m")
    gains_for_vpil: List[float] = Field(default_factory=lambda: [10.0, 100.0, 1000.0], description="Gains of the V_π·L sweep")
    points: int = Field(61, ge=2, description="Samples per curve")
    hardware: HardwareParams = Field(default_factory=HardwareParams, description="Hardware constants")
