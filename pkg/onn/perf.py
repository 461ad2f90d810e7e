"""
Hardware figures of merit of an integrated ONN with electro-optic activations.

Mesh phase shifters are assumed to draw no power, so every watt is spent in the
optical-to-electrical circuits of the activations.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models import ContourResult, EOActivationConfig, HardwareParams, PerfBreakdown, PerfReport
from .activation import activation_threshold, threshold_phase

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 2.998e8


def delay_line_length(hw: HardwareParams) -> float:
    """Waveguide length (τ_oe+τ_nl+τ_rc)·c₀/n_eff matching the electrical delay."""
    return (hw.tau_oe + hw.tau_nl + hw.tau_rc) * SPEED_OF_LIGHT / hw.n_eff


def perf_report(N: int, L: int, hw: HardwareParams, p_th: Optional[float] = None) -> PerfReport:
    """
    Power, latency, footprint, speed and efficiency of an L-layer, N-mode network.

    Args:
        N: Mesh dimension
        L: Number of layers
        hw: Hardware constants
        p_th: Activation threshold in W; when given, the report includes the
            optical source power N·p_th

    Returns:
        Report with a mesh/activation split of each figure of merit
    """
    if N < 1 or L < 1:
        raise ValueError(f"N and L must be at least 1, got N={N}, L={L}")
    v_g = SPEED_OF_LIGHT / hw.n_eff
    power = PerfBreakdown(mesh=0.0, activation=L * N * hw.oe_power)
    latency = PerfBreakdown(
        mesh=L * N * hw.D_mzi / v_g,
        activation=L * (hw.tau_oe + hw.tau_nl + hw.tau_rc),
    )
    # Activations fit within one mesh row height
    footprint = PerfBreakdown(
        mesh=L * N**2 * hw.D_mzi * hw.H_mzi,
        activation=L * N * hw.activation_length * hw.H_mzi,
    )
    speed = PerfBreakdown(mesh=N**2 * L * hw.mod_det_rate, activation=0.0)
    efficiency = PerfBreakdown(
        mesh=power.mesh / speed.total,
        activation=power.activation / speed.total,
    )
    return PerfReport(
        N=N,
        L=L,
        power=power,
        latency=latency,
        footprint=footprint,
        speed=speed,
        efficiency=efficiency,
        delay_line_length=delay_line_length(hw),
        optical_source_power=None if p_th is None else N * p_th,
    )


def perf_table(sizes: Sequence[int], L: int, hw: HardwareParams) -> List[PerfReport]:
    """Reports for several mesh dimensions at a fixed depth."""
    return [perf_report(N, L, hw) for N in sizes]


def layer_dimensions(N: int, hw: HardwareParams) -> Tuple[float, float]:
    """Length N·D_MZI + D_f and height N·H_MZI of one layer, in metres."""
    return N * hw.D_mzi + hw.activation_length, N * hw.H_mzi


def required_gain(target_p_th: float, V_pi: float, hw: HardwareParams, phi_b: float = math.pi) -> float:
    """Transimpedance gain giving threshold `target_p_th` at the given V_π."""
    delta = threshold_phase(hw.alpha, phi_b)
    return delta * V_pi / (math.pi * hw.alpha * hw.responsivity * target_p_th)


def threshold_contour(
    hw: HardwareParams,
    G_range: Tuple[float, float],
    V_pi_values: Sequence[float],
    target_p_th: float,
    phi_b: float = math.pi,
) -> ContourResult:
    """
    Iso-threshold curve in the (G, V_π) plane.

    Args:
        hw: Hardware constants (α and responsivity are used)
        G_range: Inclusive (min, max) gain window in V/A
        V_pi_values: Modulator V_π samples in volts
        target_p_th: Threshold power in W
        phi_b: Bias phase of the activation

    Returns:
        Contour points inside the gain window, plus the V_π values whose
        required gain falls outside it
    """
    g_min, g_max = G_range
    if min(g_min, g_max, target_p_th) <= 0 or any(v <= 0 for v in V_pi_values):
        raise ValueError("gain range, V_pi values and target threshold must be positive")
    points, unreachable = [], []
    for V_pi in V_pi_values:
        G = required_gain(target_p_th, V_pi, hw, phi_b)
        if g_min <= G <= g_max:
            points.append((G, float(V_pi)))
        else:
            unreachable.append(float(V_pi))
    if unreachable:
        logger.warning(
            "threshold %.3g W unreachable for %d V_pi values within G in [%.3g, %.3g]",
            target_p_th,
            len(unreachable),
            g_min,
            g_max,
        )
    return ContourResult(target=target_p_th, points=points, unreachable=unreachable)


def contour_threshold(G: float, V_pi: float, hw: HardwareParams, phi_b: float = math.pi) -> float:
    """Threshold power of an activation built from (G, V_π) and the hardware constants."""
    cfg = EOActivationConfig.from_physical(alpha=hw.alpha, G=G, R=hw.responsivity, V_pi=V_pi, V_b=phi_b * V_pi / math.pi)
    return activation_threshold(cfg)[0]


def gamma_kerr(hw: HardwareParams) -> float:
    """Kerr nonlinear parameter (2π/λ₀)·n₂/A in (W·m)⁻¹."""
    return 2.0 * math.pi / hw.lambda0 * hw.n2 / hw.mode_area


def gamma_eo(hw: HardwareParams) -> float:
    """Electro-optic nonlinear parameter π·α·R·G/(V_π·L) in (W·m)⁻¹."""
    return math.pi * hw.alpha * hw.responsivity * hw.G / hw.V_pi_L


def kerr_equivalent_gain(hw: HardwareParams, gamma_target: Optional[float] = None) -> float:
    """Gain G at which Γ_EO matches `gamma_target` (Γ_Kerr by default)."""
    target = gamma_kerr(hw) if gamma_target is None else gamma_target
    return target * hw.V_pi_L / (math.pi * hw.alpha * hw.responsivity)


def threshold_from_gamma(gamma: float, length: float, delta_phi: float) -> float:
    """Threshold power Δφ*/(Γ·L) of a nonlinearity acting over `length`."""
    if gamma <= 0 or length <= 0:
        raise ValueError("gamma and length must be positive")
    return delta_phi / (gamma * length)


def db_ohm(G: float) -> float:
    """Gain in dBΩ, using 10·log₁₀(G / 1 Ω)."""
    return 10.0 * math.log10(G)


def from_db_ohm(db: float) -> float:
    """Inverse of db_ohm."""
    return 10.0 ** (db / 10.0)


def gamma_eo_curve(hw: HardwareParams, gains: np.ndarray) -> np.ndarray:
    """Γ_EO over a sweep of gains, other constants fixed."""
    return math.pi * hw.alpha * hw.responsivity * np.asarray(gains) / hw.V_pi_L
