"""
Electro-optic nonlinear activation.

A fraction α of the optical power is detected and converted into a voltage that
drives the phase modulator of an MZI carrying the remaining 1-α. With an
identity signal conditioner the response is

    f(z) = i·√(1-α)·exp(-i[g_φ|z|²/2 + φ_b/2])·cos(g_φ|z|²/2 + φ_b/2)·z
"""

import logging
import math
from typing import Callable, List, Tuple

import numpy as np
from scipy.optimize import brentq

from models import EOActivationConfig

logger = logging.getLogger(__name__)

# Absolute transmission change defining the threshold
THRESHOLD_DELTA_T = 0.5

# A conditioner maps the photodetected voltage to the voltage applied to the modulator
Conditioner = Callable[[np.ndarray], np.ndarray]


def identity_conditioner(voltage: np.ndarray) -> np.ndarray:
    """H(V) = V, the only conditioner considered here."""
    return voltage


def phase_gain(alpha: float, G: float, R: float, V_pi: float) -> float:
    """
    Nonlinear phase per unit optical power, π·α·G·R/V_π.

    Args:
        alpha: Power tap ratio, 0 < α < 1
        G: Transimpedance gain in V/A
        R: Photodetector responsivity in A/W
        V_pi: Modulator half-wave voltage in volts

    Returns:
        Phase gain in radians per watt

    Raises:
        ValueError: If any input is non-positive or α ≥ 1
    """
    if min(alpha, G, R, V_pi) <= 0:
        raise ValueError("alpha, G, R and V_pi must all be strictly positive")
    if alpha >= 1:
        raise ValueError(f"alpha must be below 1, got {alpha}")
    return math.pi * alpha * G * R / V_pi


def bias_phase(V_b: float, V_pi: float) -> float:
    """Phase contributed by the static bias voltage, π·V_b/V_π."""
    if V_pi <= 0:
        raise ValueError(f"V_pi must be positive, got {V_pi}")
    return math.pi * V_b / V_pi


def self_phase(cfg: EOActivationConfig, z):
    """Total modulator phase φ_b + g_φ·|z|²."""
    return cfg.phi_b + cfg.g_phi * np.abs(z) ** 2


def _half_phase(cfg: EOActivationConfig, z):
    return 0.5 * self_phase(cfg, z)


def eo_activation(cfg: EOActivationConfig, z):
    """
    Evaluate the activation elementwise.

    Args:
        cfg: Activation configuration
        z: Complex scalar or array of input amplitudes

    Returns:
        f(z), same shape as z
    """
    z = np.asarray(z, dtype=np.complex128)
    psi = _half_phase(cfg, z)
    return 1j * math.sqrt(1.0 - cfg.alpha) * np.exp(-1j * psi) * np.cos(psi) * z


def general_activation(cfg: EOActivationConfig, z, conditioner: Conditioner = identity_conditioner):
    """
    Evaluate the activation from the device quantities through a signal conditioner.

    The detected voltage G·R·α·|z|² passes through the conditioner and adds to
    the bias voltage before driving the modulator.

    Raises:
        ValueError: If the configuration carries no physical parameters
    """
    if cfg.physical is None:
        raise ValueError("general_activation needs the physical parameters of the activation")
    p = cfg.physical
    z = np.asarray(z, dtype=np.complex128)
    voltage = p.G * p.R * cfg.alpha * np.abs(z) ** 2
    psi = 0.5 * (cfg.phi_b + math.pi * conditioner(voltage) / p.V_pi)
    return 1j * math.sqrt(1.0 - cfg.alpha) * np.exp(-1j * psi) * np.cos(psi) * z


def _transmission_of_phase(alpha: float, phi_b: float, delta_phi):
    return (1.0 - alpha) * np.cos(0.5 * (np.asarray(delta_phi) + phi_b)) ** 2


def power_transmission(cfg: EOActivationConfig, p_in):
    """
    Power transmission |f|²/|z|² at input power p_in.

    Raises:
        ValueError: If p_in is negative
    """
    p = np.asarray(p_in, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("input power must be non-negative")
    return _transmission_of_phase(cfg.alpha, cfg.phi_b, cfg.g_phi * p)


def threshold_phase(alpha: float, phi_b: float) -> float:
    """
    Nonlinear phase Δφ* at which the transmission has changed by 0.5 from its null-input value.

    When no phase reaches a change of 0.5, the smallest phase giving the largest
    change is returned instead.
    """
    t0 = float(_transmission_of_phase(alpha, phi_b, 0.0))
    upper = 1.0 - alpha
    max_change = max(t0, upper - t0)

    if max_change < THRESHOLD_DELTA_T:
        # Largest change sits where cos² hits 0 (dropping to 0) or 1 (rising to 1-α)
        candidates = []
        to_zero = (math.pi - phi_b) % (2.0 * math.pi) or 2.0 * math.pi
        to_full = (-phi_b) % (2.0 * math.pi) or 2.0 * math.pi
        candidates.append((t0, to_zero))
        candidates.append((upper - t0, to_full))
        best = max(change for change, _ in candidates)
        delta = min(d for change, d in candidates if change >= best - 1e-12)
        logger.debug("transmission change %.4f never reaches %.1f; using Δφ=%.6f", max_change, THRESHOLD_DELTA_T, delta)
        return delta

    def excess(d: float) -> float:
        return abs(float(_transmission_of_phase(alpha, phi_b, d)) - t0) - THRESHOLD_DELTA_T

    grid = np.linspace(0.0, 2.0 * math.pi, 4097)
    values = np.abs(_transmission_of_phase(alpha, phi_b, grid) - t0) - THRESHOLD_DELTA_T
    hit = int(np.argmax(values >= 0.0))
    if values[hit] == 0.0:
        return float(grid[hit])
    return float(brentq(excess, grid[hit - 1], grid[hit], xtol=1e-14))


def activation_threshold(cfg: EOActivationConfig) -> Tuple[float, float]:
    """
    Input power at which the activation changes its transmission by 0.5.

    Args:
        cfg: Activation configuration with g_φ > 0

    Returns:
        Tuple of (threshold power Δφ*/g_φ, normalized amplitude √(Δφ*/π))

    Raises:
        ValueError: If g_φ is not positive
    """
    if cfg.g_phi <= 0:
        raise ValueError("activation threshold needs a positive phase gain")
    delta = threshold_phase(cfg.alpha, cfg.phi_b)
    return delta / cfg.g_phi, math.sqrt(delta / math.pi)


def activation_wirtinger(cfg: EOActivationConfig, z):
    """
    Exact derivatives of f treating z and z̄ as independent variables.

    With ψ = (g_φ|z|² + φ_b)/2 and f = c·h(ψ)·z, where c = i√(1-α) and
    h(ψ) = e^{-iψ}cos ψ, one has h'(ψ) = -i·e^{-2iψ}.

    Args:
        cfg: Activation configuration
        z: Complex scalar or array

    Returns:
        Tuple of (∂f/∂z, ∂f/∂z̄, ∂f/∂g_φ, ∂f/∂φ_b), each shaped like z
    """
    z = np.asarray(z, dtype=np.complex128)
    c = 1j * math.sqrt(1.0 - cfg.alpha)
    power = np.abs(z) ** 2
    psi = _half_phase(cfg, z)
    h = np.exp(-1j * psi) * np.cos(psi)
    dh = -1j * np.exp(-2j * psi)

    df_dz = c * (h + 0.5 * cfg.g_phi * power * dh)
    df_dzbar = 0.5 * c * cfg.g_phi * dh * z * z
    df_dgphi = 0.5 * c * dh * power * z
    df_dphib = 0.5 * c * dh * z
    return df_dz, df_dzbar, df_dgphi, df_dphib


def activation_curve(cfg: EOActivationConfig, n_points: int = 201, z_max: float = 2.0) -> List[Tuple[float, float, float]]:
    """
    Sample the response on the normalized axes z·√(g_φ/π).

    Args:
        cfg: Activation configuration with g_φ > 0
        n_points: Number of samples
        z_max: Largest normalized input amplitude

    Returns:
        Rows of (normalized input, normalized output amplitude, power transmission)
    """
    if cfg.g_phi <= 0:
        raise ValueError("normalized curves need a positive phase gain")
    scale = math.sqrt(cfg.g_phi / math.pi)
    z_norm = np.linspace(0.0, z_max, n_points)
    z = z_norm / scale
    out = np.abs(eo_activation(cfg, z)) * scale
    transmission = power_transmission(cfg, z**2)
    return [(float(a), float(b), float(t)) for a, b, t in zip(z_norm, out, transmission)]
