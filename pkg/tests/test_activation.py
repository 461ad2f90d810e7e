import math

import numpy as np
import pytest
from pydantic import ValidationError

from models import EOActivationConfig
from onn.activation import (
    activation_curve,
    activation_threshold,
    activation_wirtinger,
    bias_phase,
    eo_activation,
    general_activation,
    phase_gain,
    power_transmission,
    threshold_phase,
)

ALPHA = 0.1


def test_phase_gain_formula():
    assert phase_gain(0.1, 5e5, 1.0, 10.0) == pytest.approx(math.pi * 5e3)


@pytest.mark.parametrize(
    "alpha,G,R,V_pi",
    [(0.0, 1.0, 1.0, 1.0), (1.0, 1.0, 1.0, 1.0), (0.1, -1.0, 1.0, 1.0), (0.1, 1.0, 0.0, 1.0), (0.1, 1.0, 1.0, 0.0)],
)
def test_phase_gain_rejects_out_of_range(alpha, G, R, V_pi):
    with pytest.raises(ValueError):
        phase_gain(alpha, G, R, V_pi)


def test_bias_phase():
    assert bias_phase(5.0, 10.0) == pytest.approx(math.pi / 2)


def test_zero_input_gives_zero_output(activation):
    assert eo_activation(activation, 0.0) == 0


def test_linear_regimes():
    z = np.array([0.3 + 0.4j, -1.0, 2j])
    open_state = EOActivationConfig(alpha=ALPHA, g_phi=0.0, phi_b=0.0)
    np.testing.assert_allclose(eo_activation(open_state, z), 1j * math.sqrt(1 - ALPHA) * z, atol=1e-15)
    closed_state = EOActivationConfig(alpha=ALPHA, g_phi=0.0, phi_b=math.pi)
    np.testing.assert_allclose(eo_activation(closed_state, z), 0.0, atol=1e-15)


def test_output_power_follows_transmission(activation, rng):
    z = rng.normal(size=20) + 1j * rng.normal(size=20)
    out = eo_activation(activation, z)
    np.testing.assert_allclose(np.abs(out) ** 2, power_transmission(activation, np.abs(z) ** 2) * np.abs(z) ** 2)


def test_transmission_bounds_and_null_value(activation):
    p = np.linspace(0.0, 10.0, 501)
    t = power_transmission(activation, p)
    assert np.all(t >= 0.0) and np.all(t <= 1.0 - ALPHA + 1e-15)
    assert t[0] == pytest.approx((1 - ALPHA) * math.cos(activation.phi_b / 2) ** 2)
    with pytest.raises(ValueError):
        power_transmission(activation, -1.0)


def test_threshold_at_full_bias():
    expected = 2 * math.asin(math.sqrt(0.5 / (1 - ALPHA)))
    assert threshold_phase(ALPHA, math.pi) == pytest.approx(expected, abs=1e-10)
    assert threshold_phase(ALPHA, math.pi) == pytest.approx(1.682, abs=1e-3)


def test_threshold_at_partial_bias():
    t0 = (1 - ALPHA) * math.cos(0.425 * math.pi) ** 2
    angle = math.pi - math.acos(math.sqrt((t0 + 0.5) / (1 - ALPHA)))
    expected = 2 * angle - 0.85 * math.pi
    assert threshold_phase(ALPHA, 0.85 * math.pi) == pytest.approx(expected, abs=1e-10)
    assert math.sqrt(expected / math.pi) == pytest.approx(0.849, abs=1e-3)


def test_threshold_at_zero_bias():
    assert math.sqrt(threshold_phase(ALPHA, 0.0) / math.pi) == pytest.approx(0.73, abs=5e-3)


def test_threshold_falls_back_to_largest_change():
    # Transmission starts at 0.45 and can move by at most 0.45 either way
    assert threshold_phase(ALPHA, 0.5 * math.pi) == pytest.approx(0.5 * math.pi, abs=1e-12)


def test_activation_threshold_power_and_normalized_amplitude():
    cfg = EOActivationConfig.from_physical(alpha=ALPHA, G=5e5, R=1.0, V_pi=10.0, V_b=10.0)
    p_th, z_norm = activation_threshold(cfg)
    assert cfg.phi_b == pytest.approx(math.pi)
    assert p_th == pytest.approx(1.07e-4, rel=5e-3)
    assert z_norm == pytest.approx(0.7318, abs=1e-4)


def test_activation_threshold_needs_positive_gain():
    with pytest.raises(ValueError):
        activation_threshold(EOActivationConfig(alpha=ALPHA, g_phi=0.0))


def test_physical_parameters_must_agree():
    cfg = EOActivationConfig.from_physical(alpha=ALPHA, G=1e3, R=0.8, V_pi=5.0, V_b=1.0)
    with pytest.raises(ValidationError):
        EOActivationConfig(alpha=ALPHA, g_phi=cfg.g_phi * 1.01, phi_b=cfg.phi_b, physical=cfg.physical)
    with pytest.raises(ValidationError):
        EOActivationConfig(alpha=1.0, g_phi=1.0)


def test_general_activation_with_identity_conditioner(rng):
    cfg = EOActivationConfig.from_physical(alpha=ALPHA, G=2e4, R=1.0, V_pi=4.0, V_b=3.0)
    z = 0.01 * (rng.normal(size=8) + 1j * rng.normal(size=8))
    np.testing.assert_allclose(general_activation(cfg, z), eo_activation(cfg, z), atol=1e-15)
    np.testing.assert_allclose(general_activation(cfg, z, lambda v: 0.0 * v), eo_activation(cfg.model_copy(update={"g_phi": 0.0}), z), atol=1e-15)


def test_general_activation_needs_physical_parameters(activation):
    with pytest.raises(ValueError):
        general_activation(activation, 1.0)


@pytest.mark.parametrize("z", [0.3 + 0.2j, -1.1 + 0.5j, 0.7j, 1.4])
def test_wirtinger_derivatives_match_finite_differences(activation, z):
    df_dz, df_dzbar, df_dg, df_dpb = activation_wirtinger(activation, z)
    h = 1e-7
    d_re = (eo_activation(activation, z + h) - eo_activation(activation, z - h)) / (2 * h)
    d_im = (eo_activation(activation, z + 1j * h) - eo_activation(activation, z - 1j * h)) / (2 * h)
    assert complex(df_dz + df_dzbar) == pytest.approx(complex(d_re), abs=1e-7)
    assert complex(1j * (df_dz - df_dzbar)) == pytest.approx(complex(d_im), abs=1e-7)

    up = activation.model_copy(update={"g_phi": activation.g_phi + h})
    down = activation.model_copy(update={"g_phi": activation.g_phi - h})
    assert complex(df_dg) == pytest.approx(complex((eo_activation(up, z) - eo_activation(down, z)) / (2 * h)), abs=1e-7)

    up = activation.model_copy(update={"phi_b": activation.phi_b + h})
    down = activation.model_copy(update={"phi_b": activation.phi_b - h})
    assert complex(df_dpb) == pytest.approx(complex((eo_activation(up, z) - eo_activation(down, z)) / (2 * h)), abs=1e-7)


def test_activation_curve_axes():
    cfg = EOActivationConfig(alpha=ALPHA, g_phi=math.pi, phi_b=math.pi)
    rows = activation_curve(cfg, n_points=11, z_max=2.0)
    assert len(rows) == 11
    assert rows[0] == (0.0, 0.0, pytest.approx(0.0, abs=1e-15))
    assert rows[-1][0] == pytest.approx(2.0)
    # Full transmission when the nonlinear phase reaches π
    z_norm, out_norm, transmission = rows[5]
    assert z_norm == pytest.approx(1.0)
    assert transmission == pytest.approx(1 - ALPHA)
    assert out_norm == pytest.approx(math.sqrt(1 - ALPHA))


def test_response_is_phase_covariant_and_passive(activation, rng):
    z = rng.normal(size=50) + 1j * rng.normal(size=50)
    for psi in (0.3, 2.0, -1.1):
        np.testing.assert_allclose(eo_activation(activation, np.exp(1j * psi) * z), np.exp(1j * psi) * eo_activation(activation, z), atol=1e-12)
    assert np.all(np.abs(eo_activation(activation, z)) ** 2 <= (1 - activation.alpha) * np.abs(z) ** 2 + 1e-12)


def test_transmission_is_periodic_in_nonlinear_phase(activation):
    p = np.linspace(0.0, 3.0, 31)
    shifted = p + 2 * math.pi / activation.g_phi
    np.testing.assert_allclose(power_transmission(activation, shifted), power_transmission(activation, p), atol=1e-12)


def test_zero_gain_is_fixed_scaling():
    phi_b = 0.6
    cfg = EOActivationConfig(alpha=ALPHA, g_phi=0.0, phi_b=phi_b)
    z = np.array([0.5 - 0.2j, 3.0])
    scale = 1j * math.sqrt(1 - ALPHA) * np.exp(-0.5j * phi_b) * math.cos(phi_b / 2)
    np.testing.assert_allclose(eo_activation(cfg, z), scale * z, atol=1e-15)
