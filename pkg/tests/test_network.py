import logging
import math

import numpy as np
import pytest

from conftest import random_field
from onn.mesh import DimensionMismatchError
from onn.network import (
    PROBABILITY_FLOOR,
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


def test_init_model_is_seeded_per_layer(activation):
    model = init_model(4, 3, activation, keep_outputs=2, seed=5)
    again = init_model(4, 3, activation, keep_outputs=2, seed=5)
    assert model.model_dump() == again.model_dump()
    first, second = model.layers[0].mesh.model_dump(), model.layers[1].mesh.model_dump()
    assert first != second


def test_model_rejects_oversized_drop_mask(activation):
    with pytest.raises(ValueError):
        init_model(4, 1, activation, keep_outputs=5, seed=0)


def test_linear_network_preserves_power(rng):
    model = init_model(6, 3, None, keep_outputs=6, seed=1)
    x = random_field(rng, 4, 6)
    out = forward(model, x).outputs
    np.testing.assert_allclose(np.sum(np.abs(out) ** 2, axis=-1), np.sum(np.abs(x) ** 2, axis=-1), rtol=1e-12)


def test_activations_only_remove_power(rng, activation):
    model = init_model(5, 2, activation, keep_outputs=5, seed=2)
    x = random_field(rng, 10, 5)
    trace = forward(model, x)
    assert len(trace.pre_activations) == len(trace.post_activations) == 2
    power_in = np.sum(np.abs(x) ** 2, axis=-1)
    power_out = np.sum(np.abs(trace.outputs) ** 2, axis=-1)
    assert np.all(power_out <= (1 - activation.alpha) ** 2 * power_in + 1e-12)


def test_forward_rejects_wrong_dimension(activation):
    model = init_model(4, 1, activation, keep_outputs=1, seed=0)
    with pytest.raises(DimensionMismatchError):
        forward(model, np.ones(5))


def test_output_intensities_keep_bound(rng):
    model = init_model(3, 1, None, keep_outputs=3, seed=0)
    trace = forward(model, random_field(rng, 3))
    assert output_intensities(trace, 2).shape == (2,)
    with pytest.raises(ValueError):
        output_intensities(trace, 4)


def test_probs_normalize_and_reject_dark_rows():
    probs = softmaxless_probs([[1.0, 3.0], [2.0, 2.0]])
    np.testing.assert_allclose(probs, [[0.25, 0.75], [0.5, 0.5]])
    with pytest.raises(DegenerateIntensityError):
        softmaxless_probs([[1.0, 1.0], [0.0, 0.0]])


def test_cross_entropy_values():
    uniform = np.full((3, 10), 0.1)
    assert cross_entropy_loss(uniform, [0, 4, 9]) == pytest.approx(math.log(10))
    one_hot = np.eye(10)[[0, 4, 9]]
    assert cross_entropy_loss(uniform, one_hot) == pytest.approx(math.log(10))
    assert cross_entropy_loss([[1.0, 0.0]], [1]) == pytest.approx(-math.log(PROBABILITY_FLOOR))


def test_mse_loss_shape_check():
    assert mse_loss([1.0, 2.0], [1.0, 0.0]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        mse_loss([1.0, 2.0], [1.0])


def _identity_trace(x):
    return ForwardTrace(inputs=x, pre_activations=[x], post_activations=[x])


def _check_cotangent(loss_fn, x, delta, h=1e-6):
    for index in np.ndindex(x.shape):
        for step, part in ((h, "real"), (1j * h, "imag")):
            plus, minus = x.copy(), x.copy()
            plus[index] += step
            minus[index] -= step
            fd = (loss_fn(plus) - loss_fn(minus)) / (2 * h)
            assert getattr(delta[index], part) == pytest.approx(fd, abs=1e-6)


def test_mse_cotangent_matches_finite_differences(rng):
    x = random_field(rng, 4, 3)
    targets = rng.uniform(size=(4, 2))
    loss, delta = mse_cotangent(_identity_trace(x), 2, targets)
    assert loss == pytest.approx(mse_loss(np.abs(x[:, :2]) ** 2, targets))
    _check_cotangent(lambda v: mse_cotangent(_identity_trace(v), 2, targets)[0], x, delta)


def test_cross_entropy_cotangent_matches_finite_differences(rng):
    x = random_field(rng, 5, 4)
    labels = np.array([0, 2, 1, 2, 0])
    loss, delta = cross_entropy_cotangent(_identity_trace(x), 3, labels)
    assert loss > 0
    assert np.all(delta[:, 3] == 0)
    _check_cotangent(lambda v: cross_entropy_cotangent(_identity_trace(v), 3, labels)[0], x, delta)


def test_cross_entropy_cotangent_for_nonzero_labels():
    x = np.array([[1.0, 1.0, 0.0], [2.0, 0.0, 1.0]], dtype=complex)
    loss, delta = cross_entropy_cotangent(_identity_trace(x), 2, [1, 0])
    # Second row puts all kept power on its label
    assert loss == pytest.approx(0.5 * math.log(2))
    assert delta.shape == x.shape
    np.testing.assert_allclose(delta, [[0.5, -0.5, 0.0], [0.0, 0.0, 0.0]], atol=1e-12)


def test_predict_returns_argmax(rng):
    model = init_model(4, 1, None, keep_outputs=3, seed=9)
    x = random_field(rng, 7, 4)
    expected = np.argmax(np.abs(forward(model, x).outputs[:, :3]) ** 2, axis=-1)
    np.testing.assert_array_equal(predict(model, x), expected)


def test_model_json_round_trip(tmp_path, rng, activation):
    model = init_model(4, 2, activation, keep_outputs=2, seed=3)
    path = tmp_path / "model.json"
    save_model(model, path)
    restored = load_model(path)
    x = random_field(rng, 3, 4)
    np.testing.assert_array_equal(forward(restored, x).outputs, forward(model, x).outputs)


def test_linear_network_is_linear(rng):
    model = init_model(5, 2, None, keep_outputs=5, seed=8)
    x, y = random_field(rng, 5), random_field(rng, 5)
    a, b = 0.7 - 1.2j, -0.4 + 0.3j
    combined = forward(model, a * x + b * y).outputs
    np.testing.assert_allclose(combined, a * forward(model, x).outputs + b * forward(model, y).outputs, atol=1e-10)


def test_readout_ignores_global_input_phase(rng, activation):
    model = init_model(4, 2, activation, keep_outputs=2, seed=4)
    x = random_field(rng, 4)
    reference = output_intensities(forward(model, x), 2)
    for psi in (0.5, 3.0):
        np.testing.assert_allclose(output_intensities(forward(model, np.exp(1j * psi) * x), 2), reference, atol=1e-12)


def test_field_norm_decreases_through_activated_layers(rng, activation):
    model = init_model(6, 3, activation, keep_outputs=1, seed=5)
    trace = forward(model, random_field(rng, 6))
    norms = [np.linalg.norm(trace.inputs)] + [np.linalg.norm(x) for x in trace.post_activations]
    assert all(later <= earlier for earlier, later in zip(norms, norms[1:]))


def test_model_files_are_logged(tmp_path, activation, caplog):
    caplog.set_level(logging.INFO, logger="onn.network")
    model = init_model(3, 2, activation, keep_outputs=1, seed=0)
    save_model(model, tmp_path / "model.json")
    load_model(tmp_path / "model.json")
    assert "saved 2-layer model (N=3)" in caplog.text
    assert "loaded 2-layer model (N=3)" in caplog.text
