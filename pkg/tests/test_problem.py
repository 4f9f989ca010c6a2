"""Problem container and frame conventions."""

import numpy as np
import pytest

from thimble.problem import Problem, as_velocity, height_phase, kdotv, lowered


def test_contraction_convention():
    # k.v = k0 - k_vec . v_vec with the lowered covector (1, -v)
    k = np.array([2.0 + 3.0j, 1.0 - 1.0j, 0.5j])
    v = np.array([0.25, -2.0])
    assert np.allclose(lowered(v), [1.0, -0.25, 2.0])
    expected = k[0] - k[1] * 0.25 - k[2] * (-2.0)
    assert abs(kdotv(k, v) - expected) < 1e-14
    h, p = height_phase(k, v)
    assert abs(h - expected.imag) < 1e-14
    assert abs(p - expected.real) < 1e-14


def test_as_velocity_validation():
    assert np.allclose(as_velocity((0.5, 0.5), 2), [0.5, 0.5])
    with pytest.raises(ValueError):
        as_velocity((0.5,), 2)
    with pytest.raises(ValueError):
        as_velocity((np.nan, 0.0), 2)


def test_from_dict_scalar_dispersion():
    p = Problem.from_dict({"d": 1, "label": "x", "delta": "-i*k0 + k1^2"})
    assert p.d == 1 and p.n == 1 and p.label == "x"
    k = np.array([1.0 + 2.0j, 0.5])
    assert abs(p.delta.eval(k) - (-1j * k[0] + k[1] ** 2)) < 1e-14


def test_delta_is_determinant_of_operator():
    p = Problem.from_dict({
        "d": 1, "label": "matrix",
        "operator": [["k0", "k1"], ["k1", "k0"]],
    })
    assert p.n == 2
    k = np.array([1.3 + 0.1j, -0.4 + 0.7j])
    assert abs(p.delta.eval(k) - (k[0] ** 2 - k[1] ** 2)) < 1e-13


def test_load_packaged_demo(demo2d_tachyonic):
    assert demo2d_tachyonic.d == 2
    assert demo2d_tachyonic.n == 1
    k = np.array([0.1, 0.2, 0.3], dtype=complex)
    expected = 0.2 ** 2 + 0.3 ** 2 - (0.1 - 0.2 - 0.3) ** 2 - 1
    assert abs(demo2d_tachyonic.delta.eval(k) - expected) < 1e-14


def test_gradient_polys_match_partials(demo2d_tachyonic):
    grads = demo2d_tachyonic.gradient_polys()
    k = np.array([0.3 + 0.4j, -0.2 + 0.1j, 0.9 - 0.7j])
    for mu, g in enumerate(grads):
        assert abs(g.eval(k) - demo2d_tachyonic.delta.partial(mu).eval(k)) < 1e-13
