"""Direct-quadrature Green function oracle."""

import numpy as np
import pytest

from thimble.oracle import (
    DomainTooSmallError,
    GridSpec,
    green_quadrature,
    residue_sum,
    roots_k0,
)
from thimble.problem import Problem


@pytest.fixture(scope="module")
def heat1():
    return Problem.from_dict({"d": 1, "label": "heat", "delta": "-i*k0 + k1^2"})


def test_roots_k0_advection_diffusion(advection_diffusion):
    # -i k0 + i k1 + k1^2 - 1 = 0  =>  k0 = k1 - i (k1^2 - 1)
    for k1 in (0.0, 0.7, -1.3):
        roots = roots_k0(advection_diffusion, [k1])
        assert len(roots) == 1
        assert abs(roots[0] - (k1 - 1j * (k1 ** 2 - 1.0))) < 1e-12


def test_residue_sum_single_sheet(advection_diffusion):
    # d0 Delta = -i, so the residue weight is e^{-i k.v t} / (-i)
    t, k1, v = 3.0, 0.4, 0.25
    k0 = k1 - 1j * (k1 ** 2 - 1.0)
    expected = np.exp(-1j * (k0 - k1 * v) * t) / (-1j)
    got = residue_sum(advection_diffusion, [k1], (v,), t)
    assert abs(got[0, 0] - expected) < 1e-12


def test_heat_kernel_quadrature_matches_closed_form(heat1):
    # G(t, 0) = 1 / sqrt(4 pi t)
    for t in (2.0, 10.0):
        est = green_quadrature(heat1, (0.0,), t)
        assert abs(est.value[0, 0] - 1.0 / np.sqrt(4 * np.pi * t)) < 1e-8
        assert est.quadrature_error < 1e-8


def test_quadrature_error_estimate_reported(advection_diffusion):
    est = green_quadrature(advection_diffusion, (0.0,), 5.0)
    closed = np.exp(0.75 * 5.0) / np.sqrt(4 * np.pi * 5.0)
    assert abs(abs(est.value[0, 0]) - closed) / closed < 1e-2
    assert est.quadrature_error >= 0.0


def test_domain_too_small_raises():
    # Im k0 = k1^2 grows without bound: any finite box is too small
    p = Problem.from_dict({"d": 1, "label": "blowup", "delta": "-i*k0 - k1^2"})
    with pytest.raises(DomainTooSmallError) as exc:
        green_quadrature(p, (0.0,), 4.0, grid=GridSpec(L=4.0, M=128))
    assert exc.value.suggested_L > 4.0


def test_rejects_nonpositive_time(heat1):
    with pytest.raises(ValueError):
        green_quadrature(heat1, (0.0,), 0.0)
    with pytest.raises(ValueError):
        residue_sum(heat1, [0.1], (0.0,), -1.0)
