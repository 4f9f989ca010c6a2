"""Critical-point search, Hessians and the Takagi factorization."""

import numpy as np
import pytest

from thimble.critical import (
    SearchConfig,
    check_morse,
    factor_hessian,
    find_critical_points,
    hessian,
    morse_height,
    takagi,
)
from thimble.problem import Problem


def test_advection_diffusion_exact_point(advection_diffusion):
    # mu = 1, c = 1: stationarity gives k1 = -i c / 2, k0 = i (mu - c^2 / 4)
    pts = find_critical_points(advection_diffusion, (0.0,))
    expected = np.array([0.75j, -0.5j])
    err = min(np.max(np.abs(cp.k - expected)) for cp in pts)
    assert err < 1e-10


def test_points_sorted_by_descending_height(demo2d_tachyonic):
    pts = find_critical_points(demo2d_tachyonic, (0.5, 0.5))
    heights = [cp.height for cp in pts]
    assert heights == sorted(heights, reverse=True)
    assert abs(heights[0] - np.sqrt(0.5)) < 1e-10
    assert abs(heights[-1] + np.sqrt(0.5)) < 1e-10


def test_residuals_small(demo2d_tachyonic):
    for cp in find_critical_points(demo2d_tachyonic, (1.0, 1.0)):
        assert cp.residual < 1e-10 * demo2d_tachyonic.coeff_scale


def test_search_is_deterministic(demo2d_tachyonic):
    a = find_critical_points(demo2d_tachyonic, (0.5, 0.5), SearchConfig(seed=7))
    b = find_critical_points(demo2d_tachyonic, (0.5, 0.5), SearchConfig(seed=7))
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert np.array_equal(x.k, y.k)


def test_morse_height_convention():
    h, p = morse_height([1.0 + 2.0j, 0.5 - 0.5j], (2.0,))
    kv = (1.0 + 2.0j) - 2.0 * (0.5 - 0.5j)
    assert abs(h - kv.imag) < 1e-14
    assert abs(p - kv.real) < 1e-14


def test_takagi_reconstructs_symmetric_matrix():
    rng = np.random.default_rng(3)
    for n in (2, 3, 5):
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        A = A + A.T
        U, s = takagi(A)
        assert np.allclose(U @ np.diag(s) @ U.T, A, atol=1e-10)
        assert np.allclose(U.conj().T @ U, np.eye(n), atol=1e-10)
        assert np.all(s >= 0)


def test_takagi_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        takagi(np.array([[0.0, 1.0], [2.0, 0.0]], dtype=complex))


def test_factor_hessian_identity(demo2d_tachyonic):
    for v in [(1.0, 1.0), (0.5, 0.5)]:
        for cp in find_critical_points(demo2d_tachyonic, v):
            assert not cp.degenerate
            JJt = cp.jfactor @ cp.jfactor.T
            assert np.linalg.norm(JJt + np.linalg.inv(cp.hessian)) < 1e-10
            assert abs(abs(cp.detj) - abs(np.linalg.det(cp.hessian)) ** -0.5) < 1e-10


def test_factor_hessian_flags_degenerate():
    J, detj, degenerate = factor_hessian(np.zeros((2, 2), dtype=complex))
    assert degenerate and J is None and detj is None


def test_hessian_matches_finite_differences(demo2d_tachyonic):
    v = np.array([0.5, 0.5])
    cp = find_critical_points(demo2d_tachyonic, v)[0]
    H = hessian(demo2d_tachyonic, v, cp.k)
    d = demo2d_tachyonic.d
    eps = 1e-3
    delta = demo2d_tachyonic.delta

    def shifted(i, j, a, b):
        k = cp.k.astype(complex).copy()
        k[i + 1] += a
        k[0] += v[i] * a
        k[j + 1] += b
        k[0] += v[j] * b
        return k

    d0 = demo2d_tachyonic.gradient_polys()[0].eval(cp.k)
    for i in range(d):
        for j in range(d):
            fd = (
                delta.eval(shifted(i, j, eps, eps))
                - delta.eval(shifted(i, j, eps, -eps))
                - delta.eval(shifted(i, j, -eps, eps))
                + delta.eval(shifted(i, j, -eps, -eps))
            ) / (4.0 * eps * eps)
            assert abs(H[i, j] - 1j * fd / d0) < 1e-6


def test_check_morse_suggests_jitter(demo2d_tachyonic):
    pts = find_critical_points(demo2d_tachyonic, (0.5, 0.5))
    assert check_morse(pts, (0.5, 0.5)) is None
    import dataclasses
    degenerate = dataclasses.replace(pts[0], degenerate=True, jfactor=None, detj=None)
    advisory = check_morse([degenerate, pts[1]], (0.5, 0.5))
    assert advisory is not None
    assert advisory.degenerate_ids == [0]
    dv = advisory.suggested_velocity - np.array([0.5, 0.5])
    assert 0 < np.linalg.norm(dv) < 1e-5


def test_real_spatial_flag(demo2d_tachyonic):
    # outside the instability disk the saddles sit at real k
    for cp in find_critical_points(demo2d_tachyonic, (0.5, 0.0)):
        assert cp.is_real_spatial
    # inside, the upper saddle has complex spatial components
    inside = find_critical_points(demo2d_tachyonic, (0.5, 0.5))
    assert not inside[0].is_real_spatial
