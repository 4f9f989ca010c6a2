"""Ground-truth retarded Green function by direct quadrature.

For t > 0 the temporal integral is done exactly by residues (all k0-roots of
Delta are enclosed when the Laplace contour closes in the lower half-plane),
leaving a real d-dimensional wavevector integral:

    G(t, x + v t) = 1 / ((2 pi)^d i) * integral over real k_vec of
        sum_roots e^{-i k.v t} e^{i k_vec.x} adj D(k) / d_0 Delta(k)

which is evaluated by tapered trapezoidal quadrature on [-L, L]^d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import Problem, as_velocity, lowered

__all__ = [
    "GridSpec",
    "GreenEstimate",
    "DomainTooSmallError",
    "roots_k0",
    "residue_sum",
    "green_quadrature",
    "default_grid",
]

SIMPLE_POLE_TOL = 1e-10


class DomainTooSmallError(RuntimeError):
    def __init__(self, message: str, suggested_L: float):
        super().__init__(message)
        self.suggested_L = suggested_L


@dataclass(frozen=True)
class GridSpec:
    L: float
    M: int
    taper: float = 0.1  # cosine-taper width as a fraction of the half-extent

    def to_dict(self) -> dict:
        return {"L": float(self.L), "M": int(self.M), "taper": float(self.taper)}


@dataclass(frozen=True)
class GreenEstimate:
    t: float
    v: np.ndarray
    x: np.ndarray
    value: np.ndarray             # complex N x N
    quadrature_error: float
    grid: GridSpec

    def to_dict(self) -> dict:
        return {
            "t": float(self.t),
            "v": [float(c) for c in self.v],
            "x": [float(c) for c in self.x],
            "value_re": self.value.real.tolist(),
            "value_im": self.value.imag.tolist(),
            "abs_value": float(np.max(np.abs(self.value))),
            "quadrature_error": float(self.quadrature_error),
            "grid": self.grid.to_dict(),
        }


def default_grid(d: int) -> GridSpec:
    return GridSpec(L=12.0, M={1: 512, 2: 256, 3: 96}.get(d, 64))


def _k0_coeff_values(problem: Problem, kvecs: np.ndarray) -> np.ndarray:
    """(deg+1, n_nodes) coefficient table of Delta as a polynomial in k0."""
    coeff_polys = problem.delta.coeffs_in_k0()
    return np.stack([c.eval(kvecs.astype(complex)) for c in coeff_polys])


def _batched_roots(coeffs: np.ndarray, scale: float) -> np.ndarray:
    """Roots per node via batched companion matrices; NaN-pads short rows."""
    degp1, n = coeffs.shape
    deg = degp1 - 1
    lead = coeffs[0]
    bad = np.abs(lead) < 1e-12 * scale
    if np.any(bad):
        raise RuntimeError(
            "leading k0-coefficient underflow on the grid (degree reduction); "
            "not supported for the in-scope dispersion relations"
        )
    monic = coeffs[1:] / lead
    comp = np.zeros((n, deg, deg), dtype=complex)
    if deg > 1:
        comp[:, 1:, :-1] = np.eye(deg - 1)
    comp[:, 0, :] = -np.swapaxes(monic, 0, 1)
    roots = np.linalg.eigvals(comp)
    return roots


def _polish_roots(coeffs: np.ndarray, roots: np.ndarray, iters: int = 3) -> np.ndarray:
    """Vectorized Newton polish of the k0 roots."""
    degp1 = coeffs.shape[0]
    for _ in range(iters):
        p = np.zeros_like(roots)
        dp = np.zeros_like(roots)
        for j in range(degp1):
            dp = dp * roots + p
            p = p * roots + coeffs[j][:, None]
        safe = np.abs(dp) > 0
        roots = roots - np.where(safe, p / np.where(safe, dp, 1), 0.0)
    return roots


def roots_k0(problem: Problem, kvec) -> np.ndarray:
    """All complex k0 roots of Delta(., k_vec) for a single real k_vec."""
    kvec = np.atleast_1d(np.asarray(kvec, dtype=float))
    coeffs = _k0_coeff_values(problem, kvec[None, :])
    nz = np.flatnonzero(np.abs(coeffs[:, 0]) > 1e-12 * problem.coeff_scale)
    if len(nz) == 0:
        raise ValueError("Delta vanishes identically at this k_vec")
    trimmed = coeffs[nz[0]:]
    if trimmed.shape[0] < 2:
        return np.array([], dtype=complex)
    roots = _batched_roots(trimmed, problem.coeff_scale)
    roots = _polish_roots(trimmed, roots, iters=4)
    return roots[0]


def _grad0_at(problem: Problem, kvecs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """d_0 Delta at each (root, node) pair: shape (n_nodes, deg)."""
    d0 = problem.gradient_polys()[0]
    n, deg = roots.shape
    pts = np.empty((n, deg, problem.d + 1), dtype=complex)
    pts[..., 0] = roots
    pts[..., 1:] = kvecs[:, None, :]
    return d0.eval(pts), pts


def residue_sum(problem: Problem, kvec, v, t: float, x=None) -> np.ndarray:
    """Full residue sum over all k0-sheets above a single real k_vec."""
    v = as_velocity(v, problem.d)
    x = np.zeros(problem.d) if x is None else np.asarray(x, dtype=float)
    if t <= 0:
        raise ValueError("residue sum is defined for t > 0 only")
    kvec = np.atleast_1d(np.asarray(kvec, dtype=float))
    out = _residue_sum_batch(problem, kvec[None, :], v, t, x)
    return out[0]


def _residue_sum_batch(problem: Problem, kvecs: np.ndarray, v, t, x,
                       nudge: float = 1e-9) -> np.ndarray:
    """Residue sums for a batch of real wavevectors: (n_nodes, N, N)."""
    scale = problem.coeff_scale
    coeffs = _k0_coeff_values(problem, kvecs)
    roots = _polish_roots(coeffs, _batched_roots(coeffs, scale), iters=3)
    d0vals, pts = _grad0_at(problem, kvecs, roots)
    near_double = np.any(np.abs(d0vals) < SIMPLE_POLE_TOL * scale, axis=1)
    if np.any(near_double):
        # nudge offending nodes off the coalescence set and recompute
        kn = kvecs.copy()
        kn[near_double, 0] += nudge
        coeffs_n = _k0_coeff_values(problem, kn[near_double])
        roots_n = _polish_roots(coeffs_n, _batched_roots(coeffs_n, scale), iters=3)
        d0_n, pts_n = _grad0_at(problem, kn[near_double], roots_n)
        roots[near_double] = roots_n
        d0vals[near_double] = d0_n
        pts[near_double] = pts_n
        kvecs = kn
    vlow = lowered(v)
    kv = pts @ vlow                      # k.v per (node, root)
    phase = np.exp(-1j * kv * t) * np.exp(1j * (kvecs @ x))[:, None]
    weight = phase / d0vals              # (n_nodes, deg)
    if problem.n == 1:
        return weight.sum(axis=1)[:, None, None]
    adj = problem.adjugate()
    n_nodes, deg = roots.shape
    out = np.zeros((n_nodes, problem.n, problem.n), dtype=complex)
    flat = pts.reshape(-1, problem.d + 1)
    for i in range(problem.n):
        for j in range(problem.n):
            vals = adj.entries[i][j].eval(flat).reshape(n_nodes, deg)
            out[:, i, j] = np.sum(weight * vals, axis=1)
    return out


def _taper_1d(nodes: np.ndarray, L: float, width: float) -> np.ndarray:
    w = np.ones_like(nodes)
    edge = (1.0 - width) * L
    ramp = np.abs(nodes) > edge
    u = (np.abs(nodes[ramp]) - edge) / (width * L)
    w[ramp] = np.cos(0.5 * np.pi * np.clip(u, 0.0, 1.0)) ** 2
    return w


def _quad_once(problem: Problem, v, t, x, L, M, taper) -> np.ndarray:
    d = problem.d
    axis = np.linspace(-L, L, M)
    h = axis[1] - axis[0]
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    kvecs = np.stack([g.ravel() for g in grids], axis=-1)
    window = np.ones(len(kvecs))
    for i in range(d):
        window *= _taper_1d(kvecs[:, i], L, taper)
    sums = _residue_sum_batch(problem, kvecs, v, t, x)
    # boundary envelope check: growing sheets at the edge mean L is too small
    envelope = np.log(np.maximum(np.max(np.abs(sums), axis=(1, 2)), 1e-300))
    edge_mask = np.max(np.abs(kvecs), axis=1) > (1.0 - taper) * L
    inner_mask = ~edge_mask
    if np.any(edge_mask) and np.any(inner_mask):
        if np.max(envelope[edge_mask]) > np.max(envelope[inner_mask]) + 1.0:
            raise DomainTooSmallError(
                "integrand grows toward the quadrature boundary", suggested_L=2.0 * L
            )
    weighted = sums * window[:, None, None]
    total = weighted.reshape(len(kvecs), -1)
    # pairwise (tree) reduction for a deterministic, accurate total
    block = total
    while block.shape[0] > 1:
        m = block.shape[0]
        if m % 2:
            block = np.concatenate([block, np.zeros((1, block.shape[1]), dtype=complex)])
            m += 1
        block = block[0::2] + block[1::2]
    integral = block[0].reshape(problem.n, problem.n) * h ** d
    return integral / ((2.0 * np.pi) ** d * 1j)


def green_quadrature(problem: Problem, v, t: float, x=None,
                     grid: GridSpec | None = None) -> GreenEstimate:
    """Trapezoidal quadrature of the residue sum with a Richardson error estimate."""
    v = as_velocity(v, problem.d)
    if t <= 0:
        raise ValueError("the retarded Green function oracle requires t > 0")
    x = np.zeros(problem.d) if x is None else np.asarray(x, dtype=float)
    grid = grid or default_grid(problem.d)
    fine = _quad_once(problem, v, t, x, grid.L, grid.M, grid.taper)
    coarse = _quad_once(problem, v, t, x, grid.L, grid.M // 2, grid.taper)
    err = float(np.max(np.abs(fine - coarse)))
    return GreenEstimate(t=float(t), v=v, x=x, value=fine,
                         quadrature_error=err, grid=grid)
