"""Critical points of the Morse height on the dispersion locus.

Solves the constrained stationarity system

    Delta(k) = 0,
    d_i Delta(k) + v^i d_0 Delta(k) = 0   (i = 1..d)

by multi-start damped Newton iteration, then attaches the constrained
Hessian, its symmetric (Takagi) factor J with J J^T = -H^{-1}, and det J.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import Problem, as_velocity, height_phase

__all__ = [
    "SearchConfig",
    "CriticalPoint",
    "MorseAdvisory",
    "morse_height",
    "find_critical_points",
    "hessian",
    "factor_hessian",
    "takagi",
    "check_morse",
]

DEGENERACY_THRESHOLD = 1e-12
DEDUP_TOL = 1e-8
REAL_SPATIAL_TOL = 1e-9


@dataclass(frozen=True)
class SearchConfig:
    starts: int = 256
    box: float = 3.0
    newton_tol: float = 1e-12
    max_iter: int = 80
    seed: int = 0


@dataclass(frozen=True)
class CriticalPoint:
    k: np.ndarray                 # complex (d+1)-vector
    height: float                 # Im(k.v)
    phase: float                  # Re(k.v)
    residual: float               # max |system equations| at k
    hessian: np.ndarray           # d x d complex symmetric
    jfactor: np.ndarray | None    # J with J J^T = -H^{-1}; None when degenerate
    detj: complex | None
    degenerate: bool
    is_real_spatial: bool

    def to_dict(self, sigma_id: int) -> dict:
        return {
            "sigma_id": sigma_id,
            "k_re": [float(x) for x in self.k.real],
            "k_im": [float(x) for x in self.k.imag],
            "height": float(self.height),
            "phase": float(self.phase),
            "residual": float(self.residual),
            "hessian_re": self.hessian.real.tolist(),
            "hessian_im": self.hessian.imag.tolist(),
            "detj_re": None if self.detj is None else float(self.detj.real),
            "detj_im": None if self.detj is None else float(self.detj.imag),
            "degenerate": bool(self.degenerate),
            "is_real_spatial": bool(self.is_real_spatial),
        }


@dataclass(frozen=True)
class MorseAdvisory:
    degenerate_ids: list
    suggested_velocity: np.ndarray


def morse_height(k, v) -> tuple[float, float]:
    """Height h = Im(k.v) and phase Re(k.v) of a single point."""
    h, p = height_phase(np.asarray(k, dtype=complex), v)
    return float(h), float(p)


def _system_polys(problem: Problem, v: np.ndarray):
    grads = problem.gradient_polys()
    eqs = [problem.delta]
    for i in range(problem.d):
        eqs.append(grads[i + 1] + grads[0] * float(v[i]))
    return eqs


def _newton_batch(eqs, jac, k, tol, max_iter, box):
    """Damped Newton on a batch of starts; diverged entries become NaN."""
    m, n = k.shape
    alive = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        F = np.stack([p.eval(k) for p in eqs], axis=-1)
        res = np.max(np.abs(F), axis=-1)
        if not np.any(alive):
            break
        J = np.empty((m, n, n), dtype=complex)
        for a in range(n):
            for b in range(n):
                J[:, a, b] = jac[a][b].eval(k)
        dets = np.linalg.det(J)
        solvable = alive & (np.abs(dets) > 1e-300) & np.isfinite(res)
        alive &= solvable
        if not np.any(alive):
            break
        dk = np.full_like(k, np.nan)
        dk[alive] = np.linalg.solve(J[alive], -F[alive][..., None])[..., 0]
        # backtracking: accept the first step that reduces the residual
        step = np.where(alive[:, None], dk, 0.0)
        accepted = ~alive
        knew = k.copy()
        scale = 1.0
        for _ in range(4):
            trial = k + scale * step
            Ft = np.stack([p.eval(trial) for p in eqs], axis=-1)
            rt = np.max(np.abs(Ft), axis=-1)
            good = (~accepted) & (rt <= res)
            knew[good] = trial[good]
            accepted |= good
            scale *= 0.5
        # points that never improved take the full step anyway
        knew[~accepted] = (k + step)[~accepted]
        k = knew
        alive &= np.max(np.abs(k), axis=-1) < 50.0 * box
        moved = np.max(np.abs(step), axis=-1)
        alive &= ~((moved < 1e-15) & (res < tol))
    F = np.stack([p.eval(k) for p in eqs], axis=-1)
    res = np.max(np.abs(F), axis=-1)
    return k, res


def find_critical_points(
    problem: Problem, v, search: SearchConfig | None = None
) -> list[CriticalPoint]:
    """All isolated roots found in the search box, sorted by descending height."""
    search = search or SearchConfig()
    v = as_velocity(v, problem.d)
    n = problem.d + 1
    eqs = _system_polys(problem, v)
    jac = [[p.partial(b) for b in range(n)] for p in eqs]
    rng = np.random.default_rng(search.seed)
    starts = rng.uniform(-search.box, search.box, size=(search.starts, 2 * n))
    k0 = starts[:, :n] + 1j * starts[:, n:]
    scale = problem.coeff_scale
    k, res = _newton_batch(eqs, jac, k0, search.newton_tol * scale,
                           search.max_iter, search.box)
    ok = np.isfinite(res) & (res < 1e-10 * scale)
    ok &= np.all(np.isfinite(k.real) & np.isfinite(k.imag), axis=-1)
    roots = k[ok]
    # deterministic dedup: sort candidates, keep first representative per cluster
    order = np.lexsort(tuple(
        col for comp in reversed(range(n)) for col in (roots[:, comp].imag, roots[:, comp].real)
    )) if len(roots) else np.array([], dtype=int)
    kept: list[np.ndarray] = []
    for idx in order:
        r = roots[idx]
        if all(np.max(np.abs(r - p)) > DEDUP_TOL for p in kept):
            kept.append(r)
    points = [_finalize(problem, v, r) for r in kept]
    points.sort(key=_sort_key(v))
    return points


def _sort_key(v):
    def key(cp: CriticalPoint):
        lex = tuple(x for c in cp.k for x in (c.real, c.imag))
        return (-cp.height, lex)
    return key


def _finalize(problem: Problem, v, k: np.ndarray) -> CriticalPoint:
    eqs = _system_polys(problem, v)
    residual = max(abs(p.eval(k)) for p in eqs)
    h, phase = morse_height(k, v)
    H = hessian(problem, v, k)
    J, detj, degenerate = factor_hessian(H)
    is_real = bool(np.max(np.abs(k[1:].imag), initial=0.0) < REAL_SPATIAL_TOL)
    return CriticalPoint(
        k=k.copy(), height=h, phase=phase, residual=float(residual),
        hessian=H, jfactor=J, detj=detj, degenerate=degenerate,
        is_real_spatial=is_real,
    )


class SingularSliceError(RuntimeError):
    """d_0 Delta vanishes at the point: the residue reduction breaks down."""


def hessian(problem: Problem, v, k) -> np.ndarray:
    """Constrained Hessian H_ij = i * (D_i D_j Delta) / (d_0 Delta) at k,
    where D_i = d_i + v^i d_0."""
    v = as_velocity(v, problem.d)
    k = np.asarray(k, dtype=complex)
    d = problem.d
    d0 = problem.gradient_polys()[0].eval(k)
    if abs(d0) < 1e-14 * problem.coeff_scale:
        raise SingularSliceError(
            "d0 Delta vanishes at the critical point; residue form is singular"
        )
    H = np.empty((d, d), dtype=complex)
    for i in range(d):
        for j in range(i, d):
            val = (
                problem.second_partial(i + 1, j + 1).eval(k)
                + v[i] * problem.second_partial(0, j + 1).eval(k)
                + v[j] * problem.second_partial(0, i + 1).eval(k)
                + v[i] * v[j] * problem.second_partial(0, 0).eval(k)
            )
            H[i, j] = H[j, i] = 1j * val / d0
    return H


def takagi(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Takagi factorization of a complex symmetric matrix: A = U diag(s) U^T
    with U unitary and s >= 0.

    Uses the real symmetric embedding B = [[R, S], [S, -R]] for A = R + iS:
    eigenvectors (x; y) of B with eigenvalue s give Takagi vectors u = x + iy.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if not np.allclose(A, A.T, atol=1e-12 * (1 + np.abs(A).max())):
        raise ValueError("takagi requires a symmetric matrix")
    R, S = A.real, A.imag
    B = np.block([[R, S], [S, -R]])
    vals, vecs = np.linalg.eigh(B)
    # take the n largest eigenvalues (the spectrum is symmetric +/- s)
    idx = np.argsort(vals)[::-1][:n]
    s = vals[idx]
    U = vecs[:n, idx] + 1j * vecs[n:, idx]
    # deterministic sign: first significant component of each column real-positive-ish
    for j in range(n):
        col = U[:, j]
        lead = col[np.argmax(np.abs(col))]
        if lead.real < 0 or (lead.real == 0 and lead.imag < 0):
            U[:, j] = -col
    return U, np.maximum(s, 0.0)


def factor_hessian(H: np.ndarray, threshold: float = DEGENERACY_THRESHOLD):
    """Factor J with J J^T = -H^{-1}; flags degeneracy instead of raising."""
    H = np.asarray(H, dtype=complex)
    detH = np.linalg.det(H)
    if abs(detH) <= threshold:
        return None, None, True
    A = -np.linalg.inv(H)
    U, s = takagi(A)
    J = U @ np.diag(np.sqrt(s))
    return J, complex(np.linalg.det(J)), False


def check_morse(points: list[CriticalPoint], v, seed: int = 0) -> MorseAdvisory | None:
    """If any point is degenerate, suggest a jittered velocity for a rerun."""
    v = np.asarray(v, dtype=float)
    bad = [i for i, p in enumerate(points) if p.degenerate]
    if not bad:
        return None
    rng = np.random.default_rng(seed)
    dv = rng.standard_normal(v.shape)
    dv *= 1e-6 * (1.0 + float(np.linalg.norm(v))) / np.linalg.norm(dv)
    return MorseAdvisory(degenerate_ids=bad, suggested_velocity=v + dv)
