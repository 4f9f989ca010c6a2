"""Asymptotic retarded Green function, per-frame growth classification,
growth-rate maps and the maximum-growth frame.

The large-t asymptotics in the frame moving at v is

    G(t, x + v t) ~ (2 pi t)^{-d/2} / i * sum_sigma <C, K_sigma>
        * e^{-i k_sigma . v t} e^{i k_sigma_vec . x} det J_sigma
        * adj D(k_sigma) / d_0 Delta(k_sigma),

summed over critical points with nonzero intersection coefficient.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .critical import CriticalPoint, SearchConfig, find_critical_points
from .problem import Problem, as_velocity, kdotv

__all__ = [
    "AsymptoticTerm",
    "MaxGrowthResult",
    "RATE_TOL",
    "asymptotic_terms",
    "green_asymptotic",
    "classify_frame",
    "growth_map",
    "max_growth",
]

RATE_TOL = 1e-8


@dataclass(frozen=True)
class AsymptoticTerm:
    sigma_id: int
    rate: float                   # h(k_sigma, v): exponent of e^{rate * t}
    phase_rate: float             # -Re(k_sigma . v)
    amplitude: np.ndarray         # N x N prefactor at (t, x), excluding e^{-i k.v t}
    coefficient: int


@dataclass(frozen=True)
class MaxGrowthResult:
    k_m: np.ndarray
    v_m: np.ndarray
    rate: float
    attained: bool

    def to_dict(self) -> dict:
        return {
            "k_m_re": [float(x) for x in self.k_m.real],
            "k_m_im": [float(x) for x in self.k_m.imag],
            "v_m": [float(x) for x in self.v_m],
            "rate": float(self.rate),
            "attained": bool(self.attained),
        }


class DegenerateTermError(RuntimeError):
    """A contributing critical point is degenerate; jitter the velocity."""


def asymptotic_terms(problem: Problem, v, points: list[CriticalPoint],
                     coefficients: list[int], t: float, x=None) -> list[AsymptoticTerm]:
    """Per-critical-point contributions at time t and offset x."""
    v = as_velocity(v, problem.d)
    if t <= 0:
        raise ValueError("asymptotics require t > 0")
    x = np.zeros(problem.d) if x is None else np.asarray(x, dtype=float)
    adj = problem.adjugate()
    d0 = problem.gradient_polys()[0]
    nmat = problem.n
    terms = []
    for sid, (cp, coef) in enumerate(zip(points, coefficients)):
        if coef == 0:
            terms.append(AsymptoticTerm(sid, cp.height, -cp.phase,
                                        np.zeros((nmat, nmat), dtype=complex), 0))
            continue
        if cp.degenerate:
            raise DegenerateTermError(
                f"contributing critical point {sid} is degenerate; "
                "rerun with a jittered velocity (check_morse)"
            )
        kv = kdotv(cp.k, v)
        kx = complex(cp.k[1:] @ x)
        if abs(kv * t) < 10.0 * abs(kx) and abs(kx) > 0:
            warnings.warn(
                "asymptotic validity condition |k.v t| >> |k_vec.x| is marginal",
                RuntimeWarning, stacklevel=2,
            )
        amp = (
            (2.0 * np.pi * t) ** (-problem.d / 2.0)
            * (-1j)
            * coef
            * np.exp(1j * kx)
            * cp.detj
            * adj.eval(cp.k)
            / d0.eval(cp.k)
        )
        terms.append(AsymptoticTerm(sid, cp.height, -cp.phase, amp, int(coef)))
    return terms


def green_asymptotic(problem: Problem, v, points, coefficients,
                     t: float, x=None) -> np.ndarray:
    """Asymptotic N x N Green function at (t, x + v t)."""
    v = as_velocity(v, problem.d)
    terms = asymptotic_terms(problem, v, points, coefficients, t, x)
    total = np.zeros((problem.n, problem.n), dtype=complex)
    for cp, term in zip(points, terms):
        if term.coefficient == 0:
            continue
        total += term.amplitude * np.exp(-1j * kdotv(cp.k, v) * t)
    return total


def classify_frame(points: list[CriticalPoint], coefficients: list[int],
                   stabilized: list[bool] | None = None,
                   tol: float = RATE_TOL) -> str:
    """Verdict for the frame: growing | marginal | decaying | zero | inconclusive."""
    if stabilized is not None and any(
        c != 0 and not st for c, st in zip(coefficients, stabilized)
    ):
        return "inconclusive"
    rates = [cp.height for cp, c in zip(points, coefficients) if c != 0]
    if not rates:
        return "zero"
    top = max(rates)
    if top > tol:
        return "growing"
    if top < -tol:
        return "decaying"
    return "marginal"


def growth_map(problem: Problem, v_grid, search: SearchConfig | None = None,
               full: bool = False, analyze_fn=None) -> list[dict]:
    """Height of the highest critical point per grid node.

    ``v_grid`` is an iterable of velocity vectors.  With ``full=True`` the
    supplied ``analyze_fn(problem, v)`` is called to attach intersection-form
    verdicts; otherwise only the height is reported.  Per-node failures are
    recorded and the map continues.
    """
    search = search or SearchConfig(starts=64)
    rows = []
    for v in v_grid:
        v = as_velocity(v, problem.d)
        row: dict = {"v": [float(x) for x in v]}
        try:
            pts = find_critical_points(problem, v, search)
            if not pts:
                row["error"] = "no critical points found in the search box"
            else:
                row["height"] = float(pts[0].height)
                if full and analyze_fn is not None:
                    row["verdict"] = analyze_fn(problem, v)
        except Exception as exc:  # per-node failure, keep mapping
            row["error"] = str(exc)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Maximum growth rate
# ---------------------------------------------------------------------------

def _k0_roots_single(problem: Problem, kvec: np.ndarray) -> np.ndarray:
    coeffs = np.array([c.eval(kvec) for c in problem.delta.coeffs_in_k0()])
    nz = np.flatnonzero(np.abs(coeffs) > 1e-14 * problem.coeff_scale)
    if len(nz) == 0:
        return np.array([], dtype=complex)
    coeffs = coeffs[nz[0]:]
    if len(coeffs) < 2:
        return np.array([], dtype=complex)
    return np.roots(coeffs)


def _psi(problem: Problem, kvec: np.ndarray) -> float:
    roots = _k0_roots_single(problem, np.asarray(kvec, dtype=float) + 0j)
    if len(roots) == 0:
        return -np.inf
    return float(np.max(roots.imag))


def max_growth(problem: Problem, search: SearchConfig | None = None) -> MaxGrowthResult:
    """Maximize psi(k_vec) = max_roots Im k0 over real k_vec.

    Multi-start local ascent followed by a Newton polish of the stationarity
    system {Delta = 0, Im(d_i Delta / d_0 Delta) = 0}.  ``attained`` demands
    an isolated interior maximizer with a negative-definite numerical Hessian.
    """
    search = search or SearchConfig(starts=64)
    d = problem.d
    rng = np.random.default_rng(search.seed)
    starts = rng.uniform(-search.box, search.box, size=(search.starts, d))
    best_val, best_k = -np.inf, None
    for s in starts:
        res = optimize.minimize(lambda kv: -_psi(problem, kv), s,
                                method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12,
                                         "maxiter": 2000})
        if -res.fun > best_val:
            best_val, best_k = -res.fun, res.x
    if best_k is None or not np.isfinite(best_val):
        return MaxGrowthResult(np.full(d + 1, np.nan, dtype=complex),
                               np.full(d, np.nan), 0.0, False)
    roots = _k0_roots_single(problem, best_k + 0j)
    k0 = roots[np.argmax(roots.imag)]
    km = np.concatenate(([k0], best_k.astype(complex)))
    km = _polish_max(problem, km)
    grads = problem.gradient_polys()
    d0 = grads[0].eval(km)
    ratios = np.array([-grads[i + 1].eval(km) / d0 for i in range(d)])
    vm_imag = float(np.max(np.abs(ratios.imag), initial=0.0))
    if vm_imag > 1e-8:
        raise RuntimeError(
            f"maximum-growth frame velocity came out complex (Im = {vm_imag:.2e}); "
            "sign-convention error suspected"
        )
    v_m = ratios.real
    rate = float(km[0].imag)
    attained = _is_isolated_max(problem, km[1:].real, search.box)
    return MaxGrowthResult(k_m=km, v_m=v_m, rate=rate, attained=attained)


def _polish_max(problem: Problem, km: np.ndarray) -> np.ndarray:
    """Newton polish of (Re k0, Im k0, k_vec) on the stationarity system."""
    d = problem.d
    grads = problem.gradient_polys()

    def residual(u):
        k = np.concatenate(([u[0] + 1j * u[1]], u[2:].astype(complex)))
        val = problem.delta.eval(k)
        d0 = grads[0].eval(k)
        out = [val.real, val.imag]
        for i in range(d):
            out.append((grads[i + 1].eval(k) / d0).imag)
        return np.array(out)

    u0 = np.concatenate(([km[0].real, km[0].imag], km[1:].real))
    sol = optimize.root(residual, u0, method="hybr", tol=1e-13)
    u = sol.x if sol.success else u0
    return np.concatenate(([u[0] + 1j * u[1]], u[2:].astype(complex)))


def _is_isolated_max(problem: Problem, kvec: np.ndarray, box: float,
                     step: float = 1e-3) -> bool:
    d = len(kvec)
    if np.max(np.abs(kvec)) > 0.99 * box:
        return False  # supremum pushed to the search boundary: treat as unattained
    f0 = _psi(problem, kvec)
    H = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            ei = np.zeros(d); ei[i] = step
            ej = np.zeros(d); ej[j] = step
            if i == j:
                H[i, i] = (_psi(problem, kvec + ei) - 2 * f0 + _psi(problem, kvec - ei)) / step ** 2
            else:
                H[i, j] = (
                    _psi(problem, kvec + ei + ej) - _psi(problem, kvec + ei - ej)
                    - _psi(problem, kvec - ei + ej) + _psi(problem, kvec - ei - ej)
                ) / (4 * step ** 2)
    if not np.all(np.isfinite(H)):
        return False
    evals = np.linalg.eigvalsh(0.5 * (H + H.T))
    return bool(np.max(evals) < -1e-6)
