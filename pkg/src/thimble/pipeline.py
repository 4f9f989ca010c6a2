"""End-to-end per-frame analysis: critical points -> dual thimbles ->
intersection forms -> verdict -> asymptotic Green function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .asymptotics import classify_frame, green_asymptotic
from .critical import SearchConfig, check_morse, find_critical_points
from .flow import build_dual_thimble
from .intersection import intersection_form, phase_tie_cut
from .problem import Problem, as_velocity

__all__ = ["AnalysisConfig", "FrameAnalysis", "analyze_frame"]


@dataclass(frozen=True)
class AnalysisConfig:
    search: SearchConfig = SearchConfig()
    n_seeds: int | None = None
    seed_scale: float | None = None
    s_max: float = 40.0
    rk_tol: float = 1e-9
    n_checkpoints: int = 32
    retry_inconclusive: bool = True


@dataclass(frozen=True)
class FrameAnalysis:
    v: np.ndarray
    points: list
    bundles: list                 # ThimbleBundle or None per point
    intersections: list           # IntersectionResult or None per point
    coefficients: list
    verdict: str
    advisory: object | None

    def to_dict(self) -> dict:
        return {
            "v": [float(x) for x in self.v],
            "critical_points": [p.to_dict(i) for i, p in enumerate(self.points)],
            "intersections": [
                None if r is None else r.to_dict(i)
                for i, r in enumerate(self.intersections)
            ],
            "coefficients": [int(c) for c in self.coefficients],
            "verdict": self.verdict,
            "advisory": None if self.advisory is None else {
                "degenerate_ids": self.advisory.degenerate_ids,
                "suggested_velocity": [float(x) for x in self.advisory.suggested_velocity],
            },
        }


def analyze_frame(problem: Problem, v, cfg: AnalysisConfig | None = None) -> FrameAnalysis:
    """Run the full pipeline for one observer frame.

    Inconclusive intersection forms trigger one automatic retry with twice
    the seeds and 1.5x the flow extent before being reported as such.
    """
    cfg = cfg or AnalysisConfig()
    v = as_velocity(v, problem.d)
    points = find_critical_points(problem, v, cfg.search)
    advisory = check_morse(points, v, seed=cfg.search.seed)
    bundles, results, coefficients, stabilized = [], [], [], []
    for sigma_id, cp in enumerate(points):
        if cp.degenerate:
            bundles.append(None)
            results.append(None)
            coefficients.append(0)
            stabilized.append(False)
            continue
        h_cut = phase_tie_cut(points, sigma_id)
        bundle = build_dual_thimble(
            problem, v, cp, n_seeds=cfg.n_seeds, seed_scale=cfg.seed_scale,
            s_max=cfg.s_max, rtol=cfg.rk_tol, n_checkpoints=cfg.n_checkpoints,
        )
        result = intersection_form(bundle, h_cut=h_cut)
        if not result.stabilized and cfg.retry_inconclusive:
            dirs = len(bundle.lines)
            bundle = build_dual_thimble(
                problem, v, cp, n_seeds=2 * dirs, seed_scale=cfg.seed_scale,
                s_max=1.5 * cfg.s_max, rtol=cfg.rk_tol,
                n_checkpoints=cfg.n_checkpoints,
            )
            result = intersection_form(bundle, h_cut=h_cut)
        bundles.append(bundle)
        results.append(result)
        coefficients.append(result.coefficient)
        stabilized.append(result.stabilized)
    verdict = classify_frame(points, coefficients, stabilized)
    return FrameAnalysis(v=v, points=points, bundles=bundles,
                         intersections=results, coefficients=coefficients,
                         verdict=verdict, advisory=advisory)


def asymptotic_of(problem: Problem, analysis: FrameAnalysis, t: float, x=None) -> np.ndarray:
    return green_asymptotic(problem, analysis.v, analysis.points,
                            analysis.coefficients, t, x)
