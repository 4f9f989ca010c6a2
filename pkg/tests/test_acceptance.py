"""Acceptance suite: end-to-end checks at their stated tolerances.

Each test evaluates one acceptance criterion, reports a PASS/FAIL line in the
terminal summary (see conftest) and then asserts.
"""

import time

import numpy as np
import pytest

from thimble.asymptotics import RATE_TOL, green_asymptotic, growth_map, max_growth
from thimble.critical import find_critical_points, hessian
from thimble.oracle import green_quadrature
from thimble.pipeline import AnalysisConfig, analyze_frame, asymptotic_of
from thimble.problem import Problem


VELS_2D = [(1.0, 1.0), (0.5, 0.5), (0.5, 0.0), (0.0, 0.0)]
VELS_3D = [(1.0, 1.0, 1.0), (0.5, 0.5, 0.5), (0.5, 0.25, 0.0), (0.0, 0.0, 0.0)]
UPPER_2D = {VELS_2D[0]: 1, VELS_2D[1]: 1, VELS_2D[2]: 0, VELS_2D[3]: 0}
UPPER_3D = {VELS_3D[0]: 1, VELS_3D[1]: 1, VELS_3D[2]: 0, VELS_3D[3]: 0}


def _frame_table(problem, vels, cfg=None):
    return {v: analyze_frame(problem, v, cfg) for v in vels}


def test_criterion_1_2d_intersection_pattern(demo2d_tachyonic, shared_results,
                                              record_criterion):
    t0 = time.perf_counter()
    table = _frame_table(demo2d_tachyonic, VELS_2D)
    elapsed = time.perf_counter() - t0
    shared_results["tachyonic-default"] = table
    failures = []
    for v, analysis in table.items():
        upper, lower = analysis.intersections[0], analysis.intersections[-1]
        if abs(upper.coefficient) != UPPER_2D[v]:
            failures.append(f"|upper| at {v}: {upper.coefficient}")
        if lower.coefficient != 0:
            failures.append(f"lower at {v}: {lower.coefficient}")
        if not (upper.stabilized and lower.stabilized):
            failures.append(f"unstabilized at {v}")
    if elapsed >= 60.0:
        failures.append(f"runtime {elapsed:.0f}s")
    record_criterion(1, not failures,
                     f"2-D pattern (1,1,0,0)/(0,0,0,0) in {elapsed:.0f}s"
                     + ("" if not failures else f"; {failures}"))
    assert not failures


def test_criterion_2_3d_intersection_pattern(demo3d_tachyonic, record_criterion):
    t0 = time.perf_counter()
    table = _frame_table(demo3d_tachyonic, VELS_3D)
    elapsed = time.perf_counter() - t0
    failures = []
    for v, analysis in table.items():
        upper = analysis.intersections[0]
        if abs(upper.coefficient) != UPPER_3D[v]:
            failures.append(f"|upper| at {v}: {upper.coefficient}")
        if not upper.stabilized:
            failures.append(f"unstabilized at {v}")
    if elapsed >= 300.0:
        failures.append(f"runtime {elapsed:.0f}s")
    record_criterion(2, not failures,
                     f"3-D pattern (1,1,0,0) in {elapsed:.0f}s"
                     + ("" if not failures else f"; {failures}"))
    assert not failures


def test_criterion_3_growth_map_circle(demo2d_tachyonic, record_criterion):
    axis = np.linspace(-0.5, 2.5, 41)
    cell = 3.0 / 40.0
    rows = growth_map(demo2d_tachyonic, [(a, b) for a in axis for b in axis])
    mismatches = 0
    for row in rows:
        v = np.asarray(row["v"])
        radius = float(np.linalg.norm(v - 1.0))
        if abs(radius - 1.0) <= 1.5 * cell:
            continue  # within one grid cell of the boundary
        positive = row.get("height", -np.inf) > RATE_TOL
        if positive != (radius < 1.0):
            mismatches += 1
    top = find_critical_points(demo2d_tachyonic, (1.0, 1.0))[0]
    h_err = abs(top.height - 1.0)
    passed = mismatches == 0 and h_err < 1e-8
    record_criterion(3, passed,
                     f"unit-circle positivity region, {mismatches} mismatches; "
                     f"h(k+,(1,1)) err {h_err:.1e}")
    assert mismatches == 0
    assert h_err < 1e-8


def test_criterion_4_flow_invariants(demo2d_tachyonic, demo2d_printed,
                                     shared_results, record_criterion):
    problems = {"tachyonic": demo2d_tachyonic, "printed": demo2d_printed}
    tables = {("tachyonic", "default"):
              shared_results.get("tachyonic-default")
              or _frame_table(demo2d_tachyonic, VELS_2D)}
    failures = []
    worst_drift = worst_phase = worst_step = 0.0
    for name, problem in problems.items():
        if (name, "default") not in tables:
            tables[(name, "default")] = _frame_table(problem, VELS_2D)
        for label, cfg in [("2x seeds", AnalysisConfig(n_seeds=128)),
                           ("scale/10", AnalysisConfig(seed_scale=1e-3))]:
            tables[(name, label)] = _frame_table(problem, VELS_2D, cfg)
        coeff_scale = problem.coeff_scale
        for v, analysis in tables[(name, "default")].items():
            for cp, bundle in zip(analysis.points, analysis.bundles):
                if bundle is None:
                    continue
                if len(bundle.lines) < 64:
                    failures.append(f"{name} {v}: {len(bundle.lines)} lines")
                phase_scale = 1.0 + float(np.linalg.norm(cp.k))
                for line in bundle.lines:
                    worst_drift = max(worst_drift, line.drift_max / coeff_scale)
                    worst_phase = max(worst_phase,
                                      line.phase_drift / phase_scale)
                    worst_step = max(worst_step,
                                     float(np.max(-np.diff(line.heights),
                                                  initial=0.0)))
        for label in ("2x seeds", "scale/10"):
            for v in VELS_2D:
                got = tables[(name, label)][v].verdict
                want = tables[(name, "default")][v].verdict
                if got != want:
                    failures.append(f"{name} {v} {label}: {got} != {want}")
    if worst_drift >= 1e-8:
        failures.append(f"drift {worst_drift:.1e}")
    if worst_phase >= 1e-8:
        failures.append(f"phase drift {worst_phase:.1e}")
    if worst_step > 1e-10:
        failures.append(f"height decrease {worst_step:.1e}")
    record_criterion(4, not failures,
                     f"drift {worst_drift:.1e}, phase {worst_phase:.1e}, "
                     f"max height decrease {worst_step:.1e}, verdicts invariant"
                     + ("" if not failures else f"; {failures}"))
    assert not failures


def test_criterion_5_hessian_factorization(demo2d_tachyonic, demo2d_printed,
                                           demo3d_tachyonic, record_criterion):
    cases = [(demo2d_tachyonic, VELS_2D), (demo2d_printed, VELS_2D),
             (demo3d_tachyonic, VELS_3D)]
    worst_takagi = worst_det = worst_fd = 0.0
    eps = 1e-3
    for problem, vels in cases:
        for v in vels:
            varr = np.asarray(v, dtype=float)
            for cp in find_critical_points(problem, v):
                if cp.degenerate:
                    continue
                worst_takagi = max(worst_takagi, float(np.linalg.norm(
                    cp.jfactor @ cp.jfactor.T + np.linalg.inv(cp.hessian))))
                worst_det = max(worst_det, abs(
                    abs(cp.detj) - abs(np.linalg.det(cp.hessian)) ** -0.5))
                d = problem.d
                d0 = problem.gradient_polys()[0].eval(cp.k)
                fd = np.empty((d, d), dtype=complex)
                for i in range(d):
                    for j in range(d):
                        def shifted(a, b):
                            k = cp.k.astype(complex).copy()
                            k[i + 1] += a
                            k[0] += varr[i] * a
                            k[j + 1] += b
                            k[0] += varr[j] * b
                            return problem.delta.eval(k)
                        second = (shifted(eps, eps) - shifted(eps, -eps)
                                  - shifted(-eps, eps) + shifted(-eps, -eps))
                        fd[i, j] = 1j * second / (4.0 * eps * eps * d0)
                worst_fd = max(worst_fd, float(np.max(np.abs(
                    hessian(problem, varr, cp.k) - fd))))
    passed = worst_takagi < 1e-10 and worst_det < 1e-10 and worst_fd < 1e-6
    record_criterion(5, passed,
                     f"||JJ^T+H^-1|| {worst_takagi:.1e}, "
                     f"det identity {worst_det:.1e}, FD {worst_fd:.1e}")
    assert worst_takagi < 1e-10
    assert worst_det < 1e-10
    assert worst_fd < 1e-6


def test_criterion_6_exact_1d_benchmark(advection_diffusion, record_criterion):
    # mu = 1, c = 1: critical point (i(mu - c^2/4), -i c/2) = (0.75i, -0.5i)
    points = find_critical_points(advection_diffusion, (0.0,))
    expected_k = np.array([0.75j, -0.5j])
    k_err = min(float(np.max(np.abs(cp.k - expected_k))) for cp in points)
    analysis = analyze_frame(advection_diffusion, (0.0,))
    low = Problem.from_dict({"d": 1, "label": "advection-diffusion-mu-0.2",
                             "delta": "-i*k0 + i*k1 + k1^2 - 0.2"})
    verdict_low = analyze_frame(low, (0.0,)).verdict
    t = 10.0
    G = green_asymptotic(advection_diffusion, (0.0,), analysis.points,
                         analysis.coefficients, t)
    closed = np.exp(0.75 * t) / np.sqrt(4.0 * np.pi * t)
    rel = abs(abs(G[0, 0]) - closed) / closed
    oracle = green_quadrature(advection_diffusion, (0.0,), t)
    oracle_rel = abs(abs(oracle.value[0, 0]) - closed) / closed
    passed = (k_err < 1e-10 and analysis.verdict == "growing"
              and verdict_low == "decaying" and rel < 1e-10
              and oracle_rel < 1e-2)
    record_criterion(6, passed,
                     f"critical point err {k_err:.1e}, verdicts "
                     f"{analysis.verdict}/{verdict_low}, |G| rel {rel:.1e}, "
                     f"oracle rel {oracle_rel:.1e}")
    assert k_err < 1e-10
    assert analysis.verdict == "growing"
    assert verdict_low == "decaying"
    assert rel < 1e-10
    assert oracle_rel < 1e-2


def test_criterion_7_oracle_mutual_validation(demo2d_tachyonic, shared_results,
                                               record_criterion):
    t0 = time.perf_counter()
    table = shared_results.get("tachyonic-default")
    analysis = (table[VELS_2D[0]] if table
                else analyze_frame(demo2d_tachyonic, (1.0, 1.0)))
    ratios = {}
    for t in (20.0, 30.0, 40.0):
        G = asymptotic_of(demo2d_tachyonic, analysis, t)
        oracle = green_quadrature(demo2d_tachyonic, (1.0, 1.0), t)
        ratios[t] = abs(oracle.value[0, 0]) / abs(G[0, 0])
    rest = green_quadrature(demo2d_tachyonic, (0.0, 0.0), 20.0)
    moving = green_quadrature(demo2d_tachyonic, (1.0, 1.0), 20.0)
    causality = abs(rest.value[0, 0]) / abs(moving.value[0, 0])
    elapsed = time.perf_counter() - t0
    passed = (all(0.9 <= r <= 1.1 for r in ratios.values())
              and causality < 1e-6 and elapsed < 300.0)
    record_criterion(7, passed,
                     "ratios " + ", ".join(f"{t:.0f}s:{r:.4f}"
                                           for t, r in ratios.items())
                     + f"; causality {causality:.1e}; {elapsed:.0f}s")
    for r in ratios.values():
        assert 0.9 <= r <= 1.1
    assert causality < 1e-6
    assert elapsed < 300.0


def test_criterion_8_max_growth(demo2d_tachyonic, demo2d_printed,
                                advection_diffusion, record_criterion):
    res2 = max_growth(demo2d_tachyonic)
    err2 = max(float(np.max(np.abs(res2.k_m - np.array([1j, 0.0, 0.0])))),
               float(np.max(np.abs(res2.v_m - 1.0))), abs(res2.rate - 1.0))
    res1 = max_growth(advection_diffusion)
    err1 = max(float(np.max(np.abs(res1.k_m - np.array([1j, 0.0])))),
               float(np.max(np.abs(res1.v_m - 1.0))), abs(res1.rate - 1.0))
    resp = max_growth(demo2d_printed)
    passed = (err2 < 1e-8 and res2.attained and err1 < 1e-8 and res1.attained
              and not resp.attained)
    record_criterion(8, passed,
                     f"tachyonic err {err2:.1e}, advection-diffusion err "
                     f"{err1:.1e}, printed attained={resp.attained}")
    assert err2 < 1e-8 and res2.attained
    assert err1 < 1e-8 and res1.attained
    assert not resp.attained


def test_criterion_9_marginal_scaling(record_criterion):
    heats = [
        Problem.from_dict({"d": 1, "label": "heat-1d", "delta": "-i*k0 + k1^2"}),
        Problem.from_dict({"d": 2, "label": "heat-2d",
                           "delta": "-i*k0 + k1^2 + k2^2"}),
    ]
    worst = 0.0
    marginal = True
    for problem in heats:
        v = tuple([0.0] * problem.d)
        if analyze_frame(problem, v).verdict != "marginal":
            marginal = False
        target = 2.0 ** (-problem.d / 2.0)
        for t in (20.0, 25.0):
            first = green_quadrature(problem, v, t)
            second = green_quadrature(problem, v, 2.0 * t)
            ratio = abs(second.value[0, 0]) / abs(first.value[0, 0])
            worst = max(worst, abs(ratio - target) / target)
    passed = marginal and worst < 0.02
    record_criterion(9, passed,
                     f"|G(2t)|/|G(t)| within {worst:.2%} of 2^(-d/2), "
                     f"marginal frames d=1,2")
    assert marginal
    assert worst < 0.02
