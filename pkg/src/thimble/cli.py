"""Command-line front end.

Subcommands cover the whole pipeline (parse-check, critical, flow,
intersect, classify, asymptotic, growth-map, max-growth, oracle,
oracle-compare) plus the one-shot `analyze`.  All JSON artifacts carry
"schema_version": 1 and are byte-identical for identical configurations
(including the random seed for Newton starts).

Exit codes: 0 success, 2 inconclusive verdicts, 1 errors.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import oracle as oracle_mod
from .asymptotics import green_asymptotic, growth_map, max_growth
from .critical import SearchConfig, find_critical_points
from .flow import build_dual_thimble
from .intersection import section
from .pipeline import AnalysisConfig, analyze_frame
from .problem import Problem

SCHEMA_VERSION = 1


class CliError(click.ClickException):
    exit_code = 1


def _load_problem(path: str) -> Problem:
    try:
        return Problem.load(path)
    except Exception as exc:
        raise CliError(f"failed to load problem {path!r}: {exc}")


def _parse_velocity(text: str, d: int) -> np.ndarray:
    try:
        v = np.array([float(p) for p in text.split(",")], dtype=float)
    except ValueError:
        raise CliError(f"invalid velocity {text!r}")
    if v.shape != (d,):
        raise CliError(f"velocity must have {d} components, got {len(v)}")
    return v


def _emit(obj: dict, output: str | None):
    obj = {"schema_version": SCHEMA_VERSION, **obj}
    text = json.dumps(obj, sort_keys=True, indent=2)
    if _has_nonfinite(obj):
        raise CliError("internal error: non-finite value in JSON artifact")
    if output:
        Path(output).write_text(text + "\n")
    else:
        click.echo(text)


def _has_nonfinite(obj) -> bool:
    if isinstance(obj, dict):
        return any(_has_nonfinite(v) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return any(_has_nonfinite(v) for v in obj)
    if isinstance(obj, float):
        return not np.isfinite(obj)
    return False


def _search_options(f):
    f = click.option("--starts", default=256, show_default=True,
                     help="Newton multi-start count")(f)
    f = click.option("--box", default=3.0, show_default=True,
                     help="half-extent of the complex search box")(f)
    f = click.option("--newton-tol", default=1e-12, show_default=True)(f)
    f = click.option("--newton-maxiter", default=80, show_default=True)(f)
    f = click.option("--seed", default=0, show_default=True,
                     help="random seed for Newton starts")(f)
    return f


def _flow_options(f):
    f = click.option("--seeds", "n_seeds", default=None, type=int,
                     help="flow lines per bundle (default: 2/64/icosphere by d)")(f)
    f = click.option("--seed-scale", default=None, type=float,
                     help="initial perturbation scale (default 1e-2*(1+|k|))")(f)
    f = click.option("--smax", default=40.0, show_default=True,
                     help="flow arc-parameter extent")(f)
    f = click.option("--rk-tol", default=1e-9, show_default=True)(f)
    return f


def _mk_search(starts, box, newton_tol, newton_maxiter, seed) -> SearchConfig:
    return SearchConfig(starts=starts, box=box, newton_tol=newton_tol,
                        max_iter=newton_maxiter, seed=seed)


@click.group()
def main():
    """Spatio-temporal instability analysis on dual Lefschetz thimbles."""


@main.command("parse-check")
@click.argument("problem_path")
@click.option("--dump-poly", is_flag=True, help="echo the expanded polynomial")
def parse_check(problem_path, dump_poly):
    """Validate a problem file and optionally echo the parsed polynomial."""
    problem = _load_problem(problem_path)
    out = {
        "label": problem.label,
        "d": problem.d,
        "n": problem.n,
        "k0_degree": problem.delta.degree_in(0),
        "n_terms": len(problem.delta.terms),
    }
    if dump_poly:
        out["delta"] = problem.delta.to_string()
    _emit(out, None)


@main.command()
@click.argument("problem_path")
@click.option("--v", "velocity", required=True, help="comma-separated frame velocity")
@_search_options
@click.option("-o", "--output", default=None)
def critical(problem_path, velocity, starts, box, newton_tol, newton_maxiter, seed, output):
    """Critical points of the Morse height for one frame."""
    problem = _load_problem(problem_path)
    v = _parse_velocity(velocity, problem.d)
    pts = find_critical_points(problem, v, _mk_search(starts, box, newton_tol, newton_maxiter, seed))
    out = {"label": problem.label, "v": v.tolist(),
           "critical_points": [p.to_dict(i) for i, p in enumerate(pts)],
           "empty_search": len(pts) == 0}
    _emit(out, output)
    if not pts:
        sys.exit(2)


def _flow_csv_rows(bundle, sigma_id):
    d = bundle.d
    for seed_id, line in enumerate(bundle.lines):
        for i, s in enumerate(line.s_values):
            k = line.samples[i]
            row = [sigma_id, seed_id, f"{s:.12g}"]
            for mu in range(d + 1):
                row += [f"{k[mu].real:.17g}", f"{k[mu].imag:.17g}"]
            row += [f"{line.heights[i]:.17g}", f"{line.drift_max:.3e}"]
            yield row


def _flow_header(d):
    cols = ["sigma_id", "seed_id", "s"]
    for mu in range(d + 1):
        cols += [f"re_k{mu}", f"im_k{mu}"]
    cols += ["h", "drift"]
    return cols


@main.command()
@click.argument("problem_path")
@click.option("--v", "velocity", required=True)
@_search_options
@_flow_options
@click.option("-o", "--output", default="flows.csv", show_default=True)
def flow(problem_path, velocity, starts, box, newton_tol, newton_maxiter, seed,
         n_seeds, seed_scale, smax, rk_tol, output):
    """Integrate dual-thimble flow bundles and dump them as CSV."""
    problem = _load_problem(problem_path)
    v = _parse_velocity(velocity, problem.d)
    pts = find_critical_points(problem, v, _mk_search(starts, box, newton_tol, newton_maxiter, seed))
    with open(output, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(_flow_header(problem.d))
        for sid, cp in enumerate(pts):
            if cp.degenerate:
                continue
            bundle = build_dual_thimble(problem, v, cp, n_seeds=n_seeds,
                                        seed_scale=seed_scale, s_max=smax, rtol=rk_tol)
            for row in _flow_csv_rows(bundle, sid):
                w.writerow(row)
    click.echo(f"wrote {output}")


@main.command()
@click.argument("problem_path")
@click.option("--v", "velocity", required=True)
@_search_options
@_flow_options
@click.option("--sections-dir", default=None,
              help="also dump per-checkpoint section CSVs into this directory")
@click.option("-o", "--output", default=None)
def intersect(problem_path, velocity, starts, box, newton_tol, newton_maxiter, seed,
              n_seeds, seed_scale, smax, rk_tol, sections_dir, output):
    """Intersection forms <C, K_sigma> for one frame."""
    problem = _load_problem(problem_path)
    v = _parse_velocity(velocity, problem.d)
    cfg = AnalysisConfig(search=_mk_search(starts, box, newton_tol, newton_maxiter, seed),
                         n_seeds=n_seeds, seed_scale=seed_scale, s_max=smax, rk_tol=rk_tol)
    analysis = analyze_frame(problem, v, cfg)
    out = {"label": problem.label, "v": v.tolist(),
           "intersections": [None if r is None else r.to_dict(i)
                             for i, r in enumerate(analysis.intersections)]}
    _emit(out, output)
    if sections_dir:
        _dump_sections(analysis, Path(sections_dir))
    if any(r is not None and not r.stabilized for r in analysis.intersections):
        sys.exit(2)


def _dump_sections(analysis, outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    for sid, bundle in enumerate(analysis.bundles):
        if bundle is None:
            continue
        d = bundle.d
        path = outdir / f"sections_sigma{sid}.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["s", "seed_id"] + [f"im_k{i + 1}" for i in range(d)])
            for s in bundle.s_grid:
                sec = section(bundle, s)
                for seed_id, p in enumerate(sec.points):
                    w.writerow([f"{s:.12g}", seed_id] + [f"{x:.17g}" for x in p])
        if bundle.triangles is not None:
            tpath = outdir / f"triangles_sigma{sid}.csv"
            with open(tpath, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["v0", "v1", "v2"])
                for tri in bundle.triangles:
                    w.writerow([int(t) for t in tri])


@main.command()
@click.argument("problem_path")
@click.option("--v", "velocity", required=True)
@_search_options
@_flow_options
@click.option("-o", "--output", default=None)
def classify(problem_path, velocity, starts, box, newton_tol, newton_maxiter, seed,
             n_seeds, seed_scale, smax, rk_tol, output):
    """Growth verdict (growing/marginal/decaying/zero) for one frame."""
    problem = _load_problem(problem_path)
    v = _parse_velocity(velocity, problem.d)
    cfg = AnalysisConfig(search=_mk_search(starts, box, newton_tol, newton_maxiter, seed),
                         n_seeds=n_seeds, seed_scale=seed_scale, s_max=smax, rk_tol=rk_tol)
    analysis = analyze_frame(problem, v, cfg)
    rates = [cp.height for cp, c in zip(analysis.points, analysis.coefficients) if c != 0]
    out = {"label": problem.label, "v": v.tolist(), "verdict": analysis.verdict,
           "rate": max(rates) if rates else None,
           "coefficients": analysis.coefficients}
    _emit(out, output)
    if analysis.verdict == "inconclusive":
        sys.exit(2)


@main.command()
@click.argument("problem_path")
@click.option("--v", "velocity", required=True)
@click.option("--t", "time_", required=True, type=float)
@click.option("--x", "offset", default=None, help="spatial offset, comma-separated")
@_search_options
@_flow_options
@click.option("-o", "--output", default=None)
def asymptotic(problem_path, velocity, time_, offset, starts, box, newton_tol,
               newton_maxiter, seed, n_seeds, seed_scale, smax, rk_tol, output):
    """Asymptotic Green function at (t, x + v t)."""
    problem = _load_problem(problem_path)
    v = _parse_velocity(velocity, problem.d)
    x = None if offset is None else _parse_velocity(offset, problem.d)
    cfg = AnalysisConfig(search=_mk_search(starts, box, newton_tol, newton_maxiter, seed),
                         n_seeds=n_seeds, seed_scale=seed_scale, s_max=smax, rk_tol=rk_tol)
    analysis = analyze_frame(problem, v, cfg)
    G = green_asymptotic(problem, v, analysis.points, analysis.coefficients, time_, x)
    out = {"label": problem.label, "v": v.tolist(), "t": time_,
           "x": (x.tolist() if x is not None else [0.0] * problem.d),
           "verdict": analysis.verdict,
           "green_re": G.real.tolist(), "green_im": G.imag.tolist(),
           "abs_green": float(np.max(np.abs(G)))}
    _emit(out, output)
    if analysis.verdict == "inconclusive":
        sys.exit(2)


@main.command("growth-map")
@click.argument("problem_path")
@click.option("--grid", "grid_spec", nargs=3, type=float, required=True,
              metavar="VMIN VMAX N", help="per-axis grid over the velocity plane")
@click.option("--full", is_flag=True, help="attach full verdicts (slow)")
@_search_options
@click.option("-o", "--output", default="growthmap.csv", show_default=True)
def growth_map_cmd(problem_path, grid_spec, full, starts, box, newton_tol,
                   newton_maxiter, seed, output):
    """Morse height of the highest critical point over a velocity grid."""
    problem = _load_problem(problem_path)
    vmin, vmax, n = grid_spec
    n = int(n)
    axis = np.linspace(vmin, vmax, n)
    mesh = np.meshgrid(*([axis] * problem.d), indexing="ij")
    vgrid = np.stack([m.ravel() for m in mesh], axis=-1)
    search = _mk_search(min(starts, 64), box, newton_tol, newton_maxiter, seed)
    analyze_fn = None
    if full:
        def analyze_fn(pb, v):
            return analyze_frame(pb, v).verdict
    rows = growth_map(problem, vgrid, search, full=full, analyze_fn=analyze_fn)
    with open(output, "w", newline="") as f:
        w = csv.writer(f)
        header = [f"v{i + 1}" for i in range(problem.d)] + ["h", "verdict"]
        w.writerow(header)
        for row in rows:
            h = row.get("height")
            w.writerow([f"{x:.12g}" for x in row["v"]]
                       + ["" if h is None else f"{h:.17g}",
                          row.get("verdict", row.get("error", ""))])
    click.echo(f"wrote {output}")


@main.command("max-growth")
@click.argument("problem_path")
@_search_options
@click.option("-o", "--output", default=None)
def max_growth_cmd(problem_path, starts, box, newton_tol, newton_maxiter, seed, output):
    """Maximum growth rate over all frames and the frame attaining it."""
    problem = _load_problem(problem_path)
    result = max_growth(problem, _mk_search(starts, box, newton_tol, newton_maxiter, seed))
    _emit({"label": problem.label, **result.to_dict()}, output)


@main.command("oracle")
@click.argument("problem_path")
@click.option("--v", "velocity", required=True)
@click.option("--t", "time_", required=True, type=float)
@click.option("--x", "offset", default=None)
@click.option("--L", "extent", default=None, type=float, help="quadrature half-extent")
@click.option("--M", "nodes", default=None, type=int, help="nodes per axis")
@click.option("-o", "--output", default=None)
def oracle_cmd(problem_path, velocity, time_, offset, extent, nodes, output):
    """Direct-quadrature retarded Green function (ground truth)."""
    problem = _load_problem(problem_path)
    v = _parse_velocity(velocity, problem.d)
    x = None if offset is None else _parse_velocity(offset, problem.d)
    grid = oracle_mod.default_grid(problem.d)
    if extent is not None or nodes is not None:
        grid = oracle_mod.GridSpec(L=extent or grid.L, M=nodes or grid.M)
    try:
        est = oracle_mod.green_quadrature(problem, v, time_, x, grid)
    except oracle_mod.DomainTooSmallError as exc:
        raise CliError(f"{exc} (suggested L: {exc.suggested_L})")
    _emit({"label": problem.label, **est.to_dict()}, output)


@main.command("oracle-compare")
@click.argument("problem_path")
@click.option("--v", "velocity", required=True)
@click.option("--t", "time_", required=True, type=float)
@click.option("--x", "offset", default=None)
@click.option("--L", "extent", default=None, type=float)
@click.option("--M", "nodes", default=None, type=int)
@_search_options
@_flow_options
@click.option("-o", "--output", default=None)
def oracle_compare(problem_path, velocity, time_, offset, extent, nodes, starts, box,
                   newton_tol, newton_maxiter, seed, n_seeds, seed_scale, smax,
                   rk_tol, output):
    """Mutual validation: |G_asym| / |G_oracle| for one frame and time."""
    problem = _load_problem(problem_path)
    v = _parse_velocity(velocity, problem.d)
    x = None if offset is None else _parse_velocity(offset, problem.d)
    cfg = AnalysisConfig(search=_mk_search(starts, box, newton_tol, newton_maxiter, seed),
                         n_seeds=n_seeds, seed_scale=seed_scale, s_max=smax, rk_tol=rk_tol)
    analysis = analyze_frame(problem, v, cfg)
    G = green_asymptotic(problem, v, analysis.points, analysis.coefficients, time_, x)
    grid = oracle_mod.default_grid(problem.d)
    if extent is not None or nodes is not None:
        grid = oracle_mod.GridSpec(L=extent or grid.L, M=nodes or grid.M)
    est = oracle_mod.green_quadrature(problem, v, time_, x, grid)
    a = float(np.max(np.abs(G)))
    o = float(np.max(np.abs(est.value)))
    out = {"label": problem.label, "v": v.tolist(), "t": time_,
           "abs_asymptotic": a, "abs_oracle": o,
           "ratio": (a / o) if o > 0 else None,
           "quadrature_error": est.quadrature_error,
           "verdict": analysis.verdict}
    _emit(out, output)
    if analysis.verdict == "inconclusive":
        sys.exit(2)


@main.command()
@click.argument("problem_path")
@click.option("--v", "velocity", required=True)
@click.option("--t", "time_", default=30.0, show_default=True)
@click.option("--x", "offset", default=None)
@_search_options
@_flow_options
@click.option("--with-oracle", is_flag=True, help="cross-check against quadrature")
@click.option("--outdir", default="results", show_default=True)
def analyze(problem_path, velocity, time_, offset, starts, box, newton_tol,
            newton_maxiter, seed, n_seeds, seed_scale, smax, rk_tol,
            with_oracle, outdir):
    """One-shot pipeline: critical -> flow -> intersect -> classify -> asymptotic."""
    problem = _load_problem(problem_path)
    v = _parse_velocity(velocity, problem.d)
    x = None if offset is None else _parse_velocity(offset, problem.d)
    cfg = AnalysisConfig(search=_mk_search(starts, box, newton_tol, newton_maxiter, seed),
                         n_seeds=n_seeds, seed_scale=seed_scale, s_max=smax, rk_tol=rk_tol)
    analysis = analyze_frame(problem, v, cfg)
    G = green_asymptotic(problem, v, analysis.points, analysis.coefficients, time_, x)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    flows_dir = out / "flows"
    flows_dir.mkdir(exist_ok=True)
    for sid, bundle in enumerate(analysis.bundles):
        if bundle is None:
            continue
        with open(flows_dir / f"sigma{sid}.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(_flow_header(problem.d))
            for row in _flow_csv_rows(bundle, sid):
                w.writerow(row)
    _dump_sections(analysis, out / "sections")
    result = {
        "label": problem.label,
        "t": time_,
        "x": (x.tolist() if x is not None else [0.0] * problem.d),
        "green_re": G.real.tolist(),
        "green_im": G.imag.tolist(),
        "abs_green": float(np.max(np.abs(G))),
        **analysis.to_dict(),
    }
    if with_oracle:
        est = oracle_mod.green_quadrature(problem, v, time_, x)
        result["oracle"] = est.to_dict()
    _emit(result, str(out / "results.json"))
    click.echo(f"wrote {out / 'results.json'} (verdict: {analysis.verdict})")
    if analysis.verdict == "inconclusive":
        sys.exit(2)


if __name__ == "__main__":
    main()
