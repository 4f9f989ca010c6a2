"""Deterministic figure rendering from parsed artifacts.

Fixed colormaps, fixed camera angles and no timestamps or jitter, so a given
artifact always renders to the same image.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib import colors  # noqa: E402

from .io import (  # noqa: E402
    SchemaError,
    read_flows,
    read_growthmap,
    read_sections,
    read_triangles,
)

__all__ = ["render_heatmap", "render_bundle3d", "render_sections3d"]

_SECTION_COLORS = ("tab:blue", "tab:green", "tab:red")
_DPI = 110


def _save(fig, output, dpi):
    fig.savefig(output, dpi=dpi, metadata={"Software": "thimbleplots"})
    plt.close(fig)


def render_heatmap(growthmap_path, output, dpi: int = _DPI) -> None:
    """Growth rate h over a 2-D velocity grid, diverging colors around 0."""
    gm = read_growthmap(growthmap_path)
    if gm.d != 2:
        raise SchemaError("heatmap requires a 2-D velocity grid")
    v1 = np.unique(gm.v[:, 0])
    v2 = np.unique(gm.v[:, 1])
    if len(v1) * len(v2) != len(gm.h):
        raise SchemaError("growth map rows do not form a full v1 x v2 grid")
    grid = np.full((len(v2), len(v1)), np.nan)
    i1 = np.searchsorted(v1, gm.v[:, 0])
    i2 = np.searchsorted(v2, gm.v[:, 1])
    grid[i2, i1] = gm.h
    span = float(np.nanmax(np.abs(grid))) or 1.0
    norm = colors.TwoSlopeNorm(vmin=-span, vcenter=0.0, vmax=span)
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    mesh = ax.pcolormesh(v1, v2, grid, cmap="RdBu_r", norm=norm,
                         shading="nearest")
    # positivity boundary; drawn just above zero so that frames whose rate is
    # zero to roundoff do not speckle the contour
    ax.contour(v1, v2, grid, levels=[1e-8], colors="black", linewidths=1.0)
    fig.colorbar(mesh, ax=ax, label="growth rate h")
    ax.set_xlabel("v1")
    ax.set_ylabel("v2")
    ax.set_aspect("equal")
    ax.set_title("frame growth rate")
    _save(fig, output, dpi)


def render_bundle3d(flows_path, output, sigma: int = 0, hmax: float | None = None,
                    elev: float = 25.0, azim: float = -60.0,
                    dpi: int = _DPI) -> None:
    """Flow bundle as 3-D polylines over imaginary wavevector coordinates.

    d=2: (Im k1, Im k2, h); d=1: (s, Im k1, h).  Lines are rainbow-colored by
    seed index and the h-axis line through the Im k = 0 origin is drawn so
    contour crossings are visible.  Samples above the height cap hmax are
    dropped (flow lines grow exponentially at large s and would otherwise
    dwarf the crossing geometry); the default cap keeps the lower portion of
    the bundle's height range.
    """
    bundle = read_flows(flows_path)
    if sigma not in bundle.sigma_ids:
        raise SchemaError(f"sigma_id {sigma} not present in {flows_path}")
    if bundle.d > 2:
        raise SchemaError("bundle3d supports d = 1 and d = 2 artifacts")
    keys = sorted(k for k in bundle.lines if k[0] == sigma)
    all_h = np.concatenate([bundle.lines[k][2] for k in keys])
    if hmax is None:
        hmax = float(np.min(all_h) + 0.15 * np.ptp(all_h))
    cmap = plt.get_cmap("rainbow")
    fig = plt.figure(figsize=(7.0, 6.0))
    ax = fig.add_subplot(projection="3d")
    h_top = 0.0
    for j, key in enumerate(keys):
        s, samples, h = bundle.lines[key]
        keep = h <= hmax
        if not np.any(keep):
            continue
        s, samples, h = s[keep], samples[keep], h[keep]
        color = cmap(j / max(len(keys) - 1, 1))
        if bundle.d == 2:
            ax.plot(samples[:, 1].imag, samples[:, 2].imag, h,
                    color=color, linewidth=0.6)
        else:
            ax.plot(s, samples[:, 1].imag, h, color=color, linewidth=0.8)
        h_top = max(h_top, float(h[-1]))
    if bundle.d == 2:
        ax.plot([0, 0], [0, 0], [0, h_top], color="black", linewidth=1.5)
        ax.set_xlabel("Im k1")
        ax.set_ylabel("Im k2")
    else:
        ax.set_xlabel("s")
        ax.set_ylabel("Im k1")
    ax.set_zlabel("h")
    ax.view_init(elev=elev, azim=azim)
    ax.set_title(f"dual-thimble bundle, sigma {sigma}")
    _save(fig, output, dpi)


def _pick_section_values(stack, n: int = 3) -> np.ndarray:
    # sections grow exponentially with s; choosing by radius rather than by
    # checkpoint index keeps the drawn surfaces visibly nested
    radii = np.asarray([float(np.max(np.linalg.norm(stack.points[s], axis=1)))
                        for s in stack.s_values])
    targets = radii[-1] * np.array([0.15, 0.45, 1.0])
    idx = np.unique([int(np.argmin(np.abs(radii - t))) for t in targets])
    return stack.s_values[idx]


def render_sections3d(sections_path, output, triangles_path=None,
                      elev: float = 20.0, azim: float = 35.0,
                      dpi: int = _DPI) -> None:
    """Nested large-s sections around the origin.

    d=3: translucent triangulated surfaces in (Im k1, Im k2, Im k3);
    d=2: closed section loops stacked along a vertical s axis.
    """
    stack = read_sections(sections_path)
    chosen = _pick_section_values(stack)
    fig = plt.figure(figsize=(7.0, 6.0))
    ax = fig.add_subplot(projection="3d")
    if stack.d == 3:
        triangles = read_triangles(triangles_path) if triangles_path else None
        for color, s in zip(_SECTION_COLORS, chosen):
            pts = stack.points[s]
            if triangles is not None:
                ax.plot_trisurf(pts[:, 0], pts[:, 1], pts[:, 2],
                                triangles=triangles, color=color, alpha=0.35,
                                linewidth=0.1, edgecolor=color)
            else:
                ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], color=color, s=4)
        ax.scatter([0], [0], [0], color="black", s=30, marker="o")
        ax.set_xlabel("Im k1")
        ax.set_ylabel("Im k2")
        ax.set_zlabel("Im k3")
    elif stack.d == 2:
        for color, s in zip(_SECTION_COLORS, chosen):
            pts = stack.points[s]
            loop = np.vstack([pts, pts[:1]])
            ax.plot(loop[:, 0], loop[:, 1], np.full(len(loop), s), color=color)
        ax.plot([0, 0], [0, 0], [float(chosen[0]), float(chosen[-1])],
                color="black", linewidth=1.5)
        ax.set_xlabel("Im k1")
        ax.set_ylabel("Im k2")
        ax.set_zlabel("s")
    else:
        raise SchemaError("sections3d supports d = 2 and d = 3 artifacts")
    ax.view_init(elev=elev, azim=azim)
    ax.set_title("dual-thimble sections")
    _save(fig, output, dpi)
