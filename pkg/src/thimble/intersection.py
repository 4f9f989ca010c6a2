"""Intersection form <C, K_sigma> via enclosure of the origin.

A dual-thimble bundle is projected onto the imaginary spatial coordinates
(Im k^1, ..., Im k^d).  The real contour C projects to the origin, so the
intersection number reduces to the degree of the large-s section around the
origin: a signed point pair (d=1), the winding number of a closed polyline
(d=2) or the degree of a closed triangle mesh via summed signed solid angles
(d=3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import ThimbleBundle

__all__ = [
    "ThimbleSection",
    "IntersectionResult",
    "BoundaryError",
    "section",
    "degree",
    "winding_number",
    "mesh_degree",
    "phase_tie_cut",
    "intersection_form",
]

BOUNDARY_TOL = 1e-9
SOLID_ANGLE_INT_TOL = 1e-6
# a section whose imaginary-spatial extent is below this fraction of the
# bundle's full-space extent is a shadow of a section confined to the real
# wavevector subspace; such a shadow has empty interior and encloses nothing
COLLAPSE_RATIO = 0.05
# probe offsets (as fractions of the section extent) used to resolve the
# degree when the origin lies exactly on the section
PROBE_RADII = (0.02, 0.05, 0.1, 0.2)


class BoundaryError(RuntimeError):
    """The origin lies on the section boundary; the degree is undefined."""


@dataclass(frozen=True)
class ThimbleSection:
    s: float
    points: np.ndarray            # (n_lines, d) real: Im spatial components
    adjacency: str                # "pair" | "loop" | "mesh"
    triangles: np.ndarray | None = None


@dataclass(frozen=True)
class IntersectionResult:
    coefficient: int
    stabilized: bool
    history: list                 # [(s, degree), ...]
    min_distance: float
    cut_s: float | None = None    # flow extent beyond which checkpoints were
                                  # discarded by the phase-tie (Stokes) guard

    def to_dict(self, sigma_id: int) -> dict:
        return {
            "sigma_id": sigma_id,
            "coefficient": int(self.coefficient),
            "stabilized": bool(self.stabilized),
            "min_distance": float(self.min_distance),
            "cut_s": None if self.cut_s is None else float(self.cut_s),
            "history": [[float(s), int(g)] for s, g in self.history],
        }


def section(bundle: ThimbleBundle, s: float) -> ThimbleSection:
    """Extract the (Im k^1 .. Im k^d) section at a checkpoint value of s."""
    idx = np.flatnonzero(np.isclose(bundle.s_grid, s, rtol=0, atol=1e-12))
    if len(idx) == 0:
        raise ValueError(f"s = {s} is not a bundle checkpoint")
    i = int(idx[0])
    pts = np.stack([ln.samples[i, 1:].imag for ln in bundle.lines])
    if any(ln.failed for ln in bundle.lines):
        raise ValueError("section rejected: bundle contains failed lines")
    d = bundle.d
    adjacency = {1: "pair", 2: "loop", 3: "mesh"}.get(d)
    if adjacency is None:
        raise ValueError("sections support d = 1, 2, 3 only")
    return ThimbleSection(s=float(s), points=pts, adjacency=adjacency,
                          triangles=bundle.triangles)


def _min_distance(sec: ThimbleSection) -> float:
    pts = sec.points
    if sec.adjacency == "pair":
        return float(np.min(np.abs(pts[:, 0])))
    if sec.adjacency == "loop":
        a = pts
        b = np.roll(pts, -1, axis=0)
        ab = b - a
        denom = np.sum(ab * ab, axis=1)
        t = np.where(denom > 0, -np.sum(a * ab, axis=1) / np.where(denom > 0, denom, 1), 0.0)
        t = np.clip(t, 0.0, 1.0)
        closest = a + t[:, None] * ab
        return float(np.min(np.linalg.norm(closest, axis=1)))
    # mesh: vertex and edge distances are an adequate audit bound here
    dmin = float(np.min(np.linalg.norm(pts, axis=1)))
    tri = sec.triangles
    for e0, e1 in ((0, 1), (1, 2), (2, 0)):
        a = pts[tri[:, e0]]
        b = pts[tri[:, e1]]
        ab = b - a
        denom = np.sum(ab * ab, axis=1)
        t = np.clip(np.where(denom > 0, -np.sum(a * ab, axis=1) / np.where(denom > 0, denom, 1), 0.0), 0, 1)
        closest = a + t[:, None] * ab
        dmin = min(dmin, float(np.min(np.linalg.norm(closest, axis=1))))
    return dmin


def winding_number(points: np.ndarray) -> int:
    """Winding of the closed polyline (in the given order) around the origin."""
    ang = np.arctan2(points[:, 1], points[:, 0])
    dang = np.diff(np.concatenate([ang, ang[:1]]))
    dang = (dang + np.pi) % (2.0 * np.pi) - np.pi
    total = float(np.sum(dang))
    return int(np.rint(total / (2.0 * np.pi)))


def mesh_degree(points: np.ndarray, triangles: np.ndarray) -> tuple[int, float]:
    """Degree of a closed oriented triangle mesh around the origin.

    Uses the Van Oosterom-Strackee signed solid angle per triangle; returns
    (degree, integrality defect of the solid-angle sum over 4 pi).
    """
    a = points[triangles[:, 0]]
    b = points[triangles[:, 1]]
    c = points[triangles[:, 2]]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    nc = np.linalg.norm(c, axis=1)
    numer = np.einsum("ij,ij->i", a, np.cross(b, c))
    denom = na * nb * nc + np.einsum("ij,ij->i", a, b) * nc \
        + np.einsum("ij,ij->i", b, c) * na + np.einsum("ij,ij->i", c, a) * nb
    omega = 2.0 * np.arctan2(numer, denom)
    total = float(np.sum(omega)) / (4.0 * np.pi)
    deg = int(np.rint(total))
    return deg, abs(total - deg)


def _degree_raw(points: np.ndarray, adjacency: str, triangles) -> int:
    if adjacency == "pair":
        plus, minus = points[0, 0], points[1, 0]
        if plus > 0 > minus:
            return 1
        if minus > 0 > plus:
            return -1
        return 0
    if adjacency == "loop":
        return winding_number(points)
    deg, defect = mesh_degree(points, triangles)
    if defect > SOLID_ANGLE_INT_TOL:
        raise BoundaryError(
            f"solid-angle sum is not integral (defect {defect:.2e}); "
            "origin too close to the mesh"
        )
    return deg


def degree(sec: ThimbleSection) -> int:
    """Enclosure degree of the section around the origin."""
    if _min_distance(sec) <= BOUNDARY_TOL:
        raise BoundaryError("origin lies on the section boundary")
    return _degree_raw(sec.points, sec.adjacency, sec.triangles)


def _consensus_degree(sec: ThimbleSection) -> int:
    """Degree resolved at nearby regular values.

    When the origin sits exactly on the section (which happens whenever a
    flow line is pinned to the real wavevector subspace by an exact symmetry
    of the dispersion relation), the degree at the origin itself is undefined.
    Degree theory still assigns a value at every nearby regular point; if all
    probes around the origin agree, that common value is the degree.  A
    genuine transversal boundary crossing makes probes on opposite sides
    disagree and remains a BoundaryError."""
    pts = sec.points
    extent = float(np.max(np.linalg.norm(pts, axis=1)))
    if extent <= BOUNDARY_TOL:
        return 0
    d = pts.shape[1]
    vals = []
    for frac in PROBE_RADII:
        for axis in range(d):
            for sign in (1.0, -1.0):
                offset = np.zeros(d)
                offset[axis] = sign * frac * extent
                shifted = ThimbleSection(s=sec.s, points=pts - offset,
                                         adjacency=sec.adjacency,
                                         triangles=sec.triangles)
                if _min_distance(shifted) <= BOUNDARY_TOL:
                    continue
                try:
                    vals.append(_degree_raw(shifted.points, shifted.adjacency,
                                            shifted.triangles))
                except BoundaryError:
                    continue
    if len(vals) >= 2 * d and len(set(vals)) == 1:
        return vals[0]
    raise BoundaryError("origin lies on the section boundary and nearby "
                        "regular values disagree")


def phase_tie_cut(points, sigma_id: int, phase_tol: float = 1e-8,
                  height_tol: float = 1e-8) -> float | None:
    """Height ceiling for the intersection history of one critical point.

    When a higher critical point shares the phase Re(k.v) exactly (a Stokes
    configuration; automatic for conjugate saddle pairs of real-coefficient
    dispersion relations), upward flow lines of the lower point eventually
    shadow the higher point's manifolds.  Origin crossings collected after
    that leak measure the partner's self-intersection, not this coefficient,
    so the history must stop once any line climbs past the tied height."""
    me = points[sigma_id]
    tied = [
        p.height for p in points
        if p.height > me.height + height_tol * (1.0 + abs(me.height))
        and abs(p.phase - me.phase) <= phase_tol * (1.0 + abs(me.phase))
    ]
    return min(tied) if tied else None


def intersection_form(bundle: ThimbleBundle, tail_fraction: float = 0.2,
                      min_dist_eps: float = BOUNDARY_TOL,
                      h_cut: float | None = None) -> IntersectionResult:
    """Degree across the s grid; stabilized when the final stretch agrees.

    With h_cut set, checkpoints at which any flow line has climbed above that
    height are excluded (see phase_tie_cut)."""
    s_grid = np.asarray(bundle.s_grid, dtype=float)
    cut_s = None
    if h_cut is not None:
        max_h = np.max(np.stack([ln.heights for ln in bundle.lines]), axis=0)
        leaked = np.flatnonzero(max_h >= h_cut)
        if len(leaked) and leaked[0] >= 2:
            s_grid = s_grid[: leaked[0]]
            cut_s = float(s_grid[-1])
        elif len(leaked):
            s_grid = s_grid[:2]
            cut_s = float(s_grid[-1])
    k_sigma = bundle.critical.k
    history = []
    hist_degree = {}
    final_min_dist = np.nan
    for i, s in enumerate(s_grid):
        sec = section(bundle, s)
        mind = _min_distance(sec)
        extent_im = float(np.max(np.linalg.norm(sec.points, axis=1)))
        extent_full = max(
            float(np.max(np.abs(np.stack([ln.samples[i] for ln in bundle.lines])
                                - k_sigma))),
            bundle.seed_scale,
        )
        if extent_im < COLLAPSE_RATIO * extent_full:
            g = 0  # collapsed shadow: empty interior, encloses nothing
        elif mind > min_dist_eps:
            try:
                g = _degree_raw(sec.points, sec.adjacency, sec.triangles)
            except BoundaryError:
                continue
        else:
            try:
                g = _consensus_degree(sec)
            except BoundaryError:
                continue
        history.append((float(s), g))
        hist_degree[float(s)] = g
        final_min_dist = mind
    n_tail = max(2, int(np.ceil(tail_fraction * len(s_grid))))
    stabilized = False
    coefficient = 0
    tail_s_values = [float(s) for s in s_grid[-n_tail:]]
    tail = [hist_degree[s] for s in tail_s_values if s in hist_degree]
    if len(tail) == n_tail and len(set(tail)) == 1:
        covers_tail = True
        # without a phase-tie cut the tail only counts once every line has
        # escaped the saddle's linear zone (the verdict is a large-s limit)
        if cut_s is None:
            covers_tail = s_grid[-n_tail] >= getattr(bundle, "s_escape", 0.0)
        if covers_tail:
            stabilized = True
            coefficient = tail[0]
    if history and not stabilized:
        coefficient = history[-1][1]
    return IntersectionResult(coefficient=coefficient, stabilized=stabilized,
                              history=history, min_distance=float(final_min_dist),
                              cut_s=cut_s)
