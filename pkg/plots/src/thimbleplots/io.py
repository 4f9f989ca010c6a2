"""Schema-checked readers for the analysis CLI's CSV artifacts.

This package is a read-only consumer: it never recomputes thimbles and only
accepts the fixed column layouts the CLI emits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SchemaError",
    "GrowthMap",
    "FlowBundle",
    "SectionStack",
    "read_growthmap",
    "read_flows",
    "read_sections",
    "read_triangles",
]


class SchemaError(ValueError):
    """Input file does not match the CLI's artifact schema."""


@dataclass(frozen=True)
class GrowthMap:
    d: int
    v: np.ndarray          # (n, d) frame velocities
    h: np.ndarray          # (n,) growth rates (nan where the row errored)
    verdicts: list


@dataclass(frozen=True)
class FlowBundle:
    d: int
    sigma_ids: list
    # per (sigma_id, seed_id): s values, complex samples (n, d+1), heights
    lines: dict


@dataclass(frozen=True)
class SectionStack:
    d: int
    s_values: np.ndarray
    points: dict           # s -> (n_seeds, d) imaginary spatial coordinates


def _read_rows(path) -> tuple[list, list]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise SchemaError(f"{path}: no data rows")
    return header, body


def _dim_from_prefixed(header, prefix, start) -> int:
    d = 0
    while f"{prefix}{d + start}" in header:
        d += 1
    if d == 0:
        raise SchemaError(f"missing {prefix}* columns in header {header}")
    return d


def read_growthmap(path) -> GrowthMap:
    header, body = _read_rows(path)
    d = _dim_from_prefixed(header, "v", 1)
    if header != [f"v{i + 1}" for i in range(d)] + ["h", "verdict"]:
        raise SchemaError(f"{path}: unexpected growth-map header {header}")
    v = np.empty((len(body), d))
    h = np.empty(len(body))
    verdicts = []
    for i, row in enumerate(body):
        if len(row) != d + 2:
            raise SchemaError(f"{path}: malformed row {row}")
        v[i] = [float(x) for x in row[:d]]
        h[i] = float(row[d]) if row[d] else np.nan
        verdicts.append(row[d + 1])
    return GrowthMap(d=d, v=v, h=h, verdicts=verdicts)


def read_flows(path) -> FlowBundle:
    header, body = _read_rows(path)
    if header[:3] != ["sigma_id", "seed_id", "s"] or header[-2:] != ["h", "drift"]:
        raise SchemaError(f"{path}: unexpected flow header {header}")
    k_cols = header[3:-2]
    d = len(k_cols) // 2 - 1
    expected = [c for mu in range(d + 1) for c in (f"re_k{mu}", f"im_k{mu}")]
    if k_cols != expected:
        raise SchemaError(f"{path}: unexpected flow sample columns {k_cols}")
    raw: dict = {}
    for row in body:
        if len(row) != len(header):
            raise SchemaError(f"{path}: malformed row {row}")
        key = (int(row[0]), int(row[1]))
        vals = [float(x) for x in row[2:-1]]
        raw.setdefault(key, []).append(vals)
    lines = {}
    for key, recs in raw.items():
        arr = np.asarray(recs)
        s = arr[:, 0]
        samples = arr[:, 1:-1:2] + 1j * arr[:, 2::2]
        lines[key] = (s, samples, arr[:, -1])
    return FlowBundle(d=d, sigma_ids=sorted({k[0] for k in lines}), lines=lines)


def read_sections(path) -> SectionStack:
    header, body = _read_rows(path)
    d = _dim_from_prefixed(header, "im_k", 1)
    if header != ["s", "seed_id"] + [f"im_k{i + 1}" for i in range(d)]:
        raise SchemaError(f"{path}: unexpected section header {header}")
    by_s: dict = {}
    for row in body:
        if len(row) != d + 2:
            raise SchemaError(f"{path}: malformed row {row}")
        by_s.setdefault(float(row[0]), []).append(
            (int(row[1]), [float(x) for x in row[2:]]))
    points = {}
    for s, recs in by_s.items():
        recs.sort()
        points[s] = np.asarray([p for _, p in recs])
    return SectionStack(d=d, s_values=np.asarray(sorted(points)), points=points)


def read_triangles(path) -> np.ndarray:
    header, body = _read_rows(path)
    if header != ["v0", "v1", "v2"]:
        raise SchemaError(f"{path}: unexpected triangle header {header}")
    return np.asarray([[int(x) for x in row] for row in body], dtype=int)
