"""Problem container: dispersion-relation operator, its determinant and the
observer-frame conventions.

The frame velocity ``v`` is a real spatial d-vector.  Its lowered covector is
``(1, -v)`` under the mostly-minus Minkowski metric, so the contraction used
throughout is ``k . v = k0 - k_vec . v_vec``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .poly import CPoly, ParseError, PolyMatrix, parse_expression, parse_matrix

__all__ = ["Problem", "parse_dispersion", "as_velocity", "lowered", "kdotv", "height_phase"]


def as_velocity(v, d: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (d,):
        raise ValueError(f"velocity must be a real {d}-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("velocity components must be finite")
    return v


def lowered(v: np.ndarray) -> np.ndarray:
    """Covector (1, -v) of the frame velocity (1, v)."""
    return np.concatenate(([1.0], -np.asarray(v, dtype=float)))


def kdotv(k, v) -> complex | np.ndarray:
    """Minkowski contraction k.v = k0 - k_vec . v_vec, batched over k."""
    k = np.asarray(k, dtype=complex)
    return k @ lowered(v)


def height_phase(k, v):
    """Morse height h = Im(k.v) and phase Re(k.v)."""
    kv = kdotv(k, v)
    return np.imag(kv), np.real(kv)


@dataclass(frozen=True)
class Problem:
    """A dispersion relation: operator matrix D(k), its determinant Delta(k).

    ``delta`` is always the exact term-by-term determinant of ``operator``.
    The polynomial must be entered in the D(i * derivative) convention,
    including factors of i from first-order time derivatives; the phase of
    the Green function depends on it.
    """

    d: int
    operator: PolyMatrix
    delta: CPoly
    label: str = ""

    def __post_init__(self):
        if self.operator.dim != self.d + 1 or self.delta.dim != self.d + 1:
            raise ValueError("operator/delta dimension must equal d + 1")
        if self.delta != self.operator.determinant():
            raise ValueError("delta must equal det(operator) exactly")
        if self.delta.is_constant_in(0):
            raise ValueError("delta is constant in k0: no temporal dynamics")
        object.__setattr__(self, "_cache", {})

    @property
    def n(self) -> int:
        return self.operator.n

    @property
    def coeff_scale(self) -> float:
        return 1.0 + self.delta.max_coeff()

    def adjugate(self) -> PolyMatrix:
        cache = object.__getattribute__(self, "_cache")
        if "adj" not in cache:
            cache["adj"] = self.operator.adjugate()
        return cache["adj"]

    def gradient_polys(self) -> list[CPoly]:
        cache = object.__getattribute__(self, "_cache")
        if "grad" not in cache:
            cache["grad"] = [self.delta.partial(mu) for mu in range(self.d + 1)]
        return cache["grad"]

    def second_partial(self, mu: int, nu: int) -> CPoly:
        cache = object.__getattribute__(self, "_cache")
        key = ("d2", min(mu, nu), max(mu, nu))
        if key not in cache:
            cache[key] = self.gradient_polys()[key[1]].partial(key[2])
        return cache[key]

    def jittered(self, eps: float) -> "Problem":
        """Degenerate-locus guard: replace Delta by Delta + eps * k0.

        Only meaningful for scalar problems (N = 1); the jitter is applied to
        the operator entry so the determinant invariant is preserved.
        """
        if self.n != 1:
            raise ValueError("jitter is only supported for scalar (N = 1) problems")
        new = self.delta + CPoly.var(self.d + 1, 0) * eps
        return Problem(self.d, PolyMatrix(1, ((new,),)), new,
                       label=f"{self.label}+jitter({eps})")

    # -- construction -----------------------------------------------------
    @classmethod
    def from_delta(cls, delta: CPoly, d: int, label: str = "") -> "Problem":
        return cls(d, PolyMatrix(1, ((delta,),)), delta, label)

    @classmethod
    def from_dict(cls, obj: dict) -> "Problem":
        d = int(obj["d"])
        label = obj.get("label", "")
        if "operator" in obj:
            op = parse_matrix(obj["operator"], d)
            return cls(d, op, op.determinant(), label)
        if "delta" in obj:
            return cls.from_delta(parse_expression(obj["delta"], d), d, label)
        raise ValueError("problem JSON needs either 'operator' or 'delta'")

    @classmethod
    def load(cls, path) -> "Problem":
        with open(Path(path)) as f:
            return cls.from_dict(json.load(f))


def _split_top_level(text: str, sep: str, offset: int):
    """Split on ``sep`` outside any bracket/paren nesting, tracking offsets."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced bracket", offset + i)
        elif ch == sep and depth == 0:
            parts.append((text[start:i], offset + start))
            start = i + 1
    parts.append((text[start:], offset + start))
    return parts


def parse_dispersion(text: str, d: int, label: str = "") -> Problem:
    """Parse a scalar expression or a bracketed N x N matrix into a Problem."""
    stripped = text.strip()
    if not stripped.startswith("["):
        return Problem.from_delta(parse_expression(text, d), d, label)
    lead = text.index("[")
    if not stripped.endswith("]"):
        raise ParseError("matrix input must end with ']'", len(text))
    inner = stripped[1:-1]
    rows = []
    for chunk, off in _split_top_level(inner, ",", lead + 1):
        chunk_s = chunk.strip()
        if not (chunk_s.startswith("[") and chunk_s.endswith("]")):
            raise ParseError("matrix rows must be bracketed", off)
        pad = chunk.index("[")
        cells = _split_top_level(chunk_s[1:-1], ",", off + pad + 1)
        rows.append([c for c, _ in cells])
    op = parse_matrix(rows, d)
    return Problem(d, op, op.determinant(), label)
