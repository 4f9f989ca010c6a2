"""Sparse multivariate complex polynomials, polynomial matrices and the
dispersion-relation expression parser.

Variables are the spacetime wavevector components ``k0 .. kd`` where index 0
is temporal.  Polynomials are stored as a sparse map from exponent
multi-indices to complex double coefficients; all arithmetic is exact over
the stored doubles.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CPoly",
    "PolyMatrix",
    "ParseError",
    "parse_expression",
    "parse_matrix",
]

_ZERO_TOL = 0.0  # coefficients are dropped only when exactly zero


class ParseError(ValueError):
    """Syntax or semantic error in a dispersion-relation expression."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


@dataclass(frozen=True)
class CPoly:
    """Sparse polynomial in ``dim`` complex variables.

    ``terms`` maps exponent tuples of length ``dim`` to nonzero complex
    coefficients.  Instances are immutable; arithmetic returns new objects.
    """

    dim: int
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for exps, c in self.terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim:
                raise ValueError(f"exponent vector {exps} has length != dim={self.dim}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = complex(c)
            if c != 0:
                clean[exps] = clean.get(exps, 0) + c
        object.__setattr__(self, "terms", {e: c for e, c in clean.items() if c != 0})
        object.__setattr__(self, "_packed", None)

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, dim: int) -> "CPoly":
        return cls(dim, {})

    @classmethod
    def const(cls, dim: int, c: complex) -> "CPoly":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def var(cls, dim: int, mu: int) -> "CPoly":
        if not 0 <= mu < dim:
            raise IndexError(f"variable index {mu} out of range for dim={dim}")
        e = [0] * dim
        e[mu] = 1
        return cls(dim, {tuple(e): 1.0})

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, CPoly):
            if other.dim != self.dim:
                raise ValueError("dimension mismatch")
            return other
        return CPoly.const(self.dim, other)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0) + c
        return CPoly(self.dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return CPoly(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, CPoly):
            c = complex(other)
            return CPoly(self.dim, {e: c * v for e, v in self.terms.items()})
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        terms = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return CPoly(self.dim, terms)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n != int(n) or n < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = CPoly.const(self.dim, 1.0)
        base = self
        n = int(n)
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, CPoly):
            return self.dim == other.dim and self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    # -- calculus / evaluation -----------------------------------------
    def partial(self, mu: int) -> "CPoly":
        """Formal partial derivative with respect to variable ``mu``."""
        if not 0 <= mu < self.dim:
            raise IndexError(f"derivative index {mu} out of range for dim={self.dim}")
        terms = {}
        for e, c in self.terms.items():
            if e[mu] == 0:
                continue
            d = list(e)
            d[mu] -= 1
            terms[tuple(d)] = terms.get(tuple(d), 0) + c * e[mu]
        return CPoly(self.dim, terms)

    def _pack(self):
        packed = object.__getattribute__(self, "_packed")
        if packed is None:
            if self.terms:
                exps = np.array(sorted(self.terms), dtype=np.int64)
                coeffs = np.array([self.terms[tuple(e)] for e in exps], dtype=complex)
            else:
                exps = np.zeros((0, self.dim), dtype=np.int64)
                coeffs = np.zeros(0, dtype=complex)
            packed = (exps, coeffs)
            object.__setattr__(self, "_packed", packed)
        return packed

    def eval(self, k) -> complex | np.ndarray:
        """Evaluate at one point or a batch of points.

        ``k`` has shape ``(..., dim)``; the result has shape ``(...)``.
        """
        k = np.asarray(k, dtype=complex)
        if k.shape[-1] != self.dim:
            raise ValueError(f"point dimension {k.shape[-1]} != dim={self.dim}")
        exps, coeffs = self._pack()
        if len(coeffs) == 0:
            out = np.zeros(k.shape[:-1], dtype=complex)
            return out if out.shape else complex(out)
        mono = np.prod(k[..., None, :] ** exps, axis=-1)
        out = mono @ coeffs
        return out if out.shape else complex(out)

    # -- structure queries ----------------------------------------------
    def degree_in(self, mu: int) -> int:
        return max((e[mu] for e in self.terms), default=0)

    def is_constant_in(self, mu: int) -> bool:
        return self.degree_in(mu) == 0

    def max_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def coeffs_in_k0(self) -> list["CPoly"]:
        """Coefficients of powers of ``k0``, highest degree first.

        Each coefficient is a polynomial in the ``dim - 1`` spatial variables.
        """
        deg = self.degree_in(0)
        coeffs = [dict() for _ in range(deg + 1)]
        for e, c in self.terms.items():
            coeffs[deg - e[0]][e[1:]] = coeffs[deg - e[0]].get(e[1:], 0) + c
        return [CPoly(self.dim - 1, t) for t in coeffs]

    # -- printing ---------------------------------------------------------
    @staticmethod
    def _grlex_key(e):
        return (sum(e), tuple(-x for x in e))

    def to_string(self) -> str:
        """Canonical exact textual form; ``parse_expression`` round-trips it."""
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, key=self._grlex_key):
            c = self.terms[e]
            if c.imag == 0:
                coef = repr(c.real)
            else:
                sign = "+" if c.imag >= 0 else "-"
                coef = f"({c.real!r}{sign}{abs(c.imag)!r}i)"
            factors = [coef]
            for mu, p in enumerate(e):
                if p == 1:
                    factors.append(f"k{mu}")
                elif p > 1:
                    factors.append(f"k{mu}^{p}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __str__(self):
        return self.to_string()


@dataclass(frozen=True)
class PolyMatrix:
    """Square matrix of polynomials sharing the same variable count."""

    n: int
    entries: tuple  # tuple of tuples of CPoly

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.entries)
        if len(rows) != self.n or any(len(r) != self.n for r in rows):
            raise ValueError("entries must form an n x n array")
        dims = {p.dim for row in rows for p in row}
        if len(dims) > 1:
            raise ValueError("all entries must share the same dim")
        object.__setattr__(self, "entries", rows)

    @property
    def dim(self) -> int:
        return self.entries[0][0].dim

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def minor(self, i: int, j: int) -> "PolyMatrix":
        rows = [
            [self.entries[r][c] for c in range(self.n) if c != j]
            for r in range(self.n)
            if r != i
        ]
        return PolyMatrix(self.n - 1, tuple(tuple(r) for r in rows))

    def determinant(self) -> CPoly:
        """Exact cofactor expansion; adequate for the small N in scope."""
        if self.n == 1:
            return self.entries[0][0]
        if self.n == 2:
            a, b = self.entries[0]
            c, d = self.entries[1]
            return a * d - b * c
        det = CPoly.zero(self.dim)
        for j in range(self.n):
            cof = self.minor(0, j).determinant()
            term = self.entries[0][j] * cof
            det = det + (term if j % 2 == 0 else -term)
        return det

    def adjugate(self) -> "PolyMatrix":
        """Transpose cofactor matrix: ``M * adj(M) = det(M) * I`` exactly."""
        if self.n == 1:
            return PolyMatrix(1, ((CPoly.const(self.dim, 1.0),),))
        rows = []
        for i in range(self.n):
            row = []
            for j in range(self.n):
                cof = self.minor(j, i).determinant()
                row.append(cof if (i + j) % 2 == 0 else -cof)
            rows.append(tuple(row))
        return PolyMatrix(self.n, tuple(rows))

    def eval(self, k) -> np.ndarray:
        """Evaluate entrywise at a single point, returning an (n, n) array."""
        out = np.empty((self.n, self.n), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                out[i, j] = self.entries[i][j].eval(k)
        return out


# ---------------------------------------------------------------------------
# Expression parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?i?)
    | (?P<imag>i)
    | (?P<var>k\d+)
    | (?P<name>[A-Za-z_]\w*)
    | (?P<op>[-+*^()])
    | (?P<ws>\s+)
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive-descent parser for the dispersion-relation grammar:

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | power
    power  := atom ('^' uint)?
    atom   := number | 'i' | kN | '(' expr ')'
    """

    def __init__(self, text: str, dim: int):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, val, p = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", p)
        return self.next()

    def parse(self) -> CPoly:
        p = self.expr()
        kind, val, at = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", at)
        return p

    def expr(self) -> CPoly:
        p = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                q = self.term()
                p = p + q if val == "+" else p - q
            else:
                return p

    def term(self) -> CPoly:
        p = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.next()
                p = p * self.unary()
            else:
                return p

    def unary(self) -> CPoly:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return -self.unary()
        return self.power()

    def power(self) -> CPoly:
        p = self.atom()
        kind, val, at = self.peek()
        if kind == "op" and val == "^":
            self.next()
            kind, val, at = self.next()
            if kind != "num" or not val.isdigit():
                raise ParseError("exponent must be a nonnegative integer", at)
            p = p ** int(val)
        return p

    def atom(self) -> CPoly:
        kind, val, at = self.next()
        if kind == "num":
            if val.endswith("i"):
                return CPoly.const(self.dim, 1j * float(val[:-1]))
            return CPoly.const(self.dim, float(val))
        if kind == "imag":
            return CPoly.const(self.dim, 1j)
        if kind == "var":
            mu = int(val[1:])
            if mu >= self.dim:
                raise ParseError(
                    f"unknown variable {val!r} (only k0..k{self.dim - 1} allowed)", at
                )
            return CPoly.var(self.dim, mu)
        if kind == "name":
            raise ParseError(f"unknown variable {val!r}", at)
        if kind == "op" and val == "(":
            p = self.expr()
            self.expect_op(")")
            return p
        raise ParseError(f"syntax error near {val!r}" if val else "unexpected end of input", at)


def parse_expression(text: str, d: int) -> CPoly:
    """Parse an expression over ``k0 .. kd`` into an expanded sparse polynomial."""
    return _Parser(text, d + 1).parse()


def parse_matrix(rows, d: int) -> PolyMatrix:
    """Parse an N x N nested list of expression strings."""
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError("operator must be a square (N x N) array of expressions")
    parsed = tuple(
        tuple(parse_expression(cell, d) for cell in row) for row in rows
    )
    return PolyMatrix(n, parsed)
