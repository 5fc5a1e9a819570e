"""Renormalized graph energies on gasket levels and harmonic extension."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .gasket import GasketLevel, build_level, vertex_count

__all__ = [
    "DiscreteFunction",
    "energy",
    "inner",
    "sup_norm_bound_check",
    "embedding_constant",
    "lipschitz_compose",
    "harmonic_extension",
    "extend_to_level",
    "restrict",
    "stiffness_matrix",
    "extension_matrix",
]


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """Real values on the vertices of a :class:`GasketLevel`.

    ``zero_boundary=True`` marks an element of the zero-boundary space; the
    values on ``V_0`` must then be exactly zero.
    """

    level: GasketLevel
    values: np.ndarray
    zero_boundary: bool = True

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.level.n_vertices,):
            raise ValueError(
                f"expected {self.level.n_vertices} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        if self.zero_boundary and np.any(vals[: self.level.N] != 0.0):
            raise ValueError("zero-boundary function has nonzero values on V_0")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, level: GasketLevel) -> "DiscreteFunction":
        return cls(level, np.zeros(level.n_vertices))

    @classmethod
    def indicator(cls, level: GasketLevel, index: int) -> "DiscreteFunction":
        vals = np.zeros(level.n_vertices)
        vals[index] = 1.0
        return cls(level, vals, zero_boundary=index >= level.N)

    def with_values(self, values) -> "DiscreteFunction":
        return DiscreteFunction(self.level, values, self.zero_boundary)

    def __add__(self, other):
        _check_same_level(self, other)
        return DiscreteFunction(
            self.level,
            self.values + other.values,
            self.zero_boundary and other.zero_boundary,
        )

    def __sub__(self, other):
        _check_same_level(self, other)
        return DiscreteFunction(
            self.level,
            self.values - other.values,
            self.zero_boundary and other.zero_boundary,
        )

    def __mul__(self, scalar: float):
        return DiscreteFunction(self.level, float(scalar) * self.values, self.zero_boundary)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_dict(self) -> dict:
        return {
            "level_ref": {"N": self.level.N, "m": self.level.m},
            "values": self.values.tolist(),
            "zero_boundary": self.zero_boundary,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteFunction":
        ref = data["level_ref"]
        level = build_level(int(ref["N"]), int(ref["m"]))
        return cls(level, np.asarray(data["values"], dtype=float),
                   bool(data.get("zero_boundary", True)))

    @classmethod
    def from_json(cls, text: str) -> "DiscreteFunction":
        return cls.from_dict(json.loads(text))


def _check_same_level(u: DiscreteFunction, v: DiscreteFunction) -> None:
    if u.level is not v.level and (u.level.N, u.level.m) != (v.level.N, v.level.m):
        raise ValueError(
            f"level mismatch: (N={u.level.N}, m={u.level.m}) vs "
            f"(N={v.level.N}, m={v.level.m})"
        )


def embedding_constant(N: int) -> int:
    """Constant ``c = 2N + 3`` bounding the sup norm by the energy norm."""
    return 2 * N + 3


def energy(u: DiscreteFunction) -> float:
    """``((N+2)/N)**m * sum over edges of (u(x) - u(y))**2``."""
    lev = u.level
    d = u.values[lev.edges[:, 0]] - u.values[lev.edges[:, 1]]
    return lev.energy_scale * math.fsum(d * d)


def inner(u: DiscreteFunction, v: DiscreteFunction) -> float:
    """Bilinear form whose diagonal is :func:`energy`."""
    _check_same_level(u, v)
    e = u.level.edges
    du = u.values[e[:, 0]] - u.values[e[:, 1]]
    dv = v.values[e[:, 0]] - v.values[e[:, 1]]
    return u.level.energy_scale * math.fsum(du * dv)


def sup_norm_bound_check(u: DiscreteFunction) -> tuple[float, float, bool]:
    """Return ``(sup|u|, c * sqrt(energy(u)), sup <= bound)`` with ``c = 2N+3``."""
    sup = u.sup
    bound = embedding_constant(u.level.N) * math.sqrt(energy(u))
    return sup, bound, sup <= bound


def lipschitz_compose(h: Callable[[np.ndarray], np.ndarray], u: DiscreteFunction,
                      lipschitz: float | None = None) -> DiscreteFunction:
    """Pointwise composition ``h o u``.

    ``h`` must be vectorized and satisfy ``h(0) = 0`` so that zero boundary
    values survive. ``lipschitz`` is informational; the guarantee
    ``energy(h o u) <= L**2 energy(u)`` holds edge by edge.
    """
    if lipschitz is not None and lipschitz < 0:
        raise ValueError("Lipschitz constant must be >= 0")
    vals = np.asarray(h(u.values), dtype=float)
    if u.zero_boundary and np.any(vals[: u.level.N] != 0.0):
        raise ValueError("h(0) != 0: composition does not preserve zero boundary")
    return DiscreteFunction(u.level, vals, u.zero_boundary)


def stiffness_matrix(level: GasketLevel) -> sp.csr_matrix:
    """Sparse matrix ``A`` with ``u @ A @ v == inner(u, v)``."""
    n = level.n_vertices
    e = level.edges
    ones = np.ones(e.shape[0])
    adj = sp.coo_matrix((ones, (e[:, 0], e[:, 1])), shape=(n, n))
    adj = adj + adj.T
    lap = sp.diags(np.asarray(adj.sum(axis=1)).ravel()) - adj
    return (level.energy_scale * lap).tocsr()


def _solve_exact(a: list, b: list) -> list:
    """Gauss-Jordan elimination over the rationals for a nonsingular ``a``."""
    n = len(a)
    rows = [list(map(Fraction, ra)) + list(map(Fraction, rb)) for ra, rb in zip(a, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if rows[r][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        p = rows[col][col]
        rows[col] = [x / p for x in rows[col]]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[col])]
    return [row[n:] for row in rows]


@lru_cache(maxsize=None)
def extension_matrix(N: int) -> np.ndarray:
    """Map from the ``N`` corner values of a cell to its edge-midpoint values.

    Rows follow ``itertools.combinations(range(N), 2)``. Obtained by
    eliminating the midpoints from the one-cell level-1 energy in exact
    rational arithmetic, so entries are correctly rounded.
    """
    slots = list(combinations(range(N), 2))
    mid = {s: N + k for k, s in enumerate(slots)}

    def node(i, j):
        return i if i == j else mid[(min(i, j), max(i, j))]

    n = N + len(slots)
    lap = [[0] * n for _ in range(n)]
    for i in range(N):
        sub = [node(i, j) for j in range(N)]
        for a, b in combinations(sub, 2):
            lap[a][a] += 1
            lap[b][b] += 1
            lap[a][b] -= 1
            lap[b][a] -= 1
    mm = [row[N:] for row in lap[N:]]
    rhs = [[-x for x in row[:N]] for row in lap[N:]]
    ext = np.array([[float(x) for x in row] for row in _solve_exact(mm, rhs)])
    ext.setflags(write=False)
    return ext


def harmonic_extension(u: DiscreteFunction) -> DiscreteFunction:
    """Energy-minimizing extension of ``u`` from level ``m`` to ``m + 1``."""
    lev = u.level
    fine = build_level(lev.N, lev.m + 1)
    ext = extension_matrix(lev.N)
    corner_vals = u.values[lev.cells]  # (cells, N)
    mids = corner_vals @ ext.T  # (cells, slots)
    vals = np.concatenate([u.values, mids.ravel()])
    return DiscreteFunction(fine, vals, u.zero_boundary)


def extend_to_level(u: DiscreteFunction, m: int) -> DiscreteFunction:
    """Apply :func:`harmonic_extension` until level ``m`` is reached."""
    if m < u.level.m:
        raise ValueError(f"cannot extend level {u.level.m} down to {m}")
    while u.level.m < m:
        u = harmonic_extension(u)
    return u


def restrict(u: DiscreteFunction, m: int) -> DiscreteFunction:
    """Restriction of ``u`` to the vertices of ``V_m`` (``m <= u.level.m``)."""
    if not 0 <= m <= u.level.m:
        raise ValueError(f"cannot restrict level {u.level.m} to {m}")
    coarse = build_level(u.level.N, m)
    n = vertex_count(u.level.N, m)
    return DiscreteFunction(coarse, u.values[:n], u.zero_boundary)
