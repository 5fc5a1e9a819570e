"""Level-m graph approximations of the Sierpinski gasket.

Vertices are stored exactly as barycentric numerators over ``2**m`` with
respect to the corner points ``p_1, ..., p_N`` of a unit regular simplex.
For two vertices with numerator difference ``D`` the squared Euclidean
distance is ``sum(D**2) / (2 * 4**m)``, so adjacency ``|x - y| = 2**-m`` is
the integer test ``sum(D**2) == 2``.

Level ``m`` is produced by refining level ``m - 1``: every cell ``S_w(V_0)``
is split into the ``N`` cells ``S_w S_i(V_0)``, whose new corners are the
edge midpoints of the parent cell. Vertices of level ``m - 1`` keep their
indices, so ``V_0`` always occupies indices ``0..N-1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

__all__ = [
    "GasketLevel",
    "build_level",
    "hausdorff_dimension",
    "measure_weights",
    "simplex_vertices",
    "vertex_count",
    "MAX_VERTICES",
]

#: Resource guard on the number of vertices of a single level.
MAX_VERTICES = 5_000_000


def vertex_count(N: int, m: int) -> int:
    """Number of vertices of ``V_m``: ``N + N(N-1)/2 * (N**m - 1)/(N - 1)``."""
    # each refinement adds N(N-1)/2 midpoints per parent cell
    return N + (N * (N - 1) // 2) * sum(N**k for k in range(m))


def hausdorff_dimension(N: int) -> float:
    """Similarity dimension ``ln N / ln 2`` of the gasket in ``R^(N-1)``."""
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    return math.log(N) / math.log(2)


@lru_cache(maxsize=None)
def simplex_vertices(N: int) -> np.ndarray:
    """Corners of a unit-edge regular simplex in ``R^(N-1)``, shape ``(N, N-1)``.

    The points ``e_i / sqrt(2)`` of ``R^N`` are pairwise at distance one; they
    are expressed in an orthonormal basis of the hyperplane ``sum(x) = 0``.
    Only used for output; all combinatorics are integer.
    """
    eye = np.eye(N) / math.sqrt(2.0)
    centered = eye - eye.mean(axis=0)
    # orthonormal basis of the sum-zero hyperplane (Helmert rows)
    basis = np.zeros((N - 1, N))
    for k in range(1, N):
        basis[k - 1, :k] = 1.0
        basis[k - 1, k] = -k
        basis[k - 1] /= math.sqrt(k * (k + 1))
    pts = centered @ basis.T
    pts.setflags(write=False)
    return pts


@dataclass(frozen=True, eq=False)
class GasketLevel:
    """Graph approximation ``V_m`` of the ``N``-corner gasket.

    Attributes
    ----------
    N, m : int
        Number of corners and approximation level.
    vertices : ndarray of int64, shape (n, N)
        Barycentric numerators; a row ``k`` is the point
        ``sum_i k_i p_i / 2**m``.
    edges : ndarray of int, shape (N**m * N(N-1)/2, 2)
        Vertex index pairs at distance ``2**-m``, ``i < j``.
    cells : ndarray of int, shape (N**m, N)
        Column ``j`` holds the image of ``p_j`` under the cell's word map.
        Cells are listed in lexicographic word order.
    weights : ndarray of float, shape (n,)
        Quadrature weights for the normalized self-similar measure.
    """

    N: int
    m: int
    vertices: np.ndarray
    edges: np.ndarray
    cells: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def denominator(self) -> int:
        return 2**self.m

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def boundary_index(self) -> np.ndarray:
        return np.arange(self.N)

    @property
    def interior_index(self) -> np.ndarray:
        return np.arange(self.N, self.n_vertices)

    @property
    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[: self.N] = True
        return mask

    @property
    def energy_scale(self) -> float:
        """Renormalization factor ``((N+2)/N)**m`` of the level-m energy."""
        return ((self.N + 2) / self.N) ** self.m

    def coordinates(self) -> np.ndarray:
        """Floating-point positions in ``R^(N-1)``, shape ``(n, N-1)``."""
        return (self.vertices / self.denominator) @ simplex_vertices(self.N)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "m": self.m,
            "vertices": self.vertices.tolist(),
            "denominator": self.denominator,
            "edges": self.edges.tolist(),
            "cells": self.cells.tolist(),
            "boundary": self.boundary_index.tolist(),
            "weights": self.weights.tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "GasketLevel":
        level = build_level(int(data["N"]), int(data["m"]))
        if data.get("vertices") is not None and not np.array_equal(
            level.vertices, np.asarray(data["vertices"])
        ):
            raise ValueError("vertex table does not match the canonical level")
        return level


def _midpoint_slots(N: int) -> list[tuple[int, int]]:
    return list(combinations(range(N), 2))


def _refine(N, verts, cells):
    """One refinement step; numerators are doubled, midpoints appended."""
    verts2 = verts * 2
    slots = _midpoint_slots(N)
    n_cells = cells.shape[0]
    n_old = verts2.shape[0]
    # midpoint of corners (a, b) of a cell has numerators verts[a] + verts[b]
    mids = np.empty((n_cells * len(slots), N), dtype=np.int64)
    mid_index = np.empty((n_cells, N, N), dtype=np.int64)
    for k, (a, b) in enumerate(slots):
        mids[k::len(slots)] = verts[cells[:, a]] + verts[cells[:, b]]
        idx = n_old + np.arange(n_cells) * len(slots) + k
        mid_index[:, a, b] = idx
        mid_index[:, b, a] = idx
    new_cells = np.empty((n_cells, N, N), dtype=np.int64)
    for i in range(N):
        for j in range(N):
            new_cells[:, i, j] = cells[:, i] if i == j else mid_index[:, i, j]
    return np.vstack([verts2, mids]), new_cells.reshape(n_cells * N, N)


@lru_cache(maxsize=16)
def _build_cached(N: int, m: int) -> GasketLevel:
    verts = np.eye(N, dtype=np.int64)
    cells = np.arange(N, dtype=np.int64)[None, :]
    for _ in range(m):
        verts, cells = _refine(N, verts, cells)
    pairs = _midpoint_slots(N)
    edges = np.concatenate([cells[:, [a, b]] for a, b in pairs])
    edges.sort(axis=1)
    for arr in (verts, cells, edges):
        arr.setflags(write=False)
    level = GasketLevel(N, m, verts, edges, cells, np.empty(0))
    w = measure_weights(level)
    w.setflags(write=False)
    object.__setattr__(level, "weights", w)
    return level


def build_level(N: int, m: int, max_vertices: int | None = None) -> GasketLevel:
    """Build the level-``m`` approximation of the ``N``-corner gasket.

    Raises
    ------
    ValueError
        If ``N < 2``, ``m < 0`` or the vertex count exceeds ``max_vertices``
        (default :data:`MAX_VERTICES`).
    """
    if int(N) != N or N < 2:
        raise ValueError(f"N must be an integer >= 2, got {N}")
    if int(m) != m or m < 0:
        raise ValueError(f"level m must be an integer >= 0, got {m}")
    cap = MAX_VERTICES if max_vertices is None else max_vertices
    count = vertex_count(int(N), int(m))
    if count > cap:
        raise ValueError(
            f"level m={m} for N={N} has {count} vertices, above the cap {cap}"
        )
    return _build_cached(int(N), int(m))


def measure_weights(level: GasketLevel, exact: bool = False):
    """Per-vertex quadrature weights for the self-similar measure.

    Each of the ``N**m`` cells carries mass ``N**-m`` split equally over its
    ``N`` corners. With ``exact=True`` a list of :class:`Fraction` is returned.
    """
    N, m = level.N, level.m
    counts = np.bincount(level.cells.ravel(), minlength=level.n_vertices)
    if exact:
        unit = Fraction(1, N ** (m + 1))
        return [int(c) * unit for c in counts]
    return counts / float(N ** (m + 1))
