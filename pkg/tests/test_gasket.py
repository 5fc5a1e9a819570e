import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from sgdirichlet.gasket import (
    GasketLevel,
    build_level,
    hausdorff_dimension,
    measure_weights,
    simplex_vertices,
    vertex_count,
)


def ifs_oracle(N, m):
    """Float enumeration of IFS images, deduplicated by rounding."""
    p = simplex_vertices(N)
    cells = []
    for word in itertools.product(range(N), repeat=m):
        pts = p.copy()
        for i in reversed(word):
            pts = pts / 2 + p[i] / 2
        cells.append(pts)
    keys = {}
    for pts in cells:
        for x in pts:
            keys.setdefault(tuple(np.round(x, 9)), len(keys))
    edges = set()
    for pts in cells:
        ids = [keys[tuple(np.round(x, 9))] for x in pts]
        edges |= {tuple(sorted(e)) for e in itertools.combinations(ids, 2)}
    return keys, edges, len(cells)


@pytest.mark.parametrize("m,nv,ne,nc", [(0, 3, 3, 1), (1, 6, 9, 3), (2, 15, 27, 9)])
def test_small_levels(m, nv, ne, nc):
    lev = build_level(3, m)
    assert (lev.n_vertices, len(lev.edges), len(lev.cells)) == (nv, ne, nc)
    assert list(lev.boundary_index) == [0, 1, 2]


@pytest.mark.parametrize("N,m", [(2, 3), (3, 3), (3, 4), (4, 2), (5, 2)])
def test_matches_ifs_oracle(N, m):
    lev = build_level(N, m)
    keys, edges, ncells = ifs_oracle(N, m)
    assert lev.n_vertices == len(keys) == vertex_count(N, m)
    assert len(lev.cells) == ncells
    coords = lev.coordinates()
    ids = [keys[tuple(np.round(x, 9))] for x in coords]
    assert sorted(ids) == list(range(len(keys)))
    mapped = {tuple(sorted((ids[a], ids[b]))) for a, b in lev.edges}
    assert mapped == edges


@pytest.mark.parametrize("N,m", [(3, 1), (3, 4), (4, 3)])
def test_adjacency_is_exact_distance(N, m):
    lev = build_level(N, m)
    coords = lev.coordinates()
    d = np.linalg.norm(coords[lev.edges[:, 0]] - coords[lev.edges[:, 1]], axis=1)
    np.testing.assert_allclose(d, 2.0**-m, rtol=1e-12)
    # integer numerators over 2^m
    assert lev.vertices.dtype.kind == "i"
    assert np.all(lev.vertices.sum(axis=1) == lev.denominator)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_simplex_has_unit_edges(N):
    p = simplex_vertices(N)
    for i, j in itertools.combinations(range(N), 2):
        assert abs(np.linalg.norm(p[i] - p[j]) - 1.0) < 1e-14


@pytest.mark.parametrize("N,expected", [(2, 1.0), (3, 1.5849625007211562), (4, 2.0)])
def test_hausdorff_dimension(N, expected):
    assert hausdorff_dimension(N) == pytest.approx(expected, abs=1e-14)


def test_weights_examples():
    w0 = measure_weights(build_level(3, 0), exact=True)
    assert w0 == [Fraction(1, 3)] * 3
    w1 = measure_weights(build_level(3, 1), exact=True)
    assert w1 == [Fraction(1, 9)] * 3 + [Fraction(2, 9)] * 3


@pytest.mark.parametrize("N,m", [(3, 0), (3, 3), (3, 6), (4, 3)])
def test_weights_sum_to_one(N, m):
    lev = build_level(N, m)
    assert sum(measure_weights(lev, exact=True)) == 1
    assert abs(lev.weights.sum() - 1.0) < 1e-15


@pytest.mark.parametrize("N,m", [(3, 2), (4, 2)])
def test_first_level_copies_have_mass_one_over_N(N, m):
    lev = build_level(N, m)
    per_cell = Fraction(1, N**m * N)
    # cells are ordered so that each first-level copy is a contiguous block
    block = len(lev.cells) // N
    for i in range(N):
        cells = lev.cells[i * block:(i + 1) * block]
        mass = sum(per_cell for c in cells for _ in c)
        assert mass == Fraction(1, N)
        # all cells of the block lie in the copy S_i(V)
        corner = lev.vertices[i]
        assert np.all(lev.vertices[cells.ravel()] @ corner >= 0)


@pytest.mark.parametrize("N,m", [(3, 3), (4, 2), (5, 2)])
def test_degrees(N, m):
    lev = build_level(N, m)
    deg = lev.degrees()
    assert np.all(deg[:N] == N - 1)
    assert np.all(deg[N:] == 2 * (N - 1))


@pytest.mark.parametrize("N,m", [(3, 3), (4, 2)])
def test_restriction_reproduces_coarser_level(N, m):
    fine, coarse = build_level(N, m), build_level(N, m - 1)
    k = coarse.n_vertices
    assert np.array_equal(fine.vertices[:k] , 2 * coarse.vertices)
    assert np.array_equal(fine.is_boundary[:k], coarse.is_boundary)
    # the edges of V_{m-1} join vertices at fine-graph distance 2 through a midpoint
    fine_adj = {tuple(e) for e in fine.edges.tolist()}
    for a, b in coarse.edges.tolist():
        assert (a, b) not in fine_adj


def test_invalid_arguments():
    with pytest.raises(ValueError, match="N"):
        build_level(1, 2)
    with pytest.raises(ValueError, match="m"):
        build_level(3, -1)
    with pytest.raises(ValueError):
        build_level(3, 12, max_vertices=1000)


def test_json_round_trip():
    lev = build_level(3, 2)
    d = json.loads(lev.to_json())
    assert set(d) >= {"N", "m", "vertices", "denominator", "edges", "cells", "boundary", "weights"}
    back = GasketLevel.from_dict(d)
    assert np.array_equal(back.vertices, lev.vertices)
    assert np.array_equal(back.edges, lev.edges)
    assert np.array_equal(back.cells, lev.cells)


def test_vertex_count_formula():
    for m in range(7):
        assert vertex_count(3, m) == (3 ** (m + 1) + 3) // 2
    assert math.isclose(sum(build_level(3, 5).weights), 1.0)
