import math

import numpy as np
import pytest

from prestrained_lattice.geometry import (
    Box,
    ConvexPolygon,
    Quadrature,
    Triangulation,
    background_mesh,
    covered_cells,
    enumerate_simplices,
    interacting_nodes,
    lattice_nodes,
    permutations,
    regular_polygon,
    shrink,
)

B0 = np.array([[1, -1], [1, 1]])


def test_shrink_zero_is_interior():
    dom = Box.unit(2)
    x = np.array([[0.5, 0.5], [0.0, 0.5], [1e-9, 0.3], [1.2, 0.5]])
    assert shrink(dom, 0.0).contains(x).tolist() == dom.contains(x).tolist() == [True, False, True, False]


def test_shrink_box_offsets():
    inner = shrink(Box.unit(2), 0.25).as_box()
    assert inner.lower == (0.25, 0.25) and inner.upper == (0.75, 0.75)


def test_shrink_triangle_exact_distance():
    tri = ConvexPolygon(((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)))
    assert not shrink(tri, 0.1).contains(np.array([[0.5, 0.05]]))[0]
    assert shrink(tri, 0.1).contains(np.array([[0.2, 0.2]]))[0]


def test_shrink_composes():
    s = shrink(shrink(Box.unit(2), 0.1), 0.15)
    assert s.s == pytest.approx(0.25)


def test_covered_cells_unit_box():
    cells = covered_cells(Box.unit(2), 0.5, np.eye(2, dtype=int))
    alphas = sorted(map(tuple, (0.5 * cells).tolist()))
    assert alphas == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.0), (0.5, 0.5)]


def test_covered_cells_large_eps_single_cell():
    assert covered_cells(Box.unit(2), 2.0).tolist() == [[0, 0]]


def test_covered_cells_overshrunk_empty():
    assert len(covered_cells(Box.unit(2), 0.5, margin=0.8)) == 0


def test_covered_cells_sheared_cover_domain():
    # every point of the domain lies in the closure of some covered sheared cell
    eps = 0.25
    cells = covered_cells(Box.unit(2), eps, B0, np.array([1, 0]))
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, (500, 2))
    coords = (x / eps - np.array([1, 0])) @ np.linalg.inv(B0).T
    owners = {tuple(c) for c in np.floor(coords).astype(int).tolist()}
    assert owners <= {tuple(c) for c in cells.tolist()}


def test_kuhn_counts_and_chain():
    t = Triangulation(0.1, np.eye(2, dtype=int), np.zeros(2, dtype=int), np.array([[0, 0]]))
    V = t.simplex_vertices()
    assert V.shape == (2, 3, 2)
    # T^(1,2) = conv{a, a + e1, a + e1 + e2}
    assert V[0].tolist() == [[0, 0], [1, 0], [1, 1]]
    assert V[1].tolist() == [[0, 0], [0, 1], [1, 1]]
    t3 = Triangulation(0.1, np.eye(3, dtype=int), np.zeros(3, dtype=int), np.array([[0, 0, 0]]))
    assert t3.n_simplices == 6 == len(list(enumerate_simplices(t3)))


def test_kuhn_simplices_tile_cell():
    for n in (2, 3):
        t = Triangulation(1.0, np.eye(n, dtype=int), np.zeros(n, dtype=int), np.zeros((1, n), dtype=int))
        vols = [abs(np.linalg.det((s[1:] - s[0]).astype(float))) / math.factorial(n) for s in t.simplex_vertices()]
        assert math.fsum(vols) == pytest.approx(1.0)


def test_sheared_simplex_volume():
    t = Triangulation(1.0, B0, np.zeros(2, dtype=int), np.array([[0, 0]]))
    assert t.simplex_volume() == pytest.approx(1.0)
    for s in t.simplex_vertices():
        assert abs(np.linalg.det((s[1:] - s[0]).astype(float))) / 2 == pytest.approx(1.0)


def test_permutations_lexicographic():
    assert permutations(3).tolist()[:2] == [[0, 1, 2], [0, 2, 1]]


def test_lattice_nodes_strict_interior():
    nodes = lattice_nodes(Box.unit(2), 0.25)
    assert len(nodes) == 9 and nodes.min() == 1 and nodes.max() == 3


def test_interacting_nodes_rows():
    alpha = interacting_nodes(np.array([1, 0]), 0.5, Box.unit(2))
    assert alpha.tolist() == []  # only one interior node at eps = 1/2
    alpha = interacting_nodes(np.array([1, 1]), 0.25, Box.unit(2))
    assert sorted(map(tuple, alpha.tolist())) == [(i, j) for i in (1, 2) for j in (1, 2)]
    with pytest.raises(ValueError):
        interacting_nodes(np.array([0, 0]), 0.25, Box.unit(2))


@pytest.mark.parametrize("domain", [Box.unit(2), Box((0.0, -1.0), (2.0, 0.5)), regular_polygon(64)])
def test_background_mesh_volume(domain):
    mesh = background_mesh(domain, 6)
    assert math.fsum(mesh.volumes) == pytest.approx(domain.volume, rel=1e-12)
    assert np.all(domain.contains(mesh.centroids))


def test_background_mesh_conforming_reproduces_affine():
    mesh = background_mesh(regular_polygon(8), 4)
    M = np.array([[1.0, 2.0], [-0.5, 3.0]])
    grads = mesh.gradient(mesh.points @ M.T + 1.0)
    assert np.allclose(grads, M, atol=1e-12)
    # every interior edge is shared by exactly two triangles
    edges = {}
    for tri in mesh.simplices.tolist():
        for a, b in ((0, 1), (1, 2), (0, 2)):
            e = tuple(sorted((tri[a], tri[b])))
            edges[e] = edges.get(e, 0) + 1
    assert max(edges.values()) == 2


def test_quadrature_integrates_linear_exactly():
    q = Quadrature.for_domain(Box.unit(2), 5)
    assert q.integrate(q.points[:, 0] + 2 * q.points[:, 1]) == pytest.approx(1.5, rel=1e-14)


def test_polygon_validation():
    with pytest.raises(ValueError):
        ConvexPolygon(((0.0, 0.0), (1.0, 1.0), (2.0, 2.0)))
